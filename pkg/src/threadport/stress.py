"""Seeded stress workloads shared by the test suite and the experiment scripts."""

from __future__ import annotations

import itertools
import random
import threading
from dataclasses import dataclass

from threadport.errors import AlreadyExists, Removed
from threadport.globalvars import GlobalLayout
from threadport.lifecycle import Role, State, ThreadRegistry, abort
from threadport.shm_sim import ShmRegistry
from threadport.sig_dispatch import SignalDispatcher, SignalKind


# -- shared memory -----------------------------------------------------------


def shm_sequence(reg: ShmRegistry, rng: random.Random, n_ops: int = 30, keys: int = 4) -> None:
    """Random get/attach/detach/remove churn, then remove and detach everything left."""
    live: dict[int, int] = {}
    atts = []
    for _ in range(n_ops):
        op = rng.randrange(4)
        if op == 0:
            key = rng.randrange(keys)
            try:
                live[key] = reg.get(key, rng.randrange(1, 64), create=True, exclusive=True)
            except AlreadyExists:
                pass
        elif op == 1 and live:
            try:
                atts.append(reg.attach(rng.choice(list(live.values()))))
            except Removed:
                pass
        elif op == 2 and atts:
            atts.pop(rng.randrange(len(atts))).detach()
        elif op == 3 and live:
            reg.remove(live.pop(rng.choice(list(live))))
    for seg in live.values():
        reg.remove(seg)
    rng.shuffle(atts)
    for att in atts:
        att.detach()


@dataclass
class ShmChurnReport:
    sequences: int
    leaks: int
    releases: int
    bad_releases: int

    @property
    def ok(self) -> bool:
        return self.leaks == 0 and self.bad_releases == 0


def shm_churn(sequences: int = 10_000, seed: int = 0) -> ShmChurnReport:
    leaks = releases = bad = 0
    for i in range(sequences):
        reg = ShmRegistry()
        shm_sequence(reg, random.Random(seed * 1_000_003 + i))
        leaks += reg.leaks
        releases += len(reg.releases)
        ids = [r.id for r in reg.releases]
        bad += sum(1 for r in reg.releases if not (r.removal_pending and r.attach_count == 0))
        bad += len(ids) - len(set(ids))
    return ShmChurnReport(sequences, leaks, releases, bad)


# -- signal routing ----------------------------------------------------------


@dataclass
class TruthTableReport:
    combinations: int
    deliveries: int
    mismatches: int

    @property
    def ok(self) -> bool:
        return self.mismatches == 0


def signal_truth_table(threads: int = 3, kinds=(SignalKind.HUP, SignalKind.TERM, SignalKind.USR1)) -> TruthTableReport:
    """Every (registered, flag) assignment per (thread, kind) cell, every cell delivered.

    A cell is unregistered, registered with flag off, or registered with flag on.
    """
    cells = list(itertools.product(range(threads), kinds))
    combos = deliveries = mismatches = 0
    for assignment in itertools.product((None, False, True), repeat=len(cells)):
        combos += 1
        d = SignalDispatcher()
        for k in kinds:
            d.install(k)
        ran = []
        for t in range(threads):
            d.register_thread(t)
        for (t, k), flag in zip(cells, assignment):
            if flag is not None:
                d.set_thread_handler(t, k, lambda kind, t=t: ran.append((t, kind)), flag, caller=t)
        for (t, k), flag in zip(cells, assignment):
            before = len(ran)
            rec = d.deliver(k, t)
            deliveries += 1
            expect = flag is True
            if rec.handled != expect or (ran[before:] == [(t, k)]) != expect:
                mismatches += 1
    return TruthTableReport(combos, deliveries, mismatches)


# -- per-thread globals ------------------------------------------------------


@dataclass
class IsolationReport:
    threads: int
    ops: int
    mismatched_threads: int
    cross_visibility: int

    @property
    def ok(self) -> bool:
        return self.mismatched_threads == 0 and self.cross_visibility == 0


def _isolation_layout(nslots: int) -> GlobalLayout:
    layout = GlobalLayout()
    for i in range(nslots):
        layout.define_static(f"mod{i % 3}.c", f"var{i}", 0)
    layout.seal()
    return layout


def _slot_program(rng: random.Random, ops: int, nslots: int, tag: int):
    # values carry the thread tag so a leak from another thread is recognizable
    return [
        (rng.randrange(nslots), None if rng.random() < 0.5 else tag * 1_000_000 + rng.randrange(1_000_000))
        for _ in range(ops)
    ]


def _run_program(layout: GlobalLayout, program) -> list:
    slots = layout.slots()
    history = []
    for idx, value in program:
        if value is None:
            history.append(layout.get(slots[idx]))
        else:
            layout.set(slots[idx], value)
    return history


def globals_isolation(threads: int = 8, ops: int = 10_000, seed: int = 0, nslots: int = 16) -> IsolationReport:
    """Run random get/set programs concurrently, then replay each alone and compare."""
    layout = _isolation_layout(nslots)
    programs = [_slot_program(random.Random(seed * 7919 + t), ops, nslots, t + 1) for t in range(threads)]
    histories: list = [None] * threads
    barrier = threading.Barrier(threads)

    def body(t):
        layout.attach()
        barrier.wait()
        try:
            histories[t] = _run_program(layout, programs[t])
        finally:
            layout.detach()

    workers = [threading.Thread(target=body, args=(t,)) for t in range(threads)]
    for w in workers:
        w.start()
    for w in workers:
        w.join()

    mismatched = cross = 0
    for t in range(threads):
        solo = _isolation_layout(nslots)
        solo.attach()
        try:
            expected = _run_program(solo, programs[t])
        finally:
            solo.detach()
        if histories[t] != expected:
            mismatched += 1
        cross += sum(1 for v in histories[t] if v and v // 1_000_000 != t + 1)
    return IsolationReport(threads, ops, mismatched, cross)


# -- reclaim -----------------------------------------------------------------


@dataclass
class ReclaimReport:
    workers: int
    abnormal: int
    allocations: int
    freed_by_sweep: int
    reclaim_left: int
    live_before: int
    live_after: int

    @property
    def ok(self) -> bool:
        return (
            self.abnormal == self.workers
            and self.reclaim_left == 0
            and self.live_after == self.live_before
            and self.freed_by_sweep == self.allocations
        )


def reclaim_stress(workers: int = 100, seed: int = 0, max_allocs: int = 10) -> ReclaimReport:
    """Workers register 1..max_allocs allocations each and die abnormally; main sweeps."""
    registry = ThreadRegistry(capacity=workers + 1)
    rng = random.Random(seed)
    counts = [rng.randint(1, max_allocs) for _ in range(workers)]
    baseline = registry.allocator.live

    sizes = [[rng.randrange(16, 256) for _ in range(n)] for n in counts]

    def worker(sizes, how):
        for size in sizes:
            registry.allocator.alloc(size)
        if how == 0:
            raise RuntimeError("simulated crash")
        if how == 1:
            raise MemoryError("simulated out of memory")
        abort()

    hows = [rng.randrange(3) for _ in range(workers)]
    slots = [registry.spawn(worker, Role.WORKER, sz, how) for sz, how in zip(sizes, hows)]
    for s in slots:
        registry.join(s)
    abnormal = sum(1 for s in slots if registry.state(s) is State.ABNORMAL or registry.entry(s).status == 134)
    freed = sum(registry.reclaim_sweep(s) for s in slots)
    return ReclaimReport(workers, abnormal, sum(counts), freed, len(registry.reclaim), baseline, registry.allocator.live)
