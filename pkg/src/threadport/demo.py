"""Mini postmaster: the daemon's process topology rebuilt from threads.

A postmaster thread creates one shared segment and one semaphore set, runs
a bootstrap startup thread, then spawns workers.  Each worker bumps a
counter in the segment ``increments`` times, admitted by the semaphore and
guarded by a short lock.  A bootstrap shutdown thread then reads the
counter and removes the IPC objects.  The main thread joins everything and
sweeps the reclaim list.

``schedule="real"`` lets the OS interleave the workers.  ``"random"`` and
``"adversarial"`` put every lock step under a turn harness driven by a
seeded chooser, so the whole run is reproducible.  The adversarial run
first replays the legacy-lock witness found by the explorer, then keeps
picking steps that never enqueue.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field

from threadport import explorer
from threadport.errors import ConfigError, Timeout
from threadport.globalvars import GlobalLayout
from threadport.lifecycle import Role, State, ThreadRegistry, exit_current, sleep_current
from threadport.sem_sim import SemCmd, SemRegistry
from threadport.shm_sim import ShmRegistry
from threadport.shortlock import LockMode, ShortLock
from threadport.sig_dispatch import SignalDispatcher, SignalKind
from threadport.turns import TurnHarness, adversarial, drive, follow, seeded_random, wind_down

SHM_KEY = 5432001
SEM_KEY = 5432002
STARVED_STATUS = 3
SCHEDULES = ("real", "random", "adversarial")


@dataclass
class ScenarioConfig:
    workers: int = 4
    increments: int = 1000
    lock_mode: LockMode = LockMode.FIXED
    seed: int = 0
    schedule: str = "real"
    sem_initial: int | None = None
    step_budget: int | None = None
    # FIXED self-wake alarm: seconds on real threads, steps under the harness
    self_wake_timeout: float | None = None
    # how long a real-thread waiter stays queued before it reports starvation
    starvation_timeout: float = 5.0

    def validate(self) -> None:
        if self.workers < 1:
            raise ConfigError("need at least one worker")
        if self.increments < 0:
            raise ConfigError("increments must be non-negative")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule must be one of {SCHEDULES}")
        if self.sem_initial is not None and self.sem_initial < 1:
            raise ConfigError("semaphore must admit at least one worker")
        if self.virtual and self.sem_initial is not None and self.sem_initial < self.workers:
            raise ConfigError("under the harness the semaphore must admit every worker at once")

    @property
    def virtual(self) -> bool:
        return self.schedule != "real"


@dataclass
class DemoResult:
    counter: int
    expected: int
    starved: list[int]
    statuses: dict[int, int | None]
    registry_dump: str
    lock_events: list
    steps: int = 0
    schedule: list[int] = field(default_factory=list)
    reclaim_left: int = 0
    live_allocations: int = 0
    swept: int = 0

    @property
    def ok(self) -> bool:
        return self.counter == self.expected and not self.starved


def witness_prefix(workers: int) -> list[int]:
    model = explorer.LockModel(LockMode.LEGACY, nthreads=min(workers, 3), rounds=1)
    found = explorer.explore(model, 12, explorer.LOCK_PROPERTIES)
    return [] if found.ok else list(found.schedule)


def run_demo(cfg: ScenarioConfig) -> DemoResult:
    cfg.validate()
    registry = ThreadRegistry()
    layout = GlobalLayout()
    done_slot = layout.define_static("worker.c", "increments_done", 0)
    layout.seal()
    registry.bind_globals(layout)
    shm = ShmRegistry()
    sems = SemRegistry()
    signals = SignalDispatcher(synchronous=False)
    signals.install_all()

    harness = TurnHarness() if cfg.virtual else None
    timeout = cfg.self_wake_timeout
    if cfg.lock_mode is LockMode.FIXED and timeout is None:
        timeout = 8 if cfg.virtual else 0.01
    lock = ShortLock(
        cfg.lock_mode,
        timeout if cfg.lock_mode is LockMode.FIXED else None,
        virtual_clock=cfg.virtual,
        step_gate=harness.gate if harness else None,
    )
    sem_initial = cfg.sem_initial or (cfg.workers if cfg.virtual else min(2, cfg.workers))
    shared = {"starved": [], "drive": None, "counter": None}

    def worker(idx: int, seg_id: int, set_id: int) -> int:
        stop = []
        signals.register_thread()
        signals.set_thread_handler(threading.get_ident(), SignalKind.TERM, lambda kind: stop.append(kind), True)
        att = shm.attach(seg_id)
        sem = sems.lookup(set_id)
        rng = random.Random(cfg.seed * 1009 + idx)
        scratch = registry.allocator.alloc(64)
        try:
            for _ in range(cfg.increments):
                signals.poll()
                if stop:
                    break
                sem.p(0)
                try:
                    lock.acquire(idx, wait_timeout=None if cfg.virtual else cfg.starvation_timeout)
                except Timeout:
                    sem.v(0)
                    shared["starved"].append(idx)
                    exit_current(STARVED_STATUS)
                att.write_int(att.read_int(0) + 1, 0)
                layout.set(done_slot, layout.get(done_slot) + 1)
                lock.release(idx)
                sem.v(0)
                if not cfg.virtual and rng.random() < 0.01:
                    sleep_current(0.0001)
        finally:
            att.detach()
            if harness:
                harness.finish(idx)
        registry.allocator.free(scratch)
        return 0 if layout.get(done_slot) == cfg.increments else 1

    def startup(seg_id: int) -> int:
        with shm.attach(seg_id) as att:
            att.write_int(0, 0)
        return 0

    def shutdown(seg_id: int, set_id: int) -> int:
        with shm.attach(seg_id) as att:
            shared["counter"] = att.read_int(0)
        shm.remove(seg_id)
        sems.control(set_id, 0, SemCmd.REMOVE)
        return 0

    def postmaster() -> int:
        seg_id = shm.get(SHM_KEY, 4096, create=True, exclusive=True)
        set_id = sems.get(SEM_KEY, 1, create=True, exclusive=True)
        sems.lookup(set_id).set_val(0, sem_initial)
        registry.join(registry.spawn(startup, Role.BOOTSTRAP, seg_id, name="startup"))
        slots = [
            registry.spawn(worker, Role.WORKER, idx, seg_id, set_id, name=f"worker-{idx}")
            for idx in range(cfg.workers)
        ]
        if harness:
            if cfg.schedule == "adversarial":
                choose = follow(witness_prefix(cfg.workers), adversarial(cfg.seed))
            else:
                choose = seeded_random(cfg.seed)
            budget = cfg.step_budget or (cfg.workers * cfg.increments * 4 + 64)
            result = drive(lock, harness, range(cfg.workers), choose, budget)
            shared["drive"] = result
            shared["starved"].extend(result.starved)
            wind_down(lock, harness, [registry.entry(s).thread for s in slots])
        for s in slots:
            registry.join(s)
        registry.join(registry.spawn(shutdown, Role.BOOTSTRAP, seg_id, set_id, name="shutdown"))
        return 0

    pm = registry.spawn(postmaster, Role.POSTMASTER, name="postmaster")
    registry.join(pm)
    if registry.state(pm) is not State.EXITED:
        raise RuntimeError(f"postmaster failed: {registry.entry(pm).error!r}")
    swept = sum(registry.reclaim_sweep(e.slot) for e in registry.entries())
    drive_result = shared["drive"]
    return DemoResult(
        counter=shared["counter"],
        expected=cfg.workers * cfg.increments,
        starved=sorted(set(shared["starved"])),
        statuses={e.slot: e.status for e in registry.entries()},
        registry_dump=registry.dump(),
        lock_events=lock.events,
        steps=drive_result.steps if drive_result else 0,
        schedule=drive_result.schedule if drive_result else [],
        reclaim_left=len(registry.reclaim),
        live_allocations=registry.allocator.live,
        swept=swept,
    )
