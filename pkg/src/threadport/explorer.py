"""Exhaustive interleaving exploration over the lock and semaphore cores.

A model is a handful of thread programs plus a state; ``step(state, t)``
runs one atomic action of thread ``t`` and returns a new state.  Threads
parked in a wait queue are not schedulable.  ``explore`` walks every
schedule up to a step bound depth-first, pruning states already reached
with at least as many steps to spare, and returns the first violation
found as a :class:`Witness`.

Bounds are deliberately small: at most 4 threads and 16 steps.
"""

from __future__ import annotations

import hashlib
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

from threadport.errors import BoundExceeded, InvalidSchedule
from threadport.sem_sim import OpStatus, P, SemCore, SemOpRequest, V
from threadport.shortlock import EventKind, LockCore, LockMode, format_events

MAX_THREADS = 4
MAX_STEPS = 16
CLOCK = -1  # pseudo-thread that lets virtual time pass when every thread sleeps


def state_hash(key) -> str:
    return hashlib.blake2b(repr(key).encode(), digest_size=6).hexdigest()


@dataclass(frozen=True)
class Property:
    """``check(model, state, quiescent)`` returns a message on violation, else None."""

    name: str
    check: Callable


@dataclass
class Pass:
    states: int
    transitions: int
    ok: bool = True


@dataclass
class TraceStep:
    step: int
    thread: int
    op: str
    state_hash: str
    summary: str

    def line(self) -> str:
        who = "clock" if self.thread == CLOCK else self.thread
        return f"step {self.step} thread {who} op {self.op} -> {self.state_hash}"


@dataclass
class Trace:
    steps: list[TraceStep]
    final_state: object
    events: list[str]
    # events with protocol state attached, for display
    details: list[str] = field(default_factory=list)

    def protocol(self) -> str:
        return "\n".join(s.line() for s in self.steps)


@dataclass
class Witness:
    schedule: list[int]
    final_state: object
    property: str
    message: str
    trace: Trace
    states: int = 0
    ok: bool = False

    def event_log(self) -> str:
        return "\n".join(self.trace.events)

    def render(self) -> str:
        lines = [f"violation {self.property}: {self.message}", f"schedule {' '.join(map(str, self.schedule))}"]
        lines += [f"{s.line()}  [{s.summary}]" for s in self.trace.steps]
        lines.append("events:")
        lines += self.trace.details or self.trace.events
        return "\n".join(lines)


class Model:
    """Base class: subclasses define programs, stepping and hashing."""

    nthreads: int

    def initial(self):
        raise NotImplementedError

    def runnable(self, state) -> list[int]:
        raise NotImplementedError

    def step(self, state, thread: int):
        raise NotImplementedError

    def key(self, state):
        raise NotImplementedError

    def all_done(self, state) -> bool:
        raise NotImplementedError

    def op_name(self, state, thread: int) -> str:
        raise NotImplementedError

    def event_details(self, state) -> list[str]:
        return []

    def event_lines(self, state) -> list[str]:
        return []

    def summary(self, state) -> str:
        return ""


def _check_bounds(model: Model, max_steps: int) -> None:
    if model.nthreads > MAX_THREADS or model.nthreads < 1:
        raise BoundExceeded(f"{model.nthreads} threads outside 1..{MAX_THREADS}")
    if max_steps > MAX_STEPS or max_steps < 0:
        raise BoundExceeded(f"{max_steps} steps outside 0..{MAX_STEPS}")


def _violation(model, state, properties, quiescent):
    for prop in properties:
        msg = prop.check(model, state, quiescent)
        if msg:
            return prop.name, msg
    if quiescent and not model.all_done(state):
        return "deadlock", "no thread can run but some have not finished"
    return None


def explore(model: Model, max_steps: int, properties: Sequence[Property] = ()) -> Pass | Witness:
    _check_bounds(model, max_steps)
    seen: dict = {}
    stats = {"transitions": 0}

    def dfs(state, schedule):
        runnable = model.runnable(state)
        found = _violation(model, state, properties, quiescent=not runnable)
        if found:
            return schedule, state, found
        if len(schedule) == max_steps:
            return None
        spare = max_steps - len(schedule) - 1
        for t in runnable:
            child = model.step(state, t)
            stats["transitions"] += 1
            k = model.key(child)
            if seen.get(k, -1) >= spare:
                continue
            seen[k] = spare
            hit = dfs(child, schedule + [t])
            if hit:
                return hit
        return None

    root = model.initial()
    seen[model.key(root)] = max_steps
    hit = dfs(root, [])
    if hit is None:
        return Pass(states=len(seen), transitions=stats["transitions"])
    schedule, state, (name, msg) = hit
    return Witness(schedule, state, name, msg, replay(model, schedule), states=len(seen))


def replay(model: Model, schedule: Sequence[int]) -> Trace:
    state = model.initial()
    steps = []
    for n, t in enumerate(schedule, start=1):
        if t not in model.runnable(state):
            raise InvalidSchedule(f"thread {t} is not runnable at step {n}")
        op = model.op_name(state, t)
        state = model.step(state, t)
        steps.append(TraceStep(n, t, op, state_hash(model.key(state)), model.summary(state)))
    return Trace(steps, state, model.event_lines(state), model.event_details(state))


def count_states(model: Model, max_steps: int) -> int:
    """Distinct states reachable within ``max_steps``."""
    _check_bounds(model, max_steps)
    root = model.initial()
    seen = {model.key(root)}
    frontier = [root]
    for _ in range(max_steps):
        nxt = []
        for state in frontier:
            for t in model.runnable(state):
                child = model.step(state, t)
                k = model.key(child)
                if k not in seen:
                    seen.add(k)
                    nxt.append(child)
        frontier = nxt
    return len(seen)


def count_schedules(model: Model, max_steps: int) -> int:
    """Maximal schedules without any pruning: runs that end quiescent or at the bound."""
    _check_bounds(model, max_steps)

    def walk(state, depth):
        runnable = model.runnable(state)
        if not runnable or depth == max_steps:
            return 1
        return sum(walk(model.step(state, t), depth + 1) for t in runnable)

    return walk(model.initial(), 0)


def multinomial(lengths: Sequence[int]) -> int:
    total = math.factorial(sum(lengths))
    for n in lengths:
        total //= math.factorial(n)
    return total


# --------------------------------------------------------------------------
# short-lock model


@dataclass
class LockState:
    core: LockCore
    pcs: tuple[int, ...]


class LockModel(Model):
    """``nthreads`` threads, each running ``rounds`` x (acquire; release)."""

    def __init__(self, mode: LockMode, nthreads: int = 3, rounds: int = 1, self_wake_timeout: int = 4):
        self.mode = mode
        self.nthreads = nthreads
        self.rounds = rounds
        self.timeout = self_wake_timeout if mode is LockMode.FIXED else None
        self.program = ["acquire", "release"] * rounds

    def initial(self) -> LockState:
        return LockState(LockCore(self.mode, self.timeout), (0,) * self.nthreads)

    def runnable(self, state: LockState) -> list[int]:
        core = state.core
        ready = [
            t for t, pc in enumerate(state.pcs) if pc < len(self.program) and t not in core.queue
        ]
        if not ready and core.alarms:
            return [CLOCK]
        return ready

    def step(self, state: LockState, thread: int) -> LockState:
        core = state.core.clone()
        pcs = list(state.pcs)
        if thread == CLOCK:
            core.advance_to_next_alarm()
            return LockState(core, tuple(pcs))
        op = self.program[pcs[thread]]
        if op == "acquire":
            if core.try_acquire(thread):
                pcs[thread] += 1
        else:
            core.release(thread)
            pcs[thread] += 1
        core.tick(core.step)
        return LockState(core, tuple(pcs))

    def key(self, state: LockState):
        return (state.core.key(), state.pcs)

    def all_done(self, state: LockState) -> bool:
        return all(pc == len(self.program) for pc in state.pcs)

    def op_name(self, state: LockState, thread: int) -> str:
        if thread == CLOCK:
            return "tick"
        return self.program[state.pcs[thread]]

    def in_critical_section(self, state: LockState) -> list[int]:
        return [t for t, pc in enumerate(state.pcs) if pc % 2 == 1]

    def event_lines(self, state: LockState) -> list[str]:
        return format_events(state.core.events).splitlines()

    def event_details(self, state: LockState) -> list[str]:
        if self.mode is not LockMode.LEGACY:
            return []
        return [f"{e.line()}  wake_flag={int(e.wake_flag)}" for e in state.core.events]

    def summary(self, state: LockState) -> str:
        c = state.core
        holder = "-" if c.holder is None else c.holder
        queue = ",".join(map(str, c.queue))
        return f"held={int(c.held)} holder={holder} queue=[{queue}] wake_flag={int(c.wake_flag)}"


def _lock_mutex(model: LockModel, state: LockState, quiescent: bool):
    inside = model.in_critical_section(state)
    if len(inside) > 1:
        return f"threads {inside} are inside the critical section together"
    if inside and state.core.holder != inside[0]:
        return f"thread {inside[0]} is inside but holder is {state.core.holder}"
    return None


def _lock_starvation(model: LockModel, state: LockState, quiescent: bool):
    if quiescent and state.core.starved():
        return f"lock is free but threads {state.core.queue} are still queued"
    return None


def flag_discipline_errors(events) -> list[str]:
    """Check the legacy wake-flag rules against an event log.

    The flag may only become true on an Enqueue and only become false on a
    Wake issued by a release.
    """
    errors = []
    flag = False
    for e in events:
        if e.wake_flag != flag:
            if e.wake_flag and e.kind is not EventKind.ENQUEUE:
                errors.append(f"step {e.step}: flag set by {e.kind.value}")
            if not e.wake_flag and e.kind is not EventKind.WAKE:
                errors.append(f"step {e.step}: flag cleared by {e.kind.value}")
        if e.kind is EventKind.ENQUEUE and not e.wake_flag:
            errors.append(f"step {e.step}: enqueue left the flag false")
        if e.kind is EventKind.WAKE and e.wake_flag:
            errors.append(f"step {e.step}: wake left the flag true")
        flag = e.wake_flag
    return errors


def _lock_flag_discipline(model: LockModel, state: LockState, quiescent: bool):
    if model.mode is not LockMode.LEGACY:
        return None
    errors = flag_discipline_errors(state.core.events)
    return "; ".join(errors) or None


LOCK_MUTEX = Property("mutual_exclusion", _lock_mutex)
LOCK_STARVATION = Property("starvation", _lock_starvation)
LOCK_FLAG_DISCIPLINE = Property("wake_flag_discipline", _lock_flag_discipline)
LOCK_PROPERTIES = (LOCK_MUTEX, LOCK_FLAG_DISCIPLINE, LOCK_STARVATION)


# --------------------------------------------------------------------------
# semaphore model


@dataclass
class SemState:
    core: SemCore
    pcs: tuple[int, ...]
    committed: tuple[tuple[int, ...], ...]  # per thread: net delta per semaphore
    last_change: tuple[int, ...] = ()
    last_ops: tuple[SemOpRequest, ...] = ()


class SemModel(Model):
    """Threads running fixed lists of atomic ``semop`` calls on one set."""

    def __init__(self, initial: Sequence[int], programs: Sequence[Sequence[Sequence[SemOpRequest]]], name: str = "sem"):
        self.initial_values = tuple(initial)
        self.programs = [[tuple(ops) for ops in prog] for prog in programs]
        self.nthreads = len(self.programs)
        self.name = name

    def initial(self) -> SemState:
        n = len(self.initial_values)
        return SemState(SemCore.fresh(n, self.initial_values), (0,) * self.nthreads, ((0,) * n,) * self.nthreads)

    def runnable(self, state: SemState) -> list[int]:
        return [
            t
            for t, pc in enumerate(state.pcs)
            if pc < len(self.programs[t]) and not state.core.is_waiting(t)
        ]

    def step(self, state: SemState, thread: int) -> SemState:
        core = state.core.clone()
        ops = self.programs[thread][state.pcs[thread]]
        before = tuple(core.values)
        status, _woken = core.try_op(thread, ops)
        pcs = list(state.pcs)
        committed = list(state.committed)
        if status is OpStatus.COMMITTED:
            pcs[thread] += 1
            mine = list(committed[thread])
            for op in ops:
                mine[op.sem_num] += op.delta
            committed[thread] = tuple(mine)
        change = tuple(a - b for a, b in zip(core.values, before))
        return SemState(core, tuple(pcs), tuple(committed), change, ops)

    def key(self, state: SemState):
        return (state.core.key(), state.pcs)

    def all_done(self, state: SemState) -> bool:
        return all(pc == len(p) for pc, p in zip(state.pcs, self.programs))

    def op_name(self, state: SemState, thread: int) -> str:
        ops = self.programs[thread][state.pcs[thread]]
        return "semop(" + ",".join(f"{o.sem_num}:{o.delta:+d}" for o in ops) + ")"

    def summary(self, state: SemState) -> str:
        waiting = ",".join(str(len(w)) for w in state.core.waiters)
        return f"values={list(state.core.values)} waiters={waiting}"


def _sem_nonneg(model: SemModel, state: SemState, quiescent: bool):
    bad = [i for i, v in enumerate(state.core.values) if v < 0]
    return f"semaphores {bad} went negative: {state.core.values}" if bad else None


def _sem_conservation(model: SemModel, state: SemState, quiescent: bool):
    for i, init in enumerate(model.initial_values):
        total = sum(c[i] for c in state.committed)
        if state.core.values[i] != init + total:
            return f"semaphore {i}: value {state.core.values[i]} != {init} + committed {total}"
    return None


def _sem_atomicity(model: SemModel, state: SemState, quiescent: bool):
    if not state.last_ops:
        return None
    full = [0] * len(model.initial_values)
    for op in state.last_ops:
        full[op.sem_num] += op.delta
    if any(state.last_change) and list(state.last_change) != full:
        return f"partial commit: change {state.last_change} for request deltas {full}"
    return None


def _sem_lost_wakeup(model: SemModel, state: SemState, quiescent: bool):
    if not quiescent:
        return None
    for who in state.core.blocked_on:
        ops = model.programs[who][state.pcs[who]]
        if state.core.satisfiable(ops):
            return f"thread {who} is parked although its request could commit"
    return None


SEM_NONNEG = Property("non_negative", _sem_nonneg)
SEM_CONSERVATION = Property("conservation", _sem_conservation)
SEM_ATOMICITY = Property("atomic_commit", _sem_atomicity)
SEM_LOST_WAKEUP = Property("no_lost_wakeup", _sem_lost_wakeup)
SEM_PROPERTIES = (SEM_NONNEG, SEM_CONSERVATION, SEM_ATOMICITY, SEM_LOST_WAKEUP)


def critical_section_property(model: SemModel, sem_num: int, capacity: int) -> Property:
    """Units held by threads on ``sem_num`` never exceed ``capacity``."""

    def check(m, state, quiescent):
        held = sum(max(0, -c[sem_num]) for c in state.committed)
        if held > capacity:
            return f"{held} units of semaphore {sem_num} held, capacity {capacity}"
        return None

    return Property(f"capacity[{sem_num}]", check)


# --------------------------------------------------------------------------
# standard semaphore workloads (up to 3 threads x 3 ops)


def _sem_programs(kind: str):
    if kind == "binary":
        prog = [[P()], [V()], [P(), V()]]
        return [1], [prog, prog, prog]
    if kind == "counting":
        return [3], [
            [[P(0, 2)], [V(0, 1)], [V(0, 1)]],
            [[P(0, 1)], [P(0, 1)], [V(0, 2)]],
            [[P(0, 3)], [V(0, 3)], [P(0), V(0)]],
        ]
    if kind == "mixed":
        # sem 0 binary, sem 1 counting; multi-op lists span both
        return [1, 3], [
            [[P(0), P(1)], [V(1)], [V(0)]],
            [[P(1, 2)], [P(0), V(1, 2)], [V(0)]],
            [[P(1), P(1)], [V(1, 2)], [P(0), V(0)]],
        ]
    raise KeyError(kind)


SEM_WORKLOADS = ("binary", "counting", "mixed")


def sem_workload(kind: str, nthreads: int = 3) -> SemModel:
    values, programs = _sem_programs(kind)
    if not 1 <= nthreads <= len(programs):
        raise BoundExceeded(f"{kind} workload has at most {len(programs)} threads")
    return SemModel(values, programs[:nthreads], name=kind)


def sem_properties(model: SemModel) -> tuple[Property, ...]:
    caps = tuple(critical_section_property(model, i, v) for i, v in enumerate(model.initial_values))
    return SEM_PROPERTIES + caps
