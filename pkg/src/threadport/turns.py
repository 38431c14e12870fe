"""Run real threads through a :class:`ShortLock` in a chosen order.

Each thread parks at the lock's step gate before every atomic action and
proceeds only when the controller hands it the turn.  The controller waits
until every thread is settled before it picks the next step.  A thread is
settled when it is parked at the gate, sits in the lock's wait queue, or
has finished.  This makes the order of lock actions (and so the event log)
a pure function of the schedule.
"""

from __future__ import annotations

import contextlib
import random
import threading
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

from threadport.errors import InvalidSchedule, Timeout
from threadport.explorer import CLOCK
from threadport.shortlock import LockMode, ShortLock

SETTLE_TIMEOUT = 10.0


class TurnHarness:
    def __init__(self, settle_timeout: float = SETTLE_TIMEOUT):
        self._cond = threading.Condition()
        self._turn = None
        self._open = False
        self.parked: dict[int, str] = {}
        self.finished: set[int] = set()
        self.settle_timeout = settle_timeout

    @contextlib.contextmanager
    def gate(self, thread: int, op: str):
        with self._cond:
            if self._open:
                gated = False
            else:
                gated = True
                self.parked[thread] = op
                self._cond.notify_all()
                while self._turn != thread and not self._open:
                    self._cond.wait()
                del self.parked[thread]
        if not gated or self._turn != thread:
            yield
            return
        try:
            yield
        finally:
            with self._cond:
                self._turn = None
                self._cond.notify_all()

    def open(self) -> None:
        """Stop enforcing turns; parked threads run freely from here on."""
        with self._cond:
            self._open = True
            self._cond.notify_all()

    def finish(self, thread: int) -> None:
        with self._cond:
            self.finished.add(thread)
            self._cond.notify_all()

    def settle(self, threads: Sequence[int], queued: Callable[[], list]) -> dict[int, str]:
        """Block until every thread is parked, queued or finished; returns the parked ops."""

        def settled():
            q = set(queued())
            return all(t in self.parked or t in self.finished or t in q for t in threads)

        with self._cond:
            if not self._cond.wait_for(settled, self.settle_timeout):
                raise InvalidSchedule("threads did not settle; a thread is blocked outside the harness")
            return dict(self.parked)

    def grant(self, thread: int) -> None:
        with self._cond:
            if thread not in self.parked:
                raise InvalidSchedule(f"thread {thread} is not waiting for a turn")
            self._turn = thread
            self._cond.notify_all()
            if not self._cond.wait_for(lambda: self._turn is None, self.settle_timeout):
                raise InvalidSchedule(f"thread {thread} did not finish its step")


Chooser = Callable[[int, dict[int, str], ShortLock], "int | None"]


def follow(schedule: Sequence[int], then: Chooser | None = None) -> Chooser:
    """Take steps from ``schedule`` while they are valid, then defer to ``then``."""
    pending = list(schedule)

    def choose(step, parked, lock):
        while pending:
            t = pending.pop(0)
            if t in parked or (t == CLOCK and lock.core.alarms and not parked):
                return t
            pending.clear()  # diverged from the recorded schedule
        return then(step, parked, lock) if then else None

    return choose


def seeded_random(seed: int) -> Chooser:
    rng = random.Random(seed)

    def choose(step, parked, lock):
        return rng.choice(sorted(parked)) if parked else None

    return choose


def adversarial(seed: int) -> Chooser:
    """Prefer steps that do not enqueue: acquire a free lock, or release.

    This keeps newcomers off the wait queue, so under the legacy protocol
    the wake flag is never raised again.
    """
    rng = random.Random(seed)

    def choose(step, parked, lock):
        if not parked:
            return None
        held = lock.is_held()
        calm = sorted(t for t, op in parked.items() if op == "release" or not held)
        # finish one holder before letting anyone else in
        holder = lock.core.holder
        if holder in calm:
            return holder
        return rng.choice(calm or sorted(parked))

    return choose


@dataclass
class DriveResult:
    steps: int
    schedule: list[int]
    starved: list[int]
    finished: set[int]
    events: list = field(default_factory=list)


def drive(
    lock: ShortLock,
    harness: TurnHarness,
    threads: Sequence[int],
    choose: Chooser,
    max_steps: int,
) -> DriveResult:
    """Hand out turns until every thread finishes, nobody can move, or the budget runs out."""
    taken = []
    for step in range(1, max_steps + 1):
        parked = harness.settle(threads, lock.queued)
        if not parked and lock.core.alarms:
            t = choose(step, parked, lock)
            if t != CLOCK:
                break
            lock.advance_clock()
            taken.append(CLOCK)
            continue
        t = choose(step, parked, lock)
        if t is None:
            break
        if t == CLOCK:
            lock.advance_clock()
        else:
            harness.grant(t)
        taken.append(t)
    harness.settle(threads, lock.queued)
    return DriveResult(len(taken), taken, lock.starved(), set(harness.finished), lock.events)


def wind_down(lock: ShortLock, harness: TurnHarness, workers: Sequence[threading.Thread]) -> None:
    """Release every thread still under the harness and wait for all of them."""
    harness.open()
    deadline = SETTLE_TIMEOUT * 10
    waited = 0.0
    while any(w.is_alive() for w in workers):
        for t in lock.starved():
            lock.cancel_waiter(t)
        for w in workers:
            w.join(0.01)
        waited += 0.01 * len(workers)
        if waited > deadline:
            raise RuntimeError("threads did not wind down")


def run_lock_schedule(
    mode: LockMode,
    nthreads: int,
    rounds: int,
    schedule: Sequence[int],
    self_wake_timeout: int = 4,
) -> DriveResult:
    """Replay ``schedule`` on real threads doing ``rounds`` x (acquire; release).

    Threads left in the queue at the end are pulled out so they can exit.
    """
    harness = TurnHarness()
    lock = ShortLock(mode, self_wake_timeout if mode is LockMode.FIXED else None, virtual_clock=True, step_gate=harness.gate)
    errors = []

    def body(t):
        try:
            for _ in range(rounds):
                lock.acquire(t)
                lock.release(t)
        except Timeout:
            pass
        except Exception as e:  # surfaced to the caller below
            errors.append(e)
        finally:
            harness.finish(t)

    workers = [threading.Thread(target=body, args=(t,), daemon=True) for t in range(nthreads)]
    for w in workers:
        w.start()
    exact = list(schedule)

    def strict(step, parked, lock_):
        if not exact:
            return None
        t = exact.pop(0)
        if t != CLOCK and t not in parked:
            raise InvalidSchedule(f"thread {t} is not runnable at step {step}")
        return t

    result = drive(lock, harness, range(nthreads), strict, len(schedule))
    events = lock.events
    wind_down(lock, harness, workers)
    if errors:
        raise errors[0]
    result.events = events
    return result
