"""Short lock with a FIFO wait queue and a selectable release protocol.

``LEGACY``
    A boolean wake flag gates the release path.  Enqueueing sets the flag;
    a release wakes the head waiter only while the flag is set, and clears
    it after waking.  A waiter can be stranded: once the flag is false,
    threads that take the lock without queueing never set it again.

``FIXED``
    The flag is gone (every release wakes the head waiter when the queue
    is non-empty), and each queued thread arms an alarm.  When the alarm
    expires and the lock is free, the waiter wakes itself.

``FLAGLESS``
    Only the first half of ``FIXED``, kept to show it suffices on its own
    in bounded exploration.

:class:`LockCore` holds the state and transition rules.  :class:`ShortLock`
runs it on real threads; the explorer steps it directly.  Both produce the
same :class:`LockEvent` log for the same schedule.
"""

from __future__ import annotations

import contextlib
import math
import threading
import time
from collections.abc import Callable, Hashable
from dataclasses import dataclass, field
from enum import Enum

from threadport.errors import InvalidTimeout, NotHolder, Reentrancy, Timeout


class LockMode(Enum):
    LEGACY = "legacy"
    FIXED = "fixed"
    FLAGLESS = "flagless"


class EventKind(Enum):
    ACQUIRE = "Acquire"
    ENQUEUE = "Enqueue"
    RELEASE = "Release"
    WAKE = "Wake"
    SELF_WAKE = "SelfWake"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class LockEvent:
    step: int
    kind: EventKind
    thread: Hashable
    wake_flag: bool

    def line(self) -> str:
        return f"{self.step} {self.kind.value} {self.thread}"


def format_events(events) -> str:
    return "\n".join(e.line() for e in events)


@dataclass
class LockCore:
    mode: LockMode
    self_wake_timeout: float | None = None
    held: bool = False
    holder: Hashable | None = None
    queue: list = field(default_factory=list)
    wake_flag: bool = False
    alarms: dict = field(default_factory=dict)
    step: int = 0
    now: float = 0
    events: list[LockEvent] = field(default_factory=list)
    clock: Callable[[], float] | None = None

    def __post_init__(self) -> None:
        if self.mode is LockMode.FIXED:
            if self.self_wake_timeout is None or self.self_wake_timeout <= 0:
                raise InvalidTimeout(f"FIXED mode needs a positive self-wake timeout, got {self.self_wake_timeout}")

    def clone(self) -> LockCore:
        return LockCore(
            self.mode,
            self.self_wake_timeout,
            self.held,
            self.holder,
            list(self.queue),
            self.wake_flag,
            dict(self.alarms),
            self.step,
            self.now,
            list(self.events),
            self.clock,
        )

    def key(self) -> tuple:
        alarms = tuple(sorted((t, max(0, d - self.now)) for t, d in self.alarms.items()))
        return (self.held, self.holder, tuple(self.queue), self.wake_flag, alarms)

    def _begin(self) -> None:
        self.step += 1
        self.now = self.step if self.clock is None else self.clock()

    def _log(self, kind: EventKind, thread: Hashable) -> None:
        self.events.append(LockEvent(self.step, kind, thread, self.wake_flag))

    def try_acquire(self, thread: Hashable) -> bool:
        """One acquisition attempt: take a free lock, or join the wait queue."""
        if self.holder == thread and self.held:
            raise Reentrancy(f"thread {thread} already holds the lock")
        if thread in self.queue:
            raise RuntimeError(f"thread {thread} is queued and has not been woken")
        self._begin()
        if not self.held:
            self.held = True
            self.holder = thread
            self._log(EventKind.ACQUIRE, thread)
            return True
        self.queue.append(thread)
        if self.mode is LockMode.LEGACY:
            self.wake_flag = True
        if self.mode is LockMode.FIXED:
            self.alarms[thread] = self.now + self.self_wake_timeout
        self._log(EventKind.ENQUEUE, thread)
        return False

    def release(self, thread: Hashable) -> list:
        if not self.held or self.holder != thread:
            raise NotHolder(f"thread {thread} does not hold the lock")
        self._begin()
        self.held = False
        self.holder = None
        self._log(EventKind.RELEASE, thread)
        woken = []
        if self.queue and (self.mode is not LockMode.LEGACY or self.wake_flag):
            # one waiter per release
            head = self.queue.pop(0)
            self.alarms.pop(head, None)
            if self.mode is LockMode.LEGACY:
                self.wake_flag = False
            self._log(EventKind.WAKE, head)
            woken.append(head)
        return woken

    def tick(self, now: float | None = None) -> list:
        """Fire expired self-wake alarms; returns the threads that woke themselves."""
        if self.mode is not LockMode.FIXED or not self.alarms:
            return []
        if now is not None:
            self.now = now
        woken = []
        for thread in list(self.queue):
            deadline = self.alarms[thread]
            if deadline > self.now:
                continue
            if self.held:
                self.alarms[thread] = self.now + self.self_wake_timeout
            else:
                self.queue.remove(thread)
                del self.alarms[thread]
                self._log(EventKind.SELF_WAKE, thread)
                woken.append(thread)
        return woken

    def advance_to_next_alarm(self) -> list:
        """Let virtual time pass up to the earliest armed alarm, then tick."""
        deadline = self.next_alarm()
        if deadline is None:
            return []
        self.step = max(self.step, math.ceil(deadline))
        return self.tick(self.step)

    def next_alarm(self) -> float | None:
        return min(self.alarms.values(), default=None)

    def abandon(self, thread: Hashable) -> None:
        """Give up waiting: leave the queue and record a Timeout."""
        if thread in self.queue:
            self.queue.remove(thread)
            self.alarms.pop(thread, None)
            self._log(EventKind.TIMEOUT, thread)

    def starved(self) -> list:
        """Queued threads while nobody holds the lock."""
        return [] if self.held else list(self.queue)


def lock_create(mode: LockMode, self_wake_timeout: float | None = None, **kwargs) -> ShortLock:
    return ShortLock(mode, self_wake_timeout, **kwargs)


class ShortLock:
    """Short lock for real threads.

    ``virtual_clock=True`` measures alarms in steps and ticks after every
    action, which is what the explorer does; otherwise alarms are wall-clock
    seconds.  ``step_gate(thread, op)`` must return a context manager wrapped
    around each atomic action (``op`` is ``"acquire"`` or ``"release"``);
    schedule-enforcing harnesses use it to serialize threads in a chosen
    order.
    """

    def __init__(
        self,
        mode: LockMode = LockMode.FIXED,
        self_wake_timeout: float | None = None,
        *,
        virtual_clock: bool = False,
        step_gate: Callable[[Hashable, str], contextlib.AbstractContextManager] | None = None,
    ):
        self.virtual_clock = virtual_clock
        self.core = LockCore(mode, self_wake_timeout, clock=None if virtual_clock else time.monotonic)
        self._cond = threading.Condition(threading.Lock())
        self._gate = step_gate or (lambda thread, op: contextlib.nullcontext())
        self._cancelled: set = set()

    @property
    def mode(self) -> LockMode:
        return self.core.mode

    @property
    def events(self) -> list[LockEvent]:
        with self._cond:
            return list(self.core.events)

    def _settle(self, woken) -> None:
        if self.virtual_clock:
            woken = woken + self.core.tick(self.core.step)
        if woken:
            self._cond.notify_all()

    def _attempt(self, thread: Hashable) -> bool:
        with self._gate(thread, "acquire"):
            with self._cond:
                got = self.core.try_acquire(thread)
                self._settle([])
                return got

    def acquire(self, thread: Hashable | None = None, wait_timeout: float | None = None) -> None:
        """Block until ``thread`` holds the lock.

        ``wait_timeout`` bounds each stay in the queue; on expiry the thread
        leaves the queue and :class:`Timeout` is raised.
        """
        thread = threading.get_ident() if thread is None else thread
        while not self._attempt(thread):
            self._wait_until_woken(thread, wait_timeout)

    def _wait_until_woken(self, thread: Hashable, wait_timeout: float | None) -> None:
        core = self.core
        give_up = None if wait_timeout is None else time.monotonic() + wait_timeout
        with self._cond:
            while thread in core.queue or thread in self._cancelled:
                if thread in self._cancelled:
                    self._cancelled.discard(thread)
                    raise Timeout(f"thread {thread} was pulled out of the wait queue")
                now = time.monotonic()
                if give_up is not None and now >= give_up:
                    core.abandon(thread)
                    raise Timeout(f"thread {thread} waited {wait_timeout}s for the short lock")
                waits = [] if give_up is None else [give_up - now]
                alarm = None if self.virtual_clock else core.next_alarm()
                if alarm is not None:
                    waits.append(max(alarm - now, 0))
                self._cond.wait(min(waits) if waits else None)
                if not self.virtual_clock and core.tick(time.monotonic()):
                    self._cond.notify_all()

    def release(self, thread: Hashable | None = None) -> None:
        thread = threading.get_ident() if thread is None else thread
        with self._gate(thread, "release"):
            with self._cond:
                self._settle(self.core.release(thread))

    def cancel_waiter(self, thread: Hashable) -> bool:
        """Pull a queued thread out; its pending acquire raises :class:`Timeout`."""
        with self._cond:
            if thread not in self.core.queue:
                return False
            self.core.abandon(thread)
            self._cancelled.add(thread)
            self._cond.notify_all()
            return True

    def advance_clock(self) -> list:
        """Virtual clock only: jump to the earliest alarm and fire it."""
        with self._cond:
            woken = self.core.advance_to_next_alarm()
            if woken:
                self._cond.notify_all()
            return woken

    def queued(self) -> list:
        with self._cond:
            return list(self.core.queue)

    def is_held(self) -> bool:
        with self._cond:
            return self.core.held

    def tick(self, now: float | None = None) -> list:
        with self._cond:
            woken = self.core.tick(now)
            if woken:
                self._cond.notify_all()
            return woken

    @contextlib.contextmanager
    def hold(self, thread: Hashable | None = None, wait_timeout: float | None = None):
        thread = threading.get_ident() if thread is None else thread
        self.acquire(thread, wait_timeout)
        try:
            yield self
        finally:
            self.release(thread)

    def starved(self) -> list:
        with self._cond:
            return self.core.starved()

    def dump_events(self) -> str:
        return format_events(self.events)
