"""User-space stand-in for SysV semaphore sets.

Blocking follows an attempt/wait/retry loop: a ``semop`` that cannot commit
registers its caller as a waiter on the semaphore that stopped it, sleeps
until a release notification arrives, and tries again.  Any committed change
to a semaphore's value notifies every waiter parked on it.  Wakeups may be
spurious, which the retry loop tolerates.

:class:`SemCore` is the state machine.  :class:`SemSet` drives it with real
threads; :mod:`threadport.explorer` drives the same core one step at a time.
"""

from __future__ import annotations

import itertools
import threading
import time
from collections.abc import Hashable, Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum

from threadport.errors import (
    AlreadyExists,
    InvalidValue,
    NotFound,
    NsemsMismatch,
    SetRemoved,
    Timeout,
    Unsupported,
    WouldBlock,
)

SEMVMX = 32767


@dataclass(frozen=True)
class SemOpRequest:
    sem_num: int
    delta: int
    nowait: bool = False
    undo: bool = False


def P(sem_num: int = 0, n: int = 1, nowait: bool = False) -> SemOpRequest:
    return SemOpRequest(sem_num, -n, nowait)


def V(sem_num: int = 0, n: int = 1) -> SemOpRequest:
    return SemOpRequest(sem_num, n)


def Z(sem_num: int = 0, nowait: bool = False) -> SemOpRequest:
    """Wait-for-zero."""
    return SemOpRequest(sem_num, 0, nowait)


class OpStatus(Enum):
    COMMITTED = "committed"
    BLOCKED = "blocked"


@dataclass
class SemCore:
    values: list[int]
    waiters: list[list[Hashable]] = field(default_factory=list)
    blocked_on: dict[Hashable, int] = field(default_factory=dict)
    removed: bool = False

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("a semaphore set needs at least one semaphore")
        if not self.waiters:
            self.waiters = [[] for _ in self.values]

    @classmethod
    def fresh(cls, nsems: int, initial: int | Sequence[int] = 0) -> SemCore:
        if isinstance(initial, int):
            values = [initial] * nsems
        else:
            values = list(initial)
            if len(values) != nsems:
                raise ValueError("initial values do not match nsems")
        if any(v < 0 for v in values):
            raise InvalidValue("semaphore values must be non-negative")
        return cls(values)

    @property
    def nsems(self) -> int:
        return len(self.values)

    def clone(self) -> SemCore:
        return SemCore(
            list(self.values),
            [list(w) for w in self.waiters],
            dict(self.blocked_on),
            self.removed,
        )

    def key(self) -> tuple:
        return (tuple(self.values), tuple(tuple(w) for w in self.waiters), self.removed)

    def validate(self, ops: Sequence[SemOpRequest]) -> None:
        if not ops:
            raise ValueError("semop needs at least one operation")
        for op in ops:
            if op.undo:
                raise Unsupported("SEM_UNDO is not emulated")
            if not 0 <= op.sem_num < self.nsems:
                raise ValueError(f"sem_num {op.sem_num} out of range for {self.nsems} semaphores")

    def first_blocker(self, ops: Sequence[SemOpRequest]) -> int | None:
        """Index of the semaphore that stops ``ops`` from committing, or None."""
        trial = {}
        for op in ops:
            cur = trial.get(op.sem_num, self.values[op.sem_num])
            if op.delta == 0:
                if cur != 0:
                    return op.sem_num
            elif cur + op.delta < 0:
                return op.sem_num
            elif cur + op.delta > SEMVMX:
                raise InvalidValue(f"semaphore {op.sem_num} would exceed {SEMVMX}")
            trial[op.sem_num] = cur + op.delta
        return None

    def satisfiable(self, ops: Sequence[SemOpRequest]) -> bool:
        return self.first_blocker(ops) is None

    def try_op(self, who: Hashable, ops: Sequence[SemOpRequest]) -> tuple[OpStatus, list[Hashable]]:
        """One attempt of the acquire loop.

        Commits every delta of ``ops`` at once, or registers ``who`` as a
        waiter on the blocking semaphore.  Returns the status and the waiters
        notified by the commit.
        """
        if self.removed:
            raise SetRemoved("semaphore set was removed")
        blocker = self.first_blocker(ops)
        if blocker is not None:
            if any(op.nowait for op in ops):
                raise WouldBlock(f"semaphore {blocker} cannot satisfy the request")
            if who in self.blocked_on:
                raise RuntimeError(f"{who!r} is already waiting")
            self.waiters[blocker].append(who)
            self.blocked_on[who] = blocker
            return OpStatus.BLOCKED, []
        touched = []
        for op in ops:
            if op.delta:
                self.values[op.sem_num] += op.delta
                if op.sem_num not in touched:
                    touched.append(op.sem_num)
        return OpStatus.COMMITTED, self._notify(touched)

    def set_val(self, sem_num: int, value: int) -> list[Hashable]:
        if self.removed:
            raise SetRemoved("semaphore set was removed")
        if value < 0 or value > SEMVMX:
            raise InvalidValue(f"SETVAL {value} out of range")
        if not 0 <= sem_num < self.nsems:
            raise ValueError(f"sem_num {sem_num} out of range")
        self.values[sem_num] = value
        return self._notify([sem_num])

    def remove(self) -> list[Hashable]:
        failed = list(self.blocked_on)
        self.removed = True
        self.blocked_on.clear()
        self.waiters = [[] for _ in self.values]
        return failed

    def cancel(self, who: Hashable) -> None:
        sem_num = self.blocked_on.pop(who, None)
        if sem_num is not None:
            self.waiters[sem_num].remove(who)

    def is_waiting(self, who: Hashable) -> bool:
        return who in self.blocked_on

    def _notify(self, sem_nums: Iterable[int]) -> list[Hashable]:
        # release protocol: the value changed, so everyone parked here retries
        woken = []
        for n in sem_nums:
            for who in self.waiters[n]:
                del self.blocked_on[who]
                woken.append(who)
            self.waiters[n] = []
        return woken


class SemSet:
    """A semaphore set usable from real threads."""

    def __init__(self, set_id: int, key: int, nsems: int, initial: int | Sequence[int] = 0):
        self.id = set_id
        self.key = key
        self.core = SemCore.fresh(nsems, initial)
        self._cond = threading.Condition(threading.Lock())
        self._tickets = itertools.count()
        self.wakeups = 0

    @property
    def nsems(self) -> int:
        return self.core.nsems

    def op(self, ops: Sequence[SemOpRequest], timeout: float | None = None) -> None:
        core = self.core
        with self._cond:
            core.validate(ops)
            who = ("req", next(self._tickets))
            deadline = None if timeout is None else time.monotonic() + timeout
            while True:
                status, woken = core.try_op(who, ops)
                if status is OpStatus.COMMITTED:
                    if woken:
                        self.wakeups += len(woken)
                        self._cond.notify_all()
                    return
                while core.is_waiting(who):
                    remaining = None if deadline is None else deadline - time.monotonic()
                    if remaining is not None and remaining <= 0:
                        core.cancel(who)
                        raise Timeout(f"semop not satisfied within {timeout}s")
                    self._cond.wait(remaining)
                    if core.removed:
                        raise SetRemoved("semaphore set was removed while waiting")
                # notified: retry

    def p(self, sem_num: int = 0) -> None:
        """Uncontended P without building a request list."""
        core = self.core
        with self._cond:
            values = core.values
            if not core.removed and values[sem_num] > 0:
                values[sem_num] -= 1
                # wait-for-zero requests may be parked here
                if core.waiters[sem_num]:
                    self.wakeups += len(core._notify((sem_num,)))
                    self._cond.notify_all()
                return
        self.op((SemOpRequest(sem_num, -1),))

    def v(self, sem_num: int = 0) -> None:
        core = self.core
        with self._cond:
            if core.removed:
                raise SetRemoved("semaphore set was removed")
            if core.values[sem_num] >= SEMVMX:
                raise InvalidValue(f"semaphore {sem_num} would exceed {SEMVMX}")
            core.values[sem_num] += 1
            if core.waiters[sem_num]:
                self.wakeups += len(core._notify((sem_num,)))
                self._cond.notify_all()

    def set_val(self, sem_num: int, value: int) -> None:
        with self._cond:
            woken = self.core.set_val(sem_num, value)
            if woken:
                self.wakeups += len(woken)
                self._cond.notify_all()

    def get_val(self, sem_num: int) -> int:
        with self._cond:
            if not 0 <= sem_num < self.nsems:
                raise ValueError(f"sem_num {sem_num} out of range")
            return self.core.values[sem_num]

    def waiter_counts(self) -> list[int]:
        with self._cond:
            return [len(w) for w in self.core.waiters]

    def remove(self) -> None:
        with self._cond:
            self.core.remove()
            self._cond.notify_all()


class SemCmd(Enum):
    SETVAL = "setval"
    GETVAL = "getval"
    REMOVE = "remove"


class SemRegistry:
    """Process-local table of emulated semaphore sets, keyed like semget()."""

    def __init__(self) -> None:
        self._mutex = threading.Lock()
        self._ids = itertools.count(1)
        self._by_id: dict[int, SemSet] = {}
        self._by_key: dict[int, int] = {}

    def get(self, key: int, nsems: int, create: bool = False, exclusive: bool = False, mode: int = 0o600) -> int:
        with self._mutex:
            set_id = self._by_key.get(key)
            if set_id is not None:
                if create and exclusive:
                    raise AlreadyExists(f"key {key} already has set {set_id}")
                existing = self._by_id[set_id]
                if nsems > existing.nsems:
                    raise NsemsMismatch(f"set {set_id} has {existing.nsems} semaphores, asked for {nsems}")
                return set_id
            if not create:
                raise NotFound(f"no semaphore set for key {key}")
            if nsems < 1:
                raise ValueError("nsems must be at least 1")
            set_id = next(self._ids)
            self._by_id[set_id] = SemSet(set_id, key, nsems)
            self._by_key[key] = set_id
            return set_id

    def lookup(self, set_id: int) -> SemSet:
        with self._mutex:
            sem_set = self._by_id.get(set_id)
        if sem_set is None:
            raise NotFound(f"no semaphore set with id {set_id}")
        return sem_set

    def control(self, set_id: int, sem_num: int, cmd: SemCmd, value: int | None = None) -> int | None:
        if cmd is SemCmd.REMOVE:
            with self._mutex:
                sem_set = self._by_id.pop(set_id, None)
                if sem_set is None:
                    raise NotFound(f"no semaphore set with id {set_id}")
                self._by_key.pop(sem_set.key, None)
            sem_set.remove()
            return None
        sem_set = self.lookup(set_id)
        if cmd is SemCmd.GETVAL:
            return sem_set.get_val(sem_num)
        if cmd is SemCmd.SETVAL:
            if value is None:
                raise InvalidValue("SETVAL needs a value")
            sem_set.set_val(sem_num, value)
            return None
        raise ValueError(f"unknown command {cmd!r}")

    def op(self, set_id: int, ops: Sequence[SemOpRequest], timeout: float | None = None) -> None:
        self.lookup(set_id).op(ops, timeout)

    def dump(self) -> str:
        with self._mutex:
            sets = list(self._by_id.values())
        lines = []
        for s in sets:
            with s._cond:
                values = ",".join(map(str, s.core.values))
                waiting = ",".join(str(len(w)) for w in s.core.waiters)
            lines.append(f"id={s.id} key={s.key} values={values} waiters={waiting}")
        return "\n".join(lines)
