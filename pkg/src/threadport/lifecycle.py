"""Thread lifecycle for a daemon whose processes became threads.

* ``spawn`` replaces fork/main and records the thread in a global slot array.
* ``exit_current`` is the single landing point for exit, _exit and abort.
* ``join``/``detach`` replace the waitpid family; there is no wait-for-any.
* ``sleep_current`` delays only the calling thread.

Heap allocations made through :class:`Allocator` are recorded on a global
reclaim list.  When a thread dies abnormally, the main thread calls
``reclaim_sweep`` to free what the thread left behind.

getenv/putenv and setsid keep their process semantics; no wrapper exists
for them.
"""

from __future__ import annotations

import enum
import itertools
import threading
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

from threadport.errors import AlreadyJoined, Exhausted, ThreadStillRunning, UnknownThread


class Role(enum.Enum):
    POSTMASTER = "Postmaster"
    WORKER = "Worker"
    BOOTSTRAP = "Bootstrap"


class State(enum.Enum):
    RUNNING = "Running"
    EXITED = "Exited"
    ABNORMAL = "Abnormal"


class ThreadExit(BaseException):
    """Unwinds a thread to its wrapper; raised by :func:`exit_current`."""

    def __init__(self, status: int):
        super().__init__(status)
        self.status = status


@dataclass
class ThreadEntry:
    slot: int
    role: Role
    name: str
    state: State = State.RUNNING
    status: int | None = None
    error: BaseException | None = None
    joined: bool = False
    detached: bool = False
    reaped: bool = False
    thread: threading.Thread | None = field(default=None, repr=False)
    done: threading.Event = field(default_factory=threading.Event, repr=False)


@dataclass
class Allocation:
    handle: int
    owner: int
    size: int


class ReclaimList:
    """Global list of (owner thread slot, allocation) pairs."""

    def __init__(self) -> None:
        self._mutex = threading.Lock()
        self._entries: dict[int, Allocation] = {}

    def register(self, alloc: Allocation) -> None:
        with self._mutex:
            if alloc.handle in self._entries:
                raise ValueError(f"handle {alloc.handle} already registered")
            self._entries[alloc.handle] = alloc

    def unregister(self, handle: int) -> Allocation | None:
        with self._mutex:
            return self._entries.pop(handle, None)

    def drain(self, owner: int) -> list[Allocation]:
        with self._mutex:
            mine = [a for a in self._entries.values() if a.owner == owner]
            for a in mine:
                del self._entries[a.handle]
            return mine

    def owned_by(self, owner: int) -> list[Allocation]:
        with self._mutex:
            return [a for a in self._entries.values() if a.owner == owner]

    def __len__(self) -> int:
        with self._mutex:
            return len(self._entries)


_current = threading.local()


def current_slot() -> int | None:
    return getattr(_current, "slot", None)


class ThreadRegistry:
    """Global slot array of spawned threads plus the reclaim list.

    The registry's creator is treated as the main thread; only it may sweep.
    """

    def __init__(self, capacity: int = 1024):
        self.capacity = capacity
        self.reclaim = ReclaimList()
        self.allocator = Allocator(self)
        self.main_ident = threading.get_ident()
        self._mutex = threading.Lock()
        self._entries: list[ThreadEntry] = []
        self.start_hooks: list[Callable[[ThreadEntry], None]] = []
        self.exit_hooks: list[Callable[[ThreadEntry, State], None]] = []

    def spawn(self, entry: Callable[..., Any], role: Role = Role.WORKER, *args, name: str | None = None, **kwargs) -> int:
        with self._mutex:
            if len(self._entries) >= self.capacity:
                raise Exhausted(f"registry full at {self.capacity} threads")
            slot = len(self._entries)
            rec = ThreadEntry(slot, role, name or f"{role.value.lower()}-{slot}")
            self._entries.append(rec)
        rec.thread = threading.Thread(target=self._run, args=(rec, entry, args, kwargs), name=rec.name, daemon=True)
        rec.thread.start()
        return slot

    def _run(self, rec: ThreadEntry, entry, args, kwargs) -> None:
        _current.slot = rec.slot
        _current.registry = self
        try:
            for hook in self.start_hooks:
                hook(rec)
            result = entry(*args, **kwargs)
            state, status, error = State.EXITED, result if isinstance(result, int) else 0, None
        except ThreadExit as e:
            state, status, error = State.EXITED, e.status, None
        except BaseException as e:  # abnormal exit is trapped, never fatal to the process
            state, status, error = State.ABNORMAL, None, e
        for hook in self.exit_hooks:
            hook(rec, state)
        with self._mutex:
            rec.state, rec.status, rec.error = state, status, error
            if rec.detached:
                rec.reaped = True
        _current.slot = None
        rec.done.set()

    def bind_globals(self, layout) -> None:
        """Attach a per-thread globals block to every spawned thread.

        The block is recorded on the reclaim list.  A clean exit frees it at
        once; an abnormal exit leaves it for :meth:`reclaim_sweep`.
        """
        handles = {}

        def start(rec):
            ctx = layout.attach()
            handles[rec.slot] = self.allocator.alloc(len(ctx.cells), rec.slot, obj=ctx)

        def stop(rec, state):
            ctx = layout.detach()
            handle = handles.pop(rec.slot, None)
            if state is State.EXITED and handle is not None:
                self.allocator.free(handle)
            elif ctx is not None:
                ctx.released = False  # still owned by the reclaim list

        self.start_hooks.append(start)
        self.exit_hooks.append(stop)

    def entry(self, slot: int) -> ThreadEntry:
        with self._mutex:
            if not 0 <= slot < len(self._entries):
                raise UnknownThread(f"no thread in slot {slot}")
            return self._entries[slot]

    def join(self, slot: int, timeout: float | None = None) -> int | None:
        """Wait for the thread; returns its exit status (None if it died abnormally)."""
        rec = self.entry(slot)
        with self._mutex:
            if rec.joined or rec.detached:
                raise AlreadyJoined(f"thread {slot} already joined or detached")
            rec.joined = True
        if not rec.done.wait(timeout):
            with self._mutex:
                rec.joined = False
            raise TimeoutError(f"thread {slot} still running after {timeout}s")
        rec.thread.join()
        with self._mutex:
            rec.reaped = True
        return rec.status

    def detach(self, slot: int) -> None:
        rec = self.entry(slot)
        with self._mutex:
            if rec.joined or rec.detached:
                raise AlreadyJoined(f"thread {slot} already joined or detached")
            rec.detached = True
            if rec.done.is_set():
                rec.reaped = True

    def state(self, slot: int) -> State:
        return self.entry(slot).state

    def entries(self) -> list[ThreadEntry]:
        with self._mutex:
            return list(self._entries)

    def running_count(self) -> int:
        with self._mutex:
            return sum(1 for e in self._entries if e.state is State.RUNNING)

    def reclaim_sweep(self, slot: int) -> int:
        """Free every allocation still owned by a finished thread (main thread only)."""
        if threading.get_ident() != self.main_ident:
            raise PermissionError("reclaim_sweep is reserved for the main thread")
        rec = self.entry(slot)
        if rec.state is State.RUNNING:
            raise ThreadStillRunning(f"thread {slot} is still running")
        freed = self.reclaim.drain(slot)
        for alloc in freed:
            self.allocator.release(alloc)
        return len(freed)

    def dump(self) -> str:
        lines = []
        for e in self.entries():
            status = "" if e.status is None else f"({e.status})"
            flags = "".join(f" {n}" for n in ("joined", "detached", "reaped") if getattr(e, n))
            lines.append(f"slot={e.slot} role={e.role.value} name={e.name} state={e.state.value}{status}{flags}")
        return "\n".join(lines)


class Allocator:
    """Counts live heap blocks and records each on the reclaim list."""

    def __init__(self, registry: ThreadRegistry):
        self.registry = registry
        self._mutex = threading.Lock()
        self._handles = itertools.count(1)
        self.live = 0
        self.blocks: dict[int, Any] = {}

    def alloc(self, size: int, owner: int | None = None, obj: Any = None) -> int:
        owner = current_slot() if owner is None else owner
        if owner is None:
            raise UnknownThread("allocation from a thread the registry did not spawn")
        with self._mutex:
            handle = next(self._handles)
            self.live += 1
            self.blocks[handle] = bytearray(size) if obj is None else obj
        self.registry.reclaim.register(Allocation(handle, owner, size))
        return handle

    def free(self, handle: int) -> None:
        alloc = self.registry.reclaim.unregister(handle)
        if alloc is None:
            raise KeyError(f"handle {handle} is not live")
        self.release(alloc)

    def release(self, alloc: Allocation) -> None:
        with self._mutex:
            del self.blocks[alloc.handle]
            self.live -= 1


def exit_current(status: int = 0):
    """pthread_exit(): unwind the calling registry thread with ``status``."""
    raise ThreadExit(status)


# exit, _exit and abort all land on thread exit
exit = _exit = exit_current


def abort():
    exit_current(134)


def sleep_current(seconds: float) -> None:
    if seconds > 0:
        time.sleep(seconds)


def spawn(registry: ThreadRegistry, entry, role: Role = Role.WORKER, *args, **kwargs) -> int:
    return registry.spawn(entry, role, *args, **kwargs)


def reclaim_register(registry: ThreadRegistry, size: int, owner: int | None = None) -> int:
    return registry.allocator.alloc(size, owner)


def reclaim_sweep(registry: ThreadRegistry, slot: int) -> int:
    return registry.reclaim_sweep(slot)
