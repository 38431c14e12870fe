"""Per-thread signal handling behind one process-wide handler per signal.

The process has a single handler slot per signal kind, so that slot holds
a dispatcher.  Each thread keeps its own table of (handler, dispatch flag)
pairs, written only by that thread.  On delivery the dispatcher looks at the
target thread's flag and runs the thread's handler only when it is set.

Delivery is an explicit call.  In synchronous mode the handler runs inside
``deliver``; otherwise it is queued and runs when the target thread calls
:meth:`SignalDispatcher.poll`.
"""

from __future__ import annotations

import enum
import itertools
import signal as _signal
import threading
from collections.abc import Callable, Hashable
from dataclasses import dataclass

from threadport.errors import DispatcherNotInstalled, UnknownThread, WrongThread


class SignalKind(enum.Enum):
    HUP = "Hup"
    TERM = "Term"
    USR1 = "Usr1"
    USR2 = "Usr2"
    ALARM = "Alarm"
    CHILD = "Child"


OS_SIGNALS = {
    SignalKind.HUP: _signal.SIGHUP,
    SignalKind.TERM: _signal.SIGTERM,
    SignalKind.USR1: _signal.SIGUSR1,
    SignalKind.USR2: _signal.SIGUSR2,
    SignalKind.ALARM: _signal.SIGALRM,
    SignalKind.CHILD: _signal.SIGCHLD,
}

Handler = Callable[[SignalKind], object]


@dataclass(frozen=True)
class DeliveryRecord:
    kind: SignalKind
    target: Hashable
    handled: bool
    step: int

    def line(self) -> str:
        return f"{self.step} {self.kind.value} {self.target} handled={int(self.handled)}"


class ThreadSignalTable:
    """One thread's private copy of the handlers and dispatch flags."""

    def __init__(self, owner: Hashable):
        self.owner = owner
        self.entries: dict[SignalKind, tuple[Handler, bool]] = {}
        self.exited = False
        self.pending: list[tuple[SignalKind, Handler]] = []

    def route(self, kind: SignalKind) -> Handler | None:
        if self.exited:
            return None
        handler, flag = self.entries.get(kind, (None, False))
        return handler if flag else None


class SignalDispatcher:
    def __init__(self, synchronous: bool = True):
        self.synchronous = synchronous
        self.installed: set[SignalKind] = set()
        self.tables: dict[Hashable, ThreadSignalTable] = {}
        self.log: list[DeliveryRecord] = []
        self._mutex = threading.Lock()
        self._steps = itertools.count(1)

    def install(self, kind: SignalKind) -> None:
        with self._mutex:
            self.installed.add(kind)

    def install_all(self) -> None:
        for kind in SignalKind:
            self.install(kind)

    def register_thread(self, thread: Hashable | None = None) -> ThreadSignalTable:
        thread = threading.get_ident() if thread is None else thread
        with self._mutex:
            table = self.tables.get(thread)
            if table is None or table.exited:
                table = self.tables[thread] = ThreadSignalTable(thread)
            return table

    def thread_exited(self, thread: Hashable) -> None:
        with self._mutex:
            if thread in self.tables:
                self.tables[thread].exited = True

    def set_thread_handler(
        self,
        thread: Hashable,
        kind: SignalKind,
        handler: Handler | None,
        flag: bool,
        caller: Hashable | None = None,
    ) -> None:
        """Set ``thread``'s (handler, flag) pair; only ``thread`` itself may do this."""
        caller = threading.get_ident() if caller is None else caller
        if caller != thread:
            raise WrongThread(f"thread {caller} tried to change the table of thread {thread}")
        with self._mutex:
            table = self.tables.get(thread)
            if table is None:
                raise UnknownThread(f"thread {thread} is not registered")
            table.entries[kind] = (handler, flag)

    def deliver(self, kind: SignalKind, target: Hashable) -> DeliveryRecord:
        with self._mutex:
            if kind not in self.installed:
                raise DispatcherNotInstalled(f"no dispatcher installed for {kind.value}")
            table = self.tables.get(target)
            if table is None:
                raise UnknownThread(f"thread {target} is not registered")
            handler = table.route(kind)
            record = DeliveryRecord(kind, target, handler is not None, next(self._steps))
            self.log.append(record)
            if handler is not None and not self.synchronous:
                table.pending.append((kind, handler))
        if handler is not None and self.synchronous:
            handler(kind)
        return record

    def poll(self, thread: Hashable | None = None) -> int:
        """Run handlers queued for the calling thread; returns how many ran."""
        thread = threading.get_ident() if thread is None else thread
        with self._mutex:
            table = self.tables.get(thread)
            if table is None:
                raise UnknownThread(f"thread {thread} is not registered")
            pending, table.pending = table.pending, []
        for kind, handler in pending:
            handler(kind)
        return len(pending)

    def dump(self) -> str:
        with self._mutex:
            return "\n".join(r.line() for r in self.log)


def attach_os_signal(dispatcher: SignalDispatcher, kind: SignalKind, target: Callable[[], Hashable]) -> None:
    """Route a real OS signal into ``dispatcher.deliver``.

    Python runs OS signal handlers on the main thread only, so ``target``
    picks the thread the signal is meant for.  Must be called from the main
    thread.
    """
    dispatcher.install(kind)
    _signal.signal(OS_SIGNALS[kind], lambda signum, frame: dispatcher.deliver(kind, target()))
