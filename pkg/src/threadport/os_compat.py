"""OS-facing adaptations: pipes shared between threads, and raising rlimits.

Pipes are always non-blocking, so a full or empty pipe raises
:class:`WouldBlock` instead of stalling every thread.  Closing an end while
the pair is shared is refused.

``break_resource_limit`` raises the soft and hard limits through an adapter,
then puts the effective uid back to the real (ordinary) user, on every path.
"""

from __future__ import annotations

import enum
import errno
import os
import resource
import threading
from dataclasses import dataclass, field

from threadport.errors import OsError, PartialRaise, PrivilegeDenied, SuppressedClose, WouldBlock

DEFAULT_NOFILE_TARGET = 8192


class PipePair:
    def __init__(self, read_fd: int, write_fd: int, *, named: str | None = None):
        self.read_fd = read_fd
        self.write_fd = write_fd
        self.named = named
        self.shared = True
        self.closed = False
        for fd in (read_fd, write_fd):
            os.set_blocking(fd, False)

    @property
    def nonblocking(self) -> bool:
        return not os.get_blocking(self.read_fd) and not os.get_blocking(self.write_fd)

    @property
    def close_suppressed(self) -> bool:
        return self.shared

    def write(self, data: bytes) -> int:
        try:
            return os.write(self.write_fd, data)
        except BlockingIOError as e:
            raise WouldBlock("pipe is full") from e
        except OSError as e:
            raise OsError(str(e)) from e

    def read(self, n: int = 65536) -> bytes:
        try:
            return os.read(self.read_fd, n)
        except BlockingIOError as e:
            raise WouldBlock("pipe is empty") from e
        except OSError as e:
            raise OsError(str(e)) from e

    def capacity(self) -> int:
        """Bytes accepted before the next write would block (fills the pipe)."""
        total = 0
        chunk = b"\0" * 4096
        while True:
            try:
                total += self.write(chunk)
            except WouldBlock:
                break
        try:
            while True:
                total += self.write(b"\0")
        except WouldBlock:
            return total

    def close_read(self) -> None:
        self._refuse_if_shared("read")

    def close_write(self) -> None:
        self._refuse_if_shared("write")

    def _refuse_if_shared(self, end: str) -> None:
        if self.shared:
            raise SuppressedClose(f"{end} end stays open: other threads of this process use it")

    def unshare(self) -> None:
        self.shared = False

    def close(self) -> None:
        """Final teardown; only allowed after :meth:`unshare`."""
        self._refuse_if_shared("both")
        if not self.closed:
            os.close(self.read_fd)
            os.close(self.write_fd)
            self.closed = True


def pipe_open_unnamed() -> PipePair:
    try:
        r, w = os.pipe()
    except OSError as e:
        raise OsError(str(e)) from e
    return PipePair(r, w)


def pipe_open_named(path: str, create: bool = True) -> PipePair:
    """Open a FIFO with O_NONBLOCK on both ends; there is no blocking variant."""
    try:
        if create and not os.path.exists(path):
            os.mkfifo(path, 0o600)
        # the read end first: a non-blocking write-only open fails with ENXIO otherwise
        r = os.open(path, os.O_RDONLY | os.O_NONBLOCK)
        try:
            w = os.open(path, os.O_WRONLY | os.O_NONBLOCK)
        except OSError:
            os.close(r)
            raise
    except OSError as e:
        raise OsError(str(e)) from e
    return PipePair(r, w, named=path)


class Resource(enum.Enum):
    NOFILE = "open_files"
    NPROC = "processes"
    STACK = "stack"
    CORE = "core"

    @property
    def rlimit(self) -> int:
        return {
            Resource.NOFILE: resource.RLIMIT_NOFILE,
            Resource.NPROC: resource.RLIMIT_NPROC,
            Resource.STACK: resource.RLIMIT_STACK,
            Resource.CORE: resource.RLIMIT_CORE,
        }[self]


@dataclass(frozen=True)
class RlimitReport:
    resource: Resource
    old_soft: int
    old_hard: int
    new_soft: int
    new_hard: int
    privilege_dropped: bool

    def text(self) -> str:
        return (
            f"resource={self.resource.value} old_soft={self.old_soft} old_hard={self.old_hard} "
            f"new_soft={self.new_soft} new_hard={self.new_hard} privilege_dropped={int(self.privilege_dropped)}"
        )


class OsAdapter:
    """What break_resource_limit needs from the OS."""

    def getrlimit(self, res: Resource) -> tuple[int, int]:
        raise NotImplementedError

    def setrlimit(self, res: Resource, soft: int, hard: int) -> None:
        raise NotImplementedError

    def getuid(self) -> int:
        raise NotImplementedError

    def geteuid(self) -> int:
        raise NotImplementedError

    def seteuid(self, uid: int) -> None:
        raise NotImplementedError


@dataclass
class MockOsAdapter(OsAdapter):
    """In-memory OS: a setuid-root install starts with euid 0 and uid ``ordinary_uid``."""

    limits: dict = field(default_factory=lambda: {Resource.NOFILE: (1024, 1024)})
    ordinary_uid: int = 1000
    setuid_root: bool = True
    euid: int = -1
    euid_log: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.euid == -1:
            self.euid = 0 if self.setuid_root else self.ordinary_uid
        self.euid_log.append(self.euid)

    def getrlimit(self, res):
        return self.limits[res]

    def setrlimit(self, res, soft, hard):
        old_soft, old_hard = self.limits[res]
        if soft > hard:
            raise OSError(errno.EINVAL, "soft limit above hard limit")
        if hard > old_hard and self.euid != 0:
            raise PermissionError(errno.EPERM, "raising the hard limit needs privilege")
        self.limits[res] = (soft, hard)

    def getuid(self):
        return self.ordinary_uid

    def geteuid(self):
        return self.euid

    def seteuid(self, uid):
        if self.euid != 0 and uid not in (self.ordinary_uid, self.euid):
            raise PermissionError(errno.EPERM, "seteuid needs privilege")
        self.euid = uid
        self.euid_log.append(uid)


class RealOsAdapter(OsAdapter):
    def getrlimit(self, res):
        return resource.getrlimit(res.rlimit)

    def setrlimit(self, res, soft, hard):
        resource.setrlimit(res.rlimit, (soft, hard))

    def getuid(self):
        return os.getuid()

    def geteuid(self):
        return os.geteuid()

    def seteuid(self, uid):
        os.seteuid(uid)


_rlimit_mutex = threading.Lock()


def break_resource_limit(
    adapter: OsAdapter,
    targets: int | tuple[int, int] = DEFAULT_NOFILE_TARGET,
    res: Resource = Resource.NOFILE,
) -> RlimitReport:
    """Raise ``res`` to ``targets`` (soft, hard), then drop back to the ordinary uid.

    Limits are never lowered.  Without privilege, the soft limit still goes
    up to the current hard limit and :class:`PartialRaise` carries the
    report; if nothing can be raised, :class:`PrivilegeDenied`.
    """
    want_soft, want_hard = (targets, targets) if isinstance(targets, int) else targets
    with _rlimit_mutex:
        old_soft, old_hard = adapter.getrlimit(res)
        new_soft, new_hard = max(old_soft, want_soft), max(old_hard, want_hard)
        new_soft = min(new_soft, new_hard)
        hard_refused = False
        try:
            if (new_soft, new_hard) != (old_soft, old_hard):
                try:
                    adapter.setrlimit(res, new_soft, new_hard)
                except PermissionError:
                    hard_refused = True
                    new_hard = old_hard
                    new_soft = min(max(old_soft, want_soft), old_hard)
                    if new_soft != old_soft:
                        adapter.setrlimit(res, new_soft, new_hard)
        finally:
            if adapter.geteuid() != adapter.getuid():
                adapter.seteuid(adapter.getuid())
        report = RlimitReport(res, old_soft, old_hard, new_soft, new_hard, adapter.geteuid() == adapter.getuid())
    if hard_refused:
        if new_soft == old_soft:
            raise PrivilegeDenied(f"cannot raise the hard {res.value} limit from {old_hard} without privilege")
        raise PartialRaise(f"soft {res.value} limit raised to {new_soft}; hard limit refused", report)
    return report
