"""Thin ctypes binding to the kernel's SysV IPC calls (Linux).

Used as the cross-process semaphore baseline in benchmarks, and by tests
that check the emulation's error contract against the real thing.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import errno
import os

from threadport.errors import Unsupported

IPC_PRIVATE = 0
IPC_CREAT = 0o1000
IPC_EXCL = 0o2000
IPC_NOWAIT = 0o4000
IPC_RMID = 0
IPC_STAT = 2
SETVAL = 16
GETVAL = 12


class sembuf(ctypes.Structure):
    _fields_ = [("sem_num", ctypes.c_ushort), ("sem_op", ctypes.c_short), ("sem_flg", ctypes.c_short)]


_libc = None


def libc():
    global _libc
    if _libc is None:
        name = ctypes.util.find_library("c")
        if name is None or not hasattr(os, "fork"):
            raise Unsupported("no C library with SysV IPC")
        lib = ctypes.CDLL(name, use_errno=True)
        for fn in ("shmget", "shmat", "shmdt", "shmctl", "semget", "semop", "semctl"):
            if not hasattr(lib, fn):
                raise Unsupported(f"libc lacks {fn}")
        lib.shmat.restype = ctypes.c_void_p
        lib.shmat.argtypes = [ctypes.c_int, ctypes.c_void_p, ctypes.c_int]
        lib.shmdt.argtypes = [ctypes.c_void_p]
        lib.semop.argtypes = [ctypes.c_int, ctypes.POINTER(sembuf), ctypes.c_size_t]
        _libc = lib
    return _libc


def _check(ret: int) -> int:
    if ret == -1:
        err = ctypes.get_errno()
        raise OSError(err, f"{errno.errorcode.get(err, err)}: {os.strerror(err)}")
    return ret


def shmget(key: int, size: int, flags: int) -> int:
    return _check(libc().shmget(key, ctypes.c_size_t(size), flags))


def shmat(shmid: int) -> int:
    addr = libc().shmat(shmid, None, 0)
    if addr is None or addr == ctypes.c_void_p(-1).value:
        _check(-1)
    return addr


def shmdt(addr: int) -> None:
    _check(libc().shmdt(ctypes.c_void_p(addr)))


def shmrm(shmid: int) -> None:
    _check(libc().shmctl(shmid, IPC_RMID, None))


def semget(key: int, nsems: int, flags: int) -> int:
    return _check(libc().semget(key, nsems, flags))


def semctl_setval(semid: int, num: int, value: int) -> None:
    _check(libc().semctl(semid, num, SETVAL, ctypes.c_int(value)))


def semctl_getval(semid: int, num: int) -> int:
    return _check(libc().semctl(semid, num, GETVAL))


def semrm(semid: int) -> None:
    _check(libc().semctl(semid, 0, IPC_RMID))


class KernelSemaphore:
    """One private SysV semaphore, removed on close."""

    def __init__(self, initial: int = 1):
        self.semid = semget(IPC_PRIVATE, 1, IPC_CREAT | 0o600)
        semctl_setval(self.semid, 0, initial)
        self._p = sembuf(0, -1, 0)
        self._v = sembuf(0, 1, 0)
        self._semop = libc().semop

    def p(self) -> None:
        if self._semop(self.semid, ctypes.byref(self._p), 1) == -1:
            _check(-1)

    def v(self) -> None:
        if self._semop(self.semid, ctypes.byref(self._v), 1) == -1:
            _check(-1)

    def value(self) -> int:
        return semctl_getval(self.semid, 0)

    def close(self) -> None:
        semrm(self.semid)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def available() -> bool:
    try:
        with KernelSemaphore():
            return True
    except (Unsupported, OSError):
        return False
