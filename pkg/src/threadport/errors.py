"""Exception hierarchy shared by every module of the shim."""


class ThreadportError(Exception):
    """Base class for all shim errors."""


# shared memory
class NotFound(ThreadportError):
    pass


class AlreadyExists(ThreadportError):
    pass


class SizeMismatch(ThreadportError):
    pass


class Removed(ThreadportError):
    pass


class DoubleDetach(ThreadportError):
    pass


class OutOfBounds(ThreadportError, IndexError):
    pass


# semaphores
class NsemsMismatch(ThreadportError):
    pass


class InvalidValue(ThreadportError, ValueError):
    pass


class WouldBlock(ThreadportError):
    pass


class SetRemoved(ThreadportError):
    pass


class Timeout(ThreadportError):
    pass


class Unsupported(ThreadportError):
    pass


# short lock
class InvalidTimeout(ThreadportError, ValueError):
    pass


class Reentrancy(ThreadportError):
    pass


class NotHolder(ThreadportError):
    pass


# signal dispatch
class WrongThread(ThreadportError):
    pass


class UnknownThread(ThreadportError):
    pass


class DispatcherNotInstalled(ThreadportError):
    pass


# per-thread globals
class Sealed(ThreadportError):
    pass


class AlreadySealed(ThreadportError):
    pass


class NotSealed(ThreadportError):
    pass


class DuplicateName(ThreadportError):
    pass


class AlreadyAttached(ThreadportError):
    pass


class NoContext(ThreadportError):
    pass


class TypeMismatch(ThreadportError, TypeError):
    pass


# lifecycle
class Exhausted(ThreadportError):
    pass


class AlreadyJoined(ThreadportError):
    pass


class ThreadStillRunning(ThreadportError):
    pass


# os adaptation
class OsError(ThreadportError):
    pass


class SuppressedClose(ThreadportError):
    pass


class PrivilegeDenied(ThreadportError):
    pass


class PartialRaise(ThreadportError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


# exploration / cli
class BoundExceeded(ThreadportError):
    pass


class InvalidSchedule(ThreadportError):
    pass


class ConfigError(ThreadportError):
    pass
