"""Thread-based stand-ins for a multi-process daemon's OS services.

Emulated SysV shared memory and semaphores, per-thread signal routing,
per-thread global contexts, thread lifecycle with a reclaim list, a short
lock with three wake protocols, and an exhaustive schedule explorer.
"""

from threadport.errors import ThreadportError
from threadport.explorer import LockModel, SemModel, explore, replay
from threadport.globalvars import GlobalLayout
from threadport.lifecycle import Role, ThreadRegistry
from threadport.sem_sim import SemRegistry, SemSet
from threadport.shm_sim import ShmRegistry
from threadport.shortlock import LockMode, ShortLock
from threadport.sig_dispatch import SignalDispatcher, SignalKind

__all__ = [
    "GlobalLayout",
    "LockMode",
    "LockModel",
    "Role",
    "SemModel",
    "SemRegistry",
    "SemSet",
    "ShmRegistry",
    "ShortLock",
    "SignalDispatcher",
    "SignalKind",
    "ThreadRegistry",
    "ThreadportError",
    "explore",
    "replay",
]
