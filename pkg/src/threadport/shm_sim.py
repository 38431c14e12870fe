"""User-space stand-in for SysV shared memory.

Every thread of the process reaches a segment through a :class:`ShmRegistry`
instead of the kernel.  The registry keeps SysV's reference-counting rule:
a segment marked for removal is freed by the detach that drops its attach
count to zero.

Reads and writes through an attachment are not serialized here; callers
guard them with a semaphore or a short lock.
"""

from __future__ import annotations

import enum
import itertools
import threading
from dataclasses import dataclass, field

from threadport.errors import (
    AlreadyExists,
    DoubleDetach,
    NotFound,
    OutOfBounds,
    Removed,
    SizeMismatch,
)


class ShmCmd(enum.Enum):
    STAT = "stat"
    REMOVE = "remove"


@dataclass(frozen=True)
class ShmInfo:
    id: int
    key: int
    size: int
    attach_count: int
    removal_pending: bool


@dataclass
class ShmSegment:
    id: int
    key: int
    size: int
    storage: bytearray
    attach_count: int = 0
    removal_pending: bool = False
    released: bool = False

    def info(self) -> ShmInfo:
        return ShmInfo(self.id, self.key, self.size, self.attach_count, self.removal_pending)


@dataclass(frozen=True)
class ReleaseRecord:
    """Audit entry written at the moment a segment's storage is dropped."""

    id: int
    removal_pending: bool
    attach_count: int


class ShmAttachment:
    """Read/write handle onto a segment's bytes.

    All attachments of one segment alias the same ``bytearray``.
    """

    def __init__(self, registry: ShmRegistry, segment: ShmSegment, serial: int):
        self._registry = registry
        self._segment = segment
        self._view = memoryview(segment.storage)
        self.segment_id = segment.id
        self.serial = serial
        self.detached = False

    @property
    def size(self) -> int:
        return self._segment.size

    def _check(self, offset: int, length: int) -> None:
        if self.detached:
            raise DoubleDetach(f"attachment {self.serial} already detached")
        if offset < 0 or length < 0 or offset + length > self._segment.size:
            raise OutOfBounds(
                f"access [{offset}, {offset + length}) outside segment of {self._segment.size} bytes"
            )

    def read(self, offset: int, length: int = 1) -> bytes:
        self._check(offset, length)
        return bytes(self._view[offset : offset + length])

    def write(self, offset: int, data: bytes) -> None:
        self._check(offset, len(data))
        self._view[offset : offset + len(data)] = data

    def read_int(self, offset: int = 0, width: int = 8) -> int:
        return int.from_bytes(self.read(offset, width), "little", signed=True)

    def write_int(self, value: int, offset: int = 0, width: int = 8) -> None:
        self.write(offset, value.to_bytes(width, "little", signed=True))

    def detach(self) -> None:
        self._registry.detach(self)

    def __enter__(self) -> ShmAttachment:
        return self

    def __exit__(self, *exc) -> None:
        if not self.detached:
            self.detach()


@dataclass
class ShmRegistry:
    """Process-local table of emulated segments.

    ``leaks`` counts segments whose storage is still allocated; it returns
    to zero once every segment has been removed and fully detached.
    """

    _by_id: dict[int, ShmSegment] = field(default_factory=dict)
    _by_key: dict[int, int] = field(default_factory=dict)
    releases: list[ReleaseRecord] = field(default_factory=list)
    allocated: int = 0
    freed: int = 0

    def __post_init__(self) -> None:
        self._mutex = threading.Lock()
        self._ids = itertools.count(1)
        self._serials = itertools.count(1)
        self._retired: set[int] = set()

    @property
    def leaks(self) -> int:
        return self.allocated - self.freed

    def get(
        self,
        key: int,
        size: int,
        create: bool = False,
        exclusive: bool = False,
        mode: int = 0o600,
    ) -> int:
        """shmget(): look up or create the segment for ``key``.

        ``mode`` is accepted for call-site compatibility and ignored.
        """
        if key < 0:
            raise ValueError(f"key must be non-negative, got {key}")
        with self._mutex:
            seg_id = self._by_key.get(key)
            if seg_id is not None:
                if create and exclusive:
                    raise AlreadyExists(f"key {key} already has segment {seg_id}")
                seg = self._by_id[seg_id]
                if size > seg.size:
                    raise SizeMismatch(f"segment {seg_id} has {seg.size} bytes, asked for {size}")
                return seg_id
            if not create:
                raise NotFound(f"no segment for key {key}")
            if size <= 0:
                raise ValueError(f"size must be positive, got {size}")
            seg_id = next(self._ids)
            self._by_id[seg_id] = ShmSegment(seg_id, key, size, bytearray(size))
            self._by_key[key] = seg_id
            self.allocated += 1
            return seg_id

    def attach(self, segment_id: int, addr=None, flags: int = 0) -> ShmAttachment:
        """shmat(): ``addr`` and ``flags`` are ignored, as everything lives in one address space."""
        with self._mutex:
            seg = self._lookup(segment_id)
            if seg.removal_pending:
                raise Removed(f"segment {segment_id} is marked for removal")
            seg.attach_count += 1
            return ShmAttachment(self, seg, next(self._serials))

    def detach(self, attachment: ShmAttachment) -> None:
        """shmdt(): drop one reference, freeing the storage on the last one after removal."""
        with self._mutex:
            if attachment.detached:
                raise DoubleDetach(f"attachment {attachment.serial} already detached")
            attachment.detached = True
            seg = attachment._segment
            seg.attach_count -= 1
            if seg.removal_pending and seg.attach_count == 0:
                self._release(seg)

    def control(self, segment_id: int, cmd: ShmCmd) -> ShmInfo | None:
        """shmctl() restricted to IPC_STAT and IPC_RMID."""
        with self._mutex:
            seg = self._lookup(segment_id)
            if cmd is ShmCmd.STAT:
                return seg.info()
            if cmd is ShmCmd.REMOVE:
                seg.removal_pending = True
                # the key is free for reuse right away, as with IPC_RMID
                if self._by_key.get(seg.key) == seg.id:
                    del self._by_key[seg.key]
                if seg.attach_count == 0:
                    self._release(seg)
                return None
            raise ValueError(f"unknown command {cmd!r}")

    def stat(self, segment_id: int) -> ShmInfo:
        return self.control(segment_id, ShmCmd.STAT)

    def remove(self, segment_id: int) -> None:
        self.control(segment_id, ShmCmd.REMOVE)

    def _lookup(self, segment_id: int) -> ShmSegment:
        seg = self._by_id.get(segment_id)
        if seg is None:
            if segment_id in self._retired:
                raise Removed(f"segment {segment_id} has been released")
            raise NotFound(f"no segment with id {segment_id}")
        return seg

    def _release(self, seg: ShmSegment) -> None:
        assert not seg.released, f"segment {seg.id} released twice"
        self.releases.append(ReleaseRecord(seg.id, seg.removal_pending, seg.attach_count))
        seg.released = True
        seg.storage = bytearray()
        del self._by_id[seg.id]
        self._retired.add(seg.id)
        self.freed += 1

    def segments(self) -> list[ShmInfo]:
        with self._mutex:
            return [seg.info() for seg in self._by_id.values()]

    def dump(self) -> str:
        return "\n".join(
            f"id={s.id} key={s.key} size={s.size} attach_count={s.attach_count} "
            f"removal_pending={int(s.removal_pending)}"
            for s in self.segments()
        )
