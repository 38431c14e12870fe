"""Former process globals, one private copy per thread.

Every global is registered in a :class:`GlobalLayout`.  File-scoped statics
are qualified as ``"<file>::<name>"`` so two files may both keep an ``x``.
Once the layout is sealed, each thread attaches a :class:`GlobalContext`
holding one cell per slot.  A read resolves in three hops: the calling
thread's private pointer, then its context block, then the slot's cell.

State that threads must really share belongs in a shared-memory segment
from :mod:`threadport.shm_sim`, not here.
"""

from __future__ import annotations

import copy
import threading
from dataclasses import dataclass, field
from typing import Any

from threadport.errors import (
    AlreadyAttached,
    AlreadySealed,
    DuplicateName,
    NoContext,
    NotSealed,
    Sealed,
    TypeMismatch,
)


def qualify(name: str, filename: str | None = None) -> str:
    return name if filename is None else f"{filename}::{name}"


@dataclass(frozen=True)
class GlobalSlot:
    index: int
    name: str
    type_tag: type
    layout_id: int


@dataclass
class GlobalLayout:
    names: list[str] = field(default_factory=list)
    defaults: list[Any] = field(default_factory=list)
    type_tags: list[type] = field(default_factory=list)
    sealed: bool = False

    def __post_init__(self) -> None:
        self._index: dict[str, int] = {}
        self._local = threading.local()
        self._contexts: dict[int, GlobalContext] = {}
        self._mutex = threading.Lock()

    def define(self, qualified_name: str, default: Any, type_tag: type | None = None) -> GlobalSlot:
        if self.sealed:
            raise Sealed("layout is sealed; define every global before threads start")
        if qualified_name in self._index:
            raise DuplicateName(f"global {qualified_name!r} already defined")
        index = len(self.names)
        tag = type(default) if type_tag is None else type_tag
        self.names.append(qualified_name)
        self.defaults.append(default)
        self.type_tags.append(tag)
        self._index[qualified_name] = index
        return GlobalSlot(index, qualified_name, tag, id(self))

    def define_static(self, filename: str, name: str, default: Any, type_tag: type | None = None) -> GlobalSlot:
        return self.define(qualify(name, filename), default, type_tag)

    def seal(self) -> None:
        if self.sealed:
            raise AlreadySealed("layout already sealed")
        self.sealed = True

    def slot(self, qualified_name: str) -> GlobalSlot:
        if not self.sealed:
            raise NotSealed("slots are handed out only from a sealed layout")
        i = self._index[qualified_name]
        return GlobalSlot(i, qualified_name, self.type_tags[i], id(self))

    def slots(self) -> list[GlobalSlot]:
        return [self.slot(n) for n in self.names]

    def __len__(self) -> int:
        return len(self.names)

    # per-thread contexts

    def attach(self) -> GlobalContext:
        """Give the calling thread a fresh block initialized from the defaults."""
        if not self.sealed:
            raise NotSealed("seal the layout before attaching threads")
        if getattr(self._local, "context", None) is not None:
            raise AlreadyAttached("this thread already has a context")
        owner = threading.get_ident()
        ctx = GlobalContext(owner, [copy.copy(d) for d in self.defaults], self)
        self._local.context = ctx
        with self._mutex:
            self._contexts[id(ctx)] = ctx
        return ctx

    def detach(self) -> GlobalContext | None:
        """Drop the calling thread's pointer; returns the released block."""
        ctx = getattr(self._local, "context", None)
        if ctx is None:
            return None
        self._local.context = None
        with self._mutex:
            self._contexts.pop(id(ctx), None)
        ctx.released = True
        return ctx

    def current(self) -> GlobalContext:
        ctx = getattr(self._local, "context", None)
        if ctx is None:
            raise NoContext("calling thread has no global context")
        return ctx

    @property
    def live_contexts(self) -> int:
        with self._mutex:
            return len(self._contexts)

    def get(self, slot: GlobalSlot) -> Any:
        return self.current().get(slot)

    def set(self, slot: GlobalSlot, value: Any) -> None:
        self.current().set(slot, value)

    def dump(self) -> str:
        return "\n".join(f"{i} {n} {self.defaults[i]!r}" for i, n in enumerate(self.names))


@dataclass
class GlobalContext:
    owner: int
    cells: list[Any]
    layout: GlobalLayout = field(repr=False)
    released: bool = False

    def _check(self, slot: GlobalSlot) -> None:
        if slot.layout_id != id(self.layout):
            raise KeyError(f"slot {slot.name!r} belongs to another layout")

    def get(self, slot: GlobalSlot) -> Any:
        self._check(slot)
        return self.cells[slot.index]

    def set(self, slot: GlobalSlot, value: Any) -> None:
        self._check(slot)
        tag = slot.type_tag
        if not isinstance(value, tag) or (tag is int and isinstance(value, bool)):
            raise TypeMismatch(f"{slot.name} holds {tag.__name__}, got {type(value).__name__}")
        self.cells[slot.index] = value


def define_global(layout: GlobalLayout, qualified_name: str, default: Any) -> GlobalSlot:
    return layout.define(qualified_name, default)


def seal(layout: GlobalLayout) -> None:
    layout.seal()


def context_attach(layout: GlobalLayout) -> GlobalContext:
    return layout.attach()


def global_get(layout: GlobalLayout, slot: GlobalSlot) -> Any:
    return layout.get(slot)


def global_set(layout: GlobalLayout, slot: GlobalSlot, value: Any) -> None:
    layout.set(slot, value)
