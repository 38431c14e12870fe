import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from threadport.errors import AlreadyAttached, AlreadySealed, DuplicateName, NoContext, NotSealed, Sealed, TypeMismatch
from threadport.globalvars import (
    GlobalLayout,
    context_attach,
    define_global,
    global_get,
    global_set,
    qualify,
    seal,
)
from threadport.stress import globals_isolation


@pytest.fixture
def layout():
    lay = GlobalLayout()
    yield lay
    lay.detach()


def in_thread(fn):
    out = []
    t = threading.Thread(target=lambda: out.append(fn()))
    t.start()
    t.join(5)
    return out[0]


def test_define_assigns_dense_slots(layout):
    assert define_global(layout, "postmaster.c::Shutdown", 0).index == 0
    assert define_global(layout, "postmaster.c::Port", 5432).index == 1


def test_duplicate_name(layout):
    define_global(layout, "x", 0)
    with pytest.raises(DuplicateName):
        define_global(layout, "x", 1)


def test_file_statics_are_qualified(layout):
    a = layout.define_static("a.c", "x", 0)
    b = layout.define_static("b.c", "x", 0)
    assert (a.name, b.name) == ("a.c::x", "b.c::x") and a.index != b.index
    assert qualify("x") == "x"


def test_seal_rules(layout):
    with pytest.raises(NotSealed):
        layout.slot("missing")
    seal(layout)
    with pytest.raises(AlreadySealed):
        seal(layout)
    with pytest.raises(Sealed):
        define_global(layout, "late", 0)


def test_attach_requires_seal_and_copies_defaults(layout):
    define_global(layout, "n", 3)
    lst = define_global(layout, "buf", [])
    with pytest.raises(NotSealed):
        context_attach(layout)
    seal(layout)
    ctx = context_attach(layout)
    assert ctx.cells == [3, []]
    global_get(layout, lst).append(1)
    assert layout.defaults[1] == []  # the block owns a copy
    with pytest.raises(AlreadyAttached):
        context_attach(layout)


def test_threads_get_independent_blocks(layout):
    x = define_global(layout, "x", 0)
    seal(layout)
    context_attach(layout)
    global_set(layout, x, 7)

    def other():
        layout.attach()
        try:
            return global_get(layout, x)
        finally:
            layout.detach()

    assert in_thread(other) == 0
    assert global_get(layout, x) == 7


def test_get_without_context(layout):
    x = define_global(layout, "x", 0)
    seal(layout)
    with pytest.raises(NoContext):
        global_get(layout, x)


def test_type_mismatch(layout):
    x = define_global(layout, "x", 0)
    seal(layout)
    context_attach(layout)
    with pytest.raises(TypeMismatch):
        global_set(layout, x, "seven")
    with pytest.raises(TypeMismatch):
        global_set(layout, x, True)


def test_every_slot_resolves_from_every_context(layout):
    for i in range(10):
        define_global(layout, f"g{i}", i)
    seal(layout)

    def read_all():
        layout.attach()
        try:
            return [layout.get(s) for s in layout.slots()]
        finally:
            layout.detach()

    assert in_thread(read_all) == list(range(10)) == read_all()


def test_detach_releases_block(layout):
    define_global(layout, "x", 0)
    seal(layout)
    ctx = context_attach(layout)
    assert layout.live_contexts == 1
    assert layout.detach() is ctx and ctx.released
    assert layout.live_contexts == 0


def test_dump(layout):
    define_global(layout, "a.c::x", 1)
    define_global(layout, "y", "s")
    assert layout.dump() == "0 a.c::x 1\n1 y 's'"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.text(min_size=1, max_size=6), unique=True, max_size=12))
def test_indices_follow_definition_order(names):
    lay = GlobalLayout()
    assert [lay.define(n, 0).index for n in names] == list(range(len(names)))


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_concurrent_isolation_small(seed):
    report = globals_isolation(threads=4, ops=2000, seed=seed)
    assert report.ok, report
