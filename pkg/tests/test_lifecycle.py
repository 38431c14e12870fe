import threading
import time

import pytest

from threadport import lifecycle
from threadport.errors import AlreadyJoined, Exhausted, ThreadStillRunning, UnknownThread
from threadport.globalvars import GlobalLayout
from threadport.lifecycle import Role, State, ThreadRegistry, exit_current, sleep_current
from threadport.stress import reclaim_stress


@pytest.fixture
def reg():
    return ThreadRegistry()


def test_spawn_registers_running_entry(reg):
    gate = threading.Event()
    slot = reg.spawn(gate.wait, Role.WORKER, 5)
    assert reg.state(slot) is State.RUNNING and reg.entry(slot).role is Role.WORKER
    assert reg.running_count() == 1
    gate.set()
    reg.join(slot)
    assert reg.running_count() == 0


def test_spawn_many_distinct_slots(reg):
    slots = [reg.spawn(lambda: 0) for _ in range(5)]
    assert slots == list(range(5))
    for s in slots:
        reg.join(s)


def test_capacity(reg):
    small = ThreadRegistry(capacity=1)
    small.join(small.spawn(lambda: 0))
    with pytest.raises(Exhausted):
        small.spawn(lambda: 0)


def test_exit_status_reaches_joiner(reg):
    assert reg.join(reg.spawn(lambda: exit_current(0))) == 0
    assert reg.join(reg.spawn(lambda: exit_current(7))) == 7
    assert reg.join(reg.spawn(lambda: 3)) == 3


@pytest.mark.parametrize("fn,status", [(lifecycle.exit, 1), (lifecycle._exit, 2)])
def test_exit_aliases(reg, fn, status):
    assert reg.join(reg.spawn(lambda: fn(status))) == status


def test_abort_maps_to_thread_exit(reg):
    slot = reg.spawn(lifecycle.abort)
    assert reg.join(slot) == 134 and reg.state(slot) is State.EXITED


def test_abnormal_exit_is_trapped(reg):
    def boom():
        raise RuntimeError("boom")

    slot = reg.spawn(boom)
    assert reg.join(slot) is None
    assert reg.state(slot) is State.ABNORMAL
    assert isinstance(reg.entry(slot).error, RuntimeError)


def test_join_errors(reg):
    slot = reg.spawn(lambda: 0)
    reg.join(slot)
    with pytest.raises(AlreadyJoined):
        reg.join(slot)
    with pytest.raises(UnknownThread):
        reg.join(99)


def test_detach_then_exit_is_reaped_without_join(reg):
    gate = threading.Event()
    slot = reg.spawn(gate.wait, Role.WORKER, 5)
    reg.detach(slot)
    gate.set()
    reg.entry(slot).done.wait(5)
    assert reg.entry(slot).reaped and not reg.entry(slot).joined
    with pytest.raises(AlreadyJoined):
        reg.join(slot)


def test_allocations_left_on_exit_stay_for_sweep(reg):
    def worker():
        for _ in range(3):
            reg.allocator.alloc(32)
        exit_current(0)

    slot = reg.spawn(worker)
    reg.join(slot)
    assert len(reg.reclaim.owned_by(slot)) == 3


def test_sweep_after_abnormal_exit(reg):
    def worker():
        for _ in range(3):
            reg.allocator.alloc(8)
        raise ValueError

    slot = reg.spawn(worker)
    reg.join(slot)
    assert reg.reclaim_sweep(slot) == 3
    assert reg.reclaim.owned_by(slot) == [] and reg.allocator.live == 0
    assert reg.reclaim_sweep(slot) == 0


def test_sweep_on_running_thread(reg):
    gate = threading.Event()
    slot = reg.spawn(gate.wait, Role.WORKER, 5)
    with pytest.raises(ThreadStillRunning):
        reg.reclaim_sweep(slot)
    gate.set()
    reg.join(slot)


def test_sweep_is_main_thread_only(reg):
    slot = reg.spawn(lambda: 0)
    reg.join(slot)
    errors = []
    t = threading.Thread(target=lambda: errors.append(pytest.raises(PermissionError, reg.reclaim_sweep, slot)))
    t.start()
    t.join()
    assert errors


def test_allocation_needs_registered_thread(reg):
    with pytest.raises(UnknownThread):
        reg.allocator.alloc(8)


def test_globals_block_freed_on_clean_exit_and_kept_on_crash(reg):
    layout = GlobalLayout()
    layout.define("x", 0)
    layout.seal()
    reg.bind_globals(layout)
    reg.join(reg.spawn(lambda: 0))
    assert reg.allocator.live == 0

    def crash():
        raise RuntimeError

    slot = reg.spawn(crash)
    reg.join(slot)
    assert reg.allocator.live == 1 and layout.live_contexts == 0
    assert reg.reclaim_sweep(slot) == 1 and reg.allocator.live == 0


def test_sleep_blocks_only_the_caller(reg):
    counter = [0]
    stop = threading.Event()

    def busy():
        while not stop.is_set():
            counter[0] += 1
            time.sleep(0.001)

    slot = reg.spawn(busy)
    time.sleep(0.01)
    before = counter[0]
    t0 = time.monotonic()
    sleep_current(0.05)
    assert time.monotonic() - t0 >= 0.05
    assert counter[0] - before >= 10
    stop.set()
    reg.join(slot)


def test_zero_sleep_returns_immediately():
    t0 = time.monotonic()
    sleep_current(0)
    assert time.monotonic() - t0 < 0.01


def test_no_wrappers_for_identity_mappings():
    for name in ("getenv", "putenv", "setsid"):
        assert not hasattr(lifecycle, name)


def test_dump(reg):
    reg.join(reg.spawn(lambda: 0, Role.BOOTSTRAP, name="startup"))
    assert reg.dump() == "slot=0 role=Bootstrap name=startup state=Exited(0) joined reaped"


@pytest.mark.parametrize("seed", [0, 1])
def test_reclaim_stress_small(seed):
    report = reclaim_stress(workers=20, seed=seed)
    assert report.ok, report
