import pytest

from threadport import bench, sysv
from threadport.cli import main
from threadport.demo import ScenarioConfig, run_demo
from threadport.errors import ConfigError
from threadport.shortlock import LockMode


def test_fixed_demo_real_threads():
    res = run_demo(ScenarioConfig(workers=4, increments=1000, lock_mode=LockMode.FIXED, seed=5))
    assert res.ok and res.counter == 4000
    assert res.reclaim_left == 0 and res.live_allocations == 0


def test_demo_topology_in_registry():
    res = run_demo(ScenarioConfig(workers=3, increments=10))
    roles = [line.split()[1] for line in res.registry_dump.splitlines()]
    assert roles.count("role=Postmaster") == 1
    assert roles.count("role=Worker") == 3
    assert roles.count("role=Bootstrap") == 2


@pytest.mark.parametrize("schedule", ["random", "adversarial"])
def test_virtual_schedule_is_deterministic(schedule):
    cfg = ScenarioConfig(workers=3, increments=20, lock_mode=LockMode.LEGACY, seed=11, schedule=schedule)
    a, b = run_demo(cfg), run_demo(cfg)
    assert a.registry_dump == b.registry_dump
    assert [e.line() for e in a.lock_events] == [e.line() for e in b.lock_events]
    assert a.schedule == b.schedule and a.counter == b.counter


def test_legacy_adversarial_starves_and_fixed_completes():
    legacy = run_demo(ScenarioConfig(workers=4, increments=50, lock_mode=LockMode.LEGACY, seed=1, schedule="adversarial"))
    assert legacy.starved and legacy.counter < legacy.expected
    assert legacy.reclaim_left == 0 and legacy.live_allocations == 0
    fixed = run_demo(ScenarioConfig(workers=4, increments=50, lock_mode=LockMode.FIXED, seed=1, schedule="adversarial"))
    assert fixed.ok


@pytest.mark.parametrize(
    "cfg",
    [
        ScenarioConfig(workers=0),
        ScenarioConfig(increments=-1),
        ScenarioConfig(schedule="fastest"),
        ScenarioConfig(sem_initial=0),
        ScenarioConfig(workers=4, sem_initial=2, schedule="random"),
    ],
)
def test_demo_config_errors(cfg):
    with pytest.raises(ConfigError):
        run_demo(cfg)


def test_bench_preconditions():
    with pytest.raises(ValueError):
        bench.bench_create(bench.CreateKind.THREAD, 0)
    with pytest.raises(ValueError):
        bench.bench_pv(bench.PvKind.EMULATED, 9_999)


def test_bench_records_are_machine_tagged():
    r = bench.bench_pv(bench.PvKind.EMULATED, 10_000)
    assert r.iterations == 10_000 and r.mean_us > 0 and r.p95_us > 0
    assert f"machine={bench.machine_tag()}" in r.record()
    assert bench.reference_ratio("create_thread", "create_process") == pytest.approx(1700 / 52)


@pytest.mark.skipif(not sysv.available(), reason="kernel SysV IPC unavailable")
def test_kernel_semaphore_conserves_value():
    with sysv.KernelSemaphore(1) as s:
        for _ in range(100):
            s.p()
            s.v()
        assert s.value() == 1


def test_cli_explore_exit_codes(capsys):
    assert main(["explore", "--target", "LockLegacy", "--threads", "3", "--steps", "12"]) == 2
    out = capsys.readouterr().out
    assert "result=witness" in out and "Enqueue" in out and "wake_flag=1" in out
    assert main(["explore", "--target", "LockFixed", "--threads", "3", "--steps", "12"]) == 0
    assert "result=pass" in capsys.readouterr().out
    assert main(["explore", "--target", "SemModel", "--threads", "2", "--steps", "12"]) == 0


def test_cli_bound_exceeded(capsys):
    assert main(["explore", "--target", "LockFixed", "--threads", "3", "--steps", "40"]) == 1
    assert "error=BoundExceeded" in capsys.readouterr().out


def test_cli_demo(capsys):
    assert main(["demo", "--workers", "2", "--lock-mode", "fixed", "--increments", "100", "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert "counter=200 expected=200" in out and "registry slot=0 role=Postmaster" in out
    assert main(["demo", "--workers", "0"]) == 1


def test_cli_bench_pv(capsys):
    code = main(["bench", "pv"])
    out = capsys.readouterr().out
    assert "bench=pv_emulated" in out
    assert code in (0, 2)
    if "bench=pv_os_process" in out and "unsupported" not in out:
        assert "reference_ratio=3.0" in out
