"""Command-line harness.

    threadport bench create|pv [-n N]
    threadport demo --workers N --lock-mode legacy|fixed --seed S [--schedule real|random|adversarial]
    threadport explore --target SemModel|LockLegacy|LockFixed|LockFlagLess --threads K --steps M

``bench`` and ``demo`` run real threads; ``explore`` is single-threaded.
Results are printed as ``key=value`` records.  Exit status: 0 on success or
Pass, 2 on a witness or violated relation, 1 on error.
"""

from __future__ import annotations

import argparse
import sys
import time

from threadport import bench, explorer
from threadport.demo import SCHEDULES, ScenarioConfig, run_demo
from threadport.errors import ThreadportError, Unsupported
from threadport.shortlock import LockMode

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2

LOCK_TARGETS = {
    "LockLegacy": LockMode.LEGACY,
    "LockFixed": LockMode.FIXED,
    "LockFlagLess": LockMode.FLAGLESS,
}
TARGETS = ("SemModel", *LOCK_TARGETS)


def emit(**fields) -> None:
    print(" ".join(f"{k}={v}" for k, v in fields.items()))


def _relation(fast: bench.BenchResult, slow: bench.BenchResult, ref_fast: str, ref_slow: str) -> bool:
    holds = fast.mean_us < slow.mean_us
    emit(
        relation=f"{fast.name}<{slow.name}",
        holds=int(holds),
        measured_ratio=f"{slow.mean_us / fast.mean_us:.1f}",
        reference_ratio=f"{bench.reference_ratio(ref_fast, ref_slow):.1f}",
        reference_us=f"{bench.REFERENCE_US[ref_fast]}/{bench.REFERENCE_US[ref_slow]}",
    )
    return holds


def cmd_bench(args) -> int:
    if args.what == "create":
        n = args.n or 200
        thread = bench.bench_create(bench.CreateKind.THREAD, n)
        print(thread.record())
        try:
            process = bench.bench_create(bench.CreateKind.PROCESS, n)
        except Unsupported as e:
            emit(bench="create_process", unsupported=str(e).replace(" ", "_"))
            return EXIT_OK
        print(process.record())
        return EXIT_OK if _relation(thread, process, "create_thread", "create_process") else EXIT_VIOLATION
    n = args.n or bench.MIN_PV_ITERATIONS
    emulated = bench.bench_pv(bench.PvKind.EMULATED, n)
    print(emulated.record())
    try:
        kernel = bench.bench_pv(bench.PvKind.OS_PROCESS, n)
    except Unsupported as e:
        emit(bench="pv_os_process", unsupported=str(e).replace(" ", "_"))
        return EXIT_OK
    print(kernel.record())
    return EXIT_OK if _relation(emulated, kernel, "pv_thread", "pv_process") else EXIT_VIOLATION


def cmd_demo(args) -> int:
    cfg = ScenarioConfig(
        workers=args.workers,
        increments=args.increments,
        lock_mode=LockMode(args.lock_mode),
        seed=args.seed,
        schedule=args.schedule,
        step_budget=args.steps,
    )
    result = run_demo(cfg)
    emit(
        workers=cfg.workers,
        lock_mode=cfg.lock_mode.value,
        schedule=cfg.schedule,
        seed=cfg.seed,
        counter=result.counter,
        expected=result.expected,
        starved=",".join(map(str, result.starved)) or "none",
        steps=result.steps,
        reclaim_left=result.reclaim_left,
        swept=result.swept,
    )
    for line in result.registry_dump.splitlines():
        print("registry", line)
    if args.events:
        for event in result.lock_events:
            print("event", event.line())
    return EXIT_OK if result.ok else EXIT_VIOLATION


def cmd_explore(args) -> int:
    if args.target == "SemModel":
        models = [explorer.sem_workload(kind, args.threads) for kind in explorer.SEM_WORKLOADS]
        runs = [(m.name, m, explorer.sem_properties(m)) for m in models]
    else:
        mode = LOCK_TARGETS[args.target]
        m = explorer.LockModel(mode, args.threads, args.rounds)
        runs = [(args.target, m, explorer.LOCK_PROPERTIES)]
    status = EXIT_OK
    for name, model, props in runs:
        t0 = time.perf_counter()
        result = explorer.explore(model, args.steps, props)
        elapsed = f"{time.perf_counter() - t0:.3f}"
        if result.ok:
            emit(target=args.target, model=name, threads=args.threads, steps=args.steps,
                 result="pass", states=result.states, elapsed_s=elapsed)
            continue
        status = EXIT_VIOLATION
        emit(target=args.target, model=name, threads=args.threads, steps=args.steps, result="witness",
             property=result.property, states=result.states, elapsed_s=elapsed)
        print(result.render())
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="threadport", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="thread vs process microbenchmarks")
    p.add_argument("what", choices=("create", "pv"))
    p.add_argument("-n", type=int, default=None, help="iterations")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("demo", help="mini postmaster with worker threads")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--increments", type=int, default=1000)
    p.add_argument("--lock-mode", choices=[m.value for m in LockMode], default="fixed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--schedule", choices=SCHEDULES, default="real")
    p.add_argument("--steps", type=int, default=None, help="step budget under the harness")
    p.add_argument("--events", action="store_true", help="print the lock event log")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("explore", help="exhaustive schedule exploration")
    p.add_argument("--target", choices=TARGETS, required=True)
    p.add_argument("--threads", type=int, default=3)
    p.add_argument("--steps", type=int, default=12)
    p.add_argument("--rounds", type=int, default=1, help="acquire/release rounds per lock thread")
    p.set_defaults(func=cmd_explore)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ThreadportError, ValueError) as e:
        emit(error=type(e).__name__, message=f'"{e}"')
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
