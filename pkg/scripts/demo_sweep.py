"""Run the mini-postmaster demo over seeds, lock modes and schedules.

    python scripts/demo_sweep.py [--seeds 10] [--workers 4] [--increments 1000]
"""

import argparse
import itertools

from threadport.demo import SCHEDULES, ScenarioConfig, run_demo
from threadport.shortlock import LockMode


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--increments", type=int, default=1000)
    args = ap.parse_args()

    for mode, schedule in itertools.product((LockMode.FIXED, LockMode.LEGACY), SCHEDULES):
        complete = starved_runs = 0
        for seed in range(args.seeds):
            cfg = ScenarioConfig(args.workers, args.increments, mode, seed, schedule, starvation_timeout=1.0)
            res = run_demo(cfg)
            complete += res.ok
            starved_runs += bool(res.starved)
        print(f"lock_mode={mode.value} schedule={schedule} runs={args.seeds} complete={complete} "
              f"starved_runs={starved_runs}")


if __name__ == "__main__":
    main()
