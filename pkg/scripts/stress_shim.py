"""Run the shim stress workloads at larger scales than the acceptance suite.

    python scripts/stress_shim.py [--scale 1]
"""

import argparse
import time

from threadport import stress


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=int, default=1, help="multiplier on every workload size")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    s = args.scale
    jobs = [
        ("shm_churn", lambda: stress.shm_churn(10_000 * s, args.seed)),
        ("signal_truth_table", lambda: stress.signal_truth_table(3)),
        ("globals_isolation", lambda: stress.globals_isolation(8, 10_000 * s, args.seed)),
        ("reclaim", lambda: stress.reclaim_stress(100 * s, args.seed)),
    ]
    for name, job in jobs:
        t0 = time.perf_counter()
        report = job()
        fields = " ".join(f"{k}={v}" for k, v in vars(report).items())
        print(f"workload={name} ok={int(report.ok)} {fields} elapsed_s={time.perf_counter() - t0:.2f}")


if __name__ == "__main__":
    main()
