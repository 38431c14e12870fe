"""Explore every lock protocol and the semaphore workloads across thread counts.

    python scripts/explore_locks.py [--steps 12] [--rounds 1]

Prints one key=value record per (target, threads) and the first legacy witness.
"""

import argparse
import time

from threadport import explorer
from threadport.shortlock import LockMode


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=12)
    ap.add_argument("--rounds", type=int, default=1)
    args = ap.parse_args()

    first_witness = None
    for mode in LockMode:
        for n in (2, 3, 4):
            model = explorer.LockModel(mode, n, args.rounds)
            t0 = time.perf_counter()
            res = explorer.explore(model, args.steps, explorer.LOCK_PROPERTIES)
            states = explorer.count_states(model, args.steps)
            verdict = "pass" if res.ok else f"witness:{res.property}"
            print(f"target=lock mode={mode.value} threads={n} steps={args.steps} result={verdict} "
                  f"reachable_states={states} elapsed_s={time.perf_counter() - t0:.3f}")
            if not res.ok and first_witness is None:
                first_witness = res
    for kind in explorer.SEM_WORKLOADS:
        for n in (1, 2, 3):
            model = explorer.sem_workload(kind, n)
            res = explorer.explore(model, 16, explorer.sem_properties(model))
            print(f"target=sem workload={kind} threads={n} steps=16 result={'pass' if res.ok else res.property} "
                  f"schedules={explorer.count_schedules(model, 16)}")
    if first_witness is not None:
        print()
        print(first_witness.render())


if __name__ == "__main__":
    main()
