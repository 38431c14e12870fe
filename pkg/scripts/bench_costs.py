"""Repeat the creation and PV microbenchmarks and report the spread of the ratios.

    python scripts/bench_costs.py [--repeats 5]
"""

import argparse
import statistics

from threadport import bench, sysv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--create-n", type=int, default=200)
    ap.add_argument("--pv-n", type=int, default=10_000)
    args = ap.parse_args()

    pairs = [("create", bench.CreateKind.THREAD, bench.CreateKind.PROCESS, "create_thread", "create_process")]
    if sysv.available():
        pairs.append(("pv", bench.PvKind.EMULATED, bench.PvKind.OS_PROCESS, "pv_thread", "pv_process"))
    for label, fast, slow, ref_fast, ref_slow in pairs:
        run = bench.bench_create if label == "create" else bench.bench_pv
        n = args.create_n if label == "create" else args.pv_n
        ratios = []
        for _ in range(args.repeats):
            a, b = run(fast, n), run(slow, n)
            print(a.record())
            print(b.record())
            ratios.append(b.mean_us / a.mean_us)
        print(f"summary={label} ratio_median={statistics.median(ratios):.1f} ratio_min={min(ratios):.1f} "
              f"ratio_max={max(ratios):.1f} reference_ratio={bench.reference_ratio(ref_fast, ref_slow):.1f} "
              f"direction_held={sum(r > 1 for r in ratios)}/{len(ratios)}")


if __name__ == "__main__":
    main()
