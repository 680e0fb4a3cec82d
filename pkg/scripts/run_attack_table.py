#!/usr/bin/env python3
"""Run the attack over benchmarks x seeds and print the aggregate table.

Mirrors the random-camouflaging experiment: k gates picked per seed, one
attack per (benchmark, seed), run records collected and summarized.

    python scripts/run_attack_table.py --bench s344 s349 --k 32 --seeds 10 \
        --out results/ --jobs 4
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))
from seqdecam.cli import main as cli  # noqa: E402

BENCH_DIR = Path(__file__).resolve().parent.parent / "benchmarks"


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--bench", nargs="+", required=True, help="benchmark names")
    ap.add_argument("--k", type=int, default=32)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--out", default="results")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--bmc-inc", type=int, default=10)
    ap.add_argument("--max-bound", type=int, default=120)
    args = ap.parse_args()

    out = Path(args.out)
    rc = 0
    for name in args.bench:
        bench = BENCH_DIR / f"{name}.bench"
        if not bench.exists():
            print(f"{name}: missing {bench}; run scripts/fetch_benchmarks.py first")
            rc = 1
            continue
        indir = out / name / "in"
        for seed in range(args.seeds):
            cli([
                "camouflage", "--bench", str(bench), "--k", str(args.k),
                "--seed", str(seed), "--out", str(indir),
            ])
        rc |= cli([
            "attack", "--bench", str(bench), "--sidecar", str(indir),
            "--bmc-inc", str(args.bmc_inc), "--max-bound", str(args.max_bound),
            "--jobs", str(args.jobs), "--out", str(out / name / "runs"),
        ])
        cli(["report", str(out / name / "runs"), "--csv", str(out / name / "table.csv")])
    return rc


if __name__ == "__main__":
    sys.exit(main())
