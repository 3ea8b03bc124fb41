"""Monte Carlo coverage of the level-beta prediction sets for one synthetic world.

    python3 scripts/run_coverage.py nonlinear --runs 1000 --seed 1
    python3 scripts/run_coverage.py highdim --runs 1000 --seed 1 --threads 4
"""

import argparse
import sys
import time

from cfpredict.experiments import EXPERIMENTS, CoverageConfig, coverage_run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--runs", type=int, default=1000)
    ap.add_argument("--beta", type=float, default=0.9)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--json")
    args = ap.parse_args()

    cfg = CoverageConfig(args.experiment, runs=args.runs, beta=args.beta, seed=args.seed)
    step = max(1, cfg.runs // 10)

    def progress(done):
        if done % step == 0:
            print(f"  {done}/{cfg.runs}", file=sys.stderr)

    t = time.perf_counter()
    report = coverage_run(cfg, threads=args.threads, progress=progress)
    print(report.table())
    print(f"{time.perf_counter() - t:.1f}s")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")


if __name__ == "__main__":
    main()
