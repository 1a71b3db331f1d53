"""GeometricAtomic(1/2) at r=3/5: random limits.

The drift crosses zero at every atom 1 - 2^-i, so different replicas settle on
different atoms. Runs an ensemble from the shipped config and prints the
cluster table next to the candidate limits from the classifier.

    python3 demos/geometric_nonuniqueness.py --replicas 60
"""

import argparse
from pathlib import Path

from quantile_admission.config import ExperimentConfig
from quantile_admission.harness import run_ensemble
from quantile_admission.limits import classify

CONFIG = Path(__file__).parent / "configs" / "geometric_atomic.ini"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--replicas", type=int, default=None, help="override n_replicas")
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--write", action="store_true", help="keep traces and summary.json")
    args = ap.parse_args()

    cfg = ExperimentConfig.from_file(CONFIG)
    if args.replicas:
        cfg.n_replicas = args.replicas
    if not args.write:
        cfg.out_dir = None

    cls = classify(cfg.measure, cfg.r)
    print(cls.report())
    summary = run_ensemble(cfg, workers=args.workers)
    print(f"verdict: {summary.verdict}  ({cfg.n_replicas} replicas of {cfg.n_admit})")
    print("  center   replicas  frequency")
    for c in summary.clusters:
        print(f"{c.center:8.4f}   {c.size:6d}   {c.frequency:8.3f}")


if __name__ == "__main__":
    main()
