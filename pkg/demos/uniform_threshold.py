"""Uniform(0,1) at r=1/4: one chain against the closed-form threshold.

Runs a threshold-engine chain, compares the tail-window mean quantile with the
radical closed form, and prints a coarse comparison of the admitted opinions
against the predicted limit law.

    python3 demos/uniform_threshold.py --n 200000
"""

import argparse
from fractions import Fraction

import numpy as np

from quantile_admission import measure as msr
from quantile_admission.harness import estimate_limit_quantile, ks_distance, last_window
from quantile_admission.limits import closed_form, limit_tail
from quantile_admission.process import run_chain


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--r", type=Fraction, default=Fraction(1, 4))
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    mu = msr.Uniform()
    spec = closed_form(mu, args.r)
    tr = run_chain(mu, args.r, args.n, "threshold", seed=args.seed)
    m_hat, se = estimate_limit_quantile(tr)
    print(f"predicted threshold  {spec.m:.6f}")
    print(f"estimated threshold  {m_hat:.6f} +- {se:.6f}  ({int(tr.t[-1])} proposals)")

    window = last_window(tr)
    print(f"KS distance to limit {ks_distance(window, spec):.4f}\n")
    print("   x    predicted tail   empirical tail")
    for x in np.linspace(0.0, 0.9, 10):
        print(f"{x:5.2f}   {limit_tail(spec, x):12.4f}   {np.mean(window >= x):12.4f}")


if __name__ == "__main__":
    main()
