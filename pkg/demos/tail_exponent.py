"""Exponential(1) at r=1/2: the limit law has a doubled tail rate.

Under the limit, log P(X >= s) / (-s) climbs towards 2 as s grows. Prints the
local exponent along s together with an empirical estimate from a long chain.

    python3 demos/tail_exponent.py
"""

import argparse
from fractions import Fraction

import numpy as np

from quantile_admission import measure as msr
from quantile_admission.harness import last_window
from quantile_admission.limits import closed_form, limit_tail, tail_exponent
from quantile_admission.process import run_chain


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10**6)
    ap.add_argument("--seed", type=int, default=4)
    args = ap.parse_args()

    mu = msr.Exponential(1.0)
    spec = closed_form(mu, Fraction(1, 2))
    window = last_window(run_chain(mu, Fraction(1, 2), args.n, "threshold", seed=args.seed))
    print(f"threshold {spec.m:.6f}\n")
    print("    s   exponent   predicted tail   empirical tail")
    for s in (1, 2, 3, 4, 5, 10, 20, 50, 100):
        emp = np.mean(window >= s)
        emp_txt = f"{emp:14.3e}" if emp > 0 else f"{'-':>14}"
        print(f"{s:5d}   {tail_exponent(spec, float(s)):8.5f}   {limit_tail(spec, float(s)):14.3e}   {emp_txt}")


if __name__ == "__main__":
    main()
