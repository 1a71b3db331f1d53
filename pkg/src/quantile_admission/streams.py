"""Splittable counter-based random streams.

Every replica owns one Philox stream keyed by ``(seed, stream_id)``; a draw is
a pure function of the seed, the stream id and the Philox counter.
"""

from fractions import Fraction

import numpy as np


def make_rng(seed, stream=0):
    """Return a Philox-backed generator for ``(seed, stream)``."""
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream id must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def as_fraction(r):
    """Exact rational form of the quantile parameter.

    Floats are snapped to the nearest fraction with denominator <= 10**9 so that
    ``0.1`` means exactly 1/10 when comparing counts against ``r * k``.
    """
    if isinstance(r, Fraction):
        frac = r
    elif isinstance(r, str):
        frac = Fraction(r)
    else:
        frac = Fraction(float(r)).limit_denominator(10**9)
    if not 0 < frac < 1:
        raise ValueError(f"r must lie in (0, 1), got {r}")
    return frac


def rank(k, r):
    """Rank of the lower r-quantile among k values: ceil(r k), exact."""
    frac = as_fraction(r)
    return -(-frac.numerator * k // frac.denominator)
