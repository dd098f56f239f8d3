"""Independent reference computations used to freeze expected values.

Nothing here imports the package: each function recomputes its quantity from
first principles with a different method than the implementation uses.
"""

from fractions import Fraction
from math import ceil, erf, sqrt

import mpmath


def gamma_mpmath(alpha, beta, sigma, epsilon):
    """Closed form evaluated with mpmath's erfinv at 50 digits."""
    mpmath.mp.dps = 50
    if epsilon >= 0.5 or sigma == 0:
        return 0.0
    a, s, e = mpmath.mpf(alpha), mpmath.mpf(sigma), mpmath.mpf(epsilon)
    return float(s * mpmath.sqrt(2) / a * mpmath.erfinv(1 - 2 * e))


def gamma_scan(alpha, beta, sigma, epsilon, iters=200):
    """Threshold by bisection on the erf predicate itself (plain floats)."""
    target = 1 - epsilon

    def ok(w):
        return 0.5 * (1 + erf(alpha * beta * w / (beta * sigma * sqrt(2)))) >= target

    if ok(0.0):
        return 0.0
    lo, hi = 0.0, 64.0
    for _ in range(iters):
        mid = (lo + hi) / 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def batch_oracle(alpha, beta, gamma):
    return ceil(Fraction(alpha).limit_denominator(10**9) * beta * (1 + Fraction(gamma).limit_denominator(10**12)))


def credits_oracle(pattern, rate, n_slots):
    """Per-slot downlink credits with exact rational carry.

    The per-cycle rate ``rate * len(pattern)`` is spread evenly over the
    D slots; each D slot emits the integer part of the running total.
    """
    per_d = Fraction(rate).limit_denominator(10**9) * len(pattern) / pattern.count("D")
    acc = Fraction(0)
    out = []
    for k in range(n_slots):
        if pattern[k % len(pattern)] != "D":
            out.append(0)
            continue
        acc += per_d
        n = int(acc)
        acc -= n
        out.append(n)
    return out


def rate_bps(segments, payload_bytes, seconds):
    return segments * payload_bytes * 8 / seconds


def los_capacity_bps(alpha=1.12, payload=1400, slot_s=125e-6):
    return alpha * payload * 8 / slot_s
