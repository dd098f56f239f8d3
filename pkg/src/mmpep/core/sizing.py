"""Batch-retransmission sizing.

The number of packets assumed lost after a duplicate ACK is
``alpha * beta * (1 + gamma)``: everything sent during one HARQ feedback
gap plus a safety margin. ``gamma`` is the smallest margin that covers the
Gaussian spread of the per-gap arrival count with confidence ``1 - epsilon``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist

_STD_NORMAL = NormalDist()


def _check(alpha: float, beta: float, sigma: float) -> None:
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if sigma < 0 or math.isnan(sigma):
        raise ValueError(f"sigma must be >= 0, got {sigma}")


def coverage(omega: float, alpha: float, beta: float, sigma: float) -> float:
    """Probability that a margin ``omega`` covers the arrivals in one gap."""
    if sigma == 0:
        return 1.0 if omega >= 0 else 0.0
    return 0.5 * (1.0 + math.erf(alpha * beta * omega / (beta * sigma * math.sqrt(2.0))))


def compute_gamma(alpha: float, beta: float, sigma: float, epsilon: float) -> float:
    """Closed form: ``(sigma * sqrt(2) / alpha) * erfinv(1 - 2 epsilon)``.

    ``erfinv(y)`` is evaluated as ``Phi^-1((1 + y) / 2) / sqrt(2)``, so the
    whole expression reduces to ``sigma / alpha * Phi^-1(1 - epsilon)``.
    """
    _check(alpha, beta, sigma)
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if epsilon >= 0.5 or sigma == 0:
        return 0.0
    return sigma / alpha * _STD_NORMAL.inv_cdf(1.0 - epsilon)


def compute_gamma_bisect(alpha: float, beta: float, sigma: float, epsilon: float,
                         tol: float = 1e-13) -> float:
    """Infimum of the coverage threshold set, found by bisection on ``coverage``."""
    _check(alpha, beta, sigma)
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    target = 1.0 - epsilon
    if coverage(0.0, alpha, beta, sigma) >= target:
        return 0.0
    lo, hi = 0.0, 1.0
    while coverage(hi, alpha, beta, sigma) < target:
        hi *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if coverage(mid, alpha, beta, sigma) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def raw_batch_size(alpha: float, beta: float, gamma: float) -> float:
    return alpha * beta * (1.0 + gamma)


def round_batch(raw: float, rounding: str = "ceil") -> int:
    # absorb float noise such as 11.200000000000001
    if rounding == "ceil":
        n = math.ceil(raw - 1e-9)
    elif rounding == "floor":
        n = math.floor(raw + 1e-9)
    else:
        raise ValueError(f"rounding must be 'ceil' or 'floor', got {rounding!r}")
    return max(1, int(n))


@dataclass(frozen=True)
class BatchSizingParams:
    alpha: float = 1.12
    beta: int = 10
    sigma: float = 0.1
    epsilon: float = 0.01
    rounding: str = "ceil"
    gamma: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "gamma", compute_gamma(self.alpha, self.beta, self.sigma,
                                                        self.epsilon))
        round_batch(1.0, self.rounding)

    @property
    def raw(self) -> float:
        return raw_batch_size(self.alpha, self.beta, self.gamma)


def batch_size(params: BatchSizingParams, gamma: float | None = None) -> int:
    """``ceil(alpha * beta * (1 + gamma))`` (or floor, per ``params.rounding``)."""
    g = params.gamma if gamma is None else gamma
    return round_batch(raw_batch_size(params.alpha, params.beta, g), params.rounding)
