"""Nonlinear large-deviation bounds and exact small-n tail oracles.

The two bound evaluators are pure formula plumbing: the rate-function values
phi are explicit inputs, never recomputed here, so tests can feed certified
values and separate solver uncertainty from formula correctness.  At desk
scale the upper bound is usually vacuous (the 1 - 64 L n^(-1/3) factor goes
nonpositive); that is reported honestly via a flag rather than hidden.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .bits import popcount
from .cube import CubeFunction


@dataclass(frozen=True)
class LdBoundReport:
    """Evaluation record of the tail sandwich at one parameter point."""

    t: float
    delta: float
    p: float
    phi_lower_arg: float  # phi_p(t - delta), used by the upper bound
    phi_at_t: float       # phi_p(t), used by the lower bound
    big_l: float
    upper_bound: float    # on log P(f >= t n); 0 when vacuous
    lower_bound: float    # on log P(f >= (t - delta) n)
    vacuous_upper: bool
    hypothesis_ok_lower: bool


def big_l(lip: float, d: float, p: float, delta: float) -> float:
    """L = (1/delta) (2 Lip + |log p(1-p)|)^(2/3) (2 D + Lip^2/delta)^(1/3)."""
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if lip < 0.0 or d < 0.0:
        raise ValueError("Lip and D must be nonnegative")
    a = 2.0 * lip + abs(math.log(p * (1.0 - p)))
    b = 2.0 * d + lip * lip / delta
    return (a ** (2.0 / 3.0)) * (b ** (1.0 / 3.0)) / delta


def ld_upper(phi: float, lip: float, d: float, n: int, p: float,
             t: float, delta: float) -> tuple[float, float, bool]:
    """Upper bound on log P(f(Y) >= t n) for Y ~ mu_p.

    Requires the hypothesis 0 < delta < phi / n, with phi = phi_p(t - delta).
    Returns (bound, L, vacuous); the bound is the trivial 0 when the factor
    1 - 64 L n^(-1/3) is nonpositive.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if phi < 0.0:
        raise ValueError("phi must be nonnegative")
    if not 0.0 < delta < phi / n:
        raise ValueError(
            f"hypothesis 0 < delta < phi/n violated: delta={delta}, phi/n={phi / n}"
        )
    lval = big_l(lip, d, p, delta)
    factor = 1.0 - 64.0 * lval * n ** (-1.0 / 3.0)
    vacuous = factor <= 0.0
    bound = 0.0 if vacuous else -phi * factor
    return bound, lval, vacuous


def ld_lower(phi_at_t: float, lip: float, n: int, t: float,
             delta: float) -> tuple[float, bool]:
    """Lower bound on log P(f(Y) >= (t - delta) n) for Y ~ mu_p.

    Valid whenever Lip^2 / (n delta^2) <= 1/2; the value is reported either
    way with the hypothesis flag.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if phi_at_t < 0.0:
        raise ValueError("phi must be nonnegative")
    ratio = lip * lip / (n * delta * delta)
    hypothesis_ok = ratio <= 0.5
    value = -phi_at_t * (1.0 + 2.0 * ratio) - 2.0
    return value, hypothesis_ok


def exact_tail(f: CubeFunction, p: float, t: float) -> float:
    """log P_{mu_p}(f(Y) >= t n), exactly, by log-sum-exp over the event.

    Returns -inf when the event is empty.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    n = f.n
    mask = f.values >= t * n
    if not mask.any():
        return -np.inf
    idx = np.nonzero(mask)[0]
    k = popcount(idx).astype(float)
    log_w = k * math.log(p) + (n - k) * math.log(1.0 - p)
    return float(logsumexp(log_w))


def report(t: float, delta: float, p: float, n: int, lip: float, d: float,
           phi_lower_arg: float, phi_at_t: float) -> LdBoundReport:
    """Bundle both bounds at one (t, delta, p) point into a report."""
    upper, lval, vac = ld_upper(phi_lower_arg, lip, d, n, p, t, delta)
    lower, hyp = ld_lower(phi_at_t, lip, n, t, delta)
    return LdBoundReport(t=t, delta=delta, p=p, phi_lower_arg=phi_lower_arg,
                         phi_at_t=phi_at_t, big_l=lval, upper_bound=upper,
                         lower_bound=lower, vacuous_upper=vac,
                         hypothesis_ok_lower=hyp)
