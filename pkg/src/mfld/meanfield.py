"""The naive mean-field variational problem and the rate function phi_p.

Products are parameterized by their mean vector through m = tanh(z), so the
ascent runs unconstrained and iterates stay strictly interior.  The Gibbs
objective

    G(m) = E_{xi_m} f  -  KL(xi_m || mu_p)

is multilinear minus a separable convex term; global optimality is out of
reach in general, so the solver is multi-start (a mu_p start plus scrambled
Sobol starts) and all downstream consumers treat its output as the best
found value.  phi_p(t) is computed by a Lagrangian sweep in the constraint
multiplier; since feasible products witness upper bounds on an infimum,
phi results are certified-from-above, and a separate Donsker-Varadhan style
helper gives certified lower bounds from dense tables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import logsumexp
from scipy.stats import qmc

from .bits import popcount, sign_matrix
from .cube import CubeFunction, gradient_table, harmonic_extension, lip, weight_vector
from .graphs import SubgraphModel, expected_grad, expected_value

_Z_CAP = 18.0  # |arctanh(m)| cap keeps 1 - m^2 well away from underflow


@dataclass(frozen=True)
class MeanFieldProblem:
    """A Gibbs / rate-function instance over product measures."""

    f: object               # CubeFunction or SubgraphModel
    p: float = 0.5
    restarts: int = 16
    max_iter: int = 400
    tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        if not isinstance(self.f, (CubeFunction, SubgraphModel)):
            raise TypeError("f must be a CubeFunction or a SubgraphModel")
        if self.restarts < 1:
            raise ValueError("need at least one start")


@dataclass(frozen=True)
class SolveResult:
    mean: np.ndarray
    objective: float
    converged: bool
    iterations: int
    restarts_used: int


@dataclass(frozen=True)
class PhiResult:
    """Best-found value of the constrained product optimization.

    ``value`` is an upper bound on the true infimum (it is the divergence of
    a feasible product whenever ``feasible``); ``converged`` records whether
    the constraint was activated within tolerance.
    """

    value: float
    multiplier: float
    feasible: bool
    converged: bool
    boundary: bool
    mean: np.ndarray | None
    constraint_gap: float


# ---------------------------------------------------------------------------
# Energy terms: E_{xi_m} f and its gradient in m
# ---------------------------------------------------------------------------

class _TableEnergy:
    def __init__(self, f: CubeFunction):
        self.f = f
        self.n = f.n
        self._signs = sign_matrix(f.n)
        self._lip = lip(f)
        self._grad_cache = gradient_table(f) if f.n <= 14 else None

    def value(self, m: np.ndarray) -> float:
        return float(weight_vector(m) @ self.f.values)

    def grad(self, m: np.ndarray) -> np.ndarray:
        w = weight_vector(m)
        if self._grad_cache is not None:
            return self._grad_cache.T @ w
        # d/dm_i of the multilinear extension via the weight ratio; iterates
        # are strictly interior so 1 + m_i y_i is bounded away from 0
        t = w * self.f.values
        out = np.empty(self.n)
        step = 1 << 16
        for i in range(self.n):
            acc = 0.0
            for lo in range(0, t.size, step):
                s = self._signs[lo:lo + step, i].astype(float)
                acc += float(np.sum(t[lo:lo + step] * s / (1.0 + m[i] * s)))
            out[i] = acc
        return out

    def lip_scale(self) -> float:
        return max(self._lip, 1e-12)


class _SubgraphEnergy:
    def __init__(self, model: SubgraphModel):
        self.model = model
        self.n = model.n

    def value(self, m: np.ndarray) -> float:
        return expected_value(self.model, m)

    def grad(self, m: np.ndarray) -> np.ndarray:
        return expected_grad(self.model, m)

    def lip_scale(self) -> float:
        # scale heuristic: gradient magnitude at the centroid and corners
        cands = [np.zeros(self.n), np.full(self.n, 0.8), np.full(self.n, -0.8)]
        return max(max(float(np.max(np.abs(self.grad(c)))) for c in cands), 1e-12)

    def max_value(self) -> float:
        return self.value(np.ones(self.n))  # complete graph need not be the max


def _energy_of(f) -> object:
    return _TableEnergy(f) if isinstance(f, CubeFunction) else _SubgraphEnergy(f)


# ---------------------------------------------------------------------------
# The separable divergence term
# ---------------------------------------------------------------------------

def _xlogx(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    pos = u > 0.0
    out[pos] = u[pos] * np.log(u[pos])
    return out


def kl_product_to_mup(m, p: float) -> float:
    """KL(xi_m || mu_p) = sum_i of the binary divergence of (1+m_i)/2 vs p."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    m = np.asarray(m, dtype=float).reshape(-1)
    if np.any(np.abs(m) > 1.0):
        raise ValueError("means must lie in [-1, 1]")
    a = (1.0 + m) / 2.0
    b = (1.0 - m) / 2.0
    val = (_xlogx(a) - a * math.log(p)) + (_xlogx(b) - b * math.log(1.0 - p))
    return float(val.sum())


def _kl_grad(m: np.ndarray, p: float) -> np.ndarray:
    return np.arctanh(m) - math.atanh(2.0 * p - 1.0)


def expect_under_product(f: CubeFunction, m) -> float:
    """E f under the product with mean m; equals the harmonic extension."""
    return harmonic_extension(f, m)


# ---------------------------------------------------------------------------
# Multi-start mirror ascent
# ---------------------------------------------------------------------------

def _starts(prob: MeanFieldProblem, n: int) -> list:
    z_p = math.atanh(2.0 * prob.p - 1.0)
    starts = [np.full(n, z_p)]
    if prob.restarts > 1:
        sob = qmc.Sobol(d=n, scramble=True, seed=prob.seed)
        count = prob.restarts - 1
        pts = sob.random_base2(max(int(np.ceil(np.log2(count))), 0))[:count]
        starts.extend(np.arctanh(np.clip(2.0 * pts - 1.0, -0.95, 0.95)))
    return starts


def _ascend(energy, p: float, lam: float, z0: np.ndarray,
            max_iter: int, tol: float):
    """Maximize lam * E(tanh z) - KL(tanh z || mu_p) over z, unconstrained."""

    def negative(z):
        z = np.clip(z, -_Z_CAP, _Z_CAP)
        m = np.tanh(z)
        val = lam * energy.value(m) - kl_product_to_mup(m, p)
        grad_m = lam * energy.grad(m) - _kl_grad(m, p)
        return -val, -grad_m * (1.0 - m * m)

    res = minimize(negative, np.clip(z0, -_Z_CAP, _Z_CAP), jac=True,
                   method="L-BFGS-B",
                   options={"maxiter": max_iter, "ftol": 1e-14, "gtol": tol})
    z = np.clip(res.x, -_Z_CAP, _Z_CAP)
    m = np.tanh(z)
    val = lam * energy.value(m) - kl_product_to_mup(m, p)
    return m, float(val), bool(res.success), int(res.nit)


def _best_ascent(prob: MeanFieldProblem, energy, lam: float):
    best = None
    for k, z0 in enumerate(_starts(prob, energy.n)):
        m, val, ok, nit = _ascend(energy, prob.p, lam, z0, prob.max_iter, prob.tol)
        if best is None or val > best[1] + 1e-15:
            best = (m, val, ok, nit, k)
    return best


def solve_gibbs(prob: MeanFieldProblem) -> SolveResult:
    """Best-found product maximizer of E f - KL( . || mu_p).

    For dense tables the returned objective is verified against the exact
    log-partition value (the variational principle makes it an upper bound
    on any product objective); a violation indicates a bug, not data.
    """
    energy = _energy_of(prob.f)
    m, val, ok, nit, k = _best_ascent(prob, energy, 1.0)
    if isinstance(prob.f, CubeFunction):
        cap = log_partition(prob.f, prob.p)
        if val > cap + 1e-7 * max(1.0, abs(cap)):
            raise RuntimeError("product objective exceeds the exact log-partition")
    return SolveResult(mean=m, objective=val, converged=ok, iterations=nit,
                       restarts_used=prob.restarts)


def log_partition(f: CubeFunction, p: float) -> float:
    """log int e^f d mu_p, exactly from the dense table."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    n = f.n
    k = popcount(np.arange(1 << n)).astype(float)
    logw = k * math.log(p) + (n - k) * math.log(1.0 - p)
    return float(logsumexp(f.values + logw))


# ---------------------------------------------------------------------------
# The rate function
# ---------------------------------------------------------------------------

def rate_function_phi(prob: MeanFieldProblem, t: float,
                      activation_tol: float | None = None) -> PhiResult:
    """phi_p(t) = inf { KL(xi || mu_p) : E_xi f >= t n } over products.

    Computed by a bisection sweep in the Lagrange multiplier; the returned
    value is the divergence of the best feasible product found, hence an
    upper bound on the infimum, exact when the inner maximization is global
    and the constraint activates.  Infeasible targets (t n above the maximum
    of f) give +inf; the boundary target returns the point-mass divergence
    and is flagged.
    """
    energy = _energy_of(prob.f)
    n = energy.n
    tn = t * n
    if activation_tol is None:
        activation_tol = 1e-6 * n * energy.lip_scale()

    e0 = energy.value(np.full(n, 2.0 * prob.p - 1.0))
    if e0 >= tn:
        return PhiResult(value=0.0, multiplier=0.0, feasible=True, converged=True,
                         boundary=False, mean=np.full(n, 2.0 * prob.p - 1.0),
                         constraint_gap=e0 - tn)

    if isinstance(prob.f, CubeFunction):
        fmax = float(np.max(prob.f.values))
        if tn > fmax + 1e-12:
            return PhiResult(value=np.inf, multiplier=np.inf, feasible=False,
                             converged=True, boundary=False, mean=None,
                             constraint_gap=-np.inf)
        if tn >= fmax - 1e-12:
            # point-mass limit over the maximizing vertices
            idx = np.nonzero(prob.f.values >= fmax - 1e-12)[0]
            best = np.inf
            best_m = None
            from .bits import vertex_to_signs

            for y in idx:
                s = vertex_to_signs(int(y), n)
                val = kl_product_to_mup(s, prob.p)
                if val < best:
                    best, best_m = val, s
            return PhiResult(value=best, multiplier=np.inf, feasible=True,
                             converged=True, boundary=True, mean=best_m,
                             constraint_gap=0.0)

    # expand the multiplier until the constraint is reachable
    lam_hi = 1.0
    hits = None
    for _ in range(60):
        m, _, ok, nit, _ = _best_ascent(prob, energy, lam_hi)
        if energy.value(m) >= tn:
            hits = m
            break
        lam_hi *= 2.0
    if hits is None:
        return PhiResult(value=np.inf, multiplier=lam_hi, feasible=False,
                         converged=False, boundary=False, mean=None,
                         constraint_gap=energy.value(m) - tn)

    lam_lo = 0.0
    best_feasible = (kl_product_to_mup(hits, prob.p), hits, lam_hi)
    for _ in range(64):
        lam_mid = 0.5 * (lam_lo + lam_hi)
        m, _, ok, nit, _ = _best_ascent(prob, energy, lam_mid)
        ev = energy.value(m)
        if ev >= tn:
            lam_hi = lam_mid
            cand = kl_product_to_mup(m, prob.p)
            if cand < best_feasible[0]:
                best_feasible = (cand, m, lam_mid)
            if abs(ev - tn) <= activation_tol:
                return PhiResult(value=cand, multiplier=lam_mid, feasible=True,
                                 converged=True, boundary=False, mean=m,
                                 constraint_gap=ev - tn)
        else:
            lam_lo = lam_mid
        if lam_hi - lam_lo < 1e-14 * max(1.0, lam_hi):
            break
    val, m, lam = best_feasible
    return PhiResult(value=val, multiplier=lam, feasible=True, converged=False,
                     boundary=False, mean=m,
                     constraint_gap=energy.value(m) - tn)


def phi_lower_certified(f: CubeFunction, p: float, t: float) -> float:
    """Certified lower bound on phi_p(t) from the dense table.

    For every lam >= 0,  phi_p(t) >= lam t n - log int e^(lam f) d mu_p:
    relaxing products to all measures makes the constrained problem convex
    with that exact dual.  The right side is concave in lam; a 1-d search
    returns its maximum.  Sound input for the tail upper bound, which needs
    phi from below.
    """
    n = f.n
    k = popcount(np.arange(1 << n)).astype(float)
    logw = k * math.log(p) + (n - k) * math.log(1.0 - p)

    def dual(lam: float) -> float:
        return lam * t * n - float(logsumexp(lam * f.values + logw))

    # expand a bracket around the concave maximum
    hi = 1.0
    while dual(hi * 2.0) > dual(hi) and hi < 2 ** 40:
        hi *= 2.0
    res = minimize_scalar(lambda lam: -dual(lam), bounds=(0.0, hi * 2.0),
                          method="bounded", options={"xatol": 1e-12})
    return max(0.0, float(-res.fun))


def lz_reference(alpha: float) -> float:
    """Reference scaling limit min(alpha^(2/3), 2 alpha / 3) for the upper
    tail of triangle counts in the sparse regime."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    return min(alpha ** (2.0 / 3.0), 2.0 * alpha / 3.0)
