"""Gaussian-space checks over identity-covariance mixtures.

The test family is nu = sum_k w_k N(theta_k, Id) with density against the
standard Gaussian gamma given by f = log sum_k w_k exp(<theta_k, x> -
|theta_k|^2 / 2).  Everything needed is then closed-form or reduces to the
span of the centers: grad f is a softmax average of the centers (hence
confined to their convex hull), the relative entropy is int f dnu, the
Fisher information int |grad f|^2 dnu, the gradient-range width is the width
of the center polytope, and the Hessian of f is a softmax covariance, so
Delta f >= 0 with infimum approached at infinity.

All integrals run on Gauss-Hermite tensor grids inside the center span (the
orthogonal directions integrate out exactly), which keeps quadrature in at
most three dimensions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import log_softmax, logsumexp, softmax
from scipy.stats import norm

from .complexity import GwEstimate, gw_monte_carlo

_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianMixture:
    """Finite mixture of identity-covariance Gaussians in dimension d <= 3."""

    weights: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        c = np.atleast_2d(np.array(self.centers, dtype=float))
        if c.shape[0] != w.size:
            raise ValueError("one center per weight required")
        if c.shape[1] > 3:
            raise ValueError("mixtures are supported in dimension d <= 3")
        if np.any(w <= 0.0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")
        if not np.all(np.isfinite(c)):
            raise ValueError("centers must be finite")
        w.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "centers", c)

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    @property
    def k(self) -> int:
        return self.weights.size


def mixture_f_grad(nu: GaussianMixture, x) -> tuple[float, np.ndarray]:
    """f(x) = log dnu/dgamma and grad f(x), the softmax center average."""
    x = np.asarray(x, dtype=float).reshape(-1)
    logits = nu.centers @ x - 0.5 * (nu.centers ** 2).sum(axis=1) + np.log(nu.weights)
    fval = float(logsumexp(logits))
    probs = softmax(logits)
    return fval, probs @ nu.centers


# ---------------------------------------------------------------------------
# Span reduction and quadrature
# ---------------------------------------------------------------------------

def _span_basis(nu: GaussianMixture) -> np.ndarray:
    """Orthonormal basis (d, r) of the span of the centers; r may be 0."""
    c = nu.centers
    if np.allclose(c, 0.0, atol=1e-14):
        return np.zeros((nu.d, 0))
    _, s, vt = np.linalg.svd(c, full_matrices=False)
    r = int(np.sum(s > 1e-12 * s[0]))
    return vt[:r].T


def _herme(points: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.hermite_e.hermegauss(points)
    return x, w / _SQRT2PI


def _grid(points: int, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Hermite rule in r dims: nodes (M, r), weights (M,)."""
    x, w = _herme(points)
    if r == 1:
        return x[:, None], w
    nodes = np.stack(np.meshgrid(*([x] * r), indexing="ij"), axis=-1).reshape(-1, r)
    weights = np.prod(np.stack(np.meshgrid(*([w] * r), indexing="ij"), axis=-1),
                      axis=-1).reshape(-1)
    return nodes, weights


class _SpanView:
    """Mixture expressed in an orthonormal basis of its center span."""

    def __init__(self, nu: GaussianMixture):
        self.basis = _span_basis(nu)
        self.r = self.basis.shape[1]
        self.c = nu.centers @ self.basis  # (K, r)
        self.logw = np.log(nu.weights)
        self.sq = 0.5 * (self.c ** 2).sum(axis=1)

    def logits(self, s: np.ndarray) -> np.ndarray:
        return s @ self.c.T - self.sq + self.logw

    def f(self, s: np.ndarray) -> np.ndarray:
        return logsumexp(self.logits(s), axis=1)

    def grad_sq(self, s: np.ndarray) -> np.ndarray:
        probs = softmax(self.logits(s), axis=1)
        return ((probs @ self.c) ** 2).sum(axis=1)

    def laplacian(self, s: np.ndarray) -> np.ndarray:
        """Delta f = Tr of the softmax covariance of the centers (>= 0)."""
        probs = softmax(self.logits(s), axis=1)
        second = probs @ (self.c ** 2).sum(axis=1)
        first = ((probs @ self.c) ** 2).sum(axis=1)
        return second - first

    def expect(self, func, points: int) -> float:
        """E_nu of a function of the span coordinates, by shifted rules."""
        nodes, weights = _grid(points, self.r)
        total = 0.0
        for ck, lw in zip(self.c, self.logw):
            total += math.exp(lw) * float(weights @ func(nodes + ck))
        return total

    def expect_at_time(self, func, t: float, points: int) -> float:
        """Same against the time-t law, the mixture of N(t c_k, t Id)."""
        nodes, weights = _grid(points, self.r)
        scale = math.sqrt(t)
        total = 0.0
        for ck, lw in zip(self.c, self.logw):
            total += math.exp(lw) * float(weights @ func(scale * nodes + t * ck))
        return total


def kl_divergence(nu: GaussianMixture, points: int = 80) -> float:
    """KL(nu || gamma) = int f dnu by span quadrature."""
    view = _SpanView(nu)
    if view.r == 0:
        return 0.0
    return view.expect(view.f, points)


def fisher_information(nu: GaussianMixture, points: int = 80) -> float:
    """I(nu) = int |grad f|^2 dnu by span quadrature."""
    view = _SpanView(nu)
    if view.r == 0:
        return 0.0
    return view.expect(view.grad_sq, points)


def gradient_width(nu: GaussianMixture, samples: int, seed: int) -> GwEstimate:
    """Width of {grad f(x)}: the supremum over the hull of the centers is
    attained at the centers, so the polytope support function is exact.

    A singleton hull has width exactly zero (the expectation of one linear
    functional of a centered Gaussian); no estimation noise is introduced
    for that degenerate case.
    """
    if np.ptp(nu.centers, axis=0).max(initial=0.0) == 0.0:
        return GwEstimate(mean=0.0, std_error=0.0, samples=samples)
    return gw_monte_carlo(nu.centers, samples, seed)


def inf_laplacian(nu: GaussianMixture, coarse: int = 64, rounds: int = 3) -> float:
    """Grid-refined infimum of Delta f over a box of radius max |c| + 6."""
    view = _SpanView(nu)
    if view.r == 0:
        return 0.0
    radius = float(np.linalg.norm(view.c, axis=1).max()) + 6.0
    center = np.zeros(view.r)
    best = np.inf
    for _ in range(rounds):
        axes = [np.linspace(center[j] - radius, center[j] + radius, coarse)
                for j in range(view.r)]
        nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, view.r)
        vals = view.laplacian(nodes)
        k = int(np.argmin(vals))
        best = min(best, float(vals[k]))
        center = nodes[k]
        radius *= 4.0 / coarse
    return best


# ---------------------------------------------------------------------------
# The reverse log-Sobolev report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LsiReport:
    fisher: float
    kl: float
    gw: float
    gw_std_error: float
    m_term: float
    lhs: float            # I - 2 KL
    rhs: float            # 2 gw^(2/3) I^(1/3) + m_term
    satisfied: bool
    quad_converged: bool

    def __post_init__(self):
        if self.fisher < 2.0 * self.kl - 1e-9:
            raise ValueError("quadrature broke the log-Sobolev direction")


def reverse_lsi_check(nu: GaussianMixture, quad_points: int = 80,
                      gw_samples: int = 20000, seed: int = 0) -> LsiReport:
    """Evaluate I - 2 KL against 2 D^(2/3) I^(1/3) + max(-inf Laplacian, 0).

    The satisfied flag allows the width estimate its 3 sigma of slack; the
    quadrature is flagged unconverged when doubling the rule moves I or KL
    by more than 1e-6.
    """
    fisher = fisher_information(nu, quad_points)
    klv = kl_divergence(nu, quad_points)
    fisher2 = fisher_information(nu, 2 * quad_points)
    kl2 = kl_divergence(nu, 2 * quad_points)
    quad_ok = abs(fisher2 - fisher) <= 1e-6 and abs(kl2 - klv) <= 1e-6
    fisher, klv = fisher2, kl2

    est = gradient_width(nu, gw_samples, seed)
    m_term = max(-inf_laplacian(nu), 0.0)
    lhs = fisher - 2.0 * klv
    rhs = 2.0 * est.mean ** (2.0 / 3.0) * fisher ** (1.0 / 3.0) + m_term
    rhs_hi = (2.0 * est.upper_confidence() ** (2.0 / 3.0) * fisher ** (1.0 / 3.0)
              + m_term)
    satisfied = lhs <= rhs_hi + 1e-9
    return LsiReport(fisher=fisher, kl=klv, gw=est.mean,
                     gw_std_error=est.std_error, m_term=m_term, lhs=lhs,
                     rhs=rhs, satisfied=satisfied, quad_converged=quad_ok)


# ---------------------------------------------------------------------------
# Tilt search for effectively one-dimensional mixtures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TiltSearchReport:
    x0: np.ndarray
    w2_squared: float
    bound: float          # 2 sqrt(d)/r * D - inf Laplacian
    trace_dv: float
    d_estimate: float
    satisfied: bool


def _collinear_direction(nu: GaussianMixture) -> np.ndarray:
    basis = _span_basis(nu)
    if basis.shape[1] > 1:
        raise ValueError("tilt search requires collinear centers")
    if basis.shape[1] == 0:
        u = np.zeros(nu.d)
        u[0] = 1.0
        return u
    return basis[:, 0]


def _mixture_cdf(s, mus, logw):
    return np.sum(np.exp(logw) * norm.cdf(np.subtract.outer(s, mus)), axis=-1)


def _w2_1d_to_gaussian(mus: np.ndarray, logw: np.ndarray, points: int = 512) -> float:
    """W2^2 between a 1-d unit-variance mixture and the matching-mean unit
    Gaussian, by quantile-function quadrature on (0,1)."""
    mean = float(np.exp(logw) @ mus)
    q, wq = np.polynomial.legendre.leggauss(points)
    q = 0.5 * (q + 1.0)
    wq = 0.5 * wq
    lo, hi = float(mus.min() - 12.0), float(mus.max() + 12.0)
    diffs = np.empty(points)
    for j, qj in enumerate(q):
        quant = brentq(lambda s: _mixture_cdf(s, mus, logw) - qj, lo, hi,
                       xtol=1e-12)
        diffs[j] = quant - (mean + norm.ppf(qj))
    return float(wq @ diffs ** 2)


def gaussian_tilt_search(nu: GaussianMixture, r: float, grid: int = 81,
                         gw_samples: int = 20000, seed: int = 0) -> TiltSearchReport:
    """Pick x0 on the radius-r segment of the center line minimizing the
    divergence of the drift field, and test the transport bound there.

    The drift v(x) = grad log h(x) reduces on the line to a scalar profile
    m(s) = softmax-average of the center offsets, and Tr(grad v) = m'(s) by
    collinearity; m' is evaluated by central differences.  The tilted
    measure is the reweighed, shifted mixture, and its W2 distance to the
    matching-mean unit Gaussian is a 1-d quantile integral.
    """
    if r <= 0.0:
        raise ValueError("r must be positive")
    u = _collinear_direction(nu)
    c = nu.centers @ u  # scalar offsets along the line
    logw = np.log(nu.weights)

    def m_prime(s: float, h: float = 1e-5) -> float:
        def m(sv):
            return float(softmax(c * sv + logw) @ c)
        return (m(s + h) - m(s - h)) / (2.0 * h)

    candidates = np.array([-r, r]) if grid <= 2 else np.linspace(-r, r, grid)
    traces = np.array([m_prime(s) for s in candidates])
    s0 = float(candidates[int(np.argmin(traces))])
    x0 = s0 * u

    # tilt by x0: weights pick up e^{c_k s0}, centers shift by x0
    logw_t = logw + c * s0
    logw_t = logw_t - logsumexp(logw_t)
    mus = c + s0  # projections of the shifted centers on the line
    w2sq = _w2_1d_to_gaussian(mus, logw_t)

    d_est = gradient_width(nu, gw_samples, seed)
    bound = 2.0 * math.sqrt(nu.d) / r * d_est.upper_confidence() - inf_laplacian(nu)
    return TiltSearchReport(x0=x0, w2_squared=w2sq, bound=bound,
                            trace_dv=float(traces.min()), d_estimate=d_est.mean,
                            satisfied=w2sq <= bound + 1e-9)


# ---------------------------------------------------------------------------
# The entropy-optimal drift process toward nu
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FollmerStats:
    mc_energy: float          # Monte-Carlo E int_0^1 |v_t|^2 dt
    mc_energy_se: float
    kl_times_two: float       # quadrature 2 KL(nu || gamma)
    representation_ok: bool   # |mc_energy - 2 KL| <= 3 se
    ks_statistics: np.ndarray # sliced KS of the endpoint law, per direction
    h_trace_times: np.ndarray
    h_trace_values: np.ndarray  # quadrature E Tr H_t = I - E |v_t|^2
    h_trace_mc: np.ndarray      # same from the simulated paths
    h_trace_bounds: np.ndarray  # GW / sqrt(t) + max(-inf Laplacian, 0)
    h_trace_ok: bool
    endpoint_fraction_used: float


def _drift(view: _SpanView, s: np.ndarray, t: float) -> np.ndarray:
    """v(t, s) in span coordinates: softmax over <c_k, s> - t |c_k|^2 / 2."""
    logits = s @ view.c.T - t * view.sq + view.logw
    return softmax(logits, axis=1) @ view.c


def gaussian_follmer_simulate(nu: GaussianMixture, dt: float = 1e-3,
                              paths: int = 100000, seed: int = 0,
                              quad_points: int = 120,
                              check_times=(0.25, 0.5, 0.75)) -> FollmerStats:
    """Simulate dX = dB + v(t, X) dt on [0, 1] inside the center span.

    Orthogonal directions carry plain Brownian motion and contribute nothing
    to the drift energy or the sliced comparisons, so they are not simulated.
    Reports the entropy representation check, sliced endpoint KS statistics
    along the span directions, and the conditional-variance trace curve
    against its width bound.
    """
    view = _SpanView(nu)
    check_times = np.asarray(check_times, dtype=float)
    if view.r == 0:
        zero = np.zeros(check_times.size)
        return FollmerStats(mc_energy=0.0, mc_energy_se=0.0, kl_times_two=0.0,
                            representation_ok=True,
                            ks_statistics=np.zeros(1),
                            h_trace_times=check_times, h_trace_values=zero,
                            h_trace_mc=zero, h_trace_bounds=zero + np.inf,
                            h_trace_ok=True, endpoint_fraction_used=1.0)

    steps = int(round(1.0 / dt))
    x = np.zeros((paths, view.r))
    energy = np.zeros(paths)
    check_steps = {int(round(t / dt)): i for i, t in enumerate(check_times)}
    v_sq_mc = np.zeros(check_times.size)
    for step in range(steps):
        t = step * dt
        if step in check_steps:
            v_now = _drift(view, x, t)
            v_sq_mc[check_steps[step]] = float((v_now ** 2).sum(axis=1).mean())
        rng = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFF, step]))
        noise = rng.standard_normal(x.shape)
        v = _drift(view, x, t)
        energy += (v ** 2).sum(axis=1) * dt
        x += math.sqrt(dt) * noise + v * dt

    klv = kl_divergence(nu, quad_points)
    fisher = fisher_information(nu, quad_points)
    mc_energy = float(energy.mean())
    mc_se = float(energy.std(ddof=1) / math.sqrt(paths))

    # sliced endpoint comparison along each span basis direction
    ks = np.empty(view.r)
    for j in range(view.r):
        proj = np.sort(x[:, j])
        emp = np.arange(1, paths + 1) / paths
        cdf = _mixture_cdf(proj, view.c[:, j], view.logw)
        ks[j] = float(np.max(np.abs(emp - cdf)))

    # E Tr H_t = I - E |v_t|^2 with E |v_t|^2 integrated against the exact
    # time-t law (mixture of N(t c_k, t Id))
    m_term = max(-inf_laplacian(nu), 0.0)
    gw_exact = _width_quadrature(view)
    h_vals = np.empty(check_times.size)
    for i, t in enumerate(check_times):
        ev = view.expect_at_time(lambda s: (_drift(view, s, t) ** 2).sum(axis=1),
                                 t, quad_points)
        h_vals[i] = fisher - ev
    h_mc = fisher - v_sq_mc
    bounds = gw_exact / np.sqrt(check_times) + m_term
    return FollmerStats(mc_energy=mc_energy, mc_energy_se=mc_se,
                        kl_times_two=2.0 * klv,
                        representation_ok=abs(mc_energy - 2.0 * klv) <= 3.0 * mc_se,
                        ks_statistics=ks,
                        h_trace_times=check_times, h_trace_values=h_vals,
                        h_trace_mc=h_mc, h_trace_bounds=bounds,
                        h_trace_ok=bool(np.all(h_vals <= bounds + 1e-9)),
                        endpoint_fraction_used=1.0)


def _width_quadrature(view: _SpanView) -> float:
    """GW of the center polytope inside the span (the width only sees the
    span projection of the Gaussian vector).

    On a line, E max_k c_k g = (c_max - c_min) / sqrt(2 pi) exactly; higher
    spans use a tensor Gaussian rule.
    """
    if view.r == 1:
        c = view.c[:, 0]
        return float((c.max() - c.min()) / _SQRT2PI)
    nodes, weights = _grid(40, view.r)
    return float(weights @ np.max(nodes @ view.c.T, axis=1))
