"""Gaussian-width gradient complexity.

The width of a point set K is E sup_{x in K} <x, Gamma> over a standard
Gaussian Gamma, estimated by Monte Carlo with seeded, chunk-stable draws.
The complexity of a cube function is the width of its exhaustive discrete
gradient set together with the origin.  Closed-form bounds are provided for
the structured families (pairwise-interaction Hamiltonians and subgraph
counts) where the width can be controlled analytically.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bits import check_dimension
from .cube import CubeFunction, gradient_table

# Chunk size is part of the determinism contract: sample j always comes from
# the Philox stream keyed by (seed, j // _CHUNK), whatever the worker count.
_CHUNK = 1024


@dataclass(frozen=True)
class GwEstimate:
    """Monte-Carlo width estimate: mean, standard error, sample count."""

    mean: float
    std_error: float
    samples: int
    lower_estimate: bool = False

    def upper_confidence(self, sigmas: float = 3.0) -> float:
        return self.mean + sigmas * self.std_error


@dataclass(frozen=True)
class GradientSet:
    """A finite point set in R^n playing the role of a gradient range.

    The origin is always adjoined, matching the discrete-cube definition of
    gradient complexity.
    """

    points: np.ndarray = field()

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise ValueError("gradient set needs at least one vector")
        if not np.all(np.isfinite(pts)):
            raise ValueError("gradient set vectors must be finite")
        if not np.any(np.all(pts == 0.0, axis=1)):
            pts = np.vstack([pts, np.zeros(pts.shape[1])])
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)


def gw_samples(points: np.ndarray, samples: int, seed: int) -> np.ndarray:
    """Per-draw suprema sup_{x in points} <x, Gamma_j>, j < samples.

    Deterministic given the seed and independent of how callers partition the
    work: draws are generated in fixed chunks keyed by (seed, chunk index).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("cannot take a supremum over an empty set")
    if samples < 1:
        raise ValueError("need at least one sample")
    n = pts.shape[1]
    out = np.empty(samples)
    pos = 0
    chunk_idx = 0
    while pos < samples:
        take = min(_CHUNK, samples - pos)
        rng = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFF, chunk_idx]))
        gamma = rng.standard_normal((take, n))
        out[pos:pos + take] = (gamma @ pts.T).max(axis=1)
        pos += take
        chunk_idx += 1
    return out


def gw_monte_carlo(k, samples: int, seed: int) -> GwEstimate:
    """Gaussian width of a finite set (or GradientSet) by Monte Carlo."""
    if samples < 2:
        raise ValueError("need samples >= 2 for a standard error")
    pts = k.points if isinstance(k, GradientSet) else np.atleast_2d(np.asarray(k, dtype=float))
    sups = gw_samples(pts, samples, seed)
    mean = float(sups.mean())
    se = float(sups.std(ddof=1) / np.sqrt(samples))
    return GwEstimate(mean=mean, std_error=se, samples=samples)


def complexity_of(f: CubeFunction, samples: int, seed: int,
                  vertex_subsample: int | None = None) -> GwEstimate:
    """Width of {grad f(y) : y} union {0} over the exhaustive vertex set.

    ``vertex_subsample`` replaces the exhaustive set by a random subset of
    vertices; the supremum over a subset can only shrink, so the result is
    flagged as a lower estimate.
    """
    check_dimension(f.n)
    grads = gradient_table(f)
    lower = False
    if vertex_subsample is not None and vertex_subsample < grads.shape[0]:
        rng = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFF, 2 ** 32 - 1]))
        rows = rng.choice(grads.shape[0], size=vertex_subsample, replace=False)
        grads = grads[rows]
        lower = True
    est = gw_monte_carlo(GradientSet(grads), samples, seed)
    return GwEstimate(est.mean, est.std_error, est.samples, lower_estimate=lower)


def subgraph_complexity_bound(edge_count: int, num_vertices: int) -> float:
    """|E(H)| N^(3/2), the analytic width bound for N^2 t(H, G_y)."""
    if edge_count < 0 or num_vertices < 1:
        raise ValueError("need a nonnegative edge count and positive N")
    return float(edge_count) * float(num_vertices) ** 1.5


def _check_interaction(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("interaction matrix must be square")
    if not np.allclose(a, a.T, atol=1e-12):
        raise ValueError("interaction matrix must be symmetric")
    if np.any(np.abs(np.diag(a)) > 0.0):
        raise ValueError("interaction matrix must have zero diagonal")
    return a


def ising_complexity_bound(a: np.ndarray, b: np.ndarray) -> float:
    """sqrt(n (Tr A^2 + b_max^2)) for f(s) = <s, A s> + <b, s>, diag A = 0."""
    a = _check_interaction(a)
    b = np.asarray(b, dtype=float).reshape(-1)
    n = a.shape[0]
    bmax = float(np.max(np.abs(b))) if b.size else 0.0
    return float(np.sqrt(n * (np.sum(a * a) + bmax ** 2)))


def ising_lip_bound(a: np.ndarray, b: np.ndarray) -> float:
    """U(A) + b_max with U(A) the largest absolute row sum."""
    a = _check_interaction(a)
    b = np.asarray(b, dtype=float).reshape(-1)
    bmax = float(np.max(np.abs(b))) if b.size else 0.0
    return float(np.max(np.abs(a).sum(axis=1))) + bmax


def ising_table(a: np.ndarray, b: np.ndarray) -> CubeFunction:
    """Dense table of f(s) = <s, A s>/2 + <b, s>.

    The half normalizes the symmetric double-count so the discrete gradient
    is exactly A s + b (the form the width and Lipschitz bounds are stated
    for); A must have zero diagonal, which also makes f multilinear.
    """
    from .bits import sign_matrix

    a = _check_interaction(a)
    b = np.asarray(b, dtype=float).reshape(-1)
    n = a.shape[0]
    S = sign_matrix(n)
    vals = np.empty(1 << n)
    step = 1 << 16
    for lo in range(0, 1 << n, step):
        chunk = S[lo:lo + step].astype(float)
        vals[lo:lo + step] = 0.5 * ((chunk @ a) * chunk).sum(axis=1) + chunk @ b
    return CubeFunction(n, vals)
