"""Measures and functions on the discrete cube {-1,1}^n.

Dense-table representation throughout (hard cap n <= 20): a function is a
table of 2^n reals, a measure is a log-density table relative to the uniform
measure mu plus a cached log-normalizer.  Everything exact is an O(2^n) sum
carried out in shifted/log space so no finite input can overflow.

Core objects:
  * discrete gradient  (d_i f)(y) = (f(y, y_i=+1) - f(y, y_i=-1)) / 2
  * harmonic extension of a table to the solid cube via the product weights
    w(x,y) = prod_i (1 + x_i y_i)/2
  * the g map, g(y)_i = tanh(d_i f(y)), whose covariance H is the obstruction
    to product structure
  * the v field v(x) = grad h(x) / h(x), h the extension of e^f
  * an exact sequential sampler driven by uniform [-1,1] variables, and the
    coupling of that sampler with a product measure through shared uniforms.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .bits import (
    MAX_N,
    check_dimension,
    flip_indices,
    sign_matrix,
    signs_to_vertex,
    vertex_to_signs,
    weight_vector,
)

_LOG2 = float(np.log(2.0))

# Tables of 2^n x n floats are cached only below this dimension.
_CACHE_N = 14


class CubeFunction:
    """A real-valued function on {-1,1}^n stored as a dense table.

    ``values[y]`` is the value at the vertex with index ``y`` in the fixed
    little-endian encoding (bit i set <=> coordinate i equals +1).  Entries
    must be finite; measures relax this (log-densities may be -inf).
    """

    __slots__ = ("n", "values", "_grad_table")

    def __init__(self, n: int, values, *, _allow_neginf: bool = False):
        self.n = check_dimension(n)
        vals = np.array(values, dtype=float).reshape(-1)
        if vals.shape[0] != (1 << self.n):
            raise ValueError(
                f"table must have 2^{self.n} = {1 << self.n} entries, got {vals.shape[0]}"
            )
        if _allow_neginf:
            bad = np.isnan(vals) | (vals == np.inf)
        else:
            bad = ~np.isfinite(vals)
        if bad.any():
            raise ValueError("table entries must be finite")
        vals.flags.writeable = False
        self.values = vals
        self._grad_table = None

    def __call__(self, y: int) -> float:
        return float(self.values[y])

    # -- serialization ------------------------------------------------------
    def to_json(self) -> str:
        return json.dumps({"n": self.n, "values": self.values.tolist(),
                           "kind": "function"})

    @staticmethod
    def from_json(text: str) -> "CubeFunction":
        obj = json.loads(text)
        if obj.get("kind") != "function":
            raise ValueError(f"expected kind 'function', got {obj.get('kind')!r}")
        return CubeFunction(obj["n"], obj["values"])

    def __repr__(self) -> str:
        return f"CubeFunction(n={self.n})"


class CubeMeasure:
    """Probability measure on {-1,1}^n given by d(nu)/d(mu) = e^f / Z.

    ``f`` may be unnormalized; ``log_z = log( 2^-n sum_y e^f(y) )`` is cached
    so the normalized density e^(f - log_z) integrates to one against mu.
    Log-density entries of -inf encode atoms of zero mass.
    """

    __slots__ = ("f", "log_z", "_expf", "_f_shift", "_g_table", "_tree", "_probs")

    def __init__(self, f: CubeFunction):
        self.f = f
        vals = f.values
        if np.all(vals == -np.inf):
            raise ValueError("measure must have positive total mass")
        self.log_z = float(logsumexp(vals) - f.n * _LOG2)
        self._f_shift = None
        self._expf = None
        self._g_table = None
        self._tree = None
        self._probs = None

    @property
    def n(self) -> int:
        return self.f.n

    # -- cached derived tables ---------------------------------------------
    def _shifted_exp(self) -> tuple[float, np.ndarray]:
        """(shift, e^(f - shift)) with shift = max f, so values are in [0,1]."""
        if self._expf is None:
            shift = float(np.max(self.f.values))
            e = np.exp(self.f.values - shift)
            e.flags.writeable = False
            self._f_shift, self._expf = shift, e
        return self._f_shift, self._expf

    def probabilities(self) -> np.ndarray:
        """Atom probabilities nu(y), an exact softmax of the log-density."""
        if self._probs is None:
            _, e = self._shifted_exp()
            p = e / e.sum()
            p.flags.writeable = False
            self._probs = p
        return self._probs

    def log_probabilities(self) -> np.ndarray:
        return self.f.values - (self.log_z + self.n * _LOG2)

    def normalized_log_density(self) -> np.ndarray:
        """f_nu = log d(nu)/d(mu), normalized so log_z would be 0."""
        return self.f.values - self.log_z

    # -- serialization ------------------------------------------------------
    def to_json(self) -> str:
        return json.dumps({"n": self.n, "values": self.f.values.tolist(),
                           "kind": "log_density"})

    @staticmethod
    def from_json(text: str) -> "CubeMeasure":
        obj = json.loads(text)
        if obj.get("kind") != "log_density":
            raise ValueError(f"expected kind 'log_density', got {obj.get('kind')!r}")
        vals = np.array(obj["values"], dtype=float)
        return CubeMeasure(CubeFunction(obj["n"], vals, _allow_neginf=True))

    def __repr__(self) -> str:
        return f"CubeMeasure(n={self.n}, log_z={self.log_z:.6g})"


@dataclass(frozen=True)
class ProductMeasure:
    """Product measure on {-1,1}^n identified by its mean vector."""

    mean: np.ndarray

    def __post_init__(self):
        m = np.array(self.mean, dtype=float).reshape(-1)
        if m.size < 1 or m.size > MAX_N:
            raise ValueError("mean vector has unsupported length")
        if np.any(np.abs(m) > 1.0) or not np.all(np.isfinite(m)):
            raise ValueError("product-measure means must lie in [-1, 1]")
        m.flags.writeable = False
        object.__setattr__(self, "mean", m)

    @property
    def n(self) -> int:
        return self.mean.size

    def as_measure(self) -> CubeMeasure:
        """Dense CubeMeasure with log-density sum_i log(1 + m_i y_i)."""
        S = sign_matrix(self.n).astype(float)
        with np.errstate(divide="ignore"):
            logd = np.log1p(S * self.mean).sum(axis=1)
        return CubeMeasure(CubeFunction(self.n, logd, _allow_neginf=True))

    def probabilities(self) -> np.ndarray:
        S = sign_matrix(self.n).astype(float)
        return np.prod((1.0 + S * self.mean) / 2.0, axis=1)


@dataclass(frozen=True)
class InteriorPoint:
    """A point of the solid cube [-1,1]^n."""

    x: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        if np.any(np.abs(x) > 1.0) or not np.all(np.isfinite(x)):
            raise ValueError("point must lie in [-1, 1]^n")
        x.flags.writeable = False
        object.__setattr__(self, "x", x)


def _as_point(x, n: int) -> np.ndarray:
    if isinstance(x, InteriorPoint):
        x = x.x
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != n:
        raise ValueError(f"point has dimension {x.size}, expected {n}")
    if np.any(np.abs(x) > 1.0 + 1e-15):
        raise ValueError("point must lie in [-1, 1]^n")
    return np.clip(x, -1.0, 1.0)


# ---------------------------------------------------------------------------
# Constructors for the standard measures
# ---------------------------------------------------------------------------

def uniform_measure(n: int) -> CubeMeasure:
    """The uniform measure mu (f = 0)."""
    return CubeMeasure(CubeFunction(n, np.zeros(1 << check_dimension(n))))


def biased_measure(n: int, p: float) -> CubeMeasure:
    """mu_p: independent coordinates with P(y_i = +1) = p, p in (0,1)."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    return ProductMeasure(np.full(n, 2.0 * p - 1.0)).as_measure()


def point_mass(n: int, y: int) -> CubeMeasure:
    logd = np.full(1 << check_dimension(n), -np.inf)
    logd[y] = 0.0
    return CubeMeasure(CubeFunction(n, logd, _allow_neginf=True))


def measure_from_table(n: int, log_density) -> CubeMeasure:
    return CubeMeasure(CubeFunction(n, log_density, _allow_neginf=True))


# ---------------------------------------------------------------------------
# Discrete gradient and Lipschitz constant
# ---------------------------------------------------------------------------

def discrete_gradient(f: CubeFunction, y: int) -> np.ndarray:
    """(d_1 f(y), ..., d_n f(y)), half the difference across each flip."""
    vals, n = f.values, f.n
    out = np.empty(n)
    for i in range(n):
        bit = 1 << i
        out[i] = 0.5 * (vals[y | bit] - vals[y & ~bit])
    return out


def gradient_table(f: CubeFunction) -> np.ndarray:
    """All discrete gradients as a (2^n, n) array (cached for small n)."""
    if f._grad_table is not None:
        return f._grad_table
    vals, n = f.values, f.n
    out = np.empty((1 << n, n))
    for i in range(n):
        minus, plus = flip_indices(n, i)
        out[:, i] = 0.5 * (vals[plus] - vals[minus])
    out.flags.writeable = False
    if n <= _CACHE_N:
        f._grad_table = out
    return out


def lip(f: CubeFunction) -> float:
    """Discrete Lipschitz constant max_{i,y} |d_i f(y)|."""
    vals, n = f.values, f.n
    best = 0.0
    for i in range(n):
        minus, plus = flip_indices(n, i)
        best = max(best, float(np.max(np.abs(vals[plus] - vals[minus]))) * 0.5)
    return best


# ---------------------------------------------------------------------------
# Harmonic extension to the solid cube
# ---------------------------------------------------------------------------

def harmonic_extension(f: CubeFunction, x) -> float:
    """sum_y w(x,y) f(y); agrees with f at vertices, mu-mean of f at x=0."""
    x = _as_point(x, f.n)
    return float(weight_vector(x) @ f.values)


def harmonic_gradient(f: CubeFunction, x) -> np.ndarray:
    """Gradient of the extension: coordinate i is the extension of d_i f."""
    x = _as_point(x, f.n)
    w = weight_vector(x)
    return gradient_table(f).T @ w


# ---------------------------------------------------------------------------
# Tilts and Kullback-Leibler divergence
# ---------------------------------------------------------------------------

def tilt(nu: CubeMeasure, theta) -> CubeMeasure:
    """Reweigh nu by e^<theta, y>; tilt(nu, 0) == nu up to normalization."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != nu.n or not np.all(np.isfinite(theta)):
        raise ValueError("theta must be a finite vector of length n")
    lin = sign_matrix(nu.n).astype(float) @ theta
    return CubeMeasure(CubeFunction(nu.n, nu.f.values + lin, _allow_neginf=True))


def kl(nu1: CubeMeasure, nu2: CubeMeasure) -> float:
    """KL(nu1 || nu2); +inf when nu1 is not absolutely continuous wrt nu2."""
    if nu1.n != nu2.n:
        raise ValueError("measures must share a dimension")
    p1 = nu1.probabilities()
    lp1 = nu1.log_probabilities()
    lp2 = nu2.log_probabilities()
    support = p1 > 0.0
    if np.any(lp2[support] == -np.inf):
        return np.inf
    return float(np.sum(p1[support] * (lp1[support] - lp2[support])))


# ---------------------------------------------------------------------------
# The g map, the v field, and the H matrix
# ---------------------------------------------------------------------------

def g_table(nu: CubeMeasure) -> np.ndarray:
    """g(y)_i = tanh(d_i f(y)) for all vertices, as a (2^n, n) array.

    Where exactly one of the two neighbor densities vanishes the entry is the
    limit value +-1; where both vanish it is 0 by convention.
    """
    if nu._g_table is not None:
        return nu._g_table
    vals, n = nu.f.values, nu.n
    out = np.empty((1 << n, n))
    with np.errstate(invalid="ignore"):
        for i in range(n):
            minus, plus = flip_indices(n, i)
            diff = 0.5 * (vals[plus] - vals[minus])
            col = np.tanh(diff)
            col[np.isnan(diff)] = 0.0
            out[:, i] = col
    out.flags.writeable = False
    if n <= _CACHE_N:
        nu._g_table = out
    return out


def g_map(nu: CubeMeasure, y: int) -> np.ndarray:
    """g(y) = tanh of the discrete gradient of the log-density at y."""
    vals, n = nu.f.values, nu.n
    out = np.empty(n)
    for i in range(n):
        bit = 1 << i
        a, b = vals[y | bit], vals[y & ~bit]
        if a == -np.inf and b == -np.inf:
            out[i] = 0.0
        else:
            out[i] = np.tanh(0.5 * (a - b))
    return out


def v_vertex_table(nu: CubeMeasure) -> np.ndarray:
    """v(y) = (grad e^f)(y) / e^f(y) at every vertex; 0 where the density is 0."""
    _, e = nu._shifted_exp()
    n = nu.n
    out = np.empty((1 << n, n))
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(n):
            minus, plus = flip_indices(n, i)
            out[:, i] = 0.5 * (e[plus] - e[minus]) / e
    out[~np.isfinite(out)] = 0.0
    out[e == 0.0, :] = 0.0
    return out


def h_value(nu: CubeMeasure, x) -> float:
    """The harmonic extension of e^f at x, shifted by e^-max(f).

    Only ratios of h and its derivatives are meaningful to callers; the shift
    cancels there and keeps everything inside floating-point range.
    """
    x = _as_point(x, nu.n)
    _, e = nu._shifted_exp()
    return float(weight_vector(x) @ e)


def v_map(nu: CubeMeasure, x) -> np.ndarray:
    """v(x) = grad h(x) / h(x); returns 0 where h vanishes."""
    x = _as_point(x, nu.n)
    _, e = nu._shifted_exp()
    n = nu.n
    w = weight_vector(x)
    h = float(w @ e)
    if h <= 0.0:
        return np.zeros(n)
    out = np.empty(n)
    for i in range(n):
        minus, plus = flip_indices(n, i)
        out[i] = 0.5 * (w @ (e[plus] - e[minus]))
    return out / h


def h_matrix(nu: CubeMeasure) -> np.ndarray:
    """H(nu): covariance of g(X) under X ~ nu (symmetric PSD, diag <= 1)."""
    G = g_table(nu)
    p = nu.probabilities()
    mean = G.T @ p
    cov = (G * p[:, None]).T @ G - np.outer(mean, mean)
    return 0.5 * (cov + cov.T)


def center_of_mass(nu: CubeMeasure) -> np.ndarray:
    """int y dnu(y)."""
    p = nu.probabilities()
    S = sign_matrix(nu.n)
    return S.T.astype(float) @ p


def product_fit(nu: CubeMeasure) -> ProductMeasure:
    """The unique product measure with the same marginals as nu."""
    return ProductMeasure(np.clip(center_of_mass(nu), -1.0, 1.0))


# ---------------------------------------------------------------------------
# Exact sequential sampler and the product coupling
# ---------------------------------------------------------------------------

def _suffix_tree(nu: CubeMeasure) -> list:
    """Layer k holds sums of e^(f - max f) over all suffix completions of the
    first k coordinates; layer n is the full table, layer 0 the grand total."""
    if nu._tree is None:
        _, e = nu._shifted_exp()
        layers = [e]
        cur = e
        for k in range(nu.n - 1, -1, -1):
            half = 1 << k
            cur = cur[:half] + cur[half:]
            layers.append(cur)
        layers.reverse()  # layers[k] has length 2^k
        nu._tree = layers
    return nu._tree


def _thresholds_for_prefixes(nu: CubeMeasure, i: int, prefix: np.ndarray) -> np.ndarray:
    tree = _suffix_tree(nu)
    nxt = tree[i + 1]
    s_minus = nxt[prefix]
    s_plus = nxt[prefix + (1 << i)]
    total = s_plus + s_minus
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = (s_plus - s_minus) / total
    return np.where(total > 0.0, lam, 0.0)


def sequential_sample(nu: CubeMeasure, u) -> int:
    """Map uniforms u in [-1,1]^n to a vertex with law exactly nu.

    Coordinate i is set to +1 iff u_i <= d_i h / h evaluated at the partial
    prefix; integrating the rule over uniform u reproduces nu exactly.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != nu.n or np.any(np.abs(u) > 1.0):
        raise ValueError("u must lie in [-1, 1]^n")
    return int(sequential_sample_many(nu, u[None, :])[0])


def sequential_sample_many(nu: CubeMeasure, u: np.ndarray) -> np.ndarray:
    """Vectorized sampler: u has shape (paths, n); returns vertex indices."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != nu.n:
        raise ValueError("u must have shape (paths, n)")
    prefix = np.zeros(u.shape[0], dtype=np.int64)
    for i in range(nu.n):
        lam = _thresholds_for_prefixes(nu, i, prefix)
        prefix = prefix + (u[:, i] <= lam) * (1 << i)
    return prefix


def coupled_sample(nu: CubeMeasure, u) -> tuple[int, int]:
    """(Z, Y) from shared uniforms: Z ~ nu sequentially, Y ~ product with the
    same mean, thresholded at the constant vector int g dnu."""
    u = np.asarray(u, dtype=float).reshape(-1)
    z, y = coupled_sample_many(nu, u[None, :])
    return int(z[0]), int(y[0])


def coupled_sample_many(nu: CubeMeasure, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=float)
    z = sequential_sample_many(nu, u)
    gbar = center_of_mass(nu)
    bits = (u <= gbar).astype(np.int64)
    y = bits @ (1 << np.arange(nu.n, dtype=np.int64))
    return z, y


def sequential_law(nu: CubeMeasure) -> np.ndarray:
    """Exact per-vertex law of the sequential sampler, obtained by multiplying
    the conditional probabilities (1 + y_i lambda_i)/2 along each prefix.

    Appending bit i with weight 2^i keeps the running index little-endian, so
    the result is aligned with the package vertex encoding.
    """
    probs = np.ones(1)
    for i in range(nu.n):
        prefix = np.arange(1 << i, dtype=np.int64)
        lam = _thresholds_for_prefixes(nu, i, prefix)
        probs = np.concatenate([probs * (1.0 - lam) / 2.0,
                                probs * (1.0 + lam) / 2.0])
    return probs


# ---------------------------------------------------------------------------
# Small helpers from the continuous-cube toolkit
# ---------------------------------------------------------------------------

def eta(x) -> np.ndarray:
    """eta_i(x) = arctanh(x_i); tilting nu by eta(x) reweighs it by w(x, .)."""
    if isinstance(x, InteriorPoint):
        x = x.x
    x = np.asarray(x, dtype=float).reshape(-1)
    if np.any(np.abs(x) >= 1.0):
        raise ValueError("eta requires an interior point (all |x_i| < 1)")
    return np.arctanh(x)


def trace_tail(a: np.ndarray, k: float) -> float:
    """Sum of the decreasing rearrangement of diag(a) from index ceil(k) to n
    (1-based); 0 when k exceeds the dimension, full trace when k <= 1."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    d = np.sort(np.diag(a))[::-1]
    start = max(int(np.ceil(k)), 1)
    if start > d.size:
        return 0.0
    return float(d[start - 1:].sum())
