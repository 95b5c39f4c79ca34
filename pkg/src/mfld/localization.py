"""Stochastic localization on the cube: the stopped SDE and its decomposition.

The driving construction is the diffusion

    X_0 = 0,   dX = sigma(X,t)^(1/2) dB + sigma(X,t) v(X) dt,

where v = grad h / h for h the harmonic extension of e^f, and sigma is the
diagonal 0/1 matrix that freezes a coordinate outside (-1/2, 1/2) before
time 1 and outside (-1, 1) afterwards.  A coordinate pinned at +-1/2 is
released when the threshold widens at t = 1; a coordinate pinned at +-1 is
frozen for good, so X_infty lands on the cube and carries the law nu.

Conditioned on the state x, the endpoint law is the w(x,.)-reweighing of nu,
which equals the tilt of nu by eta(x) = arctanh(x).  Stopping the process
and recording eta(X_tau) therefore decomposes nu into a mixture of small
tilts; the stopping rule tau triggers once the active-coordinate trace of
the conditional covariance H_t of g falls under 16 alpha GW / eps, capped by
the exploration bound T_eps.

Euler steps clamp a crossing coordinate at the boundary it crossed (no
reflection); the radial cap of T_eps is enforced on ||eta(X)||_2, slightly
earlier than the ||X||_2 trigger of the source construction, so recorded
tilts always satisfy the mixture support claim ||theta||_2 <= eps sqrt(n).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bits import sign_matrix
from .cube import (
    CubeFunction,
    CubeMeasure,
    center_of_mass,
    eta,
    g_table,
    h_matrix,
    kl,
    measure_from_table,
    tilt,
    uniform_measure,
    v_vertex_table,
)

_ETA_SAFETY = 1.0 - 1e-12


@dataclass(frozen=True)
class SdeConfig:
    """Parameters of one localization run."""

    nu: CubeMeasure
    dt: float = 1e-3
    t_max: float = 4.0
    seed: int = 0
    eps: float = 0.05
    alpha: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.dt <= 0.1:
            raise ValueError("dt must lie in (0, 0.1]")
        if not 0.0 < self.eps < 1.0 / 16.0:
            raise ValueError("eps must lie in (0, 1/16)")
        if not self.alpha > 1.0:
            raise ValueError("alpha must exceed 1")
        if self.t_max <= 0.0:
            raise ValueError("t_max must be positive")


@dataclass(frozen=True)
class SdePath:
    """One recorded trajectory: states, freeze mask, drift and g along it."""

    times: np.ndarray
    states: np.ndarray      # (steps+1, n)
    frozen: np.ndarray      # (steps+1, n) bool, sigma(X_t, t) == 0
    drift: np.ndarray       # (steps, n), v evaluated at the pre-step state
    g: np.ndarray           # (steps+1, n), g_t = q(X_t)/h(X_t)
    stop_reason: str        # "absorbed" | "t_max"
    endpoint: int | None    # vertex index when fully absorbed


@dataclass(frozen=True)
class TiltMixture:
    """Finite mixture nu = sum_k weight_k tilt_{theta_k} nu."""

    atoms: tuple            # ((theta, weight), ...)
    eps: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        total = sum(w for _, w in self.atoms)
        if abs(total - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")
        n = self.atoms[0][0].size
        cap = self.eps * np.sqrt(n) + 1e-9
        for theta, _ in self.atoms:
            if np.linalg.norm(theta) > cap or np.max(np.abs(theta)) > 1.0:
                raise ValueError("tilt outside the mixture support ball")


def threshold(t: float) -> float:
    """The freeze radius of sigma(., t): 1/2 before time 1, then 1."""
    return 0.5 if t < 1.0 else 1.0


# ---------------------------------------------------------------------------
# Exact conditional quantities at a fixed state
# ---------------------------------------------------------------------------

def conditional_law(nu: CubeMeasure, x) -> CubeMeasure:
    """Law of X_infty given X_t = x: density w(x, y) e^f(y) / h(x)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != nu.n or np.any(np.abs(x) > 1.0):
        raise ValueError("state must lie in [-1,1]^n")
    S = sign_matrix(nu.n).astype(float)
    with np.errstate(divide="ignore"):
        logw = np.log1p(S * x).sum(axis=1)  # log prod (1 + x_i y_i), const off
    vals = nu.f.values + logw
    if np.all(vals == -np.inf):
        raise ValueError("conditional law undefined: h(x) = 0")
    return measure_from_table(nu.n, vals)


def g_process(nu: CubeMeasure, x) -> np.ndarray:
    """g_t at state x: the conditional mean of g_nu, equal to q(x)/h(x)."""
    rho = conditional_law(nu, x).probabilities()
    return g_table(nu).T @ rho


def v_process(nu: CubeMeasure, x) -> np.ndarray:
    """v_t at state x as the conditional mean of the vertex field v_nu."""
    rho = conditional_law(nu, x).probabilities()
    return v_vertex_table(nu).T @ rho


def h_t_matrix(nu: CubeMeasure, x) -> np.ndarray:
    """H_t = conditional covariance of g_nu(X_infty) given X_t = x (PSD)."""
    rho = conditional_law(nu, x).probabilities()
    G = g_table(nu)
    mean = G.T @ rho
    cov = (G * rho[:, None]).T @ G - np.outer(mean, mean)
    return 0.5 * (cov + cov.T)


def a_matrix(nu: CubeMeasure, x) -> np.ndarray:
    """A_t = E[(g_infty - g_t) (x) (v_infty - v_t) | X_t = x]."""
    rho = conditional_law(nu, x).probabilities()
    G, V = g_table(nu), v_vertex_table(nu)
    gt = G.T @ rho
    vt = V.T @ rho
    return (G * rho[:, None]).T @ V - np.outer(gt, vt)


def partial_qi_diag(nu: CubeMeasure, x) -> np.ndarray:
    """diag of grad q at x by true differentiation of the extension of
    q_i = g_i e^f (independent route used to test the product identity
    d_i q_i(y) = e^f g_i v_i at vertices and hence everywhere)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    _, e = nu._shifted_exp()
    Q = g_table(nu) * e[:, None]  # tables of g_i e^(f - shift)
    n = nu.n
    from .bits import flip_indices, weight_vector

    w = weight_vector(x)
    out = np.empty(n)
    for i in range(n):
        minus, plus = flip_indices(n, i)
        out[i] = 0.5 * (w @ (Q[plus, i] - Q[minus, i]))
    return out


def gamma_diag(nu: CubeMeasure, x) -> np.ndarray:
    """diag of Gamma_t = grad q / h - g_t (x) v_t at state x."""
    x = np.asarray(x, dtype=float).reshape(-1)
    rho = conditional_law(nu, x).probabilities()
    G, V = g_table(nu), v_vertex_table(nu)
    gt = G.T @ rho
    vt = V.T @ rho
    cond_gv = (G * V).T @ rho
    return cond_gv - gt * vt


# ---------------------------------------------------------------------------
# Batched Euler engine
# ---------------------------------------------------------------------------

class _Engine:
    """Shared dense tables and the vectorized one-step kernel.

    Weights are built by the doubling construction of the product weights
    applied to every path at once (little-endian: bit i fills the upper half
    of each 2^(i+1) block); e^f and any conditional-moment tables are folded
    into one gemm against precomputed column blocks.
    """

    def __init__(self, nu: CubeMeasure, dtype=np.float64):
        self.nu = nu
        self.n = nu.n
        _, e = nu._shifted_exp()
        self.e = e.astype(dtype)
        S = sign_matrix(nu.n)
        plus = (S > 0).astype(dtype)
        # columns [e, e * 1{y_i = +1}]: one product gives h and the half-sums
        self.hv_cols = np.concatenate([self.e[:, None], self.e[:, None] * plus],
                                      axis=1)
        self.G = g_table(nu).astype(dtype)
        self.dtype = dtype

    def weights(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """W[p, y] = w(x_p, y), shape (P, 2^n), no density factor.

        Column-major layout: the doubling construction copies whole column
        blocks, which stream contiguously in Fortran order.
        """
        x = np.asarray(x, dtype=self.dtype)
        P = x.shape[0]
        size = self.e.size
        W = out if out is not None and out.shape == (P, size) else \
            np.empty((P, size), dtype=self.dtype, order="F")
        W[:, 0] = 1.0
        width = 1
        for i in range(self.n):
            lowfac = (1.0 - x[:, i]) * 0.5
            hifac = (1.0 + x[:, i]) * 0.5
            np.multiply(W[:, :width], hifac[:, None], out=W[:, width:2 * width])
            W[:, :width] *= lowfac[:, None]
            width *= 2
        return W

    def cond_weights(self, x: np.ndarray) -> np.ndarray:
        """T[p, y] = w(x_p, y) e^(f(y) - max f)."""
        return self.weights(x) * self.e

    def h_and_drift(self, x: np.ndarray, W: np.ndarray):
        """(h, v) rowwise; coordinates with |x_i| = 1 are returned as 0."""
        hv = W @ self.hv_cols
        h = hv[:, 0]
        hp = hv[:, 1:]
        with np.errstate(divide="ignore", invalid="ignore"):
            dh = hp / (1.0 + x) - (h[:, None] - hp) / (1.0 - x)
            v = dh / h[:, None]
        return h, np.nan_to_num(v, nan=0.0, posinf=0.0, neginf=0.0)


def _step_noise(seed: int, step: int, shape, dtype=np.float64) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFF, step]))
    return rng.standard_normal(shape, dtype=dtype)


def _euler_step(eng: _Engine, x: np.ndarray, t: float, dt: float,
                noise: np.ndarray) -> np.ndarray:
    """One clamped Euler step; returns the new state array."""
    thresh = threshold(t)
    active = np.abs(x) < thresh
    _, v = eng.h_and_drift(x, eng.weights(x))
    dx = np.where(active, np.sqrt(dt) * noise + v * dt, 0.0)
    xn = x + dx
    return np.clip(xn, -thresh, thresh)


def simulate_path(cfg: SdeConfig) -> SdePath:
    """Single recorded trajectory of the stopped localization SDE."""
    eng = _Engine(cfg.nu)
    n = cfg.nu.n
    x = np.zeros((1, n))
    steps_cap = int(np.ceil(cfg.t_max / cfg.dt))
    times = [0.0]
    states = [x[0].copy()]
    frozen = [np.abs(x[0]) >= threshold(0.0)]
    drifts = []
    gs = []

    def g_now():
        T = eng.cond_weights(x)
        return (T @ eng.G)[0] / T.sum()

    gs.append(g_now())
    reason = "t_max"
    for step in range(steps_cap):
        t = step * cfg.dt
        _, v = eng.h_and_drift(x, eng.weights(x))
        thresh = threshold(t)
        active = np.abs(x) < thresh
        noise = _step_noise(cfg.seed, step, (1, n))
        dx = np.where(active, np.sqrt(cfg.dt) * noise + v * cfg.dt, 0.0)
        x = np.clip(x + dx, -thresh, thresh)
        tn = (step + 1) * cfg.dt
        times.append(tn)
        states.append(x[0].copy())
        frozen.append(np.abs(x[0]) >= threshold(tn))
        drifts.append(np.where(active, v, 0.0)[0])
        gs.append(g_now())
        if tn >= 1.0 and np.all(np.abs(x[0]) >= 1.0):
            reason = "absorbed"
            break
    endpoint = None
    if reason == "absorbed":
        bits = (x[0] > 0).astype(np.int64)
        endpoint = int((bits << np.arange(n)).sum())
    return SdePath(times=np.asarray(times), states=np.asarray(states),
                   frozen=np.asarray(frozen), drift=np.asarray(drifts),
                   g=np.asarray(gs), stop_reason=reason, endpoint=endpoint)


# fixed path-chunk width: part of the determinism contract (noise is keyed
# by (seed, chunk, step)) and small enough to keep the weight table in cache
_PATH_CHUNK = 16384


def _product_g(nu: CubeMeasure) -> np.ndarray | None:
    """The constant g vector when nu is a product measure, else None."""
    G = g_table(nu)
    if np.max(np.abs(G - G[0])) < 1e-13:
        return G[0].copy()
    return None


def sample_endpoints(cfg: SdeConfig, paths: int, dtype=np.float32) -> np.ndarray:
    """Vertex indices of X_infty for many independent paths.

    Paths still unabsorbed at t_max are finished by one draw from the exact
    conditional endpoint law at their final state, which adds no bias beyond
    the Euler discretization of the path itself.  Product measures take a
    separable route: there v_i(x) = g_i / (1 + g_i x_i) with g constant, so
    no dense tables enter the loop.
    """
    n = cfg.nu.n
    gconst = _product_g(cfg.nu)
    eng = None if gconst is not None else _Engine(cfg.nu, dtype=dtype)
    out = np.full(paths, -1, dtype=np.int64)
    for chunk, lo in enumerate(range(0, paths, _PATH_CHUNK)):
        count = min(_PATH_CHUNK, paths - lo)
        out[lo:lo + count] = _endpoint_chunk(cfg, eng, gconst, count, chunk, dtype)
    return out


def _endpoint_chunk(cfg, eng, gconst, count, chunk, dtype):
    n = cfg.nu.n
    x = np.zeros((count, n), dtype=dtype)
    alive = np.arange(count)
    out = np.full(count, -1, dtype=np.int64)
    steps_cap = int(np.ceil(cfg.t_max / cfg.dt))
    powers = 1 << np.arange(n)
    w_buf = None if eng is None else \
        np.empty((count, eng.e.size), dtype=dtype, order="F")
    sqdt = dtype(np.sqrt(cfg.dt))
    dt = dtype(cfg.dt)
    if gconst is not None:
        gvec = gconst.astype(dtype)
    for step in range(steps_cap):
        t = step * cfg.dt
        thresh = threshold(t)
        rng = np.random.Generator(np.random.Philox(
            key=[cfg.seed & 0xFFFFFFFF, (chunk << 32) | step]))
        noise = rng.standard_normal(x.shape, dtype=dtype)
        if gconst is not None:
            v = gvec / (1.0 + gvec * x)
        else:
            W = eng.weights(x, out=w_buf) if x.shape[0] == w_buf.shape[0] \
                else eng.weights(x)
            _, v = eng.h_and_drift(x, W)
        active = np.abs(x) < thresh
        np.multiply(noise, sqdt, out=noise)
        noise += v * dt
        noise *= active
        x += noise
        np.clip(x, -thresh, thresh, out=x)
        if t + cfg.dt >= 1.0:
            done = np.all(np.abs(x) >= 1.0, axis=1)
            # frozen paths no longer move; harvest them lazily so the batch
            # shrinks in blocks instead of reallocating every step
            if done.all() or done.mean() > 0.25:
                bits = (x[done] > 0).astype(np.int64)
                out[alive[done]] = bits @ powers
                keep = ~done
                x = np.ascontiguousarray(x[keep])
                alive = alive[keep]
                if alive.size == 0:
                    return out
                if eng is not None:
                    w_buf = np.empty((x.shape[0], eng.e.size), dtype=dtype,
                                     order="F")
    # exact conditional finish for the rest
    rng = np.random.Generator(np.random.Philox(
        key=[cfg.seed & 0xFFFFFFFF, (chunk << 32) | (2 ** 31)]))
    if gconst is not None:
        p_plus = (1.0 + x) * (1.0 + gconst) / (2.0 * (1.0 + gconst * x))
        bits = (rng.random(x.shape) < p_plus).astype(np.int64)
        out[alive] = bits @ powers
        return out
    T = eng.cond_weights(x).astype(np.float64)
    cdf = np.cumsum(T, axis=1)
    cdf /= cdf[:, -1:]
    u = rng.random((x.shape[0], 1))
    out[alive] = (u > cdf).sum(axis=1)
    return out


# ---------------------------------------------------------------------------
# Path diagnostics for the structural inequalities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathStats:
    """Exact conditional statistics collected along simulated paths.

    Tr(sigma^(1/2) Gamma_t) coincides with trace_a entrywise: the diagonal of
    grad q / h equals the conditional mean of g_i v_i (the product identity
    d_i q_i = e^f g_i v_i at vertices), which is exactly diag A_t plus the
    shared rank-one correction.  The identity itself is covered by its own
    invariant test against an independent differentiation route.
    """

    check_times: np.ndarray       # (C,)
    trace_h: np.ndarray           # (paths, C) Tr(sigma^(1/2) H_t)
    trace_a: np.ndarray           # (paths, C) Tr(sigma^(1/2) A_t) = Tr(sigma^(1/2) Gamma_t)
    g_means: np.ndarray           # (C, n) ensemble mean of g_t
    g_mean_se: np.ndarray         # (C, n) standard errors
    hull_margin: float            # max over states/directions of the support
                                  # function violation of g_t (<= 0 is inside)


def path_stats(cfg: SdeConfig, paths: int, t_end: float,
               check_every: int = 10, directions: int = 20) -> PathStats:
    """Simulate a batch and evaluate H_t, A_t, Gamma_t exactly at intervals."""
    eng = _Engine(cfg.nu)
    n = cfg.nu.n
    G, V = g_table(cfg.nu), v_vertex_table(cfg.nu)
    GV = G * V
    G2 = G * G
    rng_dir = np.random.Generator(np.random.Philox(key=[cfg.seed & 0xFFFFFFFF, 10 ** 6]))
    dirs = rng_dir.standard_normal((directions, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    sup_dirs = (G @ dirs.T).max(axis=0)  # support function of {g(y)} per direction

    x = np.zeros((paths, n))
    steps = int(np.round(t_end / cfg.dt))
    checks = []
    th_list, ta_list, gm_list, gse_list = [], [], [], []
    hull_worst = -np.inf

    def collect(t):
        nonlocal hull_worst
        thresh = threshold(t)
        active = (np.abs(x) < thresh).astype(float)
        T = eng.cond_weights(x)
        h = T.sum(axis=1)
        gt = (T @ G) / h[:, None]
        vt = (T @ V) / h[:, None]
        cond_g2 = (T @ G2) / h[:, None]
        cond_gv = (T @ GV) / h[:, None]
        diag_h = cond_g2 - gt * gt
        diag_a = cond_gv - gt * vt
        checks.append(t)
        th_list.append((diag_h * active).sum(axis=1))
        ta_list.append((diag_a * active).sum(axis=1))
        gm_list.append(gt.mean(axis=0))
        gse_list.append(gt.std(axis=0, ddof=1) / np.sqrt(paths))
        hull_worst = max(hull_worst, float((gt @ dirs.T - sup_dirs).max()))

    collect(0.0)
    for step in range(steps):
        t = step * cfg.dt
        noise = _step_noise(cfg.seed, step, x.shape)
        x = _euler_step(eng, x, t, cfg.dt, noise)
        if (step + 1) % check_every == 0:
            collect((step + 1) * cfg.dt)
    return PathStats(check_times=np.asarray(checks),
                     trace_h=np.asarray(th_list).T,
                     trace_a=np.asarray(ta_list).T,
                     g_means=np.asarray(gm_list),
                     g_mean_se=np.asarray(gse_list),
                     hull_margin=hull_worst)


# ---------------------------------------------------------------------------
# The decomposition into near-product tilts
# ---------------------------------------------------------------------------

def decompose(cfg: SdeConfig, num_atoms: int,
              gw_value: float | None = None) -> TiltMixture:
    """Run stopped paths and record theta = eta(X_tau), weight 1/num_atoms.

    tau is the first time Tr(sigma^(1/2) H_t) <= 16 alpha GW / eps, capped by
    T_eps = first of { ||eta(X_t)||_2 >= eps sqrt(n), frozen count >=
    2 exp(-1/(32 eps^2)) n, t >= 1 }.  ``gw_value`` should be a conservative
    (upper confidence) estimate of the width of {g(y)}; when omitted it is
    estimated here at +3 standard errors.
    """
    if num_atoms < 1:
        raise ValueError("need at least one atom")
    nu = cfg.nu
    n = nu.n
    if gw_value is None:
        from .complexity import gw_monte_carlo

        est = gw_monte_carlo(g_table(nu), 4000, cfg.seed)
        gw_value = est.upper_confidence()
    trace_cap = 16.0 * cfg.alpha * gw_value / cfg.eps
    freeze_cap = 2.0 * np.exp(-1.0 / (32.0 * cfg.eps ** 2)) * n
    radius = cfg.eps * np.sqrt(n)

    eng = _Engine(nu)
    G = eng.G
    G2 = G * G

    x = np.zeros((num_atoms, n))
    stopped = np.zeros(num_atoms, dtype=bool)
    stop_state = np.zeros((num_atoms, n))
    stop_reason = np.zeros(num_atoms, dtype=np.int8)  # 0 trace, 1 radius, 2 freeze, 3 t=1
    stop_trace = np.zeros(num_atoms)

    def trace_h_of(rows: np.ndarray) -> np.ndarray:
        T = eng.cond_weights(rows)
        h = T.sum(axis=1)
        gt = (T @ G) / h[:, None]
        cond_g2 = (T @ G2) / h[:, None]
        active = (np.abs(rows) < 0.5).astype(float)
        return ((cond_g2 - gt * gt) * active).sum(axis=1)

    # tau may trigger at t = 0 (it usually does at desk scale, where the
    # trace cap dwarfs Tr H(nu) <= n)
    tr0 = trace_h_of(x[:1])[0]
    if tr0 <= trace_cap:
        stopped[:] = True
        stop_trace[:] = tr0
    steps_cap = int(np.ceil(1.0 / cfg.dt))
    step = 0
    while not stopped.all() and step < steps_cap:
        live = np.nonzero(~stopped)[0]
        xs = x[live]
        t = step * cfg.dt
        noise = _step_noise(cfg.seed, step, (num_atoms, n))[live]
        xs_new = _euler_step(eng, xs, t, cfg.dt, noise)

        # radial cap on eta: truncate the crossing step to the sphere
        eta_norm = np.linalg.norm(np.arctanh(np.clip(xs_new, -_ETA_SAFETY, _ETA_SAFETY)),
                                  axis=1)
        crossed = eta_norm >= radius
        if crossed.any():
            lo = np.zeros(crossed.sum())
            hi = np.ones(crossed.sum())
            base = xs[crossed]
            delta = xs_new[crossed] - base
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                cand = base + mid[:, None] * delta
                nrm = np.linalg.norm(np.arctanh(np.clip(cand, -_ETA_SAFETY, _ETA_SAFETY)),
                                     axis=1)
                hi = np.where(nrm >= radius, mid, hi)
                lo = np.where(nrm >= radius, lo, mid)
            xs_new[crossed] = base + hi[:, None] * delta
        x[live] = xs_new
        t_next = (step + 1) * cfg.dt

        tr = trace_h_of(xs_new)
        frozen_count = (np.abs(xs_new) >= threshold(t_next)).sum(axis=1)
        hit_trace = tr <= trace_cap
        hit_radius = crossed
        hit_freeze = frozen_count >= freeze_cap
        hit_time = t_next >= 1.0
        done = hit_trace | hit_radius | hit_freeze | hit_time
        if done.any():
            rows = live[done]
            stopped[rows] = True
            stop_state[rows] = xs_new[done]
            stop_trace[rows] = tr[done]
            reason = np.where(hit_trace[done], 0,
                              np.where(hit_radius[done], 1,
                                       np.where(hit_freeze[done], 2, 3)))
            stop_reason[rows] = reason
        step += 1

    thetas = np.arctanh(np.clip(stop_state, -_ETA_SAFETY, _ETA_SAFETY))
    weight = 1.0 / num_atoms
    atoms = tuple((thetas[k], weight) for k in range(num_atoms))
    frac_below = float(np.mean(stop_trace <= trace_cap + 1e-12))
    diagnostics = {
        "gw_value": float(gw_value),
        "trace_cap": float(trace_cap),
        "fraction_trace_ok": frac_below,
        "stop_reasons": {
            "trace": int(np.sum(stop_reason == 0)),
            "radius": int(np.sum(stop_reason == 1)),
            "freeze_count": int(np.sum(stop_reason == 2)),
            "time_cap": int(np.sum(stop_reason == 3)),
        },
    }
    return TiltMixture(atoms=atoms, eps=cfg.eps, diagnostics=diagnostics)


def mixture_measure(mixture: TiltMixture, nu: CubeMeasure) -> CubeMeasure:
    """The measure sum_k weight_k tilt_{theta_k} nu, as a dense table."""
    dens = np.zeros(1 << nu.n)
    for theta, weight in mixture.atoms:
        dens += weight * tilt(nu, theta).probabilities()
    with np.errstate(divide="ignore"):
        return measure_from_table(nu.n, np.log(dens) + nu.n * np.log(2.0))


@dataclass(frozen=True)
class EntropyBudget:
    kl_nu: float
    mixture_average_kl: float
    allowed: float  # 2 eps n

    @property
    def gap(self) -> float:
        return abs(self.kl_nu - self.mixture_average_kl)


def entropy_bookkeeping(mixture: TiltMixture, nu: CubeMeasure) -> EntropyBudget:
    """|KL(nu || mu) - sum_k w_k KL(tilt_k nu || mu)| against 2 eps n."""
    mu = uniform_measure(nu.n)
    base = kl(nu, mu)
    avg = sum(w * kl(tilt(nu, theta), mu) for theta, w in mixture.atoms)
    return EntropyBudget(kl_nu=float(base), mixture_average_kl=float(avg),
                         allowed=2.0 * mixture.eps * nu.n)
