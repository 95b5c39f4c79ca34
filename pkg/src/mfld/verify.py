"""Seeded invariant suite behind the `verify` subcommand.

Each check is a fast randomized verification of one structural identity or
theorem direction; the full pytest suite covers the same ground (and more)
at acceptance scale.  Checks return (name, passed, detail).
"""
from __future__ import annotations

import numpy as np

from . import cube, localization as loc, transport
from .complexity import gw_samples, ising_complexity_bound, ising_lip_bound, ising_table
from .meanfield import MeanFieldProblem, kl_product_to_mup, log_partition, solve_gibbs


def _random_measure(rng, n, scale=1.0):
    return cube.measure_from_table(n, scale * rng.normal(size=1 << n))


def _check_identities(seed):
    rng = np.random.default_rng(seed)
    out = []
    worst_gcom = worst_tanh = worst_part = 0.0
    for _ in range(20):
        n = int(rng.integers(3, 8))
        nu = _random_measure(rng, n)
        p = nu.probabilities()
        G = cube.g_table(nu)
        worst_gcom = max(worst_gcom,
                         float(np.max(np.abs(G.T @ p - cube.center_of_mass(nu)))))
        y = int(rng.integers(1 << n))
        fn = cube.CubeFunction(n, nu.normalized_log_density())
        worst_tanh = max(worst_tanh, float(np.max(np.abs(
            cube.g_map(nu, y) - np.tanh(cube.discrete_gradient(fn, y))))))
        x = rng.uniform(-0.9, 0.9, n)
        lhs = loc.partial_qi_diag(nu, x) / cube.h_value(nu, x)
        rhs = loc.gamma_diag(nu, x) + loc.g_process(nu, x) * loc.v_process(nu, x)
        worst_part = max(worst_part, float(np.max(np.abs(lhs - rhs))))
    out.append(("cube.gcom_identity", worst_gcom < 1e-10, f"max err {worst_gcom:.2e}"))
    out.append(("cube.tanh_identity", worst_tanh < 1e-12, f"max err {worst_tanh:.2e}"))
    out.append(("localization.partial_qi", worst_part < 1e-10,
                f"max err {worst_part:.2e}"))
    # tilts of the uniform measure kill H
    worst_h = 0.0
    for _ in range(20):
        n = int(rng.integers(3, 10))
        theta = rng.normal(size=n)
        worst_h = max(worst_h, float(np.max(np.abs(
            cube.h_matrix(cube.tilt(cube.uniform_measure(n), theta))))))
    out.append(("cube.tilt_kills_h", worst_h < 1e-12, f"max |H| {worst_h:.2e}"))
    # sampler law
    worst_law = 0.0
    for _ in range(10):
        n = int(rng.integers(3, 8))
        nu = _random_measure(rng, n)
        worst_law = max(worst_law, float(np.max(np.abs(
            cube.sequential_law(nu) - nu.probabilities()))))
    out.append(("cube.sampler_exact_law", worst_law < 1e-12,
                f"max err {worst_law:.2e}"))
    return out


def _check_transport(seed):
    rng = np.random.default_rng(seed + 1)
    violations = 0
    for _ in range(30):
        n = int(rng.integers(4, 9))
        nu = _random_measure(rng, n)
        w, _ = transport.w1_exact(nu, cube.product_fit(nu).as_measure())
        if w > transport.step1_bound(nu) + 1e-12:
            violations += 1
    return [("transport.step1_bound", violations == 0,
             f"{violations} violations in 30 draws")]


def _check_complexity(seed):
    rng = np.random.default_rng(seed + 2)
    bad = 0
    for _ in range(8):
        n = int(rng.integers(4, 9))
        a = rng.normal(size=(n, n)) / n
        a = (a + a.T) / 2.0
        np.fill_diagonal(a, 0.0)
        b = rng.normal(size=n) * 0.3
        f = ising_table(a, b)
        grads = cube.gradient_table(f)
        sups = gw_samples(np.vstack([grads, np.zeros(n)]), 4000, seed)
        est, se = sups.mean(), sups.std(ddof=1) / np.sqrt(sups.size)
        if est > ising_complexity_bound(a, b) + 3.0 * se:
            bad += 1
        if cube.lip(f) > ising_lip_bound(a, b) + 1e-12:
            bad += 1
    return [("complexity.ising_bounds", bad == 0, f"{bad} violations")]


def _check_meanfield(seed):
    rng = np.random.default_rng(seed + 3)
    bad = 0
    for _ in range(6):
        n = int(rng.integers(4, 9))
        f = cube.CubeFunction(n, rng.normal(size=1 << n))
        p = float(rng.uniform(0.2, 0.8))
        res = solve_gibbs(MeanFieldProblem(f=f, p=p, restarts=6, seed=seed))
        if res.objective > log_partition(f, p) + 1e-9:
            bad += 1
    ok_kl = abs(kl_product_to_mup(np.zeros(3), 0.5)) < 1e-15
    return [("meanfield.gibbs_domination", bad == 0, f"{bad} violations"),
            ("meanfield.kl_zero_at_reference", ok_kl, "")]


def _check_localization(seed):
    rng = np.random.default_rng(seed + 4)
    nu = _random_measure(rng, 5)
    cfg = loc.SdeConfig(nu=nu, dt=2e-3, seed=seed)
    stats = loc.path_stats(cfg, paths=64, t_end=0.2, check_every=10)
    ok_trace = bool(np.all(stats.trace_h <= 4.0 * stats.trace_a + 1e-9))
    ok_hull = stats.hull_margin <= 1e-9
    mix = loc.decompose(cfg, 200)
    rec = loc.mixture_measure(mix, nu)
    tv = transport.tv_distance(rec, nu)
    ok_mix = tv <= 3.0 / np.sqrt(200)
    return [("localization.trace_inequality", ok_trace, ""),
            ("localization.hull_confinement", ok_hull,
             f"margin {stats.hull_margin:.2e}"),
            ("localization.mixture_reconstruction", ok_mix, f"tv {tv:.3f}")]


def _check_gaussian(seed):
    from .gaussian import GaussianMixture, reverse_lsi_check

    rng = np.random.default_rng(seed + 5)
    bad = 0
    for _ in range(5):
        k = int(rng.integers(1, 4))
        w = rng.uniform(0.2, 1.0, k)
        w /= w.sum()
        w[-1] = 1.0 - w[:-1].sum()
        mix = GaussianMixture(weights=w, centers=rng.normal(size=(k, 2)))
        rep = reverse_lsi_check(mix, quad_points=60, gw_samples=4000, seed=seed)
        if not rep.satisfied:
            bad += 1
    return [("gaussian.reverse_lsi", bad == 0, f"{bad} violations")]


_SCOPES = {
    "cube": _check_identities,
    "transport": _check_transport,
    "complexity": _check_complexity,
    "meanfield": _check_meanfield,
    "localization": _check_localization,
    "gaussian": _check_gaussian,
}


def run_checks(scope: str, seed: int):
    if scope == "all":
        results = []
        for fn in _SCOPES.values():
            results.extend(fn(seed))
        return results
    if scope not in _SCOPES:
        raise ValueError(f"unknown scope {scope!r}; choose all or one of "
                         f"{sorted(_SCOPES)}")
    return _SCOPES[scope](seed)
