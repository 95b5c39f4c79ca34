"""Cube-core operations against independent brute-force oracles."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfld import cube
from mfld.bits import hamming, sign_matrix, vertex_to_signs

from conftest import random_function, random_measure


def brute_gradient(f, y):
    """Two-point difference oracle, bit fiddling only."""
    out = np.empty(f.n)
    for i in range(f.n):
        plus = y | (1 << i)
        minus = y & ~(1 << i)
        out[i] = (f.values[plus] - f.values[minus]) / 2.0
    return out


class TestDiscreteGradient:
    def test_constant_function(self):
        f = cube.CubeFunction(3, np.full(8, 2.5))
        assert np.all(cube.discrete_gradient(f, 5) == 0.0)

    def test_linear_function(self, rng):
        theta = rng.normal(size=4)
        S = sign_matrix(4).astype(float)
        f = cube.CubeFunction(4, S @ theta)
        for y in (0, 7, 15):
            np.testing.assert_allclose(cube.discrete_gradient(f, y), theta,
                                       atol=1e-12)

    def test_matches_oracle_everywhere(self, rng):
        f = random_function(rng, 4)
        for y in range(16):
            np.testing.assert_allclose(cube.discrete_gradient(f, y),
                                       brute_gradient(f, y), atol=0)
        table = cube.gradient_table(f)
        for y in range(16):
            np.testing.assert_allclose(table[y], brute_gradient(f, y), atol=0)

    def test_lip(self, rng):
        assert cube.lip(cube.CubeFunction(3, np.zeros(8))) == 0.0
        theta = rng.normal(size=5)
        f = cube.CubeFunction(5, sign_matrix(5).astype(float) @ theta)
        assert np.isclose(cube.lip(f), np.abs(theta).max())


class TestHarmonicExtension:
    def test_vertex_values(self, rng):
        f = random_function(rng, 4)
        for y in (0, 9, 15):
            x = vertex_to_signs(y, 4)
            assert np.isclose(cube.harmonic_extension(f, x), f(y), atol=1e-12)

    def test_center_is_mean(self, rng):
        f = random_function(rng, 5)
        assert np.isclose(cube.harmonic_extension(f, np.zeros(5)),
                          f.values.mean(), atol=1e-12)

    def test_multilinear_product(self, rng):
        # f(y) = y1 y2 extends to a * b; oracle is the defining sum
        S = sign_matrix(3).astype(float)
        f = cube.CubeFunction(3, S[:, 0] * S[:, 1])
        x = np.array([0.3, -0.7, 0.5])
        w = np.prod((1 + S * x) / 2.0, axis=1)
        direct = float(w @ f.values)
        val = cube.harmonic_extension(f, x)
        assert np.isclose(val, 0.3 * -0.7, atol=1e-12)
        assert np.isclose(val, direct, atol=1e-12)

    def test_gradient_is_extension_of_gradient(self, rng):
        f = random_function(rng, 4)
        x = rng.uniform(-1, 1, 4)
        w = np.prod((1 + sign_matrix(4).astype(float) * x) / 2.0, axis=1)
        expected = np.array(
            [w @ np.array([brute_gradient(f, y)[i] for y in range(16)])
             for i in range(4)])
        np.testing.assert_allclose(cube.harmonic_gradient(f, x), expected,
                                   atol=1e-12)


class TestTiltAndKl:
    def test_tilt_zero_is_identity(self, rng):
        nu = random_measure(rng, 4)
        same = cube.tilt(nu, np.zeros(4))
        np.testing.assert_allclose(same.probabilities(), nu.probabilities(),
                                   atol=1e-15)

    def test_tilt_of_uniform_is_product(self, rng):
        theta = rng.normal(size=5)
        nu = cube.tilt(cube.uniform_measure(5), theta)
        # per-coordinate two-point computation
        np.testing.assert_allclose(cube.center_of_mass(nu), np.tanh(theta),
                                   atol=1e-12)

    def test_tilt_additivity(self, rng):
        nu = random_measure(rng, 4)
        t1, t2 = rng.normal(size=4), rng.normal(size=4)
        a = cube.tilt(cube.tilt(nu, t1), t2)
        b = cube.tilt(nu, t1 + t2)
        np.testing.assert_allclose(a.probabilities(), b.probabilities(),
                                   atol=1e-14)

    def test_tilt_never_overflows(self):
        f = cube.CubeFunction(3, np.full(8, 700.0))
        nu = cube.CubeMeasure(f)
        tilted = cube.tilt(nu, np.full(3, 300.0))
        assert np.isfinite(tilted.log_z)
        assert np.isclose(tilted.probabilities().sum(), 1.0)

    def test_kl_self_and_point_mass(self, rng):
        nu = random_measure(rng, 5)
        assert cube.kl(nu, nu) == pytest.approx(0.0, abs=1e-13)
        pm = cube.point_mass(5, 17)
        assert cube.kl(pm, cube.uniform_measure(5)) == pytest.approx(5 * np.log(2))

    def test_kl_oracle(self, rng):
        nu1, nu2 = random_measure(rng, 5), random_measure(rng, 5)
        p, q = nu1.probabilities(), nu2.probabilities()
        direct = float(np.sum(p * (np.log(p) - np.log(q))))
        assert np.isclose(cube.kl(nu1, nu2), direct, atol=1e-12)

    def test_kl_infinite_without_absolute_continuity(self):
        pm0, pm1 = cube.point_mass(3, 0), cube.point_mass(3, 1)
        assert cube.kl(pm0, pm1) == np.inf


class TestGVH:
    def test_g_uniform_zero(self):
        assert np.all(cube.g_map(cube.uniform_measure(4), 3) == 0.0)

    def test_g_of_tilt_is_tanh_theta(self, rng):
        theta = rng.normal(size=4)
        nu = cube.tilt(cube.uniform_measure(4), theta)
        for y in range(16):
            np.testing.assert_allclose(cube.g_map(nu, y), np.tanh(theta),
                                       atol=1e-12)

    def test_g_equals_tanh_gradient(self, rng):
        nu = random_measure(rng, 4)
        fnorm = cube.CubeFunction(4, nu.normalized_log_density())
        for y in range(16):
            np.testing.assert_allclose(
                cube.g_map(nu, y),
                np.tanh(cube.discrete_gradient(fnorm, y)), atol=1e-12)

    def test_g_zero_density_conventions(self):
        logd = np.full(8, -np.inf)
        logd[0] = 0.0
        logd[1] = 0.0  # neighbors across coordinate 0
        nu = cube.measure_from_table(3, logd)
        g = cube.g_map(nu, 0)
        assert g[0] == pytest.approx(0.0)   # both neighbors alive, equal
        assert g[1] == -1.0                 # one-sided limit
        g4 = cube.g_map(nu, 4)              # both neighbors dead in coord 0
        assert g4[0] == 0.0

    def test_v_uniform_zero(self, rng):
        x = rng.uniform(-1, 1, 5)
        assert np.allclose(cube.v_map(cube.uniform_measure(5), x), 0.0)

    def test_v_of_tilt_at_zero(self, rng):
        theta = rng.normal(size=4)
        nu = cube.tilt(cube.uniform_measure(4), theta)
        np.testing.assert_allclose(cube.v_map(nu, np.zeros(4)),
                                   np.tanh(theta), atol=1e-12)

    def test_v_at_vertex(self, rng):
        nu = random_measure(rng, 4)
        e = np.exp(nu.f.values - nu.f.values.max())
        for y in (0, 6, 15):
            expected = np.empty(4)
            for i in range(4):
                plus, minus = y | (1 << i), y & ~(1 << i)
                expected[i] = (e[plus] - e[minus]) / (2.0 * e[y])
            np.testing.assert_allclose(
                cube.v_map(nu, vertex_to_signs(y, 4)), expected, atol=1e-10)

    def test_h_matrix_oracle(self, rng):
        nu = random_measure(rng, 4)
        p = nu.probabilities()
        G = np.array([cube.g_map(nu, y) for y in range(16)])
        mean = G.T @ p
        oracle = sum(p[y] * np.outer(G[y], G[y]) for y in range(16)) - np.outer(mean, mean)
        np.testing.assert_allclose(cube.h_matrix(nu), oracle, atol=1e-12)
        eig = np.linalg.eigvalsh(cube.h_matrix(nu))
        assert eig.min() > -1e-12
        assert np.all(np.diag(cube.h_matrix(nu)) <= 1.0 + 1e-12)

    def test_h_of_tilted_uniform_is_zero(self, rng):
        for _ in range(10):
            theta = rng.normal(size=6)
            H = cube.h_matrix(cube.tilt(cube.uniform_measure(6), theta))
            assert np.max(np.abs(H)) < 1e-12


class TestCenterAndProductFit:
    def test_uniform_and_point_mass(self):
        assert np.allclose(cube.center_of_mass(cube.uniform_measure(4)), 0.0)
        np.testing.assert_allclose(cube.center_of_mass(cube.point_mass(4, 11)),
                                   vertex_to_signs(11, 4), atol=0)

    def test_oracle(self, rng):
        nu = random_measure(rng, 5)
        p = nu.probabilities()
        oracle = sum(p[y] * vertex_to_signs(y, 5) for y in range(32))
        np.testing.assert_allclose(cube.center_of_mass(nu), oracle, atol=1e-12)

    def test_product_fit_marginals(self, rng):
        nu = random_measure(rng, 4)
        fit = cube.product_fit(nu)
        p = nu.probabilities()
        for i in range(4):
            marg = sum(p[y] for y in range(16) if (y >> i) & 1)
            assert np.isclose(fit.mean[i], 2 * marg - 1, atol=1e-12)

    def test_product_fixed_point(self, rng):
        m = rng.uniform(-0.8, 0.8, 4)
        nu = cube.ProductMeasure(m).as_measure()
        np.testing.assert_allclose(cube.product_fit(nu).mean, m, atol=1e-12)


class TestSampler:
    def test_uniform_thresholds(self):
        mu = cube.uniform_measure(3)
        u = np.array([-0.3, 0.7, -0.01])
        y = cube.sequential_sample(mu, u)
        # +1 exactly where u_i <= 0
        assert y == 0b101

    def test_point_mass(self, rng):
        pm = cube.point_mass(4, 9)
        for _ in range(10):
            assert cube.sequential_sample(pm, rng.uniform(-1, 1, 4)) == 9

    def test_exact_law(self, rng):
        for n in (3, 5, 7):
            nu = random_measure(rng, n)
            np.testing.assert_allclose(cube.sequential_law(nu),
                                       nu.probabilities(), atol=1e-12)

    def test_empirical_law(self, rng):
        nu = random_measure(rng, 5)
        u = rng.uniform(-1, 1, size=(100000, 5))
        counts = np.bincount(cube.sequential_sample_many(nu, u), minlength=32)
        tv = 0.5 * np.abs(counts / 1e5 - nu.probabilities()).sum()
        assert tv < 0.02

    def test_coupled_product_measure_agrees(self, rng):
        m = rng.uniform(-0.5, 0.5, 4)
        nu = cube.ProductMeasure(m).as_measure()
        for _ in range(20):
            z, y = cube.coupled_sample(nu, rng.uniform(-1, 1, 4))
            assert z == y

    def test_coupled_hamming_bound(self, rng):
        nu = random_measure(rng, 6)
        u = rng.uniform(-1, 1, size=(40000, 6))
        z, y = cube.coupled_sample_many(nu, u)
        mean_d = hamming(z, y).astype(float).mean()
        bound = np.sqrt(np.diag(cube.h_matrix(nu))).sum()
        se = hamming(z, y).astype(float).std(ddof=1) / 200.0
        assert mean_d <= bound + 3 * se

    def test_coupled_marginal_y(self, rng):
        nu = random_measure(rng, 4)
        u = rng.uniform(-1, 1, size=(200000, 4))
        _, y = cube.coupled_sample_many(nu, u)
        emp = np.bincount(y, minlength=16) / 2e5
        expected = cube.product_fit(nu).probabilities()
        assert 0.5 * np.abs(emp - expected).sum() < 0.02


class TestEtaAndTraceTail:
    def test_eta_values(self):
        assert np.allclose(cube.eta(np.zeros(3)), 0.0)
        val = cube.eta(np.array([0.5, 0.0]))[0]
        assert np.isclose(val, np.log(np.sqrt(3.0)), atol=1e-12)

    def test_eta_round_trip(self, rng):
        x = rng.uniform(-0.99, 0.99, 6)
        np.testing.assert_allclose(np.tanh(cube.eta(x)), x, atol=1e-14)

    def test_eta_boundary_error(self):
        with pytest.raises(ValueError):
            cube.eta(np.array([1.0, 0.0]))

    def test_trace_tail(self, rng):
        a = np.diag([4.0, 1.0, 3.0, 2.0])
        assert cube.trace_tail(a, 1) == pytest.approx(10.0)
        assert cube.trace_tail(np.eye(4), 3) == pytest.approx(2.0)
        assert cube.trace_tail(a, 5) == 0.0
        d = rng.normal(size=6)
        expected = np.sort(d)[::-1][2:].sum()
        assert cube.trace_tail(np.diag(d), 2.3) == pytest.approx(expected)


class TestStructureIdentities:
    def test_vtcoord_bounds(self, rng):
        for _ in range(10):
            nu = random_measure(rng, 4)
            for _ in range(20):
                x = rng.uniform(-0.5, 0.5, 4)
                v = cube.v_map(nu, x)
                assert np.max(np.abs(v)) <= 2.0 + 1e-9
            for _ in range(20):
                x = rng.uniform(-1, 1, 4)
                v = cube.v_map(nu, x)
                assert np.max(x * v) <= 1.0 + 1e-9

    def test_lem_htht_sandwich(self, rng):
        for _ in range(15):
            n = int(rng.integers(3, 7))
            nu = random_measure(rng, n)
            nu_t = random_measure(rng, n)
            theta = rng.normal(size=n) * 0.7
            pt = nu_t.probabilities()
            Ga = cube.g_table(nu)
            Gb = cube.g_table(cube.tilt(nu, theta))
            def diag_cov(G):
                mean = G.T @ pt
                return (G * G).T @ pt - mean * mean
            a_diag = diag_cov(Ga)
            b_diag = diag_cov(Gb)
            factor = np.exp(4.0 * np.max(np.abs(theta)))
            assert np.all(a_diag <= factor * b_diag + 1e-9)
            assert np.all(b_diag / factor <= a_diag + 1e-9)

    def test_chain_rule_kl(self, rng):
        mu8 = cube.uniform_measure(8)
        for _ in range(100):
            n = int(rng.integers(3, 9))
            nu = random_measure(rng, n)
            mu = cube.uniform_measure(n)
            fit = cube.product_fit(nu).as_measure()
            assert cube.kl(nu, mu) >= cube.kl(fit, mu) - 1e-9


class TestSerialization:
    def test_function_round_trip(self, rng):
        f = random_function(rng, 4)
        back = cube.CubeFunction.from_json(f.to_json())
        np.testing.assert_array_equal(back.values, f.values)
        obj = json.loads(f.to_json())
        assert obj["kind"] == "function" and obj["n"] == 4

    def test_measure_round_trip(self, rng):
        nu = random_measure(rng, 4)
        back = cube.CubeMeasure.from_json(nu.to_json())
        np.testing.assert_array_equal(back.f.values, nu.f.values)
        assert json.loads(nu.to_json())["kind"] == "log_density"

    def test_wrong_kind_rejected(self, rng):
        nu = random_measure(rng, 3)
        with pytest.raises(ValueError):
            cube.CubeFunction.from_json(nu.to_json())

    def test_normalization_invariant(self, rng):
        nu = random_measure(rng, 5)
        total = np.exp(nu.normalized_log_density()).sum()
        assert np.isclose(total, 2 ** 5, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=2 ** 31))
def test_sampler_law_property(n, seed):
    rng = np.random.default_rng(seed)
    nu = cube.measure_from_table(n, rng.normal(size=1 << n))
    np.testing.assert_allclose(cube.sequential_law(nu), nu.probabilities(),
                               atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=2, max_value=6), st.integers(min_value=0, max_value=2 ** 31))
def test_gcom_property(n, seed):
    rng = np.random.default_rng(seed)
    nu = cube.measure_from_table(n, rng.normal(size=1 << n))
    p = nu.probabilities()
    lhs = cube.g_table(nu).T @ p
    np.testing.assert_allclose(lhs, cube.center_of_mass(nu), atol=1e-10)
