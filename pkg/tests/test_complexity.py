"""Width estimation against quadrature oracles and the analytic bounds."""

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import norm

from mfld import cube
from mfld.bits import sign_matrix
from mfld.complexity import (
    GradientSet,
    complexity_of,
    gw_monte_carlo,
    gw_samples,
    ising_complexity_bound,
    ising_lip_bound,
    ising_table,
    subgraph_complexity_bound,
)

from conftest import random_function


def test_origin_only():
    est = gw_monte_carlo(np.zeros((1, 3)), 1000, seed=0)
    assert est.mean == 0.0 and est.std_error == 0.0


def test_signed_basis_vector_half_normal():
    # E sup over {0, e1, -e1} of <x, G> = E |G_1|; oracle by quadrature
    oracle, _ = integrate.quad(lambda g: abs(g) * norm.pdf(g), -np.inf, np.inf)
    assert np.isclose(oracle, np.sqrt(2 / np.pi), atol=1e-10)
    pts = np.array([[0.0], [1.0], [-1.0]])
    est = gw_monte_carlo(pts, 200000, seed=1)
    assert abs(est.mean - oracle) <= 3 * est.std_error


def test_gradient_set_adjoins_origin():
    gs = GradientSet(np.array([[1.0, 2.0]]))
    assert any(np.all(row == 0.0) for row in gs.points)
    est = gw_monte_carlo(gs, 5000, seed=3)
    assert est.mean >= 0.0


def test_constant_function_zero_complexity():
    f = cube.CubeFunction(4, np.full(16, 3.0))
    est = complexity_of(f, 500, seed=0)
    assert est.mean == 0.0


def test_linear_function_positive_part_oracle():
    # gradient set {theta, 0}: E max(<theta, G>, 0) = |theta| E max(G, 0)
    theta = np.array([0.6, -0.8, 1.1])
    norm_theta = np.linalg.norm(theta)
    oracle, _ = integrate.quad(lambda g: max(g, 0.0) * norm.pdf(g),
                               -np.inf, np.inf)
    assert np.isclose(oracle, 1 / np.sqrt(2 * np.pi), atol=1e-10)
    f = cube.CubeFunction(3, sign_matrix(3).astype(float) @ theta)
    est = complexity_of(f, 200000, seed=2)
    assert abs(est.mean - norm_theta * oracle) <= 3 * est.std_error


def test_self_consistency_high_precision(rng):
    f = random_function(rng, 4)
    ref = complexity_of(f, 500000, seed=11)
    est = complexity_of(f, 20000, seed=12)
    sigma = np.hypot(est.std_error, ref.std_error)
    assert abs(est.mean - ref.mean) <= 3 * sigma


def test_monotone_under_inclusion(rng):
    pts = rng.normal(size=(8, 5))
    bigger = np.vstack([pts, rng.normal(size=(4, 5))])
    sup_small = gw_samples(pts, 2000, seed=5)
    sup_big = gw_samples(bigger, 2000, seed=5)
    assert np.all(sup_big >= sup_small - 1e-12)


def test_determinism_and_chunk_stability():
    pts = np.random.default_rng(0).normal(size=(6, 4))
    a = gw_samples(pts, 3000, seed=9)
    b = gw_samples(pts, 3000, seed=9)
    np.testing.assert_array_equal(a, b)
    # a prefix of a longer run is identical: chunked streams do not shift
    c = gw_samples(pts, 5000, seed=9)
    np.testing.assert_array_equal(c[:3000], a)


def test_subsample_is_lower_estimate(rng):
    f = random_function(rng, 6)
    full = gw_samples(np.vstack([cube.gradient_table(f), np.zeros(6)]), 2000, 4)
    sub = complexity_of(f, 2000, seed=4, vertex_subsample=16)
    assert sub.lower_estimate
    assert sub.mean <= full.mean() + 3 * sub.std_error


class TestIsingBounds:
    def test_zero(self):
        assert ising_complexity_bound(np.zeros((3, 3)), np.zeros(3)) == 0.0
        assert ising_lip_bound(np.zeros((3, 3)), np.zeros(3)) == 0.0

    def test_curie_weiss_values(self):
        n, beta = 10, 1.0
        a = beta / n * (np.ones((n, n)) - np.eye(n))
        np.fill_diagonal(a, 0.0)
        assert ising_complexity_bound(a, np.zeros(n)) == pytest.approx(3.0)
        assert ising_lip_bound(a, np.zeros(n)) == pytest.approx(0.9)

    def test_field_only(self):
        b = np.array([2.0, 0.0, 0.0, 0.0])
        assert ising_complexity_bound(np.zeros((4, 4)), b) == pytest.approx(4.0)

    def test_lip_row_sum_oracle(self, rng):
        a = rng.normal(size=(4, 4))
        a = (a + a.T) / 2
        np.fill_diagonal(a, 0.0)
        b = rng.normal(size=4)
        oracle = max(np.abs(a[i]).sum() for i in range(4)) + np.abs(b).max()
        assert ising_lip_bound(a, b) == pytest.approx(oracle)

    def test_nonzero_diagonal_rejected(self):
        with pytest.raises(ValueError):
            ising_complexity_bound(np.eye(3), np.zeros(3))

    def test_gradient_is_a_sigma_plus_b(self, rng):
        a = rng.normal(size=(5, 5)) / 5
        a = (a + a.T) / 2
        np.fill_diagonal(a, 0.0)
        b = rng.normal(size=5) * 0.2
        f = ising_table(a, b)
        S = sign_matrix(5).astype(float)
        for y in (0, 13, 31):
            np.testing.assert_allclose(cube.discrete_gradient(f, y),
                                       a @ S[y] + b, atol=1e-12)

    def test_exhaustive_complexity_below_bound(self, rng):
        violations = 0
        for _ in range(20):
            n = int(rng.integers(4, 13))
            a = rng.normal(size=(n, n)) / n
            a = (a + a.T) / 2
            np.fill_diagonal(a, 0.0)
            b = rng.normal(size=n) * 0.3
            f = ising_table(a, b)
            est = complexity_of(f, 3000, seed=int(rng.integers(2 ** 31)))
            if est.mean > ising_complexity_bound(a, b) + 3 * est.std_error:
                violations += 1
        assert violations == 0

    def test_lip_below_bound(self, rng):
        for _ in range(10):
            n = int(rng.integers(3, 9))
            a = rng.normal(size=(n, n))
            a = (a + a.T) / 2
            np.fill_diagonal(a, 0.0)
            b = rng.normal(size=n)
            assert cube.lip(ising_table(a, b)) <= ising_lip_bound(a, b) + 1e-12


class TestSubgraphBound:
    def test_triangle_k3(self):
        assert subgraph_complexity_bound(3, 100) == pytest.approx(3000.0)

    def test_single_edge(self):
        assert subgraph_complexity_bound(1, 4) == pytest.approx(8.0)

    def test_k4(self):
        assert subgraph_complexity_bound(6, 9) == pytest.approx(162.0)


def test_sudakov_fernique_direction(rng):
    # width of {g(y)} is below width of {grad f(y)} with shared draws
    for _ in range(5):
        nu = cube.measure_from_table(5, rng.normal(size=32))
        fnorm = cube.CubeFunction(5, nu.normalized_log_density())
        grads = cube.gradient_table(fnorm)
        gs = cube.g_table(nu)
        seed = int(rng.integers(2 ** 31))
        sup_g = gw_samples(gs, 4000, seed)
        sup_f = gw_samples(grads, 4000, seed)
        joint_se = np.hypot(sup_g.std(ddof=1), sup_f.std(ddof=1)) / np.sqrt(4000)
        assert sup_g.mean() <= sup_f.mean() + 3 * joint_se
