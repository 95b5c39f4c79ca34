"""Exact W1 against an independent Kantorovich dual LP, plus the couplings."""

import numpy as np
import pytest
from scipy import sparse
from scipy.optimize import linprog

from mfld import cube
from mfld.bits import hamming
from mfld.transport import (
    W1SizeError,
    step1_bound,
    tv_distance,
    w1_exact,
    w1_upper_coupling,
)

from conftest import random_measure


def dual_lp_w1(nu1, nu2):
    """Kantorovich dual: max <phi, p1 - p2> over potentials 1-Lipschitz on
    hypercube edges (edge constraints imply the full Hamming constraint)."""
    n = nu1.n
    size = 1 << n
    diff = nu1.probabilities() - nu2.probabilities()
    rows, cols, data = [], [], []
    r = 0
    for i in range(n):
        for y in range(size):
            other = y ^ (1 << i)
            if other < y:
                continue
            rows += [r, r, r + 1, r + 1]
            cols += [y, other, y, other]
            data += [1.0, -1.0, -1.0, 1.0]
            r += 2
    a_ub = sparse.csr_matrix((data, (rows, cols)), shape=(r, size))
    res = linprog(-diff, A_ub=a_ub, b_ub=np.ones(r),
                  bounds=[(None, None)] * size, method="highs")
    assert res.status == 0
    return -res.fun


class TestW1Exact:
    def test_identical_measures(self, rng):
        nu = random_measure(rng, 4)
        val, plan = w1_exact(nu, nu)
        assert val == 0.0
        row = np.zeros(16)
        np.add.at(row, plan.source, plan.mass)
        np.testing.assert_allclose(row, nu.probabilities(), atol=1e-12)

    def test_antipodal_point_masses(self):
        val, plan = w1_exact(cube.point_mass(5, 0), cube.point_mass(5, 31))
        assert val == pytest.approx(5.0, abs=1e-9)

    def test_against_dual_lp(self, rng):
        for _ in range(5):
            nu1, nu2 = random_measure(rng, 6), random_measure(rng, 6)
            val, _ = w1_exact(nu1, nu2)
            assert val == pytest.approx(dual_lp_w1(nu1, nu2), abs=1e-8)

    def test_metric_axioms(self, rng):
        for _ in range(5):
            ms = [random_measure(rng, 5) for _ in range(3)]
            d01, _ = w1_exact(ms[0], ms[1])
            d10, _ = w1_exact(ms[1], ms[0])
            d12, _ = w1_exact(ms[1], ms[2])
            d02, _ = w1_exact(ms[0], ms[2])
            assert d01 == pytest.approx(d10, abs=1e-9)
            assert d02 <= d01 + d12 + 1e-8

    def test_plan_feasibility_and_cost(self, rng):
        nu1, nu2 = random_measure(rng, 5), random_measure(rng, 5)
        val, plan = w1_exact(nu1, nu2)
        row, col = np.zeros(32), np.zeros(32)
        np.add.at(row, plan.source, plan.mass)
        np.add.at(col, plan.target, plan.mass)
        np.testing.assert_allclose(row, nu1.probabilities(), atol=1e-10)
        np.testing.assert_allclose(col, nu2.probabilities(), atol=1e-10)
        assert np.all(plan.mass >= -1e-14)
        cost = float(np.sum(plan.mass * hamming(plan.source, plan.target)))
        assert cost == pytest.approx(val, abs=1e-12)

    def test_dual_potential_is_lipschitz(self, rng):
        nu1, nu2 = random_measure(rng, 5), random_measure(rng, 5)
        _, plan = w1_exact(nu1, nu2)
        phi = plan.potential
        for i in range(5):
            assert np.max(np.abs(phi - phi[np.arange(32) ^ (1 << i)])) <= 1 + 1e-9

    def test_size_cap(self):
        with pytest.raises(W1SizeError):
            big = cube.uniform_measure(11)
            w1_exact(big, big)


class TestCoupling:
    def test_product_measure_zero(self, rng):
        m = rng.uniform(-0.6, 0.6, 5)
        nu = cube.ProductMeasure(m).as_measure()
        est = w1_upper_coupling(nu, 2000, seed=4)
        assert est.mean == 0.0

    def test_tilt_of_uniform_zero(self, rng):
        nu = cube.tilt(cube.uniform_measure(4), rng.normal(size=4))
        est = w1_upper_coupling(nu, 2000, seed=5)
        assert est.mean == 0.0

    def test_upper_bounds_exact(self, rng):
        for _ in range(5):
            nu = random_measure(rng, 8)
            est = w1_upper_coupling(nu, 20000, seed=int(rng.integers(2 ** 31)))
            exact, _ = w1_exact(nu, cube.product_fit(nu).as_measure())
            assert est.mean >= exact - 3 * est.std_error


class TestStep1:
    def test_tilt_and_point_mass(self, rng):
        nu = cube.tilt(cube.uniform_measure(5), rng.normal(size=5))
        assert step1_bound(nu) < 1e-6
        assert step1_bound(cube.point_mass(5, 3)) == pytest.approx(0.0, abs=1e-12)

    def test_dominates_exact_w1(self, rng):
        for _ in range(30):
            n = int(rng.integers(4, 9))
            nu = random_measure(rng, n)
            w, _ = w1_exact(nu, cube.product_fit(nu).as_measure())
            assert w <= step1_bound(nu) + 1e-12


class TestTv:
    def test_extremes(self):
        assert tv_distance(cube.point_mass(3, 0), cube.point_mass(3, 0)) == 0.0
        assert tv_distance(cube.point_mass(3, 0), cube.point_mass(3, 5)) == 1.0

    def test_oracle(self, rng):
        nu1, nu2 = random_measure(rng, 5), random_measure(rng, 5)
        direct = 0.5 * np.abs(nu1.probabilities() - nu2.probabilities()).sum()
        assert tv_distance(nu1, nu2) == pytest.approx(direct, abs=1e-15)
