import math
import warnings

import numpy as np
import pytest

from oracles import exact_gram, gepp_solve
from polyspline import GramMatrix, assemble_gram, kernel_eval, make_kernel_params, solve_coefficients
from polyspline.errors import ConditioningWarning, DimensionError, DomainError, SingularMatrixError
from polyspline.gram_solver import condition_estimate

P0 = make_kernel_params(0.001)
B, C = P0.b_const, P0.c_const


def random_points(seed, k, n, scale=10.0):
    return np.random.default_rng(seed).uniform(0, scale, (k, n))


class TestAssemble:
    def test_single_point(self):
        g = assemble_gram([[0.3]], P0)
        np.testing.assert_array_equal(g.matrix, [[1e6]])

    def test_two_points_unit_distance(self):
        g = assemble_gram([[0.0], [1.0]], P0)
        np.testing.assert_allclose(g.matrix, [[C, C - B], [C - B, C]], rtol=0, atol=1e-9)

    def test_critical_distance_pair(self):
        p = make_kernel_params(0.001, 0.625)
        g = assemble_gram([[0.0], [p.critical_distance]], p)
        m = g.matrix
        assert m[0, 1] == pytest.approx(C, abs=1e-6)
        assert m[0, 0] == m[1, 1] == C + 0.625

    def test_entries_are_kernel_values(self):
        x = random_points(1, 12, 3)
        p = make_kernel_params(0.01, 0.3)
        m = assemble_gram(x, p).matrix
        for i in range(12):
            for j in range(12):
                want = kernel_eval(float(np.linalg.norm(x[i] - x[j])), p) + (0.3 if i == j else 0.0)
                assert m[i, j] == pytest.approx(want, rel=1e-15)

    def test_symmetric_and_constant_diagonal(self):
        g = assemble_gram(random_points(2, 40, 2), make_kernel_params(0.001, 0.5))
        np.testing.assert_array_equal(g.matrix, g.matrix.T)
        np.testing.assert_array_equal(np.diag(g.matrix), np.full(40, C + 0.5))

    def test_thread_count_does_not_change_result(self):
        x = random_points(3, 1100, 2)
        g1 = assemble_gram(x, P0, threads=1)
        g4 = assemble_gram(x, P0, threads=4)
        np.testing.assert_array_equal(g1.shape, g4.shape)

    def test_env_thread_cap(self, monkeypatch):
        x = random_points(4, 1030, 1)
        monkeypatch.setenv("POLYSPLINE_THREADS", "3")
        g = assemble_gram(x, P0)
        np.testing.assert_array_equal(g.shape, assemble_gram(x, P0, threads=1).shape)

    def test_dimension_mismatch(self):
        with pytest.raises((DimensionError, ValueError)):
            assemble_gram([[0.0, 1.0], [1.0]], P0)

    def test_nonfinite(self):
        with pytest.raises(DomainError):
            assemble_gram([[0.0], [math.nan]], P0)

    def test_immutable(self):
        g = assemble_gram([[0.0], [1.0]], P0)
        with pytest.raises(ValueError):
            g.shape[0, 0] = 1.0


class TestSolve:
    def test_scalar(self):
        rep = solve_coefficients(GramMatrix.from_dense([[1e6]]), [5.0])
        assert rep.lambda_[0] == pytest.approx(5e-6, rel=1e-15)
        rep = solve_coefficients(assemble_gram([[0.0]], P0), [5.0])
        assert rep.lambda_[0] == pytest.approx(5e-6, rel=1e-15)

    def test_two_by_two_closed_form(self):
        rep = solve_coefficients(assemble_gram([[0.0], [1.0]], P0), [0.0, 1.0])
        # exact 2x2 inverse, evaluated in rationals
        from fractions import Fraction as F
        c, cb = F(C), F(C) + F(-B)
        det = c * c - cb * cb
        want = [float(-cb / det), float(c / det)]
        np.testing.assert_allclose(rep.lambda_, want, rtol=1e-12)

    def test_duplicate_points_singular(self):
        g = assemble_gram([[0.0], [1.0], [1.0], [3.0]], P0)
        with pytest.raises(SingularMatrixError, match="sigma2 > 0"):
            solve_coefficients(g, [1.0, 2.0, 2.0, 0.0])

    def test_duplicate_points_with_sigma2_ok(self):
        p = make_kernel_params(0.001, 0.1)
        g = assemble_gram([[0.0], [1.0], [1.0], [3.0]], p)
        rep = solve_coefficients(g, [1.0, 2.0, 2.5, 0.0])
        assert np.all(np.isfinite(rep.lambda_))

    def test_singular_message_mentions_exactbc(self):
        g = assemble_gram([[0.0], [0.0]], P0)
        with pytest.raises(SingularMatrixError, match="ExactBC"):
            solve_coefficients(g, [1.0, 1.0])

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            solve_coefficients(assemble_gram([[0.0], [1.0]], P0), [1.0])

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_exact_oracle_kernel_systems(self, seed):
        rng = np.random.default_rng(100 + seed)
        x = rng.uniform(0, 10, (10, rng.integers(1, 4)))
        p = make_kernel_params(0.001, rng.uniform(1e-6, 1e-3) * C)
        y = rng.uniform(-5, 5, 10)
        g = assemble_gram(x, p)
        rep = solve_coefficients(g, y)
        want = np.array([float(v) for v in gepp_solve(exact_gram(g.shape, g.offset), y)])
        np.testing.assert_allclose(rep.lambda_, want, rtol=1e-8, atol=0)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_exact_oracle_dense_systems(self, seed):
        rng = np.random.default_rng(200 + seed)
        a = rng.standard_normal((10, 10))
        a = a + a.T
        y = rng.standard_normal(10)
        rep = solve_coefficients(GramMatrix.from_dense(a), y)
        want = np.array([float(v) for v in gepp_solve(a.tolist(), y)])
        np.testing.assert_allclose(rep.lambda_, want, rtol=1e-8, atol=1e-12 * np.abs(want).max())

    @pytest.mark.parametrize("seed", range(20))
    def test_residual_well_posed(self, seed):
        rng = np.random.default_rng(300 + seed)
        k = int(rng.integers(2, 51))
        p = make_kernel_params(0.001, rng.uniform(1e-6, 1e-2) * C)
        x = rng.uniform(0, 10, (k, int(rng.integers(1, 4))))
        y = rng.uniform(-5, 5, k)
        g = assemble_gram(x, p)
        rep = solve_coefficients(g, y)
        exact = exact_gram(g.shape, g.offset)
        res = [float(sum(a * float(l) for a, l in zip(row, rep.lambda_)) - yi) for row, yi in zip(exact, y)]
        assert max(map(abs, res)) / np.abs(y).max() <= 1e-9

    def test_residual_contract_with_condition(self):
        x = random_points(5, 20, 1)
        y = np.random.default_rng(5).uniform(-5, 5, 20)
        g = assemble_gram(x, P0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConditioningWarning)
            rep = solve_coefficients(g, y)
        res = np.abs(g.matrix @ rep.lambda_ - y).max()
        assert res <= 1e-8 * np.abs(y).max() * rep.condition_estimate
        assert rep.condition_estimate >= 1

    def test_offset_level_is_c_times_sum(self):
        g = assemble_gram(random_points(6, 8, 2), make_kernel_params(0.001, 1.0))
        rep = solve_coefficients(g, np.arange(8.0))
        assert rep.offset_level == pytest.approx(C * math.fsum(rep.lambda_), rel=1e-6, abs=1e-9)

    def test_deterministic(self):
        g = assemble_gram(random_points(7, 30, 2), make_kernel_params(0.001, 0.2))
        y = np.linspace(-1, 1, 30)
        a, b = solve_coefficients(g, y), solve_coefficients(g, y)
        np.testing.assert_array_equal(a.lambda_, b.lambda_)
        assert a.condition_estimate == b.condition_estimate

    @pytest.mark.parametrize("seed", range(5))
    def test_permutation_symmetry(self, seed):
        rng = np.random.default_rng(400 + seed)
        x = rng.uniform(0, 10, (25, 2))
        y = rng.uniform(-5, 5, 25)
        p = make_kernel_params(0.001, 0.625)
        lam = solve_coefficients(assemble_gram(x, p), y).lambda_
        perm = rng.permutation(25)
        lam_p = solve_coefficients(assemble_gram(x[perm], p), y[perm]).lambda_
        back = np.empty(25)
        back[perm] = lam_p
        np.testing.assert_allclose(back, lam, rtol=0, atol=1e-10 * max(1.0, np.abs(lam).max()))

    @pytest.mark.parametrize("seed", range(10))
    def test_regularization_shrinks_coefficients(self, seed):
        rng = np.random.default_rng(500 + seed)
        x = np.sort(rng.uniform(0, 10, 15))[:, None]
        y = rng.uniform(-5, 5, 15)
        l0 = solve_coefficients(assemble_gram(x, P0), y).lambda_
        prev = np.linalg.norm(l0)
        for s2 in (1e-3, 0.1, 0.625, 10.0):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConditioningWarning)
                lam = solve_coefficients(assemble_gram(x, P0.with_sigma2(s2)), y).lambda_
            assert np.linalg.norm(lam) < prev
            prev = np.linalg.norm(lam)

    def test_ill_conditioned_warns(self):
        x = np.array([[0.0], [1e-3], [2e-3], [5.0]])
        with pytest.warns(ConditioningWarning):
            rep = solve_coefficients(assemble_gram(x, P0), [0.0, 1.0, 0.0, 1.0])
        assert rep.ill_conditioned

    def test_condition_estimate_close_to_true(self):
        g = assemble_gram(random_points(8, 12, 2), make_kernel_params(0.001, 1.0))
        true = np.linalg.cond(g.matrix, 1)
        est = condition_estimate(g)
        assert true / 10 <= est <= true * 1.0001

    def test_nonsymmetric_rejected(self):
        with pytest.raises(DomainError):
            GramMatrix.from_dense([[1.0, 2.0], [3.0, 1.0]])
