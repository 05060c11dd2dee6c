import numpy as np
import pytest

from sentmetrics.splines import (
    bspline_basis,
    quantile_knots,
    second_difference_penalty,
    sum_to_zero_constraint,
)


def cox_de_boor(x, knots, degree):
    """Independent textbook recursion for B-spline basis evaluation.

    Slow reference used to cross-check the production basis. Handles the
    right boundary by the usual half-open-interval convention with the
    last interval closed.
    """
    n_basis = len(knots) - degree - 1
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros((x.size, n_basis))
    for row, xv in enumerate(x):
        b = np.zeros((len(knots) - 1, degree + 1))
        for i in range(len(knots) - 1):
            if knots[i] <= xv < knots[i + 1]:
                b[i, 0] = 1.0
            elif xv == knots[-1] and knots[i] < knots[i + 1] == knots[-1]:
                b[i, 0] = 1.0
        for d in range(1, degree + 1):
            for i in range(len(knots) - 1 - d):
                left = 0.0
                if knots[i + d] > knots[i]:
                    left = (xv - knots[i]) / (knots[i + d] - knots[i]) * b[i, d - 1]
                right = 0.0
                if knots[i + d + 1] > knots[i + 1]:
                    right = (
                        (knots[i + d + 1] - xv)
                        / (knots[i + d + 1] - knots[i + 1])
                        * b[i + 1, d - 1]
                    )
                b[i, d] = left + right
        out[row] = b[:n_basis, degree]
    return out


class TestQuantileKnots:
    def test_structure(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 10, size=200)
        k = 10
        knots = quantile_knots(x, k)
        assert len(knots) == k + 4
        assert knots[0] == knots[3] == x.min()
        assert knots[-1] == knots[-4] == x.max()
        interior = knots[4:-4]
        assert np.all(np.diff(interior) > 0)

    def test_constant_covariate_rejected(self):
        with pytest.raises(ValueError, match="constant"):
            quantile_knots(np.ones(50), 6)

    def test_tied_quantiles_rejected(self):
        x = np.array([0.0] * 40 + [1.0] * 2)
        with pytest.raises(ValueError, match="strictly increasing"):
            quantile_knots(x, 8)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            quantile_knots(np.arange(3.0), 4)

    def test_small_k_has_no_interior_knots(self):
        x = np.linspace(0, 1, 30)
        knots = quantile_knots(x, 4)
        assert len(knots) == 8


class TestBsplineBasis:
    def test_partition_of_unity(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(-3, 7, size=500)
        knots = quantile_knots(x, 12)
        basis = bspline_basis(x, 12, knots)
        assert basis.shape == (500, 12)
        np.testing.assert_allclose(basis.sum(axis=1), 1.0, atol=1e-10)

    def test_left_boundary_local_support(self):
        x = np.linspace(0, 1, 50)
        knots = quantile_knots(x, 8)
        row = bspline_basis(np.array([0.0]), 8, knots)[0]
        assert row[0] == pytest.approx(1.0, abs=1e-12)
        assert np.all(row[1:] == 0.0)

    def test_square_block_invertible(self):
        # k = 4 basis functions on 4 points: oracle is an independent rank check
        x = np.array([0.0, 0.3, 0.7, 1.0])
        knots = quantile_knots(x, 4)
        block = bspline_basis(x, 4, knots)
        assert block.shape == (4, 4)
        assert np.linalg.matrix_rank(block) == 4

    def test_out_of_span_rejected(self):
        x = np.linspace(0, 1, 30)
        knots = quantile_knots(x, 6)
        with pytest.raises(ValueError, match="knot span"):
            bspline_basis(np.array([1.5]), 6, knots)
        with pytest.raises(ValueError, match="knot span"):
            bspline_basis(np.array([-0.1]), 6, knots)

    def test_matches_cox_de_boor_recursion(self):
        rng = np.random.default_rng(2)
        for k in (4, 6, 9):
            x = np.sort(rng.uniform(0, 5, size=60))
            knots = quantile_knots(x, k)
            ours = bspline_basis(x, k, knots)
            reference = cox_de_boor(x, knots, 3)
            np.testing.assert_allclose(ours, reference, atol=1e-12)

    def test_knot_length_validation(self):
        with pytest.raises(ValueError):
            bspline_basis(np.array([0.5]), 6, np.linspace(0, 1, 5))


class TestPenaltyAndConstraint:
    def test_second_difference_null_space_is_affine(self):
        k = 9
        pen = second_difference_penalty(k)
        idx = np.arange(k, dtype=float)
        for coef in (np.ones(k), idx, 3.0 - 2.0 * idx):
            assert coef @ pen @ coef == pytest.approx(0.0, abs=1e-12)
        curved = idx**2
        assert curved @ pen @ curved > 1.0

    def test_penalty_is_psd(self):
        pen = second_difference_penalty(12)
        eigvals = np.linalg.eigvalsh(pen)
        assert eigvals.min() > -1e-12

    def test_sum_to_zero_constraint(self):
        rng = np.random.default_rng(3)
        x = rng.uniform(0, 1, size=80)
        knots = quantile_knots(x, 7)
        basis = bspline_basis(x, 7, knots)
        z = sum_to_zero_constraint(basis)
        assert z.shape == (7, 6)
        centered = basis @ z
        np.testing.assert_allclose(centered.sum(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(z.T @ z, np.eye(6), atol=1e-12)
