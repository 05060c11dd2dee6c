"""Cubic B-spline bases, difference penalties, and centering constraints.

Building blocks for the penalized additive fits in :mod:`sentmetrics.gamlite`.
Bases are cubic with knots at covariate quantiles; evaluation is delegated
to :func:`scipy.interpolate.BSpline.design_matrix`, whose rows satisfy the
partition of unity within tight tolerance.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import BSpline

DEGREE = 3


def quantile_knots(x, k: int, degree: int = DEGREE) -> np.ndarray:
    """Knot vector for a k-function basis with interior knots at quantiles.

    Boundary knots sit at ``min(x)``/``max(x)`` with multiplicity
    ``degree + 1``; the ``k - degree - 1`` interior knots are placed at
    equally spaced quantiles of the data. Raises if the data cannot
    support strictly increasing knots (ties, or a constant covariate).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"x must be 1-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x has non-finite entries")
    if k < degree + 1:
        raise ValueError(f"basis size k={k} must be >= degree + 1 = {degree + 1}")
    if x.size < k:
        raise ValueError(f"need at least k={k} points to place knots, got {x.size}")
    lo, hi = float(x.min()), float(x.max())
    if not hi > lo:
        raise ValueError("covariate is constant: knots cannot be strictly increasing")
    n_interior = k - degree - 1
    if n_interior > 0:
        qs = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
        interior = np.quantile(x, qs)
    else:
        interior = np.empty(0)
    breaks = np.concatenate([[lo], interior, [hi]])
    if np.any(np.diff(breaks) <= 0):
        raise ValueError(
            "quantile knots are not strictly increasing (tied covariate values); "
            "reduce the basis size k"
        )
    return np.concatenate([[lo] * degree, breaks, [hi] * degree])


def bspline_basis(x, k: int, knots, degree: int = DEGREE) -> np.ndarray:
    """Dense ``n x k`` cubic B-spline design block evaluated at ``x``.

    ``x`` must lie within the knot span; rows sum to one.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    knots = np.asarray(knots, dtype=float)
    if len(knots) != k + degree + 1:
        raise ValueError(
            f"knot vector length {len(knots)} inconsistent with k={k}, degree={degree}"
        )
    lo, hi = knots[degree], knots[-(degree + 1)]
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError(f"x outside knot span [{lo}, {hi}]")
    return BSpline.design_matrix(x, knots, degree).toarray()


def second_difference_penalty(k: int) -> np.ndarray:
    """``k x k`` penalty ``D2' D2`` on second differences of coefficients.

    Its null space holds coefficient vectors affine in the basis index, so
    heavy smoothing shrinks a term toward an (approximately) linear trend
    rather than toward zero.
    """
    if k < 3:
        raise ValueError(f"second differences need k >= 3, got {k}")
    d2 = np.diff(np.eye(k), n=2, axis=0)
    return d2.T @ d2


def sum_to_zero_constraint(basis: np.ndarray) -> np.ndarray:
    """Reparameterization ``Z`` absorbing the sum-to-zero constraint.

    Returns a ``k x (k-1)`` matrix with orthonormal columns spanning the
    null space of ``1'B``: with coefficients ``beta = Z gamma`` the fitted
    smooth sums to zero over the data, keeping the model intercept
    identifiable.
    """
    colsum = basis.sum(axis=0)
    q, _ = np.linalg.qr(colsum[:, None], mode="complete")
    return q[:, 1:]
