"""Penalized-spline additive regression with ridge participant intercepts.

A deliberately small stand-in for a full GAMM analysis: reading speed is
modeled as a sum of cubic B-spline smooths (second-difference penalties,
sum-to-zero centering), a language fixed effect, and ridge-penalized
participant intercepts. Everything is closed-form penalized least squares:

    minimize ||y - X beta||^2 + sum_j lambda_j beta' S_j beta

Smoothing parameters are chosen by coordinate-wise GCV grid search, model
quality by AIC with effective degrees of freedom (the trace of the
influence matrix) in place of a parameter count, and models are compared
by the difference in AIC on identical rows: negative favors the richer
model.

Metric covariates (surprisal, relevance) are log-transformed before
fitting; the applied shift is recorded on the fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    ComparisonError,
    EvaluationError,
    NumericalError,
    UndefinedCorrelationError,
)
from .splines import (
    DEGREE,
    bspline_basis,
    quantile_knots,
    second_difference_penalty,
    sum_to_zero_constraint,
)

CONTROL_COVARIATES = ("mean_word_length", "mean_log_freq")
METRIC_COVARIATES = (
    "surprisal_cr_bits",
    "surprisal_nll_bits",
    "surprisal_nsp_bits",
    "relevance",
)

#: Small offset added before the log transform of metric covariates.
LOG_EPS = 1e-6

#: Reciprocal-condition floor below which the penalized system is treated
#: as singular. Near machine epsilon: extreme-but-dominated penalties (huge
#: lambda) are legitimate, exact collinearity is not.
_RCOND_FLOOR = 1e-15

PARTICIPANT_TERM = "participant"


@dataclass(frozen=True)
class FeatureRow:
    """One participant x sentence observation with predictors attached."""

    participant_id: str
    language: str
    text_id: str
    sentence_index: int
    reading_speed: float
    mean_word_length: float
    mean_log_freq: float
    surprisal_cr_bits: float | None = None
    surprisal_nll_bits: float | None = None
    surprisal_nsp_bits: float | None = None
    relevance: float | None = None

    def __post_init__(self) -> None:
        if not self.reading_speed > 0:
            raise ValueError(f"reading_speed must be > 0, got {self.reading_speed}")
        for name in CONTROL_COVARIATES:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class SmoothTerm:
    """A cubic B-spline smooth of one covariate with a difference penalty."""

    covariate: str
    k: int = 10

    def __post_init__(self) -> None:
        if self.k < 4:
            raise ValueError(f"basis size k must be >= 4, got {self.k}")


@dataclass(frozen=True)
class ModelSpec:
    """Additive model layout; every spec carries the two control smooths."""

    smooths: tuple[SmoothTerm, ...]
    participant_intercepts: bool = True
    language_effect: bool = True
    name: str = ""

    def __post_init__(self) -> None:
        names = [t.covariate for t in self.smooths]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate smooth covariates in {names}")
        missing = [c for c in CONTROL_COVARIATES if c not in names]
        if missing:
            raise ValueError(f"control smooth(s) missing from spec: {missing}")

    def penalized_terms(self) -> list[str]:
        terms = [t.covariate for t in self.smooths]
        if self.participant_intercepts:
            terms.append(PARTICIPANT_TERM)
        return terms


def base_spec(k: int = 10) -> ModelSpec:
    """Controls-only model: the baseline of every comparison."""
    return ModelSpec(
        smooths=tuple(SmoothTerm(c, k) for c in CONTROL_COVARIATES),
        name="base",
    )


def full_spec(metrics: Sequence[str], k: int = 10) -> ModelSpec:
    """Base model plus one smooth per listed metric covariate."""
    if not metrics:
        raise ValueError("full_spec needs at least one metric")
    covs = tuple(CONTROL_COVARIATES) + tuple(metrics)
    return ModelSpec(
        smooths=tuple(SmoothTerm(c, k) for c in covs),
        name="full:" + "+".join(metrics),
    )


def log_transform(values: np.ndarray) -> tuple[np.ndarray, float]:
    """``ln(x + shift)`` with the smallest standard shift keeping x positive.

    Nonnegative inputs get ``LOG_EPS``; inputs with negatives get
    ``1 + LOG_EPS``, enlarged when values fall below -1 so the argument
    stays positive. The shift is returned for reporting.
    """
    values = np.asarray(values, dtype=float)
    mn = float(values.min())
    shift = LOG_EPS if mn >= 0 else 1.0 + LOG_EPS
    if mn + shift <= 0:
        shift = LOG_EPS - mn
    return np.log(values + shift), shift


@dataclass
class _Block:
    name: str
    kind: str  # intercept | smooth | factor | ridge
    sl: slice
    penalty: np.ndarray | None = None
    knots: np.ndarray | None = None
    zmat: np.ndarray | None = None
    k: int = 0
    shift: float | None = None
    levels: tuple[str, ...] = ()


@dataclass
class Design:
    """Assembled design matrix with block structure and penalties."""

    X: np.ndarray
    y: np.ndarray
    blocks: list[_Block]
    n_dropped: int
    spec: ModelSpec
    _xtx: np.ndarray | None = field(default=None, repr=False)

    @property
    def xtx(self) -> np.ndarray:
        if self._xtx is None:
            self._xtx = self.X.T @ self.X
        return self._xtx

    def penalized_blocks(self) -> list[_Block]:
        return [b for b in self.blocks if b.penalty is not None]


def build_design(spec: ModelSpec, rows: Sequence[FeatureRow]) -> Design:
    """Drop rows with missing covariates and assemble X, y, and penalties."""
    covs = [t.covariate for t in spec.smooths]
    kept = [r for r in rows if all(getattr(r, c) is not None for c in covs)]
    n_dropped = len(rows) - len(kept)
    n = len(kept)
    label = spec.name or "model"
    if n == 0:
        raise EvaluationError(f"{label}: no rows left after dropping missing values")
    min_k = max(t.k for t in spec.smooths)
    if n <= min_k:
        raise EvaluationError(
            f"{label}: n={n} rows is not above the basis size k={min_k}"
        )

    y = np.array([r.reading_speed for r in kept], dtype=float)
    columns: list[np.ndarray] = [np.ones((n, 1))]
    blocks: list[_Block] = [_Block("intercept", "intercept", slice(0, 1))]
    col = 1

    for term in spec.smooths:
        vals = np.array([getattr(r, term.covariate) for r in kept], dtype=float)
        shift: float | None = None
        if term.covariate in METRIC_COVARIATES:
            vals, shift = log_transform(vals)
        knots = quantile_knots(vals, term.k)
        basis = bspline_basis(vals, term.k, knots)
        zmat = sum_to_zero_constraint(basis)
        centered = basis @ zmat
        pen = zmat.T @ second_difference_penalty(term.k) @ zmat
        width = centered.shape[1]
        columns.append(centered)
        blocks.append(
            _Block(
                term.covariate,
                "smooth",
                slice(col, col + width),
                penalty=pen,
                knots=knots,
                zmat=zmat,
                k=term.k,
                shift=shift,
            )
        )
        col += width

    if spec.language_effect:
        levels = tuple(sorted({r.language for r in kept}))
        if len(levels) > 1:
            dummies = np.zeros((n, len(levels) - 1))
            index = {lang: j for j, lang in enumerate(levels)}
            for i, r in enumerate(kept):
                j = index[r.language]
                if j > 0:
                    dummies[i, j - 1] = 1.0
            columns.append(dummies)
            blocks.append(
                _Block("language", "factor", slice(col, col + len(levels) - 1),
                       levels=levels)
            )
            col += len(levels) - 1

    if spec.participant_intercepts:
        levels = tuple(sorted({r.participant_id for r in kept}))
        dummies = np.zeros((n, len(levels)))
        index = {p: j for j, p in enumerate(levels)}
        for i, r in enumerate(kept):
            dummies[i, index[r.participant_id]] = 1.0
        columns.append(dummies)
        blocks.append(
            _Block(PARTICIPANT_TERM, "ridge", slice(col, col + len(levels)),
                   penalty=np.eye(len(levels)), levels=levels)
        )
        col += len(levels)

    X = np.hstack(columns)
    if n <= X.shape[1]:
        raise EvaluationError(
            f"{label}: n={n} rows is not above the total basis size p={X.shape[1]}"
        )
    return Design(X, y, blocks, n_dropped, spec)


@dataclass
class FitResult:
    """A fitted penalized additive model."""

    coefficients: np.ndarray
    fitted: np.ndarray
    rss: float
    edf: float
    sigma2: float
    aic: float
    lambdas: dict[str, float]
    per_term_edf: dict[str, float]
    n: int
    n_dropped: int
    blocks: list[_Block] = field(repr=False, default_factory=list)

    def __post_init__(self) -> None:
        if self.rss < -1e-9:
            raise ValueError(f"negative rss {self.rss}")
        if not 0 < self.edf <= self.n + 1e-8:
            raise ValueError(f"edf {self.edf} outside (0, n={self.n}]")

    def _smooth_block(self, covariate: str) -> _Block:
        for block in self.blocks:
            if block.kind == "smooth" and block.name == covariate:
                return block
        raise KeyError(f"no smooth term for covariate {covariate!r}")

    def smooth_component(self, covariate: str, x, transformed: bool = False) -> np.ndarray:
        """Centered fitted smooth evaluated at ``x`` (original scale unless
        ``transformed``; metric covariates are shifted and logged first)."""
        block = self._smooth_block(covariate)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if block.shift is not None and not transformed:
            x = np.log(x + block.shift)
        basis = bspline_basis(x, block.k, block.knots)
        return basis @ block.zmat @ self.coefficients[block.sl]

    def smooth_shift(self, covariate: str) -> float | None:
        """Log-transform shift applied to the covariate, if any."""
        return self._smooth_block(covariate).shift

    def endpoint_delta(self, covariate: str) -> float:
        """Fitted-smooth difference between the covariate's max and min.

        The sign summarizes the direction of the fitted effect; metric log
        transforms are monotone, so the sign is shared with the raw scale.
        """
        block = self._smooth_block(covariate)
        lo, hi = block.knots[DEGREE], block.knots[-(DEGREE + 1)]
        comp = self.smooth_component(covariate, [lo, hi], transformed=True)
        return float(comp[1] - comp[0])


def _solve(design: Design, lambdas: Mapping[str, float]) -> FitResult:
    X, y = design.X, design.y
    n, p = X.shape
    penalized = design.penalized_blocks()
    missing = [b.name for b in penalized if b.name not in lambdas]
    if missing:
        raise ValueError(f"missing smoothing parameter(s) for {missing}")

    A = design.xtx.copy()
    lam_used: dict[str, float] = {}
    for block in penalized:
        lam = float(lambdas[block.name])
        if lam < 0:
            raise ValueError(f"lambda for {block.name} must be >= 0, got {lam}")
        A[block.sl, block.sl] += lam * block.penalty
        lam_used[block.name] = lam

    anorm = float(np.linalg.norm(A, 1))
    try:
        chol = scipy.linalg.cho_factor(A, lower=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        cond = float(np.linalg.cond(A))
        raise NumericalError(
            f"singular penalized normal matrix (cond ~ {cond:.3e}); "
            f"lambdas={lam_used}"
        ) from exc
    rcond, info = scipy.linalg.lapack.dpocon(chol[0], anorm, uplo="L")
    if info != 0 or rcond < _RCOND_FLOOR:
        cond = 1.0 / rcond if rcond > 0 else float("inf")
        raise NumericalError(
            f"penalized normal matrix is numerically singular "
            f"(cond ~ {cond:.3e}); lambdas={lam_used}"
        )

    beta = scipy.linalg.cho_solve(chol, X.T @ y)
    influence_core = scipy.linalg.cho_solve(chol, design.xtx)  # A^{-1} X'X
    diag = np.diag(influence_core)
    edf = float(diag.sum())
    fitted = X @ beta
    residuals = y - fitted
    rss = float(residuals @ residuals)

    per_term_edf = {b.name: float(diag[b.sl].sum()) for b in design.blocks}
    dof_resid = n - edf
    sigma2 = rss / dof_resid if dof_resid > 0 else float("nan")
    aic_value = n * math.log(rss / n) + 2.0 * (edf + 1.0) if rss > 0 else float("-inf")

    return FitResult(
        coefficients=beta,
        fitted=fitted,
        rss=rss,
        edf=edf,
        sigma2=sigma2,
        aic=aic_value,
        lambdas=lam_used,
        per_term_edf=per_term_edf,
        n=n,
        n_dropped=design.n_dropped,
        blocks=design.blocks,
    )


def fit_penalized(
    spec: ModelSpec,
    rows: Sequence[FeatureRow],
    lambdas: Mapping[str, float],
) -> FitResult:
    """Closed-form penalized least-squares fit of ``spec`` on ``rows``."""
    return _solve(build_design(spec, rows), lambdas)


def _gcv(design: Design, lambdas: Mapping[str, float]) -> float:
    try:
        fit = _solve(design, lambdas)
    except NumericalError:
        return float("inf")
    denom = design.X.shape[0] - fit.edf
    if denom <= 0 or fit.rss <= 0:
        return float("inf")
    return design.X.shape[0] * fit.rss / denom**2


def _select_on_design(design: Design, grid: Sequence[float]) -> dict[str, float]:
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    if any(g < 0 for g in grid):
        raise ValueError("lambda grid values must be >= 0")
    # descending order: on (near-)ties GCV keeps the smoother fit
    grid = sorted(grid, reverse=True)
    terms = [b.name for b in design.penalized_blocks()]
    lam = {t: grid[0] for t in terms}
    if not terms:
        return lam
    for _ in range(2):
        for term in terms:
            best_g, best_score = grid[0], float("inf")
            for g in grid:
                score = _gcv(design, {**lam, term: g})
                if score < best_score:
                    best_score, best_g = score, g
            lam[term] = best_g
    return lam


def select_lambda(
    spec: ModelSpec,
    rows: Sequence[FeatureRow],
    grid: Sequence[float],
) -> dict[str, float]:
    """Coordinate-wise GCV grid search (two sweeps) for per-term lambdas.

    Falls back to the largest grid value for terms where every candidate
    fails numerically.
    """
    return _select_on_design(build_design(spec, rows), grid)


def fit_with_selected(
    spec: ModelSpec,
    rows: Sequence[FeatureRow],
    grid: Sequence[float],
) -> FitResult:
    """Select lambdas by GCV, then fit, reusing one assembled design."""
    design = build_design(spec, rows)
    lam = _select_on_design(design, grid)
    return _solve(design, lam)


def aic(fit: FitResult) -> float:
    """Gaussian profile AIC: ``n ln(rss/n) + 2 (edf + 1)``."""
    return fit.aic


def delta_aic(full: FitResult, base: FitResult) -> float:
    """AIC(full) - AIC(base); negative favors the full model.

    Both fits must use the same number of rows, otherwise the AICs are
    not comparable.
    """
    if full.n != base.n:
        raise ComparisonError(f"row-count mismatch: full n={full.n}, base n={base.n}")
    return full.aic - base.aic


def pearson(x: Iterable, y: Iterable) -> float:
    """Product-moment correlation with pairwise deletion of missing values.

    ``None``/NaN entries mark missing data; pairs containing one are
    dropped. Raises :class:`UndefinedCorrelationError` when fewer than 3
    complete pairs remain or either side is constant.
    """
    xv = np.array([np.nan if v is None else float(v) for v in x], dtype=float)
    yv = np.array([np.nan if v is None else float(v) for v in y], dtype=float)
    if xv.shape != yv.shape:
        raise ValueError(f"length mismatch: {xv.shape} vs {yv.shape}")
    mask = np.isfinite(xv) & np.isfinite(yv)
    xv, yv = xv[mask], yv[mask]
    if xv.size < 3:
        raise UndefinedCorrelationError(
            f"need at least 3 complete pairs, got {xv.size}"
        )
    xc = xv - xv.mean()
    yc = yv - yv.mean()
    sx = math.sqrt(float(xc @ xc))
    sy = math.sqrt(float(yc @ yc))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for constant input")
    r = float(xc @ yc) / (sx * sy)
    return max(-1.0, min(1.0, r))
