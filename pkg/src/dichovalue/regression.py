"""OLS fits on column subsets, and the summed-|t| performance function."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg, stats
from scipy.linalg import lapack

from .game import Coalition, EvaluationError, Game

__all__ = [
    "COND_LIMIT",
    "DataLoadError",
    "Dataset",
    "FitResult",
    "RSS_FLOOR",
    "T_CAP",
    "load_csv",
    "information_criteria",
    "ols_fit",
    "performance_abs_t",
    "performance_game",
]

T_CAP = 1e12
COND_LIMIT = 1e10
# RSS below this fraction of the total sum of squares is treated as an exact fit
RSS_FLOOR = 1e-10


class DataLoadError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Response ``y`` (length m) and candidate regressors ``X`` (m x n)."""

    y: np.ndarray
    X: np.ndarray
    names: tuple[str, ...]
    target: str = "y"

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DataLoadError(f"shape mismatch: y {y.shape}, X {X.shape}")
        if len(self.names) != X.shape[1]:
            raise DataLoadError("one name per regressor column is required")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataLoadError("dataset contains missing or non-finite values")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", tuple(self.names))
        # unit-norm columns and the centred sum of squares, reused by every fit
        norms = np.sqrt(np.einsum("ij,ij->j", X, X))
        object.__setattr__(self, "_norms", norms)
        object.__setattr__(self, "_scaled", X / np.where(norms > 0, norms, 1.0))
        yc = y - y.mean()
        object.__setattr__(self, "_tss", float(yc @ yc))

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def permuted(self, order) -> Dataset:
        order = list(order)
        return Dataset(self.y, self.X[:, order], tuple(self.names[j] for j in order), self.target)


@dataclass
class FitResult:
    subset: Coalition
    coefficients: np.ndarray  # intercept first, then subset columns in ascending index order
    t_stats: np.ndarray
    p_values: np.ndarray
    sigma2: float
    rss: float
    loglik: float
    aic: float
    bic: float
    hq: float

    @property
    def columns(self) -> list[int]:
        return self.subset.players()


def _solve(data: Dataset, subset: int):
    """QR solve on unit-norm columns; returns (cols, beta, rss, dof, diag of (A'A)^-1).

    ``y`` rides along as the last column of the factorised matrix, so the
    trailing block of R carries both ``Q'y`` and the residual norm.
    """
    cols = Coalition(subset).players()
    k = len(cols) + 1
    dof = data.m - k
    if dof <= 0:
        raise EvaluationError(subset, f"{data.m} observations cannot fit {k} parameters")
    norms = np.empty(k)
    norms[0] = math.sqrt(data.m)
    norms[1:] = data._norms[cols]
    if np.any(norms == 0):
        raise EvaluationError(subset, "design has an all-zero column")
    A = np.empty((data.m, k + 1), order="F")
    A[:, 0] = 1.0 / norms[0]
    A[:, 1:k] = data._scaled[:, cols]
    A[:, k] = data.y
    R = linalg.qr(A, mode="r", overwrite_a=True, check_finite=False)[0]
    Rk = R[:k, :k]
    d = np.abs(np.diag(Rk))
    if d.min() == 0 or d.max() / d.min() > COND_LIMIT:
        raise EvaluationError(subset, "design matrix is numerically rank deficient")
    Rinv, info = lapack.dtrtri(Rk)
    if info != 0:
        raise EvaluationError(subset, "triangular factor is singular")
    beta = (Rinv @ R[:k, k]) / norms
    rss = float(R[k, k] ** 2)
    cov_diag = np.einsum("ij,ij->i", Rinv, Rinv) / norms**2
    return cols, beta, rss, dof, cov_diag


def _t_stats(beta, rss, dof, cov_diag, tss) -> np.ndarray:
    rss = max(rss, RSS_FLOOR * tss) if tss > 0 else rss
    se = np.sqrt(rss / dof * cov_diag)
    if np.all(se > 0):
        t = beta / se
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(se > 0, beta / se, np.where(beta == 0, 0.0, np.sign(beta) * np.inf))
    return np.clip(t, -T_CAP, T_CAP)


def information_criteria(rss: float, m: int, p: int, tss: float) -> tuple[float, float, float, float]:
    """Gaussian log-likelihood and AIC/BIC/HQ with ``p`` mean parameters."""
    rss = max(rss, RSS_FLOOR * tss, np.finfo(float).tiny)
    loglik = -0.5 * m * (math.log(2 * math.pi) + math.log(rss / m) + 1.0)
    return (
        loglik,
        -2 * loglik + 2 * p,
        -2 * loglik + p * math.log(m),
        -2 * loglik + 2 * p * math.log(math.log(m)),
    )


def ols_fit(data: Dataset, subset: int) -> FitResult:
    """Least-squares fit of ``y`` on an intercept plus the columns in ``subset``."""
    subset = Coalition(subset)
    if subset >> data.n:
        raise ValueError("subset refers to columns beyond the dataset")
    cols, beta, rss, dof, cov_diag = _solve(data, subset)
    tss = data._tss
    t = _t_stats(beta, rss, dof, cov_diag, tss)[1:]
    p = 2.0 * stats.t.sf(np.abs(t), dof)
    loglik, aic, bic, hq = information_criteria(rss, data.m, len(cols) + 1, tss)
    return FitResult(
        subset=subset,
        coefficients=beta,
        t_stats=t,
        p_values=np.clip(p, 0.0, 1.0),
        sigma2=rss / dof,
        rss=rss,
        loglik=loglik,
        aic=aic,
        bic=bic,
        hq=hq,
    )


def performance_abs_t(data: Dataset, subset: int) -> float:
    """Sum of |t| over the regressors in ``subset``; the intercept never counts."""
    if not subset:
        return 0.0
    _, beta, rss, dof, cov_diag = _solve(data, subset)
    t = _t_stats(beta, rss, dof, cov_diag, data._tss)
    return float(np.sum(np.abs(t[1:])))


def performance_game(data: Dataset, performance=performance_abs_t) -> Game:
    """Coalitional game whose players are the dataset columns."""
    return Game(data.n, lambda t: performance(data, t), name="regression")


def load_csv(path: str | Path, target: str) -> Dataset:
    """Read a headed numeric CSV; ``target`` names the response column."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataLoadError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataLoadError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if target not in header:
        raise DataLoadError(f"target column {target!r} not in header {header}")
    body = []
    for r, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataLoadError(f"row {r} has {len(row)} cells, header has {len(header)}")
        vals = []
        for c, cell in enumerate(row):
            try:
                vals.append(float(cell))
            except ValueError:
                raise DataLoadError(f"non-numeric value {cell!r} at row {r}, column {header[c]!r}") from None
        body.append(vals)
    if not body:
        raise DataLoadError(f"{path} has no data rows")
    arr = np.array(body)
    j = header.index(target)
    names = tuple(h for k, h in enumerate(header) if k != j)
    return Dataset(arr[:, j], np.delete(arr, j, axis=1), names, target)
