"""AR(1) pre-whitening so row-correlated data can go through selection.

With ``V = {rho^|s-t|}``, the banded filter ``W`` used here keeps row 0 and
maps row ``t`` to ``(y_t - rho y_{t-1}) / sqrt(1 - rho^2)``, which gives
``W^T W = V^{-1}`` exactly.  Every criterion depends on the whitened data only
through ``W^T W``, so any other root of ``V^{-1}`` gives the same scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .criteria import CriterionSpec
from .errors import DegenerateResiduals
from .regression import Dataset, fit
from .selection import CandidateFamily, SelectionReport, select

__all__ = [
    "RHO_CLIP",
    "Ar1Whitener",
    "estimate_rho",
    "whiten",
    "ar1_covariance",
    "ar1_precision",
    "WhitenedSelection",
    "whiten_select",
]

RHO_CLIP = 0.999


@dataclass(frozen=True)
class Ar1Whitener:
    rho_hat: float
    n: int

    def __post_init__(self):
        if not abs(self.rho_hat) < 1.0:
            raise ValueError(f"|rho| must be below 1, got {self.rho_hat}")

    def apply(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        if a.shape[0] != self.n:
            raise ValueError(f"expected {self.n} rows, got {a.shape[0]}")
        if self.rho_hat == 0.0:
            return a.copy()
        return _kernels.ar1_filter(a, self.rho_hat)


def estimate_rho(data: Dataset) -> float:
    """Pooled lag-1 OLS coefficient of the full-model residuals.

    Clipped to ``[-RHO_CLIP, RHO_CLIP]``.  Raises ``DegenerateResiduals`` when
    the lagged residual sum of squares is below 1e-12.
    """
    if data.n < 3:
        raise ValueError("need at least 3 rows to estimate rho")
    Q, _ = np.linalg.qr(data.X)
    resid = data.Y - Q @ (Q.T @ data.Y)
    num, den = _kernels.lag1_sums(resid)
    if den < 1e-12:
        raise DegenerateResiduals(f"lagged residual sum of squares {den:.3g} is below 1e-12")
    return float(np.clip(num / den, -RHO_CLIP, RHO_CLIP))


def whiten(data: Dataset, rho: float) -> Dataset:
    """Return ``(W Y, W X)`` for the banded AR(1) filter ``W``."""
    w = Ar1Whitener(float(rho), data.n)
    if rho == 0.0:
        return Dataset(data.Y.copy(), data.X.copy(), data.col_names)
    return Dataset(w.apply(data.Y), w.apply(data.X), data.col_names)


def ar1_covariance(n: int, rho: float) -> np.ndarray:
    idx = np.arange(n)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def ar1_precision(n: int, rho: float) -> np.ndarray:
    """Dense tridiagonal ``V^{-1}``; for tests and small problems."""
    P = np.zeros((n, n))
    d = np.full(n, 1.0 + rho * rho)
    d[0] = d[-1] = 1.0
    P[np.arange(n), np.arange(n)] = d
    off = np.arange(n - 1)
    P[off, off + 1] = P[off + 1, off] = -rho
    return P / (1.0 - rho * rho)


@dataclass
class WhitenedSelection:
    report: SelectionReport
    rho_hat: float
    prediction_error: Optional[float] = None
    n_train: int = 0
    n_test: int = 0


def whiten_select(data: Dataset, family: CandidateFamily, spec: CriterionSpec,
                  split_at: Optional[int] = None,
                  rho: Optional[float] = None) -> WhitenedSelection:
    """Estimate rho on the training rows, whiten, select, and score the test rows.

    Rows must be in time order.  With ``split_at`` the first ``split_at`` rows
    train and the rest test; the prediction error is the mean squared error
    per entry ``||Y_test - X_test[:, j] Theta_j||^2 / (n_test p)`` with
    ``Theta_j`` fitted on the whitened training rows and the raw test
    design.  ``rho`` overrides the estimate.
    """
    n = data.n
    if split_at is not None:
        if not data.k + 2 <= split_at < n:
            raise ValueError(f"split_at={split_at} must leave >= k+2={data.k + 2} training rows and >= 1 test row")
        train = data.rows(slice(0, split_at))
    else:
        train = data
    rho_hat = estimate_rho(train) if rho is None else float(rho)
    wtrain = whiten(train, rho_hat)
    report = select(wtrain, family, spec)
    out = WhitenedSelection(report=report, rho_hat=rho_hat, n_train=train.n)
    if split_at is not None:
        best = fit(wtrain, report.best)
        Xt = data.X[split_at:, list(report.best.indices)]
        d = data.Y[split_at:] - Xt @ best.theta_hat
        out.n_test = n - split_at
        out.prediction_error = float(np.sum(d * d)) / (out.n_test * data.p)
    return out
