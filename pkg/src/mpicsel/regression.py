"""Maximum likelihood fits of the multivariate normal linear model.

Every candidate model ``j`` is fitted through a column-pivoted QR
factorization of ``X_j``; normal equations are never formed.  The fit caches
the log-determinants and the ``Q^T Y`` coordinates that the criteria reuse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg as sla

from . import _kernels
from .errors import DataError, RankDeficient, SigmaNotPD

__all__ = [
    "Dataset",
    "ModelIndex",
    "FitResult",
    "fit",
    "logdet_capacitance",
    "quadform_smoothed",
    "RANK_RTOL",
    "SIGMA_PIVOT_RTOL",
]

LOG_2PI = float(np.log(2.0 * np.pi))

#: A pivoted-QR diagonal below ``RANK_RTOL * |R_11|`` means rank deficiency.
RANK_RTOL = 1e-10

#: A Cholesky pivot of the residual covariance at or below
#: ``SIGMA_PIVOT_RTOL * (Y^T Y / n)_ii`` is treated as zero.  Rounding leaves
#: exact-fit residuals near 1e-30 on that scale.
SIGMA_PIVOT_RTOL = 1e-24


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Response matrix ``Y`` (n x p) and design matrix ``X`` (n x k)."""

    Y: np.ndarray
    X: np.ndarray
    col_names: tuple[str, ...] = ()

    def __post_init__(self):
        Y = np.array(self.Y, dtype=np.float64)
        X = np.array(self.X, dtype=np.float64)
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim == 1:
            X = X[:, None]
        if Y.ndim != 2 or X.ndim != 2:
            raise DataError("Y and X must be matrices")
        if Y.shape[0] != X.shape[0]:
            raise DataError(f"Y has {Y.shape[0]} rows but X has {X.shape[0]}")
        n, k = X.shape
        if Y.shape[1] < 1 or k < 1:
            raise DataError("Y and X need at least one column each")
        if n <= k:
            raise DataError(f"need n > k, got n={n}, k={k}")
        if not (np.all(np.isfinite(Y)) and np.all(np.isfinite(X))):
            raise DataError("Y and X must not contain NaN or Inf")
        names = tuple(str(c) for c in self.col_names) or tuple(f"x{i}" for i in range(k))
        if len(names) != k:
            raise DataError(f"{len(names)} column names for {k} columns")
        object.__setattr__(self, "Y", _readonly(Y))
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "col_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.Y.shape[1]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    def rows(self, sl) -> "Dataset":
        return Dataset(self.Y[sl], self.X[sl], self.col_names)


@dataclass(frozen=True, order=False)
class ModelIndex:
    """A candidate subset of design columns, stored sorted ascending."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if not idx:
            raise ValueError("a model needs at least one column")
        if idx[0] < 0:
            raise ValueError(f"negative column index in {idx}")
        if any(a == b for a, b in zip(idx, idx[1:])):
            raise ValueError(f"duplicate column index in {idx}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, indices: Iterable[int]) -> "ModelIndex":
        return cls(tuple(indices))

    @property
    def k_j(self) -> int:
        return len(self.indices)

    def sort_key(self) -> tuple[int, tuple[int, ...]]:
        return (self.k_j, self.indices)

    def issuperset(self, other: "ModelIndex") -> bool:
        return set(other.indices) <= set(self.indices)

    def __lt__(self, other: "ModelIndex") -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        return "{" + ",".join(str(i) for i in self.indices) + "}"

    def __iter__(self):
        return iter(self.indices)

    def __len__(self) -> int:
        return self.k_j


def _as_model(j: ModelIndex | Sequence[int]) -> ModelIndex:
    return j if isinstance(j, ModelIndex) else ModelIndex.of(j)


@dataclass(frozen=True, eq=False)
class FitResult:
    """MLEs for one candidate model plus cached scalars.

    ``coords`` (``Q^T Y``) and ``r_factor`` (``R`` of the pivoted QR, up to
    column order) are kept so the criteria can evaluate the smoothed
    quadratic form without refactoring ``X_j``.
    """

    model: ModelIndex
    theta_hat: np.ndarray
    sigma_hat: np.ndarray
    logdet_sigma: float
    logdet_gram: float
    neg2loglik: float
    n: int
    p: int
    k_j: int
    sigma_chol: np.ndarray = field(repr=False)
    coords: np.ndarray = field(repr=False)
    r_factor: np.ndarray = field(repr=False)


def _pivoted_qr(data: Dataset, j: ModelIndex):
    if j.indices[-1] >= data.k:
        raise DataError(f"model {j} indexes past the {data.k} design columns")
    Xj = data.X[:, list(j.indices)]
    Q, R, perm = sla.qr(Xj, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0.0 or np.any(diag < RANK_RTOL * diag[0]):
        raise RankDeficient(j, f"min |R_ii| / |R_11| = {diag.min() / max(diag[0], 1e-300):.3g}")
    return Q, R, perm


def fit(data: Dataset, j: ModelIndex | Sequence[int]) -> FitResult:
    """Fit model ``j`` by maximum likelihood.

    Raises
    ------
    RankDeficient
        If ``X_j`` fails the pivoted-QR rank test.
    SigmaNotPD
        If ``n - k_j < p`` or the residual covariance fails Cholesky.
    """
    j = _as_model(j)
    n, p = data.n, data.p
    Q, R, perm = _pivoted_qr(data, j)
    k_j = j.k_j
    if n - k_j < p:
        raise SigmaNotPD(j, f"n - k_j = {n - k_j} < p = {p}")

    Z = Q.T @ data.Y
    resid = data.Y - Q @ Z
    sigma = resid.T @ resid / n
    sigma = 0.5 * (sigma + sigma.T)

    scale = np.einsum("ij,ij->j", data.Y, data.Y) / n
    L, fail = _kernels.cholesky_lower(sigma, SIGMA_PIVOT_RTOL * scale)
    if fail >= 0:
        raise SigmaNotPD(j, f"Cholesky pivot {fail} vanished")

    theta_perm = sla.solve_triangular(R, Z, lower=False)
    theta = np.empty_like(theta_perm)
    theta[perm] = theta_perm

    logdet_sigma = 2.0 * float(np.sum(np.log(np.diag(L))))
    logdet_gram = 2.0 * float(np.sum(np.log(np.abs(np.diag(R)))))
    neg2 = n * logdet_sigma + n * p * (LOG_2PI + 1.0)
    return FitResult(
        model=j,
        theta_hat=_readonly(theta),
        sigma_hat=_readonly(sigma),
        logdet_sigma=logdet_sigma,
        logdet_gram=logdet_gram,
        neg2loglik=neg2,
        n=n,
        p=p,
        k_j=k_j,
        sigma_chol=_readonly(L),
        coords=_readonly(Z),
        r_factor=_readonly(R),
    )


def _capacitance_chol(R: np.ndarray) -> np.ndarray:
    # I + R R^T has the same determinant as I + X_j^T X_j.
    C = np.eye(R.shape[0]) + R @ R.T
    return sla.cholesky(C, lower=True)


def logdet_capacitance(data: Dataset, j: ModelIndex | Sequence[int]) -> float:
    """``log|I_n + X_j X_j^T|`` computed as ``log|I_{k_j} + X_j^T X_j|``."""
    j = _as_model(j)
    _, R, _ = _pivoted_qr(data, j)
    Lc = _capacitance_chol(R)
    return 2.0 * float(np.sum(np.log(np.diag(Lc))))


def quadform_smoothed(data: Dataset, j: ModelIndex | Sequence[int], fit: FitResult) -> float:
    """``tr(Sigma_j^{-1} Y^T (I_n + X_j X_j^T)^{-1} Y)``.

    With ``X_j = Q R P^T`` the inverse splits into ``(I - QQ^T) +
    Q (I + R R^T)^{-1} Q^T``, so the trace is ``n p`` plus a term that needs
    only a ``k_j x k_j`` solve.  This avoids the cancellation of the plain
    ``Y^T Y - ...`` form when the residual covariance is small.
    """
    j = _as_model(j)
    if fit.model != j:
        raise ValueError(f"fit is for {fit.model}, not {j}")
    return data.n * data.p + _smoothed_excess(fit)


def _smoothed_excess(fit: FitResult) -> float:
    """``tr(Sigma^{-1} Z^T (I + R R^T)^{-1} Z)`` from the cached factors."""
    Lc = _capacitance_chol(fit.r_factor)
    V = sla.solve_triangular(Lc, fit.coords, lower=True)  # k_j x p
    W = sla.solve_triangular(fit.sigma_chol, V.T, lower=True)  # p x k_j
    return float(np.sum(W * W))


def capacitance_logdet_from_fit(fit: FitResult) -> float:
    Lc = _capacitance_chol(fit.r_factor)
    return 2.0 * float(np.sum(np.log(np.diag(Lc))))
