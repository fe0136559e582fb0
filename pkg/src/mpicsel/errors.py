"""Exception hierarchy shared by every module."""

from __future__ import annotations


class MpicselError(Exception):
    """Base class for all errors raised by mpicsel."""


class DataError(MpicselError, ValueError):
    """Input matrices are malformed (shape mismatch, non-finite entries)."""


class RankDeficient(MpicselError):
    """The design submatrix X_j is numerically rank deficient."""

    def __init__(self, model, detail: str = ""):
        self.model = model
        msg = f"design columns {model} are numerically rank deficient"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class SigmaNotPD(MpicselError):
    """The residual covariance estimate is not positive definite."""

    def __init__(self, model, detail: str = ""):
        self.model = model
        msg = f"residual covariance for {model} is not positive definite"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class DimensionGuard(MpicselError):
    """A criterion is undefined for these (n, p, k_j)."""


class MissingFit(MpicselError):
    """A data-dependent weight was requested without a fit."""


class TooManyModels(MpicselError):
    """A candidate family would enumerate more than 2**24 models."""


class NoScoreableModel(MpicselError):
    """Every candidate model was skipped."""


class DegenerateResiduals(MpicselError):
    """Lag-1 residual variance is zero, so rho cannot be estimated."""
