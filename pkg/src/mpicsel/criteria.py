"""Information criteria for a fitted candidate model.

Every criterion has the form ``n log|Sigma_j| + np(log 2pi + 1) + penalty``.
The mixture-prior criteria combine the exact-AIC bias with a two-term
mixture of the smooth-prior marginal likelihood and the spike; all densities
and the mixture bracket are handled as logarithms because the raw ratios
overflow double precision once ``n * p`` reaches about 1500.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import DimensionGuard, MissingFit
from .regression import (
    LOG_2PI,
    Dataset,
    FitResult,
    ModelIndex,
    _as_model,
    _smoothed_excess,
    capacitance_logdet_from_fit,
    fit as fit_model,
)

__all__ = [
    "PriorKind",
    "RatioPower",
    "InversePower",
    "ConstantAlpha",
    "PowerAlpha",
    "BetaPosterior",
    "WeightScheme",
    "AIC",
    "AICc",
    "BIC",
    "GIC",
    "MPIC",
    "Oracle",
    "CriterionSpec",
    "Score",
    "log_weight",
    "weight",
    "penalty_exact_aic",
    "gic_beta_auto",
    "gic_alpha",
    "n_params",
    "log_marginal_ratio",
    "score",
]


class PriorKind(enum.Enum):
    NORMAL = "normal"
    UNIFORM = "uniform"
    APPROX = "approx"


def _check_eps(eps: float) -> None:
    if not (eps > 0 and math.isfinite(eps)):
        raise ValueError(f"epsilon must be a positive finite number, got {eps}")


@dataclass(frozen=True)
class RatioPower:
    """``w_j = p^(eps k_j) / (n^(eps k_j) + p^(eps k_j))``."""

    epsilon: float = 0.499

    def __post_init__(self):
        _check_eps(self.epsilon)


@dataclass(frozen=True)
class InversePower:
    """``w_j = n^(-eps k_j)``."""

    epsilon: float = 0.5

    def __post_init__(self):
        _check_eps(self.epsilon)


@dataclass(frozen=True)
class ConstantAlpha:
    a: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"alpha must be positive, got {self.a}")

    def log_alpha(self, n: int, p: int, k_j: int) -> float:
        return math.log(self.a)


@dataclass(frozen=True)
class PowerAlpha:
    epsilon: float = 0.499

    def __post_init__(self):
        _check_eps(self.epsilon)

    def log_alpha(self, n: int, p: int, k_j: int) -> float:
        return self.epsilon * k_j * math.log(p)


@dataclass(frozen=True)
class BetaPosterior:
    """Posterior mean of ``w_j`` under a ``Beta(alpha_j, n^(eps k_j))`` prior.

    The default ``alpha_j = p^(eps k_j)`` makes the weight track the ratio
    form asymptotically; ``ConstantAlpha`` tracks the inverse-power form.
    With ``prior=APPROX`` the marginal-likelihood ratio is taken as zero,
    which leaves ``(alpha + 1) / (alpha + beta + 1)``.
    """

    alpha_spec: Union[ConstantAlpha, PowerAlpha] = PowerAlpha()
    beta_epsilon: float = 0.499
    prior: PriorKind = PriorKind.APPROX

    def __post_init__(self):
        _check_eps(self.beta_epsilon)


WeightScheme = Union[RatioPower, InversePower, BetaPosterior]


@dataclass(frozen=True)
class AIC:
    label = "AIC"


@dataclass(frozen=True)
class AICc:
    label = "AICc"


@dataclass(frozen=True)
class BIC:
    label = "BIC"


@dataclass(frozen=True)
class GIC:
    """``beta=None`` selects ``beta = log(n) / sqrt(p)``."""

    beta: Optional[float] = None
    label = "GIC"


@dataclass(frozen=True)
class MPIC:
    prior: PriorKind = PriorKind.APPROX
    weight: WeightScheme = RatioPower()

    @property
    def label(self) -> str:
        base = "MPIC_" + self.prior.value.capitalize()
        w = self.weight
        if w == RatioPower():
            return base
        if isinstance(w, RatioPower):
            return f"{base}[ratio,eps={w.epsilon:g}]"
        if isinstance(w, InversePower):
            return f"{base}[inverse,eps={w.epsilon:g}]"
        return f"{base}[beta-posterior]"


@dataclass(frozen=True)
class Oracle:
    """Scores 0 for ``target`` and 1 for every other model.

    Used to check the simulation harness: it needs no fit.
    """

    target: ModelIndex
    label = "Oracle"


CriterionSpec = Union[AIC, AICc, BIC, GIC, MPIC, Oracle]


@dataclass(frozen=True)
class Score:
    value: float
    neg2loglik: float
    penalty: float
    w_used: Optional[float] = None
    mix_log_ratio: Optional[float] = None


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

def _log1mexp(x: float) -> float:
    """``log(1 - exp(x))`` for ``x < 0``."""
    if x > -math.log(2.0):
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


def log_marginal_ratio(prior: PriorKind, fit: FitResult) -> float:
    """``log f_pi(Y | Sigma_j) - log f(Y | X_j Theta_j, Sigma_j)``.

    ``-inf`` for the approximate criterion, where the ratio is dropped.
    """
    p = fit.p
    if prior is PriorKind.NORMAL:
        return -0.5 * _smoothed_excess(fit) - 0.5 * p * capacitance_logdet_from_fit(fit)
    if prior is PriorKind.UNIFORM:
        return 0.5 * fit.k_j * p * LOG_2PI - 0.5 * p * fit.logdet_gram
    return -math.inf


def _log_weights(scheme: WeightScheme, n: int, p: int, k_j: int,
                 fit: Optional[FitResult], data: Optional[Dataset]) -> tuple[float, float]:
    if n <= 1 or p < 1 or k_j < 1:
        raise ValueError(f"need n > 1, p >= 1, k_j >= 1; got n={n}, p={p}, k_j={k_j}")
    if isinstance(scheme, RatioPower):
        # log w = -log(1 + (n/p)^(eps k)) and log(1 - w) = -log(1 + (p/n)^(eps k))
        d = scheme.epsilon * k_j * (math.log(n) - math.log(p))
        return -float(np.logaddexp(0.0, d)), -float(np.logaddexp(0.0, -d))
    if isinstance(scheme, InversePower):
        lw = -scheme.epsilon * k_j * math.log(n)
        return lw, _log1mexp(lw)
    if isinstance(scheme, BetaPosterior):
        if scheme.prior is PriorKind.APPROX:
            log_r = -math.inf
        elif fit is None or data is None:
            raise MissingFit("BetaPosterior weight with a smooth prior needs the fit and the dataset")
        else:
            log_r = log_marginal_ratio(scheme.prior, fit)
        la = scheme.alpha_spec.log_alpha(n, p, k_j)
        lb = scheme.beta_epsilon * k_j * math.log(n)
        denom = float(np.logaddexp(lb + log_r, la))
        log_norm = float(np.logaddexp.reduce([la, lb, 0.0]))
        lw = la - log_norm + float(np.logaddexp(0.0, -denom))
        return lw, _log1mexp(lw)
    raise TypeError(f"unknown weight scheme {scheme!r}")


def log_weight(scheme: WeightScheme, n: int, p: int, k_j: int,
               fit: Optional[FitResult] = None, data: Optional[Dataset] = None) -> float:
    return _log_weights(scheme, n, p, k_j, fit, data)[0]


def weight(scheme: WeightScheme, n: int, p: int, k_j: int,
           fit: Optional[FitResult] = None, data: Optional[Dataset] = None) -> float:
    """Mixture weight ``w_j`` in (0, 1).

    Evaluated through :func:`log_weight`; the exponential can underflow to 0
    for extreme ``eps * k_j``, which is why the criteria use the log directly.
    """
    return math.exp(log_weight(scheme, n, p, k_j, fit, data))


# ---------------------------------------------------------------------------
# penalties
# ---------------------------------------------------------------------------

def n_params(p: int, k_j: int) -> int:
    return k_j * p + p * (p + 1) // 2


def penalty_exact_aic(n: int, p: int, k_j: int) -> float:
    """``n p (2 k_j + p + 1) / (n - p - k_j - 1)``."""
    denom = n - p - k_j - 1
    if denom <= 0:
        raise DimensionGuard(f"exact AIC undefined: n={n} <= p + k_j + 1 = {p + k_j + 1}")
    return n * p * (2 * k_j + p + 1) / denom


def gic_beta_auto(n: int, p: int) -> float:
    return math.log(n) / math.sqrt(p)


def gic_alpha(n: int, p: int, beta: Optional[float] = None) -> float:
    """``alpha = beta - n log(1 - p/n) / p``."""
    if p >= n:
        raise DimensionGuard(f"GIC undefined: p={p} >= n={n}")
    if beta is None:
        beta = gic_beta_auto(n, p)
    return beta - n * math.log1p(-p / n) / p


def _mpic_terms(spec: MPIC, data: Dataset, fit: FitResult):
    n, p, k_j = data.n, data.p, fit.k_j
    exact = penalty_exact_aic(n, p, k_j)
    logw, log1mw = _log_weights(spec.weight, n, p, k_j, fit, data)
    if spec.prior is PriorKind.APPROX:
        mix = 0.0
    else:
        log_r = log_marginal_ratio(spec.prior, fit)
        mix = float(np.logaddexp(0.0, log1mw + log_r - logw))
    penalty = exact - 2.0 * (logw + mix)
    return penalty, math.exp(logw), mix


def score(data: Dataset, j: ModelIndex, spec: CriterionSpec,
          fit: Optional[FitResult] = None) -> Score:
    """Score model ``j`` under ``spec``.

    ``fit`` may be passed to reuse a fit across criteria.  Raises
    ``DimensionGuard`` when the criterion is undefined for ``(n, p, k_j)``
    and propagates fit errors.
    """
    j = _as_model(j)
    n, p, k_j = data.n, data.p, j.k_j

    if isinstance(spec, Oracle):
        v = 0.0 if j == spec.target else 1.0
        return Score(value=v, neg2loglik=0.0, penalty=v)

    if isinstance(spec, (AICc, MPIC)):
        penalty_exact_aic(n, p, k_j)
    if isinstance(spec, (BIC, GIC)) and n < 2:
        raise DimensionGuard(f"{spec.label} needs n >= 2")
    if isinstance(spec, GIC) and p >= n:
        raise DimensionGuard(f"GIC undefined: p={p} >= n={n}")

    if fit is None:
        fit = fit_model(data, j)
    elif fit.model != j:
        raise ValueError(f"fit is for {fit.model}, not {j}")

    w_used = mix = None
    if isinstance(spec, AIC):
        penalty = 2.0 * n_params(p, k_j)
    elif isinstance(spec, AICc):
        penalty = penalty_exact_aic(n, p, k_j)
    elif isinstance(spec, BIC):
        penalty = math.log(n) * n_params(p, k_j)
    elif isinstance(spec, GIC):
        penalty = gic_alpha(n, p, spec.beta) * n_params(p, k_j)
    elif isinstance(spec, MPIC):
        penalty, w_used, mix = _mpic_terms(spec, data, fit)
    else:
        raise TypeError(f"unknown criterion {spec!r}")
    return Score(
        value=fit.neg2loglik + penalty,
        neg2loglik=fit.neg2loglik,
        penalty=penalty,
        w_used=w_used,
        mix_log_ratio=mix,
    )
