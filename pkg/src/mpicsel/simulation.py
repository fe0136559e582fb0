"""Monte Carlo experiments: selection probability and efficiency ratios.

Replication ``r`` draws from its own generator, seeded by
``SeedSequence(seed, spawn_key=(r,))``, so results do not depend on how
replications are spread over worker threads.  Reduction happens in
replication order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .criteria import AIC, AICc, BIC, GIC, MPIC, CriterionSpec, RatioPower
from .regression import Dataset, FitResult, ModelIndex, fit
from .selection import (
    CandidateFamily,
    Explicit,
    ForcedSubsets,
    Nested,
    SkipReason,
    enumerate_models,
    fit_family,
    select_many,
)

__all__ = [
    "TrueModel",
    "Gaussian",
    "Laplace",
    "StudentT",
    "ChiSq",
    "ContaminatedNormal",
    "ErrorDist",
    "SimConfig",
    "SimResult",
    "EPSILON_GRID",
    "default_criteria",
    "epsilon_criteria",
    "nonnested_family",
    "replication_rng",
    "design_rng",
    "gen_design",
    "default_true_model",
    "gen_response",
    "run_simulation",
    "run_selection_probability",
    "run_efficiency",
    "worker_count",
]

EPSILON_GRID = (10.0, 5.0, 2.5, 1.0, 0.5, 0.499, 0.25, 0.1)


@dataclass(frozen=True, eq=False)
class TrueModel:
    j_star: ModelIndex
    theta_star: np.ndarray
    sigma_star: np.ndarray

    def __post_init__(self):
        theta = np.atleast_2d(np.asarray(self.theta_star, dtype=np.float64))
        sigma = np.atleast_2d(np.asarray(self.sigma_star, dtype=np.float64))
        j = self.j_star if isinstance(self.j_star, ModelIndex) else ModelIndex.of(self.j_star)
        if theta.shape[0] != j.k_j:
            raise ValueError(f"theta_star has {theta.shape[0]} rows, j_star has {j.k_j} columns")
        if sigma.shape != (theta.shape[1], theta.shape[1]):
            raise ValueError("sigma_star must be p x p")
        if not np.allclose(sigma, sigma.T, rtol=1e-12, atol=0):
            raise ValueError("sigma_star must be symmetric")
        chol = np.linalg.cholesky(sigma)  # raises LinAlgError if not PD
        object.__setattr__(self, "j_star", j)
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "sigma_star", sigma)
        object.__setattr__(self, "_chol", chol)

    @property
    def p(self) -> int:
        return self.theta_star.shape[1]

    @property
    def chol(self) -> np.ndarray:
        return self._chol


# error distributions --------------------------------------------------------

@dataclass(frozen=True)
class Gaussian:
    label = "gaussian"

    def draw(self, rng, shape):
        return rng.standard_normal(shape)


@dataclass(frozen=True)
class Laplace:
    scale: float = 0.5
    label = "laplace"

    def draw(self, rng, shape):
        return rng.laplace(0.0, self.scale, shape)


@dataclass(frozen=True)
class StudentT:
    df: float = 4.0
    label = "student_t"

    def draw(self, rng, shape):
        return rng.standard_t(self.df, shape)


@dataclass(frozen=True)
class ChiSq:
    """Chi-square entries, shifted by ``-df`` when ``centered``."""

    df: float = 2.0
    centered: bool = True
    label = "chisq"

    def draw(self, rng, shape):
        d = rng.chisquare(self.df, shape)
        return d - self.df if self.centered else d


@dataclass(frozen=True)
class ContaminatedNormal:
    """Standard normal, replaced by standard Cauchy with probability ``eps``."""

    eps: float = 0.05
    label = "contaminated"

    def draw(self, rng, shape):
        z = rng.standard_normal(shape)
        c = rng.standard_cauchy(shape)
        return np.where(rng.random(shape) < self.eps, c, z)


ErrorDist = Union[Gaussian, Laplace, StudentT, ChiSq, ContaminatedNormal]


# generators ----------------------------------------------------------------

def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """Generator for replication ``rep`` of a run seeded with ``seed``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(rep),))
    return np.random.Generator(np.random.PCG64(ss))


def design_rng(seed: int) -> np.random.Generator:
    """Generator for a design shared by all replications (root stream)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF)))


def gen_design(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Intercept column followed by ``k - 1`` i.i.d. U(-2, 2) columns."""
    if k < 1:
        raise ValueError("k must be at least 1")
    X = np.empty((n, k))
    X[:, 0] = 1.0
    X[:, 1:] = rng.uniform(-2.0, 2.0, size=(n, k - 1))
    return X


def default_true_model(p: int) -> TrueModel:
    if p < 1:
        raise ValueError("p must be at least 1")
    theta = np.outer(np.array([5.0, 4.0, 3.0, 2.0, 1.0]), np.ones(p))
    sigma = 0.8 * np.eye(p) + 0.2 * np.ones((p, p))
    return TrueModel(ModelIndex(tuple(range(5))), theta, sigma)


def gen_response(X: np.ndarray, tm: TrueModel, dist: ErrorDist, rng: np.random.Generator) -> np.ndarray:
    """``Y = X_* Theta_* + Delta L^T`` with ``Sigma_* = L L^T``.

    The right factor ``L^T`` makes each error row have covariance ``Sigma_*``.
    """
    if X.shape[1] <= tm.j_star.indices[-1]:
        raise ValueError("X has fewer columns than j_star needs")
    n = X.shape[0]
    delta = dist.draw(rng, (n, tm.p))
    return X[:, list(tm.j_star.indices)] @ tm.theta_star + delta @ tm.chol.T


# configuration and results --------------------------------------------------

def default_criteria() -> List[CriterionSpec]:
    return [AIC(), AICc(), BIC(), GIC(), MPIC()]


def epsilon_criteria(eps_values: Sequence[float] = EPSILON_GRID) -> List[CriterionSpec]:
    return [MPIC(weight=RatioPower(float(e))) for e in eps_values]


def nonnested_family(k: int = 8) -> ForcedSubsets:
    """All subsets that keep the intercept column."""
    return ForcedSubsets((0,), tuple(range(1, k)))


def worker_count(requested: Optional[int] = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("MPICSEL_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class SimConfig:
    n: int
    p: int
    k: int = 10
    reps: int = 1000
    seed: int = 0
    family: CandidateFamily = field(default_factory=lambda: Nested(10))
    criteria: List[CriterionSpec] = field(default_factory=default_criteria)
    error: ErrorDist = field(default_factory=Gaussian)
    redraw_X_each_rep: bool = True
    true_model: Optional[TrueModel] = None
    workers: Optional[int] = None

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if self.n <= self.k:
            raise ValueError(f"need n > k, got n={self.n}, k={self.k}")
        labels = [c.label for c in self.criteria]
        if len(set(labels)) != len(labels):
            raise ValueError(f"criterion labels must be unique: {labels}")
        if self.true_model is None:
            self.true_model = default_true_model(self.p)
        if self.true_model.p != self.p:
            raise ValueError("true model p does not match config p")


@dataclass
class SimResult:
    probability: Dict[str, float]
    efficiency: Dict[str, float]
    reps: int
    true_model_skipped: Dict[str, int]
    config: SimConfig


@dataclass
class _RepOutcome:
    hits: List[bool]
    true_skipped: List[bool]
    losses: List[float]
    true_loss: float


def _loss(X: np.ndarray, mean: np.ndarray, f: FitResult) -> float:
    d = mean - X[:, list(f.model.indices)] @ f.theta_hat
    return float(np.sum(d * d))


def _replicate(cfg: SimConfig, rep: int, X_fixed: Optional[np.ndarray],
               models: List[ModelIndex], want_loss: bool) -> _RepOutcome:
    tm = cfg.true_model
    rng = replication_rng(cfg.seed, rep)
    X = gen_design(cfg.n, cfg.k, rng) if X_fixed is None else X_fixed
    Y = gen_response(X, tm, cfg.error, rng)
    data = Dataset(Y, X)
    fits = fit_family(data, models)
    reports = select_many(data, Explicit(tuple(models)), cfg.criteria, fits=fits)

    hits, skipped, losses = [], [], []
    mean = true_loss = None
    if want_loss:
        mean = X[:, list(tm.j_star.indices)] @ tm.theta_star
        ft = fits.get(tm.j_star)
        if not isinstance(ft, FitResult):
            ft = fit(data, tm.j_star)
        true_loss = _loss(X, mean, ft)
    for rep_ in reports:
        hits.append(rep_.best == tm.j_star)
        skipped.append(isinstance(rep_.scores.get(tm.j_star), SkipReason))
        if want_loss:
            losses.append(_loss(X, mean, fits[rep_.best]))
    return _RepOutcome(hits, skipped, losses, true_loss if true_loss is not None else math.nan)


def run_simulation(cfg: SimConfig, efficiency: bool = True) -> SimResult:
    """Run ``cfg.reps`` replications and aggregate per criterion."""
    models = enumerate_models(cfg.family, cfg.k)
    X_fixed = None
    if not cfg.redraw_X_each_rep:
        X_fixed = gen_design(cfg.n, cfg.k, design_rng(cfg.seed))

    def task(r):
        return _replicate(cfg, r, X_fixed, models, efficiency)

    workers = worker_count(cfg.workers)
    if workers == 1:
        outcomes = [task(r) for r in range(cfg.reps)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(task, range(cfg.reps)))

    labels = [c.label for c in cfg.criteria]
    prob, eff, skipped = {}, {}, {}
    true_mean = float(np.mean([o.true_loss for o in outcomes])) if efficiency else math.nan
    for i, lab in enumerate(labels):
        prob[lab] = sum(o.hits[i] for o in outcomes) / cfg.reps
        skipped[lab] = sum(o.true_skipped[i] for o in outcomes)
        if efficiency:
            eff[lab] = float(np.mean([o.losses[i] for o in outcomes])) / true_mean
    return SimResult(probability=prob, efficiency=eff, reps=cfg.reps,
                     true_model_skipped=skipped, config=cfg)


def run_selection_probability(cfg: SimConfig) -> SimResult:
    return run_simulation(cfg, efficiency=False)


def run_efficiency(cfg: SimConfig) -> SimResult:
    return run_simulation(cfg, efficiency=True)
