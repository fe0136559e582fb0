"""Candidate families and exhaustive argmin selection."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Union

from .criteria import CriterionSpec, Oracle, Score, score
from .errors import (
    DimensionGuard,
    NoScoreableModel,
    RankDeficient,
    SigmaNotPD,
    TooManyModels,
)
from .regression import Dataset, FitResult, ModelIndex, fit

__all__ = [
    "Nested",
    "ForcedSubsets",
    "Explicit",
    "CandidateFamily",
    "SkipReason",
    "SelectionReport",
    "enumerate_models",
    "fit_family",
    "select",
    "select_many",
    "TIE_ATOL",
    "MAX_MODELS",
]

TIE_ATOL = 1e-9
MAX_MODELS = 2 ** 24

_SKIPPABLE = (DimensionGuard, RankDeficient, SigmaNotPD)


@dataclass(frozen=True)
class Nested:
    """``{0}, {0,1}, ..., {0,...,k_max-1}``."""

    k_max: int


@dataclass(frozen=True)
class ForcedSubsets:
    """Every subset of ``free`` joined with ``forced``."""

    forced: tuple[int, ...]
    free: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "forced", tuple(sorted(int(i) for i in self.forced)))
        object.__setattr__(self, "free", tuple(sorted(int(i) for i in self.free)))
        if set(self.forced) & set(self.free):
            raise ValueError("forced and free columns overlap")


@dataclass(frozen=True)
class Explicit:
    models: tuple[ModelIndex, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "models",
            tuple(m if isinstance(m, ModelIndex) else ModelIndex.of(m) for m in self.models),
        )


CandidateFamily = Union[Nested, ForcedSubsets, Explicit]


@dataclass(frozen=True)
class SkipReason:
    kind: str
    message: str

    @classmethod
    def from_error(cls, err: Exception) -> "SkipReason":
        return cls(type(err).__name__, str(err))

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


def enumerate_models(family: CandidateFamily, k: int) -> List[ModelIndex]:
    """Models of ``family`` ordered by size, then lexicographically.

    Raises ``ValueError`` for indices outside ``0..k-1`` and
    ``TooManyModels`` past ``2**24`` models.
    """
    if isinstance(family, Nested):
        if not 1 <= family.k_max <= k:
            raise ValueError(f"nested k_max={family.k_max} outside 1..{k}")
        return [ModelIndex(tuple(range(a))) for a in range(1, family.k_max + 1)]

    if isinstance(family, ForcedSubsets):
        cols = family.forced + family.free
        if any(c < 0 or c >= k for c in cols):
            raise ValueError(f"family columns {cols} outside 0..{k - 1}")
        if len(family.free) > 24:
            raise TooManyModels(f"{len(family.free)} free columns give 2^{len(family.free)} models")
        models = []
        for r in range(len(family.free) + 1):
            for extra in itertools.combinations(family.free, r):
                idx = family.forced + extra
                if idx:
                    models.append(ModelIndex(idx))
        return sorted(set(models), key=ModelIndex.sort_key)

    if isinstance(family, Explicit):
        if len(family.models) > MAX_MODELS:
            raise TooManyModels(f"{len(family.models)} explicit models")
        for m in family.models:
            if m.indices[-1] >= k:
                raise ValueError(f"model {m} indexes past {k} columns")
        return sorted(set(family.models), key=ModelIndex.sort_key)

    raise TypeError(f"unknown candidate family {family!r}")


@dataclass
class SelectionReport:
    scores: Dict[ModelIndex, Union[Score, SkipReason]]
    best: ModelIndex
    ties: List[ModelIndex]
    criterion: CriterionSpec

    @property
    def skipped(self) -> Dict[ModelIndex, SkipReason]:
        return {m: s for m, s in self.scores.items() if isinstance(s, SkipReason)}

    @property
    def best_score(self) -> Score:
        return self.scores[self.best]


def fit_family(data: Dataset, models: Iterable[ModelIndex]) -> Dict[ModelIndex, Union[FitResult, SkipReason]]:
    """Fit each model once; failures become ``SkipReason`` entries."""
    out: Dict[ModelIndex, Union[FitResult, SkipReason]] = {}
    for m in models:
        try:
            out[m] = fit(data, m)
        except _SKIPPABLE as err:
            out[m] = SkipReason.from_error(err)
    return out


def _reduce(scores: Dict[ModelIndex, Union[Score, SkipReason]], spec: CriterionSpec) -> SelectionReport:
    finite = [(m, s.value) for m, s in scores.items()
              if isinstance(s, Score) and s.value == s.value and abs(s.value) != float("inf")]
    if not finite:
        raise NoScoreableModel(f"no candidate could be scored with {getattr(spec, 'label', spec)}")
    vmin = min(v for _, v in finite)
    ties = sorted((m for m, v in finite if v - vmin <= TIE_ATOL), key=ModelIndex.sort_key)
    return SelectionReport(scores=scores, best=ties[0], ties=ties, criterion=spec)


def _score_all(data, models, spec, fits):
    scores: Dict[ModelIndex, Union[Score, SkipReason]] = {}
    for m in models:
        if isinstance(spec, Oracle):
            scores[m] = score(data, m, spec)
            continue
        f = fits[m]
        if isinstance(f, SkipReason):
            scores[m] = f
            continue
        try:
            scores[m] = score(data, m, spec, fit=f)
        except _SKIPPABLE as err:
            scores[m] = SkipReason.from_error(err)
    return scores


def select_many(data: Dataset, family: CandidateFamily,
                specs: Sequence[CriterionSpec],
                fits: Optional[Dict[ModelIndex, Union[FitResult, SkipReason]]] = None,
                ) -> List[SelectionReport]:
    """Run :func:`select` for several criteria, fitting each model once.

    A criterion with no scoreable model raises ``NoScoreableModel``.
    """
    models = enumerate_models(family, data.k)
    if fits is None:
        fits = fit_family(data, models)
    return [_reduce(_score_all(data, models, spec, fits), spec) for spec in specs]


def select(data: Dataset, family: CandidateFamily, spec: CriterionSpec) -> SelectionReport:
    """Score every candidate and return the argmin.

    Models whose fit or criterion is undefined are kept in the report with a
    ``SkipReason``.  Ties within ``TIE_ATOL`` of the minimum are all listed;
    ``best`` is the smallest of them by ``(k_j, indices)``.
    """
    return select_many(data, family, [spec])[0]
