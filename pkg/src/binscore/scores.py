"""Scoring rules for binary-event forecasts and their exact expectations.

All scores are positively oriented (larger is better). The Brier and log
scores are evaluated per forecast; the parimutuel gambling scores depend on
every forecast in the pool and therefore take the whole panel.

Functions accept scalars or numpy arrays and broadcast like numpy ufuncs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegeneratePanelError, DomainError
from .numerics import check_probabilities, check_probability


class RuleKind(str, enum.Enum):
    BRIER = "brier"
    LOG = "log"
    FULL_GAMBLING = "fg"
    PAIRWISE_GAMBLING = "pg"

    @classmethod
    def parse(cls, value) -> "RuleKind":
        if isinstance(value, RuleKind):
            return value
        if isinstance(value, ScoreRule):
            return value.kind
        aliases = {
            "brier": cls.BRIER,
            "log": cls.LOG,
            "logarithmic": cls.LOG,
            "fg": cls.FULL_GAMBLING,
            "full_gambling": cls.FULL_GAMBLING,
            "pg": cls.PAIRWISE_GAMBLING,
            "pairwise_gambling": cls.PAIRWISE_GAMBLING,
        }
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise DomainError(f"unknown scoring rule {value!r}") from None

    @property
    def is_gambling(self) -> bool:
        return self in (RuleKind.FULL_GAMBLING, RuleKind.PAIRWISE_GAMBLING)


@dataclass(frozen=True)
class ScoreRule:
    """A scoring rule; ``reference`` is the baseline forecast p0 for the
    pairwise gambling score and must be absent for every other kind."""

    kind: RuleKind
    reference: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind.parse(self.kind))
        if self.kind is RuleKind.PAIRWISE_GAMBLING:
            if self.reference is None:
                raise DomainError("the pairwise gambling score needs a reference probability")
            ref = check_probability(self.reference, "reference")
            if not 0.0 < ref < 1.0:
                raise DomainError(f"reference probability must lie in (0, 1), got {ref}")
            object.__setattr__(self, "reference", ref)
        elif self.reference is not None:
            raise DomainError(f"{self.kind.value} score takes no reference probability")

    @classmethod
    def pairwise(cls, reference: float) -> "ScoreRule":
        return cls(RuleKind.PAIRWISE_GAMBLING, reference)

    @property
    def label(self) -> str:
        return self.kind.value


BRIER = ScoreRule(RuleKind.BRIER)
LOG = ScoreRule(RuleKind.LOG)
FULL_GAMBLING = ScoreRule(RuleKind.FULL_GAMBLING)


def _check_outcome(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.dtype == bool:
        return arr.astype(np.int8)
    if not np.all((arr == 0) | (arr == 1)):
        raise DomainError("outcomes must be 0 or 1")
    return arr.astype(np.int8)


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


def brier(p, x):
    """Positively oriented Brier score ``-2 (p - x)^2`` for a binary outcome."""
    p = check_probabilities(p)
    x = _check_outcome(x)
    return _out(-2.0 * (p - x) ** 2)


def log_score(p, x, floor: Optional[float] = None):
    """Logarithmic score ``ln p`` if ``x = 1`` and ``ln(1 - p)`` if ``x = 0``.

    A forecast that put zero probability on the realised outcome scores
    ``-inf``. ``floor`` clips ``p`` into ``[floor, 1 - floor]`` first; it is
    meant for plotting only and is off by default.
    """
    p = check_probabilities(p)
    x = _check_outcome(x)
    if floor is not None:
        if not 0.0 < floor < 0.5:
            raise DomainError(f"floor must lie in (0, 0.5), got {floor}")
        p = np.clip(p, floor, 1.0 - floor)
    with np.errstate(divide="ignore"):
        value = np.where(x == 1, np.log(p), np.log1p(-p))
    return _out(value)


def _panel_mean(panel: np.ndarray) -> np.ndarray:
    if panel.ndim == 0 or panel.shape[0] < 2:
        raise DegeneratePanelError("a gambling panel needs at least two forecasts")
    pbar = panel.mean(axis=0)
    if np.any(pbar <= 0.0) or np.any(pbar >= 1.0):
        raise DegeneratePanelError(
            "gambling panel mean must lie strictly inside (0, 1); "
            "every forecast in the bin is 0 or every forecast is 1"
        )
    return pbar


def full_gambling(panel, x):
    """Parimutuel gambling rewards of every forecast in ``panel``.

    ``panel`` has shape ``(k,)`` for one bin or ``(k, n_bins)``; the result
    has the same shape and sums to zero over the first axis.
    """
    panel = check_probabilities(panel, "panel")
    x = _check_outcome(x)
    pbar = _panel_mean(panel)
    value = np.where(x == 1, panel / pbar - 1.0, (1.0 - panel) / (1.0 - pbar) - 1.0)
    return value


def _resolve_reference(rule, reference):
    if RuleKind.parse(rule) is not RuleKind.PAIRWISE_GAMBLING:
        raise DomainError("a reference forecast only applies to the pairwise gambling score")
    if reference is not None:
        return check_probabilities(reference, "reference")
    if not isinstance(rule, ScoreRule):
        raise DomainError("the pairwise gambling score needs a reference probability")
    return rule.reference


def pairwise_gambling(p, rule, x, reference=None):
    """Gambling reward of ``p`` in a two-player pool against the reference.

    ``reference`` overrides ``rule.reference`` and may be a per-bin array.
    """
    p0 = _resolve_reference(rule, reference)
    p = check_probabilities(p)
    p, p0 = np.broadcast_arrays(p, np.asarray(p0, dtype=float))
    return _out(full_gambling(np.stack([p, p0]), x)[0])


def expected_score(rule, p, p_star, reference=None):
    """Expectation of the score of ``p`` when the event has probability ``p_star``.

    For the full gambling score ``p`` is the panel and the result is the
    vector of expected rewards ``(p_i - pbar)(p_star - pbar) / (pbar (1 - pbar))``.
    """
    kind = RuleKind.parse(rule)
    p_star = check_probabilities(p_star, "p_star")
    if kind is RuleKind.BRIER:
        p = check_probabilities(p)
        return _out(-2.0 * p_star * (p - 1.0) ** 2 - 2.0 * (1.0 - p_star) * p**2)
    if kind is RuleKind.LOG:
        p = check_probabilities(p)
        with np.errstate(divide="ignore", invalid="ignore"):
            hit = np.where(p_star > 0.0, p_star * np.log(p), 0.0)
            miss = np.where(p_star < 1.0, (1.0 - p_star) * np.log1p(-p), 0.0)
        return _out(hit + miss)
    if kind is RuleKind.FULL_GAMBLING:
        panel = check_probabilities(p, "panel")
        pbar = _panel_mean(panel)
        return (panel - pbar) * (p_star - pbar) / (pbar * (1.0 - pbar))
    p0 = _resolve_reference(rule, reference)
    p = check_probabilities(p)
    pbar = (p + p0) / 2.0
    _panel_mean(np.stack(np.broadcast_arrays(p, np.asarray(p0, dtype=float))))
    return _out((p - pbar) * (p_star - pbar) / (pbar * (1.0 - pbar)))


def curvature_normalizer(p_star: float) -> float:
    """Factor that rescales expected Brier scores to the curvature of the
    expected log score at ``p = p_star``."""
    p_star = check_probability(p_star, "p_star")
    if p_star in (0.0, 1.0):
        raise DomainError("curvature normalizer is undefined at p_star = 0 or 1")
    return 1.0 / (4.0 * p_star * (1.0 - p_star))


def score_panel(rule, panel, x, reference=None) -> np.ndarray:
    """Scores of every forecast in ``panel`` (shape ``(k, n)``) against ``x``.

    Used by the CLI for per-bin score tables.
    """
    kind = RuleKind.parse(rule)
    panel = np.atleast_2d(np.asarray(panel, dtype=float))
    if kind is RuleKind.BRIER:
        return np.atleast_2d(brier(panel, x))
    if kind is RuleKind.LOG:
        return np.atleast_2d(log_score(panel, x))
    if kind is RuleKind.FULL_GAMBLING:
        return full_gambling(panel, x)
    return np.stack([np.atleast_1d(pairwise_gambling(row, rule, x, reference)) for row in panel])


__all__ = [
    "BRIER",
    "FULL_GAMBLING",
    "LOG",
    "RuleKind",
    "ScoreRule",
    "brier",
    "curvature_normalizer",
    "expected_score",
    "full_gambling",
    "log_score",
    "pairwise_gambling",
    "score_panel",
]
