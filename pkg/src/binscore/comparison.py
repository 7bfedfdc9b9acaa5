"""Score differences between two forecasts and the uncertainty around them.

For a single bin with true event probability ``p*`` the score difference
``Delta = S(p1|X) - S(p2|X)`` takes the value ``delta0`` when ``X = 0`` and
``delta1`` when ``X = 1``, so ``E[Delta] = delta0 + p* (delta1 - delta0)``.
Averaged over ``N`` bins that share ``p*`` the observed difference depends
on the data only through the number of active bins ``x_S``; an exact
(Clopper-Pearson) interval for ``p*`` maps affinely onto an interval for
``E[Delta]``. With bin-specific probabilities a Student-t interval on the
per-bin differences is used instead.

A preference for the first forecast is expressed when the whole interval
lies above zero, for the second when it lies below zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import scores
from .errors import DomainError, IndeterminateDifferenceError, NumericError
from .forecast import BinaryForecast, ObservationField, align
from .numerics import (
    beta_quantile,
    binom_cdf,
    binom_pmf_all,
    binom_range_prob,
    binom_sf,
    check_probabilities,
    check_probability,
    t_quantile,
)
from .scores import RuleKind, ScoreRule

DEFAULT_ALPHA = 0.05


class Decision(str, enum.Enum):
    PREFER_FIRST = "prefer_first"
    NO_PREFERENCE = "no_preference"
    PREFER_SECOND = "prefer_second"


@dataclass(frozen=True)
class DeltaSummary:
    delta0: float
    delta1: float

    @property
    def spread(self) -> float:
        return self.delta1 - self.delta0

    @property
    def finite(self) -> bool:
        return math.isfinite(self.delta0) and math.isfinite(self.delta1)


@dataclass
class DeltaField:
    """Per-bin score differences for the outcomes 0 and 1."""

    delta0: np.ndarray
    delta1: np.ndarray
    bin_ids: Optional[tuple] = None

    def __post_init__(self):
        self.delta0 = np.asarray(self.delta0, dtype=float)
        self.delta1 = np.asarray(self.delta1, dtype=float)
        if self.delta0.shape != self.delta1.shape or self.delta0.ndim != 1:
            raise DomainError("delta0 and delta1 must be 1-d arrays of equal length")
        if self.bin_ids is not None and len(self.bin_ids) != self.delta0.shape[0]:
            raise DomainError("bin_ids must match the number of deltas")

    @property
    def n(self) -> int:
        return int(self.delta0.shape[0])

    @property
    def mean_delta0(self) -> float:
        return float(np.mean(self.delta0))

    def realized(self, x) -> np.ndarray:
        """Per-bin differences for outcomes ``x`` (shape ``(n,)`` or ``(m, n)``)."""
        x = np.asarray(x)
        with np.errstate(invalid="ignore"):
            return np.where(x == 1, self.delta1, self.delta0)


@dataclass(frozen=True)
class ConfidenceInterval:
    """``level`` is the confidence level ``1 - alpha``."""

    lower: float
    upper: float
    level: float

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise DomainError(f"interval lower bound {self.lower} exceeds upper bound {self.upper}")
        if not 0.0 < self.level < 1.0:
            raise DomainError(f"confidence level must lie in (0, 1), got {self.level}")

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class PreferenceReport:
    point_estimate: float
    interval: ConfidenceInterval
    decision: Decision
    n: Optional[int] = None
    x_s: Optional[int] = None
    method: str = ""

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "point_estimate": self.point_estimate,
            "lower": self.interval.lower,
            "upper": self.interval.upper,
            "level": self.interval.level,
            "decision": self.decision.value,
            "n": self.n,
        }
        if self.x_s is not None:
            out["x_s"] = self.x_s
        return out


@dataclass(frozen=True)
class NoPreferenceBounds:
    """No preference is expressed exactly when ``x_min <= x_S <= x_max``.

    ``orientation`` is +1 when large ``x_S`` favours the first forecast
    (``delta1 > delta0``) and -1 otherwise.
    """

    x_min: int
    x_max: int
    n: int
    orientation: int = 1

    def __post_init__(self):
        if not 0 <= self.x_min <= self.x_max <= self.n:
            raise DomainError(f"invalid bounds ({self.x_min}, {self.x_max}) for N={self.n}")
        if self.orientation not in (1, -1):
            raise DomainError("orientation must be +1 or -1")


class PreferenceProbabilities(NamedTuple):
    no_preference: float
    prefer_first: float
    prefer_second: float


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def _check_n(n) -> int:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"N must be a positive integer, got {n!r}")
    return int(n)


def _ext_sub(a, b):
    """``a - b`` in the extended reals; ``inf - inf`` is an error, never NaN."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    bad = np.isinf(a) & np.isinf(b) & (np.sign(a) == np.sign(b))
    if np.any(bad):
        raise IndeterminateDifferenceError(
            "score difference is indeterminate: both forecasts score -inf on the same outcome "
            "(each put zero probability on it)"
        )
    out = a - b
    return float(out) if out.ndim == 0 else out


# ------------------------------------------------------------ differences


def _scores_both_outcomes(rule, p1, p2, reference=None, others: Sequence = ()):
    kind = RuleKind.parse(rule)
    if others and kind is not RuleKind.FULL_GAMBLING:
        raise DomainError("extra panel members only apply to the full gambling score")
    out = []
    for x in (0, 1):
        if kind is RuleKind.BRIER:
            s1, s2 = scores.brier(p1, x), scores.brier(p2, x)
        elif kind is RuleKind.LOG:
            s1, s2 = scores.log_score(p1, x), scores.log_score(p2, x)
        elif kind is RuleKind.PAIRWISE_GAMBLING:
            s1 = scores.pairwise_gambling(p1, rule, x, reference)
            s2 = scores.pairwise_gambling(p2, rule, x, reference)
        else:
            panel = np.stack(np.broadcast_arrays(p1, p2, *others)).astype(float)
            r = scores.full_gambling(panel, x)
            s1, s2 = r[0], r[1]
        out.append(_ext_sub(s1, s2))
    return out


def delta_summary(rule, p1: float, p2: float) -> DeltaSummary:
    """Score differences of ``p1`` over ``p2`` on outcomes 0 and 1.

    For the pairwise gambling score both forecasts play against the rule's
    reference; for the full gambling score they form a two-member pool.
    """
    p1 = check_probability(p1, "p1")
    p2 = check_probability(p2, "p2")
    d0, d1 = _scores_both_outcomes(rule, p1, p2)
    return DeltaSummary(float(d0), float(d1))


def delta_field(rule, p1, p2, reference=None, others: Sequence = (), bin_ids=None) -> DeltaField:
    """Per-bin :class:`DeltaSummary` values for aligned probability arrays.

    ``reference`` (pairwise gambling) may be a per-bin array. ``others``
    adds further members to the full gambling pool; the difference is always
    between the first two members.
    """
    p1 = check_probabilities(p1, "p1")
    p2 = check_probabilities(p2, "p2")
    others = [check_probabilities(o, "panel") for o in others]
    d0, d1 = _scores_both_outcomes(rule, p1, p2, reference, others)
    return DeltaField(np.atleast_1d(d0), np.atleast_1d(d1), bin_ids)


def delta_moments(d: DeltaSummary, p_star: float) -> tuple[float, float]:
    """Mean and variance of the single-bin score difference."""
    p_star = check_probability(p_star, "p_star")
    if not d.finite:
        raise DomainError("moments need finite score differences")
    spread = d.delta1 - d.delta0
    return d.delta0 + p_star * spread, p_star * (1.0 - p_star) * spread**2


def average_delta(field: DeltaField, obs) -> float:
    """Observed average score difference ``(1/N) sum_i Delta_i(x_i)``."""
    x = obs.values if isinstance(obs, ObservationField) else np.asarray(obs)
    if x.shape != field.delta0.shape:
        raise DomainError(f"{x.shape[0] if x.ndim else 0} observations for {field.n} bins")
    if not np.all((x == 0) | (x == 1)):
        raise DomainError("observations must be 0 or 1")
    return float(np.mean(field.realized(x)))


# ----------------------------------------------------- exact (single prob)


def clopper_pearson(x_s: int, n: int, alpha: float = DEFAULT_ALPHA) -> ConfidenceInterval:
    """Exact binomial confidence interval for the success probability."""
    n = _check_n(n)
    alpha = _check_alpha(alpha)
    if isinstance(x_s, bool) or int(x_s) != x_s or not 0 <= x_s <= n:
        raise DomainError(f"x_S must be an integer in [0, {n}], got {x_s!r}")
    x_s = int(x_s)
    lower = 0.0 if x_s == 0 else beta_quantile(alpha / 2.0, x_s, n - x_s + 1)
    upper = 1.0 if x_s == n else beta_quantile(1.0 - alpha / 2.0, x_s + 1, n - x_s)
    return ConfidenceInterval(lower, upper, 1.0 - alpha)


def decide(interval: ConfidenceInterval) -> Decision:
    # An endpoint exactly at zero counts as containing zero.
    if interval.lower > 0.0:
        return Decision.PREFER_FIRST
    if interval.upper < 0.0:
        return Decision.PREFER_SECOND
    return Decision.NO_PREFERENCE


def delta_ci_exact(d: DeltaSummary, x_s: int, n: int, alpha: float = DEFAULT_ALPHA) -> PreferenceReport:
    """Exact interval for ``E[Delta]`` when every bin has the same probability."""
    if not d.finite:
        raise DomainError("exact interval needs finite score differences")
    ci = clopper_pearson(x_s, n, alpha)
    spread = d.delta1 - d.delta0
    a = d.delta0 + ci.lower * spread
    b = d.delta0 + ci.upper * spread
    interval = ConfidenceInterval(min(a, b), max(a, b), ci.level)
    point = d.delta0 + (int(x_s) / n) * spread
    return PreferenceReport(point, interval, decide(interval), n=int(n), x_s=int(x_s), method="exact")


def decision_scan(d: DeltaSummary, n: int, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Decision for every ``x_S = 0..n``: +1 first, 0 none, -1 second.

    Uses the duality between Clopper-Pearson bounds and binomial tails: the
    lower bound for ``x`` exceeds a probability ``t`` exactly when
    ``Pr_t[X >= x] < alpha/2``, and the upper bound falls below ``t`` exactly
    when ``Pr_t[X <= x] < alpha/2``. With ``t`` the break-even probability
    at which ``E[Delta] = 0`` the whole scan costs one binomial PMF.
    """
    n = _check_n(n)
    alpha = _check_alpha(alpha)
    if not d.finite:
        raise DomainError("decision scan needs finite score differences")
    spread = d.delta1 - d.delta0
    if spread == 0.0:
        raise DomainError("degenerate forecasts: delta1 == delta0, no preference is ever possible")
    t = -d.delta0 / spread
    x = np.arange(n + 1)
    half = alpha / 2.0
    if t <= 0.0:
        lower_above = x >= 1 if t == 0.0 else np.ones(n + 1, dtype=bool)
        upper_below = np.zeros(n + 1, dtype=bool)
    elif t >= 1.0:
        lower_above = np.zeros(n + 1, dtype=bool)
        upper_below = x < n if t == 1.0 else np.ones(n + 1, dtype=bool)
    else:
        pmf = binom_pmf_all(n, t)
        cdf = np.cumsum(pmf)
        sf_ge = np.cumsum(pmf[::-1])[::-1]
        lower_above = (x >= 1) & (sf_ge < half)
        upper_below = (x < n) & (cdf < half)
    if spread > 0:
        first, second = lower_above, upper_below
    else:
        first, second = upper_below, lower_above
    out = np.zeros(n + 1, dtype=np.int8)
    out[first] = 1
    out[second] = -1
    if np.any(first & second):
        raise NumericError("inconsistent decision scan: interval both above and below zero")
    return out


def bounds_from_decisions(decisions: np.ndarray, orientation: int) -> NoPreferenceBounds:
    n = decisions.shape[0] - 1
    none = np.flatnonzero(decisions == 0)
    if none.size == 0:
        raise NumericError("no value of x_S leads to no preference; bounds are undefined")
    x_min, x_max = int(none[0]), int(none[-1])
    expected = np.zeros(n + 1, dtype=np.int8)
    expected[:x_min] = -orientation
    expected[x_max + 1 :] = orientation
    if not np.array_equal(decisions, expected):
        raise NumericError("the no-preference region is not a contiguous interval of x_S")
    return NoPreferenceBounds(x_min, x_max, n, orientation)


def no_preference_bounds(rule, p1: float, p2: float, n: int, alpha: float = DEFAULT_ALPHA) -> NoPreferenceBounds:
    """Range of ``x_S`` for which the exact interval contains zero."""
    p1 = check_probability(p1, "p1")
    p2 = check_probability(p2, "p2")
    if p1 == p2:
        raise DomainError("identical forecasts: no-preference bounds do not exist")
    d = delta_summary(rule, p1, p2)
    decisions = decision_scan(d, n, alpha)
    return bounds_from_decisions(decisions, 1 if d.spread > 0 else -1)


def preference_probabilities(
    bounds: NoPreferenceBounds, n: int, p_star: float, orientation: Optional[int] = None
) -> PreferenceProbabilities:
    """Exact probabilities of (no preference, prefer first, prefer second)
    when ``X_S ~ Bin(n, p_star)``."""
    n = _check_n(n)
    if n != bounds.n:
        raise DomainError(f"bounds were computed for N={bounds.n}, not {n}")
    p_star = check_probability(p_star, "p_star")
    orientation = bounds.orientation if orientation is None else orientation
    if orientation not in (1, -1):
        raise DomainError("orientation must be +1 or -1")
    below = binom_cdf(bounds.x_min - 1, n, p_star) if bounds.x_min > 0 else 0.0
    above = binom_sf(bounds.x_max, n, p_star)
    middle = binom_range_prob(bounds.x_min, bounds.x_max, n, p_star)
    if orientation > 0:
        return PreferenceProbabilities(middle, above, below)
    return PreferenceProbabilities(middle, below, above)


def preference_power(bounds: Optional[NoPreferenceBounds], n: int, p_star: float) -> float:
    """Probability ``beta`` of expressing any preference.

    ``bounds=None`` stands for identical forecasts, which are never
    separable, so ``beta = 0``.
    """
    n = _check_n(n)
    p_star = check_probability(p_star, "p_star")
    if bounds is None:
        return 0.0
    below = binom_cdf(bounds.x_min - 1, n, p_star) if bounds.x_min > 0 else 0.0
    return below + binom_sf(bounds.x_max, n, p_star)


# ------------------------------------------------------ gambling, k >= 3


def improperness_interval(k: int, p_star: float, pbar_minus1: float) -> tuple[float, float]:
    """Values of ``p1`` that beat ``p2 = p*`` in expected full gambling score.

    With ``k`` gamblers whose members other than the first average
    ``pbar_minus1``, the expected reward of ``p1`` minus that of ``p2 = p*``
    has the sign of ``(p1 - p*)(k p* - p1 - (k-1) pbar_minus1)``. The interval
    runs between ``p*`` and ``k p* - (k-1) pbar_minus1``, clipped to [0, 1].
    """
    if isinstance(k, bool) or int(k) != k or k < 3:
        raise DomainError(f"k must be an integer >= 3, got {k!r}")
    p_star = check_probability(p_star, "p_star")
    pbar_minus1 = check_probability(pbar_minus1, "pbar_minus1")
    other = k * p_star - (k - 1) * pbar_minus1
    lo, hi = sorted((p_star, other))
    return min(max(lo, 0.0), 1.0), min(max(hi, 0.0), 1.0)


# ------------------------------------------------- Gaussian (multi prob)


def gaussian_intervals(diffs: np.ndarray, alpha: float = DEFAULT_ALPHA):
    """Row-wise Student-t intervals for a ``(m, N)`` array of per-bin differences.

    Returns ``(mean, lower, upper)`` arrays of length ``m``.
    """
    alpha = _check_alpha(alpha)
    diffs = np.atleast_2d(np.asarray(diffs, dtype=float))
    n = diffs.shape[1]
    if n < 2:
        raise DomainError("the Gaussian interval needs at least two per-bin differences")
    if not np.all(np.isfinite(diffs)):
        raise NumericError(
            "per-bin score differences contain infinite values, typically a log score of a "
            "forecast that is exactly 0 or 1 on the wrong outcome; the Gaussian interval is undefined"
        )
    mean = diffs.mean(axis=1)
    sd = diffs.std(axis=1, ddof=1)
    # constant rows get the exact degenerate interval [c, c]
    const = diffs.max(axis=1) == diffs.min(axis=1)
    mean[const] = diffs[const, 0]
    sd[const] = 0.0
    half = t_quantile(1.0 - alpha / 2.0, n - 1) * sd / math.sqrt(n)
    return mean, mean - half, mean + half


def delta_ci_gaussian(per_bin_deltas, alpha: float = DEFAULT_ALPHA) -> PreferenceReport:
    """Interval ``mean +/- t_{1-alpha/2, N-1} s / sqrt(N)`` on observed per-bin differences."""
    diffs = np.asarray(per_bin_deltas, dtype=float)
    if diffs.ndim != 1:
        raise DomainError("per-bin differences must be a 1-d sequence")
    mean, lower, upper = gaussian_intervals(diffs[None, :], alpha)
    m, lo, hi = float(mean[0]), float(lower[0]), float(upper[0])
    if lo > hi:
        lo, hi = hi, lo
    interval = ConfidenceInterval(lo, hi, 1.0 - alpha)
    return PreferenceReport(m, interval, decide(interval), n=diffs.shape[0], method="gaussian")


def expected_average_delta(
    p1_field,
    p2_field,
    p_star_field,
    rule,
    reference=None,
    others: Sequence = (),
    strict: bool = False,
) -> float:
    """Exact ``E[Delta] = mean_i(delta0_i + p*_i (delta1_i - delta0_i))``.

    Arguments are :class:`BinaryForecast` objects (aligned on their common
    unmasked bins) or already-aligned arrays. ``reference`` supplies the
    pairwise gambling baseline per bin and ``others`` extra full gambling
    pool members.
    """
    fields = [p1_field, p2_field, p_star_field, *others]
    if reference is not None and isinstance(reference, BinaryForecast):
        fields.append(reference)
    if all(isinstance(f, BinaryForecast) for f in fields):
        _, arrays = align(*fields, strict=strict)
        p1, p2, ps = arrays[:3]
        extra = arrays[3 : 3 + len(others)]
        if isinstance(reference, BinaryForecast):
            reference = arrays[-1]
    else:
        if any(isinstance(f, BinaryForecast) for f in fields):
            raise DomainError("mix of BinaryForecast objects and raw arrays")
        p1, p2, ps = (check_probabilities(f) for f in fields[:3])
        extra = [check_probabilities(o) for o in others]
        if not (p1.shape == p2.shape == ps.shape) or any(o.shape != p1.shape for o in extra):
            raise DomainError("probability arrays are not aligned")
    field = delta_field(rule, p1, p2, reference=reference, others=extra)
    return expected_from_field(field, ps)


def expected_from_field(field: DeltaField, p_star) -> float:
    ps = np.broadcast_to(check_probabilities(p_star, "p_star"), field.delta0.shape)
    d0, d1 = field.delta0, field.delta1
    with np.errstate(invalid="ignore"):
        hit = np.where(ps > 0.0, ps * d1, 0.0)
        miss = np.where(ps < 1.0, (1.0 - ps) * d0, 0.0)
        total = np.where(np.isfinite(d0) & np.isfinite(d1), d0 + ps * (d1 - d0), hit + miss)
    if np.any(np.isnan(total)):
        raise IndeterminateDifferenceError("expected difference mixes +inf and -inf")
    if total.max() == total.min():
        return float(total[0])
    return float(np.mean(total))


__all__ = [
    "ConfidenceInterval",
    "DEFAULT_ALPHA",
    "Decision",
    "DeltaField",
    "DeltaSummary",
    "NoPreferenceBounds",
    "PreferenceProbabilities",
    "PreferenceReport",
    "ScoreRule",
    "average_delta",
    "bounds_from_decisions",
    "clopper_pearson",
    "decide",
    "decision_scan",
    "delta_ci_exact",
    "delta_ci_gaussian",
    "delta_field",
    "delta_moments",
    "delta_summary",
    "expected_average_delta",
    "expected_from_field",
    "gaussian_intervals",
    "improperness_interval",
    "no_preference_bounds",
    "preference_power",
    "preference_probabilities",
]
