"""Drivers for the forecast-comparison studies.

Single-probability (MBSP) studies are exact binomial computations. The
multi-probability (MBMP) studies take a truth field ``p*``, compare
``p1 = p*`` against ``p2 = omega * p*`` over a grid of ``omega`` and use
``p0 = c * p*`` as the pairwise gambling reference. Monte Carlo replicate
``r`` always draws its observations from random stream ``r`` of the seed,
so results do not depend on how replicates are split across workers.

Every driver returns a list of flat dicts (one per table row) that
:func:`write_rows` turns into CSV.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .comparison import (
    DEFAULT_ALPHA,
    delta_field,
    gaussian_intervals,
    expected_from_field,
    no_preference_bounds,
    preference_power,
    preference_probabilities,

)
from .errors import DomainError
from .forecast import BinaryForecast, draw_bernoulli
from .numerics import check_probability, check_seed, make_stream
from .scores import RuleKind, ScoreRule

ALL_RULES = (RuleKind.BRIER, RuleKind.LOG, RuleKind.PAIRWISE_GAMBLING, RuleKind.FULL_GAMBLING)

# Desk-scale replicate count; pass n_sims=10_000 for the full study.
DEFAULT_SIMS = 1000
CHUNK = 100


def default_omega_grid(count: int = 50, low: float = 1e-3, high: float = 7.0) -> np.ndarray:
    """Log-spaced grid of ``count`` scale factors on ``[low, high]``."""
    if count < 1 or not 0 < low <= high:
        raise DomainError("need count >= 1 and 0 < low <= high")
    return np.geomspace(low, high, count)


@dataclass
class SweepSpec:
    """Configuration shared by the multi-probability studies.

    ``rules`` holds rule kinds; the pairwise gambling reference is the field
    ``reference_scale * truth``.
    """

    truth: BinaryForecast
    omega_grid: np.ndarray = field(default_factory=default_omega_grid)
    rules: Sequence = ALL_RULES
    reference_scale: float = 5.0

    def __post_init__(self):
        self.omega_grid = np.asarray(self.omega_grid, dtype=float)
        if self.omega_grid.ndim != 1 or self.omega_grid.size == 0:
            raise DomainError("omega grid must be a non-empty 1-d sequence")
        if np.any(self.omega_grid <= 0) or np.any(np.diff(self.omega_grid) <= 0):
            raise DomainError("omega grid must be positive and strictly increasing")
        self.rules = tuple(RuleKind.parse(r) for r in self.rules)
        if not self.rules:
            raise DomainError("at least one rule is required")
        self.reference_scale = float(self.reference_scale)
        if not self.reference_scale > 0:
            raise DomainError("reference_scale must be positive")
        _, ps = self.truth.active()
        if ps.size < 2:
            raise DomainError("the truth field needs at least two unmasked bins")
        top = float(ps.max())
        if self.omega_grid[-1] * top > 1.0:
            raise DomainError(f"omega={self.omega_grid[-1]} times max p*={top} exceeds 1")
        if RuleKind.PAIRWISE_GAMBLING in self.rules and self.reference_scale * top >= 1.0:
            raise DomainError(f"reference_scale={self.reference_scale} times max p*={top} reaches 1")

    @property
    def p_star(self) -> np.ndarray:
        return self.truth.active()[1]


@dataclass(frozen=True)
class CoverageResult:
    omega: float
    rule: RuleKind
    coverage: float
    n_sims: int
    alpha: float
    n_aborted: int = 0


def _fields(spec: SweepSpec, omega: float):
    ps = spec.p_star
    return ps, omega * ps, spec.reference_scale * ps


def _pair_field(kind: RuleKind, p1, p2, p0):
    if kind is RuleKind.PAIRWISE_GAMBLING:
        return delta_field(kind, p1, p2, reference=p0)
    return delta_field(kind, p1, p2)


def expected_diff_sweep(spec: SweepSpec) -> list[dict]:
    """Exact ``E[Delta(p1, p2)]`` for every ``(omega, rule)``."""
    rows = []
    for omega in spec.omega_grid:
        ps, p2, p0 = _fields(spec, omega)
        for kind in spec.rules:
            value = expected_from_field(_pair_field(kind, ps, p2, p0), ps)
            rows.append({"omega": float(omega), "rule": kind.value, "expected_diff": value})
    return rows


def k3_diff_sweep(spec: SweepSpec) -> list[dict]:
    """``E[Delta(p2, p1)]`` and ``E[Delta(p2, p0)]`` with p0 entered as a third competitor.

    The full gambling score uses the joint pool ``(p1, p2, p0)``.
    """
    rows = []
    for omega in spec.omega_grid:
        ps, p2, p0 = _fields(spec, omega)
        for kind in spec.rules:
            if kind is RuleKind.FULL_GAMBLING:
                f21 = delta_field(kind, p2, ps, others=(p0,))
                f20 = delta_field(kind, p2, p0, others=(ps,))
            else:
                f21 = _pair_field(kind, p2, ps, p0)
                f20 = _pair_field(kind, p2, p0, p0)
            rows.append(
                {
                    "omega": float(omega),
                    "rule": kind.value,
                    "diff_p2_p1": expected_from_field(f21, ps),
                    "diff_p2_p0": expected_from_field(f20, ps),
                }
            )
    return rows


def _mbsp_rule(kind: RuleKind, p0: float):
    return ScoreRule.pairwise(p0) if kind is RuleKind.PAIRWISE_GAMBLING else ScoreRule(kind)


def mbsp_bounds_table(p1: float, p2: float, p0: float, n: int, alpha: float = DEFAULT_ALPHA,
                      rules: Iterable = ALL_RULES) -> list[dict]:
    rows = []
    for kind in (RuleKind.parse(r) for r in rules):
        b = no_preference_bounds(_mbsp_rule(kind, p0), p1, p2, n, alpha)
        rows.append({"rule": kind.value, "x_min": b.x_min, "x_max": b.x_max})
    return rows


def mbsp_preference_table(p1: float, p2: float, p0: float, n: int, p_stars: Iterable[float],
                          alpha: float = DEFAULT_ALPHA, rules: Iterable = ALL_RULES) -> list[dict]:
    rules = [RuleKind.parse(r) for r in rules]
    bounds = {k: no_preference_bounds(_mbsp_rule(k, p0), p1, p2, n, alpha) for k in rules}
    rows = []
    for ps in p_stars:
        for kind in rules:
            pr = preference_probabilities(bounds[kind], n, ps)
            rows.append(
                {
                    "p_star": float(ps),
                    "rule": kind.value,
                    "no_preference": pr.no_preference,
                    "prefer_first": pr.prefer_first,
                    "prefer_second": pr.prefer_second,
                }
            )
    return rows


def mbsp_power_curves(p1: float, p2: float, p0: float, n_list: Iterable[int],
                      p_star_grid: Iterable[float], rules: Iterable = ALL_RULES,
                      alpha: float = DEFAULT_ALPHA) -> list[dict]:
    """``beta(p*)`` for each rule and number of bins."""
    p1 = check_probability(p1, "p1")
    p2 = check_probability(p2, "p2")
    grid = [check_probability(p, "p_star") for p in p_star_grid]
    rows = []
    for kind in (RuleKind.parse(r) for r in rules):
        for n in n_list:
            b = None if p1 == p2 else no_preference_bounds(_mbsp_rule(kind, p0), p1, p2, n, alpha)
            for ps in grid:
                rows.append({"rule": kind.value, "n": int(n), "p_star": ps,
                             "beta": preference_power(b, n, ps)})
    return rows


def mbsp_power_vs_omega(p1: float, omega_grid: Iterable[float], p0: float, n_list: Iterable[int],
                        rules: Iterable = ALL_RULES, alpha: float = DEFAULT_ALPHA) -> list[dict]:
    """``beta`` as a function of ``omega = p2 / p1`` with ``p* = p1``."""
    rows = []
    for kind in (RuleKind.parse(r) for r in rules):
        for n in n_list:
            for omega in omega_grid:
                p2 = omega * p1
                b = None if p2 == p1 else no_preference_bounds(_mbsp_rule(kind, p0), p1, p2, n, alpha)
                rows.append({"rule": kind.value, "n": int(n), "omega": float(omega),
                             "beta": preference_power(b, n, p1)})
    return rows


# ------------------------------------------------------------ Monte Carlo


def _cell_fields(spec: SweepSpec):
    cells = []
    for omega in spec.omega_grid:
        ps, p2, p0 = _fields(spec, omega)
        for kind in spec.rules:
            cells.append((float(omega), kind, _pair_field(kind, ps, p2, p0)))
    return cells


def _replicate_chunk(args):
    spec, alpha, seed, start, stop = args
    ps = spec.p_star
    x = np.stack([draw_bernoulli(ps, make_stream(seed, r)) for r in range(start, stop)])
    out = []
    for _, _, f in _cell_fields(spec):
        diffs = f.realized(x)
        ok = np.all(np.isfinite(diffs), axis=1)
        mean = np.full(x.shape[0], np.nan)
        lower = np.full(x.shape[0], np.nan)
        upper = np.full(x.shape[0], np.nan)
        if np.any(ok):
            mean[ok], lower[ok], upper[ok] = gaussian_intervals(diffs[ok], alpha)
        out.append((mean, lower, upper))
    return out


def replicate_intervals(spec: SweepSpec, n_sims: int, alpha: float = DEFAULT_ALPHA, seed: int = 0,
                        workers: int = 1) -> list[tuple]:
    """Per-cell arrays ``(mean, lower, upper)`` of the Gaussian interval in
    each replicate, in ``(omega, rule)`` order. Aborted replicates (infinite
    per-bin differences) hold NaN."""
    seed = check_seed(seed)
    if isinstance(n_sims, bool) or int(n_sims) != n_sims or n_sims < 1:
        raise DomainError(f"n_sims must be a positive integer, got {n_sims!r}")
    jobs = [(spec, alpha, seed, s, min(s + CHUNK, n_sims)) for s in range(0, int(n_sims), CHUNK)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_replicate_chunk, jobs))
    else:
        parts = [_replicate_chunk(j) for j in jobs]
    n_cells = len(parts[0])
    return [
        tuple(np.concatenate([p[c][i] for p in parts]) for i in range(3))
        for c in range(n_cells)
    ]


def mbmp_preference_mc(spec: SweepSpec, n_sims: int = DEFAULT_SIMS, alpha: float = DEFAULT_ALPHA,
                       seed: int = 0, workers: int = 1) -> list[dict]:
    """Monte Carlo frequencies of each decision per ``(omega, rule)``.

    The integer ``count_*`` columns partition ``n_valid`` exactly; the
    frequency columns are those counts divided by ``n_valid``.
    """
    cells = _cell_fields(spec)
    stats = replicate_intervals(spec, n_sims, alpha, seed, workers)
    rows = []
    for (omega, kind, _), (mean, lower, upper) in zip(cells, stats):
        valid = ~np.isnan(mean)
        n_valid = int(valid.sum())
        first = int(np.sum(lower[valid] > 0.0))
        second = int(np.sum(upper[valid] < 0.0))
        none = n_valid - first - second
        denom = max(n_valid, 1)
        rows.append(
            {
                "omega": omega,
                "rule": kind.value,
                "prefer_first": first / denom,
                "no_preference": none / denom,
                "prefer_second": second / denom,
                "count_first": first,
                "count_none": none,
                "count_second": second,
                "n_valid": n_valid,
                "n_aborted": int(n_sims) - n_valid,
            }
        )
    return rows


@dataclass
class CoverageStudy:
    results: list[CoverageResult]
    expected: dict
    means: dict

    def rows(self) -> list[dict]:
        return [
            {
                "omega": r.omega,
                "rule": r.rule.value,
                "coverage": r.coverage,
                "expected_diff": self.expected[(r.omega, r.rule)],
                "n_sims": r.n_sims,
                "n_aborted": r.n_aborted,
                "alpha": r.alpha,
            }
            for r in self.results
        ]

    def histogram_rows(self, bins: int = 40) -> list[dict]:
        """Empirical distribution of the replicate average differences with
        the matching Gaussian density, one row per histogram bin."""
        rows = []
        for (omega, kind), m in self.means.items():
            m = m[~np.isnan(m)]
            if m.size == 0:
                continue
            counts, edges = np.histogram(m, bins=bins)
            width = edges[1] - edges[0] if edges.size > 1 else 1.0
            mu, sd = float(m.mean()), float(m.std(ddof=1)) if m.size > 1 else 0.0
            for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                mid = 0.5 * (lo + hi)
                dens = (
                    math.exp(-0.5 * ((mid - mu) / sd) ** 2) / (sd * math.sqrt(2 * math.pi)) if sd > 0 else 0.0
                )
                rows.append(
                    {
                        "omega": omega,
                        "rule": kind.value,
                        "bin_left": float(lo),
                        "bin_right": float(hi),
                        "count": int(c),
                        "density": c / (m.size * width) if width > 0 else 0.0,
                        "gaussian_density": dens,
                        "expected_diff": self.expected[(omega, kind)],
                    }
                )
        return rows


def coverage_study(spec: SweepSpec, n_sims: int = DEFAULT_SIMS, alpha: float = DEFAULT_ALPHA,
                   seed: int = 0, workers: int = 1) -> CoverageStudy:
    """Fraction of replicates whose Gaussian interval contains the exact
    expected difference, per ``(omega, rule)``."""
    if isinstance(n_sims, bool) or int(n_sims) != n_sims or n_sims < 100:
        raise DomainError(f"coverage needs n_sims >= 100, got {n_sims!r}")
    cells = _cell_fields(spec)
    ps = spec.p_star
    stats = replicate_intervals(spec, n_sims, alpha, seed, workers)
    results, expected, means = [], {}, {}
    for (omega, kind, f), (mean, lower, upper) in zip(cells, stats):
        truth = expected_from_field(f, ps)
        valid = ~np.isnan(mean)
        n_valid = int(valid.sum())
        hits = int(np.sum((lower[valid] <= truth) & (truth <= upper[valid])))
        cov = hits / n_valid if n_valid else float("nan")
        results.append(CoverageResult(omega, kind, cov, n_valid, float(alpha), int(n_sims) - n_valid))
        expected[(omega, kind)] = truth
        means[(omega, kind)] = mean
    return CoverageStudy(results, expected, means)


# ------------------------------------------------------------------ output


def write_rows(rows: Sequence[dict], fh: Optional[io.TextIOBase] = None) -> str:
    """Write rows as CSV (header from the first row); returns the text."""
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text
