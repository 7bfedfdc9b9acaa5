"""Acceptance suite: one test per criterion, each logging a PASS/FAIL line
that is repeated in the pytest terminal summary."""

import math
import time
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from scipy import special

from binscore.comparison import (
    clopper_pearson,
    improperness_interval,
    no_preference_bounds,
    preference_probabilities,
)
from binscore.experiments import SweepSpec, coverage_study, expected_diff_sweep
from binscore.forecast import synthetic_truth
from binscore.numerics import beta_quantile, binom_cdf, binom_pmf_all
from binscore.scores import BRIER, FULL_GAMBLING, LOG, RuleKind, ScoreRule, expected_score, full_gambling

P1, P2, N = 0.001, 0.001 / 3, 10_000
RULES = {"brier": BRIER, "log": LOG, "pg": ScoreRule.pairwise(5 * P1), "fg": FULL_GAMBLING}

# printed reference values: (x_min, x_max)
PRINTED_BOUNDS = {"brier": (2, 12), "log": (2, 11), "pg": (9, 24), "fg": (2, 12)}

# printed reference values: (no preference, prefer p1, prefer p2); None marks
# the entry that is recomputed (the printed row sums to 1.2083)
PRINTED_PROBS = {
    ("p1", "brier"): (0.7912, 0.2083, 0.0005),
    ("p1", "log"): (0.6963, 0.3032, 0.0005),
    ("p1", "pg"): (0.6672, 0.0000, 0.3327),
    ("p1", "fg"): (0.7912, 0.2083, 0.0005),
    ("p2", "brier"): (0.8454, 0.0000, 0.1545),
    ("p2", "log"): (0.8453, 0.0000, 0.1545),
    ("p2", "pg"): (0.0073, None, 0.9927),
    ("p2", "fg"): (0.8454, 0.0000, 0.1545),
}


def _clock():
    return time.perf_counter()


def test_criterion_01_bounds_table(acceptance_log):
    t0 = _clock()
    got = {}
    for name, rule in RULES.items():
        b = no_preference_bounds(rule, P1, P2, N, 0.05)
        got[name] = (b.x_min, b.x_max)
    elapsed = _clock() - t0
    ok = got == PRINTED_BOUNDS and elapsed < 10
    acceptance_log(1, ok, f"bounds {got} in {elapsed:.2f}s")
    assert got == PRINTED_BOUNDS
    assert elapsed < 10


def test_criterion_02_preference_table(acceptance_log):
    t0 = _clock()
    worst = 0.0
    recomputed = None
    for (which, name), printed in PRINTED_PROBS.items():
        ps = P1 if which == "p1" else P2
        b = no_preference_bounds(RULES[name], P1, P2, N)
        got = preference_probabilities(b, N, ps)
        assert abs(sum(got) - 1.0) < 1e-12
        for g, w in zip(got, printed):
            if w is None:
                recomputed = g
                continue
            worst = max(worst, abs(g - w))
    # independent recomputation of the replaced entry: Pr[X_S > x_max] at p* = p2
    b = no_preference_bounds(RULES["pg"], P1, P2, N)
    oracle = float(mpmath.fsum(
        mpmath.binomial(N, k) * mpmath.mpf(P2) ** k * (1 - mpmath.mpf(P2)) ** (N - k)
        for k in range(b.x_max + 1, b.x_max + 200)
    ))
    elapsed = _clock() - t0
    ok = worst <= 5e-4 and abs(recomputed - oracle) < 1e-15 and elapsed < 10
    acceptance_log(2, ok, f"max |diff| {worst:.2e}; recomputed PG/p2 middle entry {recomputed:.3e}; {elapsed:.2f}s")
    assert worst <= 5e-4
    assert recomputed == pytest.approx(oracle, abs=1e-15)
    assert elapsed < 10


def test_criterion_03_expected_difference_signs(acceptance_log):
    t0 = _clock()
    truth = synthetic_truth(8993, 1e-6, 2e-2, seed=0)
    spec = SweepSpec(truth, omega_grid=[1 / 3], reference_scale=5.0)
    got = {r["rule"]: r["expected_diff"] for r in expected_diff_sweep(spec)}
    elapsed = _clock() - t0
    signs = {"brier": 1, "log": 1, "fg": 1, "pg": -1}
    ok = all(np.sign(got[k]) == s for k, s in signs.items()) and elapsed < 5
    acceptance_log(3, ok, f"E[diff] {', '.join(f'{k}={v:+.2e}' for k, v in got.items())}; {elapsed:.2f}s")
    for k, s in signs.items():
        assert np.sign(got[k]) == s
    assert elapsed < 5


def test_criterion_04_propriety_grid(acceptance_log):
    t0 = _clock()
    grid = np.linspace(1e-6, 0.5, 200)
    p, ps = np.meshgrid(grid, grid, indexing="ij")
    ok = True
    details = []
    for name, rule in (("brier", BRIER), ("log", LOG)):
        d = expected_score(rule, ps, ps) - expected_score(rule, p, ps)
        diag = np.diag(d)
        off = d[~np.eye(200, dtype=bool)]
        good = d.min() >= -1e-12 and np.all(np.abs(diag) <= 1e-12) and off.min() > 1e-12
        ok &= bool(good)
        details.append(f"{name} min off-diagonal {off.min():.2e}")
    elapsed = _clock() - t0
    ok &= elapsed < 5
    acceptance_log(4, ok, f"{'; '.join(details)}; {elapsed:.2f}s")
    assert ok


def _fg_gap(p1, p_star, rest):
    panel = np.vstack([np.asarray(p1)[None, :], np.full((1 + len(rest), len(p1)), 0.0)])
    panel[1] = p_star
    for i, r in enumerate(rest):
        panel[2 + i] = r
    g = expected_score(RuleKind.FULL_GAMBLING, panel, p_star)
    return g[0] - g[1]


def test_criterion_05_improperness(acceptance_log):
    t0 = _clock()
    rng = np.random.default_rng(20240605)
    failures = 0
    p1 = np.linspace(0.0, 1.0, 2001)
    for _ in range(20):
        p_star = rng.uniform(0.02, 0.98)
        p3 = rng.uniform(0.02, 0.98)
        k = int(rng.integers(3, 21))
        rest = [p3] * (k - 2)
        pbar_minus1 = (p_star + (k - 2) * p3) / (k - 1)
        lo, hi = improperness_interval(k, p_star, pbar_minus1)
        gap = _fg_gap(p1, p_star, rest)
        inside = (p1 > lo) & (p1 < hi)
        outside = (p1 < lo) | (p1 > hi)
        if not (np.all(gap[inside] > 0.0) and np.all(gap[outside] <= 1e-12)):
            failures += 1
    # interval length against k at fixed mean of the other forecasts
    ks = [3, 5, 10, 20]
    ps = 0.001
    len_a = [np.diff(improperness_interval(k, ps, ps / 2))[0] for k in ks]
    len_b = [np.diff(improperness_interval(k, ps, 2 * ps))[0] for k in ks]
    strictly_up = all(b > a for a, b in zip(len_a, len_a[1:]))
    non_decreasing = all(b >= a for a, b in zip(len_b, len_b[1:]))
    elapsed = _clock() - t0
    ok = failures == 0 and strictly_up and non_decreasing and elapsed < 5
    acceptance_log(5, ok, f"{failures}/20 configurations violated; lengths {np.round(len_a, 6).tolist()}; {elapsed:.2f}s")
    assert failures == 0
    assert strictly_up and non_decreasing
    assert elapsed < 5


def test_criterion_06_zero_sum_and_two_player_order(acceptance_log):
    t0 = _clock()
    rng = np.random.default_rng(6)
    worst = 0.0
    for k in range(2, 12):
        panel = rng.uniform(1e-6, 1 - 1e-6, size=(k, 1000))
        for x in (0, 1):
            r = full_gambling(panel, np.full(1000, x))
            worst = max(worst, float(np.max(np.abs(np.sum(r, axis=0)))))
    p1, p2, ps = rng.uniform(1e-6, 1 - 1e-6, size=(3, 10_000))
    g1 = expected_score(RuleKind.FULL_GAMBLING, np.stack([p1, p2]), ps)[0]
    brier_gap = expected_score(BRIER, p1, ps) - expected_score(BRIER, p2, ps)
    agree = int(np.sum(np.sign(g1) == np.sign(brier_gap)))
    elapsed = _clock() - t0
    ok = worst < 1e-12 and agree == 10_000 and elapsed < 5
    acceptance_log(6, ok, f"max |sum| {worst:.1e}; sign agreement {agree}/10000; {elapsed:.2f}s")
    assert worst < 1e-12
    assert agree == 10_000
    assert elapsed < 5


def test_criterion_07_clopper_pearson_conservative(acceptance_log):
    t0 = _clock()
    grid = np.round(np.arange(1, 100) / 100, 2)
    worst = 1.0
    for n in range(1, 51):
        cis = [clopper_pearson(x, n, 0.05) for x in range(n + 1)]
        lo = np.array([c.lower for c in cis])
        hi = np.array([c.upper for c in cis])
        for ps in grid:
            cover = (lo <= ps) & (ps <= hi)
            worst = min(worst, math.fsum(binom_pmf_all(n, ps)[cover]))
    elapsed = _clock() - t0
    ok = worst >= 0.95 - 1e-12 and elapsed < 60
    acceptance_log(7, ok, f"minimum exact coverage {worst:.5f}; {elapsed:.2f}s")
    assert worst >= 0.95 - 1e-12
    assert elapsed < 60


def _bisect_beta(q, a, b):
    lo, hi = 0.0, 1.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return mid
        if special.betainc(a, b, mid) < q:
            lo = mid
        else:
            hi = mid


def test_criterion_08_numeric_oracles(acceptance_log):
    t0 = _clock()
    rng = np.random.default_rng(8)
    beta_worst = 0.0
    for _ in range(1000):
        q = rng.uniform(0.001, 0.999)
        a, b = rng.uniform(0.5, 20.0, size=2)
        beta_worst = max(beta_worst, abs(beta_quantile(q, a, b) - _bisect_beta(q, a, b)))
    cdf_worst = 0.0
    for _ in range(40):
        n = int(rng.integers(1, 201))
        p = float(rng.uniform(0.0, 1.0))
        pf = Fraction(p)
        cum = Fraction(0)
        for k in range(n + 1):
            cum += math.comb(n, k) * pf**k * (1 - pf) ** (n - k)
            cdf_worst = max(cdf_worst, abs(binom_cdf(k, n, p) - float(cum)))
    elapsed = _clock() - t0
    ok = beta_worst < 1e-10 and cdf_worst < 1e-12 and elapsed < 30
    acceptance_log(8, ok, f"beta quantile max err {beta_worst:.1e}; binomial cdf max err {cdf_worst:.1e}; {elapsed:.2f}s")
    assert beta_worst < 1e-10
    assert cdf_worst < 1e-12
    assert elapsed < 30


def test_criterion_09_gaussian_coverage(acceptance_log):
    t0 = _clock()
    truth = synthetic_truth(8993, 1e-6, 2e-2, seed=0)
    spec = SweepSpec(truth, omega_grid=np.geomspace(1e-3, 7.0, 20), rules=["brier", "log"])
    study = coverage_study(spec, n_sims=1000, alpha=0.05, seed=0)
    log_cov = [r.coverage for r in study.results if r.rule is RuleKind.LOG]
    brier_small = [r.coverage for r in study.results if r.rule is RuleKind.BRIER and r.omega < 1.0]
    elapsed = _clock() - t0
    log_ok = all(0.85 <= c <= 0.97 for c in log_cov)
    brier_ok = any(c < 0.93 or c > 0.97 for c in brier_small)
    ok = log_ok and brier_ok and elapsed < 300
    acceptance_log(
        9, ok,
        f"log coverage in [{min(log_cov):.3f}, {max(log_cov):.3f}]; "
        f"brier coverage for omega < 1 in [{min(brier_small):.3f}, {max(brier_small):.3f}]; {elapsed:.1f}s",
    )
    assert log_ok
    assert brier_ok
    assert elapsed < 300


def test_criterion_10_pairwise_bias(acceptance_log):
    t0 = _clock()
    pg = preference_probabilities(no_preference_bounds(RULES["pg"], P1, P2, N), N, P1)
    br = preference_probabilities(no_preference_bounds(RULES["brier"], P1, P2, N), N, P1)
    elapsed = _clock() - t0
    ok = (pg.prefer_first < 1e-3 and br.prefer_first > 0.2 and abs(pg.prefer_first - 0.0) <= 5e-4
          and abs(br.prefer_first - 0.2083) <= 5e-4 and elapsed < 10)
    acceptance_log(10, ok, f"prefer p1 at p*=p1: pg {pg.prefer_first:.5f}, brier {br.prefer_first:.5f}; {elapsed:.2f}s")
    assert pg.prefer_first < 1e-3
    assert br.prefer_first > 0.2
    assert pg.prefer_first == pytest.approx(0.0, abs=5e-4)
    assert br.prefer_first == pytest.approx(0.2083, abs=5e-4)
    assert elapsed < 10
