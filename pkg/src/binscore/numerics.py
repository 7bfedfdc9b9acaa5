"""Special-function kernel for the downstream statistics.

Everything here is deterministic and built on :mod:`math` plus numpy arrays:

* regularized incomplete beta ``I_x(a, b)`` via a modified Lentz continued
  fraction,
* Beta quantiles by safeguarded Newton iteration,
* binomial PMF / CDF / survival function evaluated in log space,
* Student-t quantiles through the inverse incomplete beta,
* seedable random streams (Philox4x64, a counter-based generator).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, DomainError

_FPMIN = 1e-300
_CF_EPS = 1e-16
_CF_MAXIT = 20000

QUANTILE_TOL = 1e-12
QUANTILE_MAXIT = 200

UINT64_MAX = 2**64 - 1


def check_probability(value, name: str = "p") -> float:
    """Return ``value`` as a float after checking it lies in [0, 1]."""
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a real number, got {value!r}") from None
    if math.isnan(v) or v < 0.0 or v > 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")
    return v


def check_probabilities(values, name: str = "p") -> np.ndarray:
    """Array version of :func:`check_probability`."""
    arr = np.asarray(values, dtype=float)
    if arr.size and (np.isnan(arr).any() or (arr < 0).any() or (arr > 1).any()):
        bad = arr[np.isnan(arr) | (arr < 0) | (arr > 1)][0]
        raise DomainError(f"{name} values must lie in [0, 1], got {bad!r}")
    return arr


def _check_shape(a: float, b: float) -> None:
    if not (a > 0 and b > 0) or math.isinf(a) or math.isinf(b):
        raise DomainError(f"shape parameters must be positive and finite, got a={a!r}, b={b!r}")


def log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _beta_cf(x: float, a: float, b: float) -> float:
    # Modified Lentz evaluation of the incomplete-beta continued fraction.
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ConvergenceError(
        f"incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})"
    )


def reg_inc_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``.

    Raises :class:`DomainError` for ``a <= 0``, ``b <= 0`` or ``x`` outside
    [0, 1].
    """
    x = float(x)
    a = float(a)
    b = float(b)
    _check_shape(a, b)
    if math.isnan(x) or x < 0.0 or x > 1.0:
        raise DomainError(f"x must lie in [0, 1], got {x!r}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = a * math.log(x) + b * math.log1p(-x) - log_beta(a, b)
    if x < (a + 1.0) / (a + b + 2.0):
        value = math.exp(log_front) * _beta_cf(x, a, b) / a
    else:
        value = 1.0 - math.exp(log_front) * _beta_cf(1.0 - x, b, a) / b
    return min(1.0, max(0.0, value))


def _beta_log_density(x: float, a: float, b: float, lbeta: float) -> float:
    return (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - lbeta


def _initial_beta_guess(q: float, a: float, b: float) -> float:
    # Starting point from the classical normal / power-tail approximations.
    if a >= 1.0 and b >= 1.0:
        pp = q if q < 0.5 else 1.0 - q
        t = math.sqrt(-2.0 * math.log(pp))
        z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t
        if q < 0.5:
            z = -z
        al = (z * z - 3.0) / 6.0
        h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0))
        w = z * math.sqrt(al + h) / h - (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (
            al + 5.0 / 6.0 - 2.0 / (3.0 * h)
        )
        if 2.0 * w > 700:
            return 0.0
        return a / (a + b * math.exp(2.0 * w))
    lna = math.log(a / (a + b))
    lnb = math.log(b / (a + b))
    t = math.exp(a * lna) / a
    u = math.exp(b * lnb) / b
    w = t + u
    if q < t / w:
        return (a * w * q) ** (1.0 / a)
    return 1.0 - (b * w * (1.0 - q)) ** (1.0 / b)


def beta_quantile(q: float, a: float, b: float) -> float:
    """Quantile function of the Beta(a, b) distribution.

    Newton iteration on ``I_x(a, b) - q`` inside a shrinking bracket, falling
    back to bisection whenever a Newton step leaves the bracket. Returns once
    ``|I_x(a, b) - q| <= 1e-12`` and the last step is at rounding level, or
    when the bracket has collapsed to adjacent doubles. Anything else after
    200 iterations raises :class:`ConvergenceError`.
    """
    q = float(q)
    a = float(a)
    b = float(b)
    _check_shape(a, b)
    if math.isnan(q) or q < 0.0 or q > 1.0:
        raise DomainError(f"q must lie in [0, 1], got {q!r}")
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0

    lbeta = log_beta(a, b)
    lo, hi = 0.0, 1.0
    x = _initial_beta_guess(q, a, b)
    if not 0.0 < x < 1.0:
        x = 0.5
    best_x, best_f = x, math.inf
    for _ in range(QUANTILE_MAXIT):
        f = reg_inc_beta(x, a, b) - q
        if abs(f) < best_f:
            best_x, best_f = x, abs(f)
        if f == 0.0:
            return x
        if f < 0.0:
            lo = x
        else:
            hi = x
        dens = math.exp(_beta_log_density(x, a, b, lbeta))
        step = f / dens if dens > 0.0 and math.isfinite(dens) else math.inf
        if abs(f) <= QUANTILE_TOL and abs(step) <= 4.0 * math.ulp(x):
            return best_x
        x_new = x - step
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if np.nextafter(lo, 1.0) >= hi or x_new == x:
            # Bracket exhausted at double precision.
            return best_x
        x = x_new
    if best_f <= QUANTILE_TOL:
        return best_x
    raise ConvergenceError(
        f"beta_quantile did not converge (q={q}, a={a}, b={b}, residual={best_f:.3e})"
    )


def _check_binom_args(n: int, p: float) -> tuple[int, float]:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    return int(n), check_probability(p, "p")


@lru_cache(maxsize=256)
def _binom_pmf_cached(n: int, p: float) -> np.ndarray:
    pmf = np.zeros(n + 1)
    if p == 0.0:
        pmf[0] = 1.0
    elif p == 1.0:
        pmf[n] = 1.0
    else:
        # log-weights relative to the mode, built from successive PMF ratios
        i = np.arange(n, dtype=float)
        log_ratio = np.log(n - i) - np.log(i + 1.0) + (math.log(p) - math.log1p(-p))
        mode = min(n, int(math.floor((n + 1) * p)))
        logw = np.empty(n + 1)
        logw[mode] = 0.0
        if mode < n:
            logw[mode + 1 :] = np.cumsum(log_ratio[mode:])
        if mode > 0:
            logw[:mode] = -np.cumsum(log_ratio[:mode][::-1])[::-1]
        w = np.exp(logw)
        pmf = w / math.fsum(w)
    pmf.setflags(write=False)
    return pmf


def binom_pmf_all(n: int, p: float) -> np.ndarray:
    """All Bin(n, p) probabilities ``Pr[X = 0..n]`` as a read-only array."""
    n, p = _check_binom_args(n, p)
    return _binom_pmf_cached(n, p)


def binom_pmf(k: int, n: int, p: float) -> float:
    n, p = _check_binom_args(n, p)
    if k < 0 or k > n:
        return 0.0
    return float(_binom_pmf_cached(n, p)[int(k)])


def binom_cdf(k: int, n: int, p: float) -> float:
    """``Pr[X <= k]`` for ``X ~ Bin(n, p)``; ``k`` must be in ``0..n``."""
    n, p = _check_binom_args(n, p)
    if int(k) != k or k < 0 or k > n:
        raise DomainError(f"k must be an integer in [0, {n}], got {k!r}")
    k = int(k)
    if k == n:
        return 1.0
    pmf = _binom_pmf_cached(n, p)
    return min(1.0, math.fsum(pmf[: k + 1]))


def binom_sf(k: int, n: int, p: float) -> float:
    """``Pr[X > k]`` summed directly over the upper tail."""
    n, p = _check_binom_args(n, p)
    if int(k) != k or k < -1 or k > n:
        raise DomainError(f"k must be an integer in [-1, {n}], got {k!r}")
    k = int(k)
    if k == -1:
        return 1.0
    pmf = _binom_pmf_cached(n, p)
    return min(1.0, math.fsum(pmf[k + 1 :]))


def binom_range_prob(lo: int, hi: int, n: int, p: float) -> float:
    """``Pr[lo <= X <= hi]`` (0 when the range is empty)."""
    n, p = _check_binom_args(n, p)
    lo = max(int(lo), 0)
    hi = min(int(hi), n)
    if lo > hi:
        return 0.0
    pmf = _binom_pmf_cached(n, p)
    return min(1.0, math.fsum(pmf[lo : hi + 1]))


@lru_cache(maxsize=1024)
def t_quantile(q: float, df: int) -> float:
    """Quantile of Student's t distribution with ``df`` degrees of freedom."""
    q = float(q)
    if math.isnan(q) or not 0.0 < q < 1.0:
        raise DomainError(f"q must lie in (0, 1), got {q!r}")
    if isinstance(df, bool) or int(df) != df or df < 1:
        raise DomainError(f"df must be a positive integer, got {df!r}")
    if q == 0.5:
        return 0.0
    if q < 0.5:
        return -t_quantile(1.0 - q, df)
    nu = float(df)
    tail = 2.0 * (1.0 - q)
    # t^2 / (nu + t^2) ~ Beta(1/2, nu/2); pick the side that keeps precision.
    y = beta_quantile(1.0 - tail, 0.5, nu / 2.0)
    if y <= 0.5:
        return math.sqrt(nu * y / (1.0 - y))
    x = beta_quantile(tail, nu / 2.0, 0.5)
    return math.sqrt(nu * (1.0 - x) / x)


SIMULATION_DOMAIN = 0
TRUTH_DOMAIN = 1


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    seed = int(seed)
    if seed < 0 or seed > UINT64_MAX:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return seed


def make_stream(seed: int, stream: int = 0, domain: int = SIMULATION_DOMAIN) -> np.random.Generator:
    """Independent random stream number ``stream`` derived from ``seed``.

    Streams are Philox4x64-10 generators keyed through numpy's
    ``SeedSequence(seed, spawn_key=(domain, stream))``, so the same triple
    yields the same numbers on every platform and distinct streams never
    share state. ``domain`` separates observation replicates from synthetic
    truth fields drawn with the same seed.
    """
    seed = check_seed(seed)
    if isinstance(stream, bool) or int(stream) != stream or stream < 0:
        raise DomainError(f"stream index must be a non-negative integer, got {stream!r}")
    ss = np.random.SeedSequence(seed, spawn_key=(int(domain), int(stream)))
    return np.random.Generator(np.random.Philox(ss))
