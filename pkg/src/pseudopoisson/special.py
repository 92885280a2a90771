"""Scalar special functions used by the moment formulas and estimators."""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import kernels
from .errors import DomainError, SeriesError

EULER_GAMMA = 0.57721566490153286061
_INV_E = math.exp(-1.0)
_INV_E_LO = -1.2428753672788363e-17  # 1/e - _INV_E
# W0 about the branch point in p = sqrt(2 (e x + 1))
_BRANCH_COEFFS = (-1.0, 1.0, -1.0 / 3.0, 11.0 / 72.0, -43.0 / 540.0, 769.0 / 17280.0,
                  -221.0 / 8505.0, 680863.0 / 43545600.0, -1963.0 / 204120.0,
                  226287557.0 / 37623398400.0)


@dataclass(frozen=True)
class SeriesOptions:
    """Truncation controls for the power series.

    Parameters
    ----------
    rel_tol : float
        Stop once three consecutive terms fall below ``rel_tol`` times the
        partial sum.
    max_terms : int
        Give up (raising :class:`SeriesError`) after this many terms.
    """

    rel_tol: float = 1e-12
    max_terms: int = 100_000

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


DEFAULT_SERIES = SeriesOptions()


# ---------------------------------------------------------------------------
# Lambert W, principal branch


def lambert_w0(x: float) -> float:
    """Principal branch W0 of the Lambert W function for real ``x >= -1/e``.

    Halley iteration from a branch-point expansion near ``-1/e``, a log
    asymptotic for ``x > e`` and ``log1p(x)`` in between.
    """
    x = float(x)
    if math.isnan(x):
        raise DomainError("lambert_w0 of nan")
    branch = -_INV_E
    if x < branch:
        # allow a rounding-sized overshoot of the branch point
        if x > branch - 4e-16:
            return -1.0
        raise DomainError(f"lambert_w0 requires x >= -1/e, got {x}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf

    if x < -0.25:
        # x + 1/e without cancellation: the sum is exact for x this close to -1/e
        d = (x + _INV_E) + _INV_E_LO
        p = math.sqrt(max(2.0 * math.e * d, 0.0))
        if p == 0.0:
            return -1.0
        if p < 0.05:
            # Halley loses digits as w' blows up; the branch series is exact to rounding here
            acc = 0.0
            for c in reversed(_BRANCH_COEFFS):
                acc = acc * p + c
            return acc
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    elif x <= math.e:
        w = math.log1p(x)
        w = w * (1.0 - math.log1p(w) / (2.0 + w))
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1

    for _ in range(100):
        if w <= -1.0:
            w = -1.0 + 1e-12
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        step = f / denom
        w -= step
        if abs(step) <= 1e-15 * (1.0 + abs(w)):
            break
    return max(w, -1.0)


# ---------------------------------------------------------------------------
# ratio-power series


def _series(g, eta, a, shift, opts: SeriesOptions) -> float:
    """exp(-a) * sum_i (g / (g + shift + i))**eta * a**i / i!."""
    if not (g > 0 and eta > 0 and a >= 0) or not all(map(math.isfinite, (g, eta, a))):
        raise DomainError(f"series arguments must be finite with g, eta > 0, a >= 0 (g={g}, eta={eta}, a={a})")
    if a == 0.0:
        return math.exp(-eta * math.log1p(shift / g))
    value, used = kernels.ratio_series(float(g), float(eta), float(a), float(shift), True,
                                       opts.rel_tol, opts.max_terms)
    if used < 0:
        raise SeriesError(f"ratio series did not converge in {opts.max_terms} terms (g={g}, eta={eta}, a={a})")
    return value


def poisson_mean_ratio(g: float, eta: float, a: float, opts: SeriesOptions = DEFAULT_SERIES) -> float:
    """E[(g / (g + X))**eta] for X ~ Poisson(a); equals e^-a times the ratio-power series."""
    return _series(g, eta, a, 0.0, opts)


def ratio_power_series(g: float, eta: float, a: float, opts: SeriesOptions = DEFAULT_SERIES) -> float:
    """sum_{i>=0} (g / (g + i))**eta * a**i / i!.

    Equal to the generalized hypergeometric ``eta F eta`` value with upper
    parameters ``g`` and lower parameters ``g + 1`` when ``eta`` is an
    integer, and convergent for every real ``eta > 0``.

    Raises
    ------
    SeriesError
        If the sum has not converged after ``opts.max_terms`` terms.
    """
    return _series(g, eta, a, 0.0, opts) * math.exp(a)


def ratio_power_series_shifted(g: float, eta: float, a: float,
                               opts: SeriesOptions = DEFAULT_SERIES) -> float:
    """sum_{i>=0} (g / (g + 1 + i))**eta * a**i / i!.

    Identical to ``(g / (g + 1))**eta * ratio_power_series(g + 1, eta, a)``.
    """
    return _series(g, eta, a, 1.0, opts) * math.exp(a)


# ---------------------------------------------------------------------------
# exponential integral


def exp_integral_ei(x: float) -> float:
    """Ei(x) for ``x > 0``.

    Uses the convergent series ``gamma* + ln x + sum x^k / (k k!)`` for
    ``x <= 40`` and the asymptotic expansion above that.
    """
    x = float(x)
    if not x > 0 or math.isnan(x):
        raise DomainError(f"exp_integral_ei requires x > 0, got {x}")
    if x > 40.0:
        # e^x / x * sum k! / x^k, truncated at the smallest term
        total, term = 1.0, 1.0
        for k in range(1, 200):
            nxt = term * k / x
            if nxt > term:
                break
            term = nxt
            total += term
            if term < 1e-17 * total:
                break
        return math.exp(x) / x * total
    total = 0.0
    term = 1.0
    for k in range(1, 500):
        term *= x / k
        inc = term / k
        total += inc
        if inc < 1e-17 * total:
            break
    return EULER_GAMMA + math.log(x) + total


# ---------------------------------------------------------------------------
# chi-square tail and quantile


def _gamma_p_series(s, x):
    term = 1.0 / s
    total = term
    for n in range(1, 10_000):
        term *= x / (s + n)
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + s * math.log(x) - math.lgamma(s))


def _gamma_q_contfrac(s, x):
    # modified Lentz for the continued fraction of Q(s, x)
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + s * math.log(x) - math.lgamma(s)) * h


def regularized_gamma_q(s: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(s, x)."""
    if s <= 0:
        raise DomainError("shape must be positive")
    if x <= 0:
        return 1.0
    if x < s + 1.0:
        return 1.0 - _gamma_p_series(s, x)
    return _gamma_q_contfrac(s, x)


def chi_square_sf(x: float, df: int) -> float:
    """P(chi2_df > x)."""
    if df < 1:
        raise DomainError("df must be >= 1")
    return regularized_gamma_q(df / 2.0, x / 2.0)


def chi_square_critical(df: int, level: float) -> float:
    """Upper ``level`` critical value of chi2_df, by bisection on :func:`chi_square_sf`."""
    if int(df) != df or df < 1:
        raise DomainError(f"df must be a positive integer, got {df}")
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    lo, hi = 0.0, max(2.0 * df, 10.0)
    while chi_square_sf(hi, df) > level:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi_square_sf(mid, df) > level:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * hi:
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Bernoulli generating function

# B_{2k} / (2k)! for k = 1..10
_BERNOULLI_COEFFS = (
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
    43867.0 / 5109094217170944000.0,
    -174611.0 / 802857662698291200000.0,
)


def bernoulli_ratio(z: float, series_threshold: float = 0.5) -> float:
    """z / (e^z - 1), equal to 1 at z = 0.

    Below ``series_threshold`` in magnitude the Bernoulli-number expansion
    is summed (through B_20); otherwise ``z / expm1(z)`` is used.
    """
    z = float(z)
    if z == 0.0:
        return 1.0
    if abs(z) < series_threshold:
        z2 = z * z
        acc = 0.0
        for c in reversed(_BERNOULLI_COEFFS):
            acc = acc * z2 + c
        return 1.0 - 0.5 * z + acc * z2
    if z > 700.0:
        return z * math.exp(-z)
    return z / math.expm1(z)
