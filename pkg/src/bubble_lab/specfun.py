"""Special functions used by the kernels and eigenmodes.

Gauss hypergeometric 2F1 on real arguments z < 1, the modified Bessel
function I0, half-integer Bessel functions J_{n+1/2} with their positive
zeros, and associated Legendre functions without the Condon-Shortley phase.
Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg

SERIES_RTOL = 1e-17
MAX_TERMS = 10_000
# above this z the plain Maclaurin series is replaced by a (1 - z) expansion
CONNECTION_Z = 0.9
# |c - a - b - m| below this counts as the integer (logarithmic) case
INTEGER_TOL = 1e-12
# half-width of the interpolation stencil used for near-integer c - a - b
NEAR_INTEGER_H = 2e-3


class SpecfunDomainError(ValueError):
    """Argument outside the supported domain of a special function."""


@dataclass(frozen=True)
class Hyp2F1Args:
    a: float
    b: float
    c: float
    z: float

    def __post_init__(self):
        if _is_nonpositive_int(self.c):
            raise SpecfunDomainError(f"c={self.c} is a non-positive integer")
        if not self.z < 1.0:
            raise SpecfunDomainError(f"z={self.z} must be < 1")


@dataclass(frozen=True)
class BesselZeroIndex:
    order_n: int
    rank_k: int

    def __post_init__(self):
        if self.order_n < 0 or int(self.order_n) != self.order_n:
            raise SpecfunDomainError("order_n must be a non-negative integer")
        if self.rank_k < 1 or int(self.rank_k) != self.rank_k:
            raise SpecfunDomainError("rank_k must be a positive integer")


def _is_nonpositive_int(x: float) -> bool:
    return x <= 0 and float(x).is_integer()


def _rgamma(x: float) -> float:
    """1/Gamma(x), zero at the poles."""
    if _is_nonpositive_int(x):
        return 0.0
    return 1.0 / math.gamma(x)


def _digamma(x: float) -> float:
    # recurrence up to x >= 6, then the asymptotic series
    if _is_nonpositive_int(x):
        raise SpecfunDomainError(f"digamma pole at {x}")
    acc = 0.0
    if x < 0:
        # reflection: psi(1 - x) - psi(x) = pi cot(pi x)
        return _digamma(1.0 - x) - math.pi / math.tan(math.pi * x)
    while x < 6.0:
        acc -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv2 * (1 / 12 - inv2 * (1 / 120 - inv2 * (1 / 252 - inv2 * (1 / 240 - inv2 / 132))))
    return acc + math.log(x) - 0.5 * inv - series


def _series(a: float, b: float, c: float, z: float) -> float:
    """Maclaurin series of 2F1, truncated at a relative term floor."""
    total = 1.0
    term = 1.0
    for k in range(MAX_TERMS):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1)) * z
        total += term
        if term == 0.0:
            return total
        if abs(term) < SERIES_RTOL * abs(total):
            return total
    raise ArithmeticError(f"2F1 series did not converge in {MAX_TERMS} terms (z={z})")


def _connection(a: float, b: float, c: float, z: float) -> float:
    # c - a - b not an integer: standard (1 - z) connection formula
    s = c - a - b
    w = 1.0 - z
    g_c = math.gamma(c)
    first = g_c * math.gamma(s) * _rgamma(c - a) * _rgamma(c - b)
    second = g_c * math.gamma(-s) * _rgamma(a) * _rgamma(b)
    out = 0.0
    if first != 0.0:
        out += first * _series(a, b, 1.0 - s, w)
    if second != 0.0:
        out += second * w**s * _series(c - a, c - b, 1.0 + s, w)
    return out


def _log_case(a: float, b: float, m: int, z: float) -> float:
    """2F1(a, b; a + b + m; z) for integer m >= 0 near z = 1."""
    w = 1.0 - z
    c = a + b + m
    ln_w = math.log(w)
    finite = 0.0
    if m > 0:
        pref = math.gamma(m) * math.gamma(c) * _rgamma(a + m) * _rgamma(b + m)
        term = 1.0
        for n in range(m):
            finite += term
            term *= (a + n) * (b + n) / ((n + 1) * (1 - m + n)) * w if n + 1 < m else 0.0
        finite *= pref

    pref = math.gamma(c) * _rgamma(a) * _rgamma(b)
    if pref == 0.0:
        return finite
    sign = -1.0 if m % 2 else 1.0  # (z - 1)^m = (-1)^m w^m
    psi_1 = _digamma(1.0)
    psi_1m = _digamma(1.0 + m)
    psi_am = _digamma(a + m)
    psi_bm = _digamma(b + m)
    coef = 1.0 / math.factorial(m)
    total = 0.0
    for n in range(MAX_TERMS):
        bracket = ln_w - psi_1 - psi_1m + psi_am + psi_bm
        term = coef * bracket
        total += term
        if n > 2 and abs(term) < SERIES_RTOL * abs(total):
            break
        coef *= (a + m + n) * (b + m + n) / ((n + 1) * (n + m + 1)) * w
        psi_1 += 1.0 / (n + 1)
        psi_1m += 1.0 / (n + m + 1)
        psi_am += 1.0 / (a + m + n)
        psi_bm += 1.0 / (b + m + n)
    else:
        raise ArithmeticError("logarithmic 2F1 expansion did not converge")
    return finite - sign * w**m * pref * total


def _near_one(a: float, b: float, c: float, z: float) -> float:
    s = c - a - b
    m = round(s)
    if m < 0:
        # Euler transformation flips the sign of c - a - b
        return (1.0 - z) ** s * _near_one(c - a, c - b, c, z)
    off = s - m
    if abs(off) <= INTEGER_TOL:
        return _log_case(a, b, m, z)
    if abs(off) >= NEAR_INTEGER_H:
        return _connection(a, b, c, z)
    # analytic in c: interpolate through well-conditioned nodes and the log case
    h = NEAR_INTEGER_H
    nodes = [-2 * h, -h, 0.0, h, 2 * h]
    values = []
    for d in nodes:
        cc = a + b + m + d
        if d == 0.0:
            values.append(_log_case(a, b, m, z))
        elif m + d < 0:
            values.append((1.0 - z) ** (m + d) * _connection(cc - a, cc - b, cc, z))
        else:
            values.append(_connection(a, b, cc, z))
    out = 0.0
    for i, xi in enumerate(nodes):
        weight = 1.0
        for j, xj in enumerate(nodes):
            if j != i:
                weight *= (off - xj) / (xi - xj)
        out += weight * values[i]
    return out


def hyp2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric function 2F1(a, b; c; z) for real z < 1.

    Direct series for |z| <= 0.9, Pfaff transformation for z < 0 and a
    (1 - z) expansion above 0.9 (logarithmic form when c - a - b is an
    integer).
    """
    args = Hyp2F1Args(float(a), float(b), float(c), float(z))
    a, b, c, z = args.a, args.b, args.c, args.z
    if z == 0.0 or a == 0.0 or b == 0.0:
        return 1.0
    if _is_nonpositive_int(a) or _is_nonpositive_int(b):
        return _series(a, b, c, z)  # terminating polynomial
    if z < 0.0:
        # Pfaff: maps z < 0 into [0, 1)
        zz = z / (z - 1.0)
        return (1.0 - z) ** (-a) * hyp2f1(a, c - b, c, zz)
    if z <= CONNECTION_Z:
        return _series(a, b, c, z)
    return _near_one(a, b, c, z)


def bessel_i0(x: float) -> float:
    """Modified Bessel function I0(x)."""
    ax = abs(float(x))
    if not math.isfinite(ax):
        return math.inf
    if ax <= 30.0:
        q = 0.25 * ax * ax
        term = 1.0
        total = 1.0
        m = 0
        while True:
            m += 1
            term *= q / (m * m)
            total += term
            if term < SERIES_RTOL * total:
                return total
    # Hankel asymptotic expansion
    total = 1.0
    term = 1.0
    inv8x = 1.0 / (8.0 * ax)
    for k in range(1, 30):
        nxt = term * (2 * k - 1) ** 2 * inv8x / k
        if nxt < SERIES_RTOL * total:
            break
        term = nxt
        total += term
    return math.exp(ax) / math.sqrt(2.0 * math.pi * ax) * total


def spherical_jn(n: int, x):
    """Spherical Bessel function j_n(x) = sqrt(pi / 2x) J_{n+1/2}(x), vectorized.

    Uses the power series below x = n + 1 (where upward recurrence is
    unstable) and the elementary sin/cos recurrence above.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.empty_like(ax)
    small = ax < n + 1.0
    if np.any(small):
        xs = ax[small]
        lead = xs**n / _double_factorial(2 * n + 1)
        q = -0.5 * xs * xs
        term = np.ones_like(xs)
        total = np.ones_like(xs)
        for k in range(1, 200):
            term = term * q / (k * (2 * n + 2 * k + 1))
            total = total + term
            if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
                break
        out[small] = lead * total
    big = ~small
    if np.any(big):
        xb = ax[big]
        j_prev = np.sin(xb) / xb
        if n == 0:
            out[big] = j_prev
        else:
            j_cur = np.sin(xb) / xb**2 - np.cos(xb) / xb
            for ell in range(1, n):
                j_prev, j_cur = j_cur, (2 * ell + 1) / xb * j_cur - j_prev
            out[big] = j_cur
    # parity j_n(-x) = (-1)^n j_n(x)
    if n % 2:
        out = np.where(x < 0, -out, out)
    return out if out.ndim else float(out)


def half_integer_bessel_j(n: int, x):
    """J_{n+1/2}(x) for x >= 0 through the elementary closed forms."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(2.0 * x / np.pi) * spherical_jn(n, x)


def _spherical_jn_prime(n: int, x: float) -> float:
    if n == 0:
        return -float(spherical_jn(1, x))
    return float(spherical_jn(n - 1, x)) - (n + 1) / x * float(spherical_jn(n, x))


def _double_factorial(k: int) -> float:
    out = 1.0
    while k > 1:
        out *= k
        k -= 2
    return out


def spherical_bessel_zero(order_n: int, rank_k: int) -> float:
    """k-th positive zero of J_{n+1/2}.

    Brackets by scanning with step pi/2 (consecutive zeros are at least pi
    apart) from x = n + 1/2, below which J_{n+1/2} has no zeros, then
    refines with Newton safeguarded by bisection.
    """
    idx = BesselZeroIndex(int(order_n), int(rank_k))
    n, k = idx.order_n, idx.rank_k
    if n == 0:
        return k * math.pi

    def f(x):
        return float(spherical_jn(n, x))

    step = 0.5 * math.pi
    lo = n + 0.5
    f_lo = f(lo)
    found = 0
    for _ in range(4 * (k + n) + 100):
        hi = lo + step
        f_hi = f(hi)
        if f_lo == 0.0:
            found += 1
            if found == k:
                return lo
        elif f_lo * f_hi < 0.0:
            found += 1
            if found == k:
                return _refine_root(n, lo, hi, f_lo)
        lo, f_lo = hi, f_hi
    raise RuntimeError(f"could not bracket zero k={k} of J_{n}+1/2")


def _refine_root(n: int, lo: float, hi: float, f_lo: float) -> float:
    x = 0.5 * (lo + hi)
    for _ in range(200):
        fx = float(spherical_jn(n, x))
        if fx == 0.0:
            return x
        if (fx < 0) == (f_lo < 0):
            lo, f_lo = x, fx
        else:
            hi = x
        d = _spherical_jn_prime(n, x)
        x_new = x - fx / d if d != 0.0 else 0.5 * (lo + hi)
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-15 * max(1.0, abs(x)):
            return x_new
        x = x_new
    return x


def assoc_legendre(n: int, j: int, xi):
    """Associated Legendre function P_n^(j)(xi) without the Condon-Shortley phase.

    Computed as (1 - xi^2)^(j/2) d^j/dxi^j P_n(xi), so P_n^(j) >= 0 as
    xi -> 1^- for every j.
    """
    if n < 0 or j < 0 or j > n:
        raise SpecfunDomainError(f"need 0 <= j <= n, got n={n}, j={j}")
    xi_arr = np.asarray(xi, dtype=float)
    if np.any(np.abs(xi_arr) > 1.0):
        raise SpecfunDomainError("|xi| must be <= 1")
    coef = np.zeros(n + 1)
    coef[n] = 1.0
    deriv = npleg.legder(coef, j) if j else coef
    val = npleg.legval(xi_arr, deriv)
    if j:
        val = val * (1.0 - xi_arr * xi_arr) ** (0.5 * j)
    return val if np.ndim(val) else float(val)
