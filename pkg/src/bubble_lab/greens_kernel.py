"""Resolving operator of the linear Klein-Gordon problem and its reduced identities.

The de Sitter kernel is

    K(t, b, z; M) = (4 e^{-b-t})^{-M} ((e^{-t} + e^{-b})^2 - z^2)^{M - 1/2}
                    * 2F1(1/2 - M, 1/2 - M; 1; zeta)

with zeta = ((e^{-b} - e^{-t})^2 - z^2) / ((e^{-b} + e^{-t})^2 - z^2),
supported on |z| <= e^{-b} - e^{-t}. Integrating it over the cone gives
sinh(M (t - b)) / M, which is what makes the moment identities work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import RegularGridInterpolator

from .specfun import bessel_i0, hyp2f1

QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-12
CONE_TOL = 1e-14


class KernelDomainError(ValueError):
    """Point outside the de Sitter light cone."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, error_estimate: float):
        super().__init__(f"{message} (estimated error {error_estimate:.3e})")
        self.error_estimate = error_estimate


@dataclass(frozen=True)
class KernelPoint:
    t: float
    b: float
    z: float
    M: float

    def __post_init__(self):
        if self.M < 0:
            raise KernelDomainError(f"curved mass must be >= 0, got {self.M}")
        if not 0.0 <= self.b <= self.t:
            raise KernelDomainError(f"need 0 <= b <= t, got b={self.b}, t={self.t}")
        if abs(self.z) > cone_halfwidth(self.t, self.b) + CONE_TOL:
            raise KernelDomainError(
                f"|z|={abs(self.z)} outside cone half-width {cone_halfwidth(self.t, self.b)}"
            )

    @property
    def zeta(self) -> float:
        em_b, em_t = math.exp(-self.b), math.exp(-self.t)
        z2 = self.z * self.z
        num = (em_b - em_t) ** 2 - z2
        den = (em_b + em_t) ** 2 - z2
        return max(num, 0.0) / den


@dataclass(frozen=True)
class WeightedReductionParams:
    mu: float
    nu: float
    tau: float

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")


def cone_halfwidth(t: float, b: float) -> float:
    """Spatial half-width e^{-b} - e^{-t} of the de Sitter cone."""
    return math.exp(-b) - math.exp(-t)


def desitter_kernel(t: float, b: float, z: float, M: float) -> float:
    pt = KernelPoint(float(t), float(b), float(z), float(M))
    return _kernel(pt.t, pt.b, pt.z, pt.M)


def _kernel(t: float, b: float, z: float, M: float) -> float:
    em_b, em_t = math.exp(-b), math.exp(-t)
    z2 = z * z
    outer = (em_t + em_b) ** 2 - z2
    zeta = max((em_b - em_t) ** 2 - z2, 0.0) / outer
    pref = (4.0 * math.exp(-b - t)) ** (-M) * outer ** (M - 0.5)
    return pref * hyp2f1(0.5 - M, 0.5 - M, 1.0, zeta)


def _quad(func, lo, hi, what, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200):
    value, err = integrate.quad(func, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=limit)
    if not math.isfinite(value) or err > max(epsabs, epsrel * abs(value)) * 10:
        raise QuadratureError(f"{what} did not converge", err)
    return value


def reduced_sinh_integral(t: float, b: float, M: float) -> float:
    """Integral of the kernel over the cone; equals sinh(M(t - b))/M (t - b at M = 0)."""
    if M < 0:
        raise KernelDomainError("M must be >= 0")
    if not 0.0 <= b <= t:
        raise KernelDomainError(f"need 0 <= b <= t, got b={b}, t={t}")
    w = cone_halfwidth(t, b)
    if w == 0.0:
        return 0.0
    # integrand is even in z
    return 2.0 * _quad(lambda z: _kernel(t, b, z, M), 0.0, w, "kernel cone integral")


def spherical_mean_factor(n: int, r: float) -> float:
    """(d/dr)((1/r) d/dr)^{(n-3)/2} (r^{n-2} / c0) for odd n >= 3.

    This is the spherical-means operator applied to f = 1 (the sphere area
    cancels against omega_{n-1}); c0 = 1*3*...*(n-2).
    """
    if n < 3 or n % 2 == 0:
        raise ValueError("only odd n >= 3 supported")
    c0 = math.prod(range(1, n - 1, 2))
    # polynomial in r stored as {power: coef}
    poly = {n - 2: 1.0 / c0}
    for _ in range((n - 3) // 2):
        poly = {p - 2: c * p for p, c in poly.items() if p != 0}
    poly = {p - 1: c * p for p, c in poly.items() if p != 0}
    return sum(c * r**p for p, c in poly.items())


def reduced_sinh_integral_odd_n(t: float, b: float, M: float, n: int = 3) -> float:
    """Radial spherical-means form of the cone integral for odd n."""
    w = cone_halfwidth(t, b)
    if w == 0.0:
        return 0.0
    return 2.0 * _quad(
        lambda r: spherical_mean_factor(n, r) * _kernel(t, b, r, M), 0.0, w, "radial cone integral"
    )


def i0_layer_integral(mu: float, tau: float) -> float:
    """Integral of I0(mu sqrt(tau^2 - r^2)) over r in [0, tau]; equals sinh(mu tau)/mu."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau == 0:
        return 0.0
    return _quad(
        lambda r: bessel_i0(mu * math.sqrt(max(tau * tau - r * r, 0.0))), 0.0, tau, "I0 layer"
    )


def weighted_reduction(mu: float, nu: float, tau: float) -> float:
    """Duhamel weight for a psi-weighted moment with Laplace eigenvalue nu."""
    params = WeightedReductionParams(float(mu), float(nu), float(tau))
    disc = params.mu**2 + params.nu
    tau = params.tau
    if disc > 0:
        s = math.sqrt(disc)
        return math.sinh(s * tau) / s
    if disc < 0:
        s = math.sqrt(-disc)
        return math.sin(s * tau) / s
    return tau


@dataclass
class SampledSource:
    """Source f(y, b) sampled on a (time, space) tensor grid."""

    times: np.ndarray
    y: np.ndarray
    values: np.ndarray  # shape (len(times), len(y))

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.times.size, self.y.size):
            raise ValueError("values must have shape (len(times), len(y))")
        self._interp = RegularGridInterpolator(
            (self.times, self.y), self.values, method="linear", bounds_error=False, fill_value=0.0
        )

    def __call__(self, y, b):
        return float(self._interp((b, y)))


@dataclass
class GResult:
    x: np.ndarray
    values: np.ndarray
    t: float
    error_estimate: float


def apply_G_1d(
    source: Callable[[float, float], float] | SampledSource,
    t: float,
    M: float,
    x,
    n_time: int = 400,
    epsabs: float = 1e-12,
) -> GResult:
    """Apply the 1D de Sitter resolving operator G to a source at time t.

    Midpoint rule in the source time b, adaptive quadrature in y over the
    shrinking cone |x - y| <= e^{-b} - e^{-t}.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(source, SampledSource):
        if t > source.times[-1] + 1e-12 or t < source.times[0]:
            raise ValueError("t outside the sampled source range")
        db_src = np.min(np.diff(source.times)) if source.times.size > 1 else np.inf
        if t > 0 and db_src > t / 4:
            raise ValueError("source sampled too coarsely in time for G quadrature")
    out = np.zeros_like(x)
    err_total = 0.0
    if t <= 0.0:
        return GResult(x, out, t, 0.0)
    h = t / n_time
    bs = (np.arange(n_time) + 0.5) * h
    for i, xi in enumerate(x):
        acc = 0.0
        for b in bs:
            w = cone_halfwidth(t, b)
            val, err = integrate.quad(
                lambda y: source(y, b) * _kernel(t, b, xi - y, M),
                xi - w,
                xi + w,
                epsabs=epsabs,
                epsrel=1e-10,
                limit=100,
            )
            acc += val
            err_total += err * h
        out[i] = acc * h
    return GResult(x, out, t, err_total)
