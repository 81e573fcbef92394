"""Golden and oracle suites behind ``bubble-lab verify``."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import integrate, optimize

from .field_solver import ExactSolutionSpec, ModelParams, eval_exact
from .greens_kernel import i0_layer_integral, reduced_sinh_integral, weighted_reduction
from .specfun import assoc_legendre, bessel_i0, hyp2f1, spherical_bessel_zero, spherical_jn

KERNEL_TIMES = (0.5, 1.0, 1.5, 2.25, 3.0)
KERNEL_FRACTIONS = (0.0, 0.2, 0.4, 0.6, 0.8)
KERNEL_MASSES = (0.25, 0.5, 1.0, 1.5, 3.0)
LAYER_MUS = (0.5, 1.0, 2.0, 4.0)
LAYER_TAUS = (0.1, 1.0, 2.0)


def _row(name: str, value: float, expected: float, tol: float, **extra) -> dict:
    err = abs(value - expected)
    return {"name": name, "value": value, "expected": expected, "error": err, "tol": tol,
            "pass": bool(err <= tol), **extra}


def sinh_ratio(M: float, tau: float) -> float:
    return tau if M == 0 else math.sinh(M * tau) / M


def kernel_grid(threads: int = 1) -> list[dict]:
    """Cone integral of the kernel against sinh(M(t-b))/M on the 125-point grid."""
    pts = [(t, f * t, M) for t in KERNEL_TIMES for f in KERNEL_FRACTIONS for M in KERNEL_MASSES]

    def one(pt):
        t, b, M = pt
        return _row(f"cone t={t} b={b:.6g} M={M}", reduced_sinh_integral(t, b, M),
                    sinh_ratio(M, t - b), 1e-7, t=t, b=b, M=M)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        return list(ex.map(one, pts))


def kernel_suite(threads: int = 1) -> dict:
    grid = kernel_grid(threads)
    limit = _row("M->0 limit t=1 b=0 M=1e-6", reduced_sinh_integral(1.0, 0.0, 1e-6), 1.0, 1e-5)
    layer = [
        _row(f"I0 layer mu={mu} tau={tau}", i0_layer_integral(mu, tau), math.sinh(mu * tau) / mu,
             1e-9, mu=mu, tau=tau)
        for mu in LAYER_MUS for tau in LAYER_TAUS
    ]
    cont = [
        _row(f"weighted reduction disc={d:+.0e}", weighted_reduction(1.0, -1.0 + d, 2.5), 2.5, 1e-6)
        for d in (1e-8, -1e-8)
    ]
    rows = grid + [limit] + layer + cont
    return {
        "suite": "kernel",
        "max_error_cone_grid": max(r["error"] for r in grid),
        "max_error_layer": max(r["error"] for r in layer),
        "rows": rows,
        "pass": all(r["pass"] for r in rows),
    }


def _euler_2f1(a: float, b: float, c: float, z: float) -> float:
    # Euler integral, valid for c > b > 0
    val, _ = integrate.quad(
        lambda s: s ** (b - 1) * (1 - s) ** (c - b - 1) * (1 - z * s) ** (-a), 0, 1,
        epsabs=1e-14, epsrel=1e-13, limit=200,
    )
    return val * math.gamma(c) / (math.gamma(b) * math.gamma(c - b))


def _i0_series(x: float, terms: int = 40) -> float:
    return sum((x / 2) ** (2 * m) / math.factorial(m) ** 2 for m in range(terms))


def _legendre_recurrence(n: int, j: int, xi: float) -> float:
    # P_j^j = (2j-1)!! (1-xi^2)^{j/2}, then (m-j+1) P_{m+1}^j = (2m+1) xi P_m^j - (m+j) P_{m-1}^j
    pjj = math.prod(range(1, 2 * j, 2)) * (1 - xi * xi) ** (j / 2)
    if n == j:
        return pjj
    prev, cur = pjj, (2 * j + 1) * xi * pjj
    for m in range(j + 1, n):
        prev, cur = cur, ((2 * m + 1) * xi * cur - (m + j) * prev) / (m - j + 1)
    return cur


def specfun_suite() -> dict:
    rows = [
        _row("2F1(.5,.5;1;.25) vs Euler integral", hyp2f1(0.5, 0.5, 1.0, 0.25),
             _euler_2f1(0.5, 0.5, 1.0, 0.25), 1e-10),
        _row("2F1(.3,.7;2.1;.6) vs Euler integral", hyp2f1(0.3, 0.7, 2.1, 0.6),
             _euler_2f1(0.3, 0.7, 2.1, 0.6), 1e-10),
        _row("2F1 at z=0", hyp2f1(0.5, 0.5, 1.0, 0.0), 1.0, 0.0),
        _row("I0(0)", bessel_i0(0.0), 1.0, 0.0),
        _row("I0(1) vs 40-term series", bessel_i0(1.0), _i0_series(1.0), 1e-12),
        _row("I0(5) vs 40-term series", bessel_i0(5.0), _i0_series(5.0), 1e-12 * _i0_series(5.0)),
        _row("zero(0,3) = 3 pi", spherical_bessel_zero(0, 3), 3 * math.pi, 1e-10),
        _row("zero(1,1) vs bisection on tan x - x", spherical_bessel_zero(1, 1),
             optimize.bisect(lambda x: math.tan(x) - x, math.pi + 0.1, 1.5 * math.pi - 1e-9,
                             xtol=1e-15), 1e-10),
        _row("j_1 at its first zero", float(spherical_jn(1, spherical_bessel_zero(1, 1))), 0.0,
             1e-9),
        _row("P_3^2(0.5) vs recurrence", assoc_legendre(3, 2, 0.5), _legendre_recurrence(3, 2, 0.5),
             1e-12),
        _row("P_5^1(-0.3) vs recurrence", assoc_legendre(5, 1, -0.3),
             _legendre_recurrence(5, 1, -0.3), 1e-12),
    ]
    return {"suite": "specfun", "rows": rows, "pass": all(r["pass"] for r in rows)}


def kink_residual(convention: str, mu: float = 1.0, lam: float = 1.0, h: float = 1e-3,
                  L: float = 8.0) -> float:
    """max |phi'' + mu^2 phi - lam phi^3| of the static kink, fourth-order differences."""
    params = ModelParams("minkowski", 1, mu, lam)
    spec = ExactSolutionSpec("static_tanh", convention=convention)
    x = np.arange(-L, L + h / 2, h)
    f = np.asarray(eval_exact(spec, params, x))
    d2 = (-f[4:] + 16 * f[3:-1] - 30 * f[2:-2] + 16 * f[1:-3] - f[:-4]) / (12 * h * h)
    fc = f[2:-2]
    return float(np.max(np.abs(d2 + mu**2 * fc - lam * fc**3)))


def exact_suite() -> dict:
    rows = []
    for mu, lam in ((1.0, 1.0), (0.7, 2.0), (math.sqrt(2.0), 1.0)):
        for conv in ("resolved", "printed"):
            res = kink_residual(conv, mu, lam)
            rows.append({"name": f"static kink mu={mu:.6g} lambda={lam} convention={conv}",
                         "mu": mu, "lambda": lam, "convention": conv, "residual": res,
                         "tol": 1e-8, "annihilates": bool(res <= 1e-8)})
    vac = []
    for mu, lam in ((1.0, 1.0), (0.7, 2.0)):
        v = mu / math.sqrt(lam)
        vac.append({"name": f"vacuum mu={mu} lambda={lam}", "residual": abs(mu**2 * v - lam * v**3),
                    "tol": 1e-12, "annihilates": bool(abs(mu**2 * v - lam * v**3) <= 1e-12)})
    resolved_ok = all(r["annihilates"] for r in rows if r["convention"] == "resolved")
    printed_ok = [r["annihilates"] for r in rows if r["convention"] == "printed"]
    return {
        "suite": "exact",
        "rows": rows + vac,
        "annihilating_convention": "resolved" if resolved_ok else None,
        "printed_convention_annihilates_only_at_mu_sqrt2": printed_ok == [False, False, True],
        "pass": bool(resolved_ok and all(r["annihilates"] for r in vac)),
    }


SUITES = {"kernel": kernel_suite, "specfun": specfun_suite, "exact": exact_suite}
