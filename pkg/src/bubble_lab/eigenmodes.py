"""Dirichlet eigenpairs of the Laplacian on the ball of radius R_tilde in R^3.

Eigenfunctions are kept in the unnormalized form

    psi(r, theta, phi) = sqrt(pi R / (2 rho r)) J_{n+1/2}(rho r / R) P_n^j(cos theta) {cos, sin}(j phi)
                       = j_n(rho r / R) P_n^j(cos theta) {cos, sin}(j phi)

with eigenvalue nu = -(rho / R)^2, rho the k-th positive zero of J_{n+1/2}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .specfun import assoc_legendre, spherical_bessel_zero, spherical_jn

RESONANCE_TOL = 1e-9
POINTS_PER_OSCILLATION = 20


class Branch(str, Enum):
    COS = "cos"
    SIN = "sin"


@dataclass(frozen=True)
class Eigenmode:
    n: int
    j: int
    k: int
    branch: Branch = Branch.COS
    R_tilde: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "branch", Branch(self.branch))
        if self.n < 0 or self.k < 1 or not 0 <= self.j <= self.n:
            raise ValueError(f"invalid mode indices n={self.n}, j={self.j}, k={self.k}")
        if self.branch is Branch.SIN and self.j == 0:
            raise ValueError("sin branch requires j >= 1")
        if not self.R_tilde > 0:
            raise ValueError("R_tilde must be > 0")

    @property
    def rho(self) -> float:
        return spherical_bessel_zero(self.n, self.k)

    @property
    def nu(self) -> float:
        return dirichlet_eigenvalue(self.n, self.k, self.R_tilde)

    @property
    def is_radial(self) -> bool:
        return self.n == 0

    def to_dict(self) -> dict:
        return {"n": self.n, "j": self.j, "k": self.k, "branch": self.branch.value,
                "R_tilde": self.R_tilde}


def dirichlet_eigenvalue(n: int, k: int, R_tilde: float) -> float:
    if not R_tilde > 0:
        raise ValueError("R_tilde must be > 0")
    rho = spherical_bessel_zero(n, k)
    return -((rho / R_tilde) ** 2)


def radial_part(mode: Eigenmode, r, exterior: bool = False):
    """j_n(rho r / R); equals the Bessel prefactor form and is finite at r = 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be >= 0")
    if not exterior and np.any(r > mode.R_tilde * (1 + 1e-12)):
        raise ValueError("r > R_tilde is outside the ball")
    return spherical_jn(mode.n, mode.rho * r / mode.R_tilde)


def eigenfunction_eval(mode: Eigenmode, r, theta=0.0, phi=0.0, exterior: bool = False):
    rad = radial_part(mode, r, exterior)
    ang = np.vectorize(lambda c: assoc_legendre(mode.n, mode.j, c))(np.cos(theta))
    az = np.cos(mode.j * np.asarray(phi)) if mode.branch is Branch.COS else np.sin(mode.j * np.asarray(phi))
    out = rad * ang * az
    return out if np.ndim(out) else float(out)


def laplacian_residual(mode: Eigenmode, grid) -> float:
    """max|L psi_r - nu psi_r| / max|psi_r| for the radial ODE on interior nodes.

    L f = f'' + (2/r) f' - n(n+1)/r^2 f is the radial part of the Laplacian
    acting on j_n(rho r/R) P_n^j Y. It is discretized through the even factor
    g = f / r^n, L(r^n g) = r^n (g'' + (2n+2)/r g'), which keeps centered
    differences second order down to r = h for every n.
    """
    grid = np.asarray(grid, dtype=float)
    h = grid[1] - grid[0]
    if not np.allclose(np.diff(grid), h, rtol=1e-9):
        raise ValueError("grid must be uniform")
    if h > 2 * math.pi * mode.R_tilde / (POINTS_PER_OSCILLATION * mode.rho):
        raise ValueError("grid under-resolves the mode")
    f = radial_part(mode, grid)
    k = mode.rho / mode.R_tilde
    x = k * grid
    g = np.empty_like(grid)
    small = x < 1e-3
    # j_n(x)/x^n -> 1/(2n+1)!! (1 - x^2/(2(2n+3)))
    g[small] = (1 - x[small] ** 2 / (2 * (2 * mode.n + 3))) / math.prod(
        range(1, 2 * mode.n + 2, 2))
    g[~small] = f[~small] / x[~small] ** mode.n
    g *= k**mode.n
    return _radial_residual(g, grid, h, mode.n, mode.nu, float(np.max(np.abs(f))))


def _radial_residual(g, grid, h, n, nu, scale) -> float:
    r = grid[1:-1]
    keep = r > 0
    gm, g0, gp = g[:-2][keep], g[1:-1][keep], g[2:][keep]
    r = r[keep]
    lap = (gp - 2 * g0 + gm) / h**2 + (n + 1) * (gp - gm) / (h * r)
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(r**n * (lap - nu * g0))) / scale)


def constant_residual(grid) -> float:
    """Residual of the harmonic function psi = 1 with nu = 0."""
    grid = np.asarray(grid, dtype=float)
    return _radial_residual(np.ones_like(grid), grid, grid[1] - grid[0], 0, 0.0, 1.0)


@dataclass(frozen=True)
class Resonance:
    n: int
    k: int
    mismatch: float


def find_resonance(mu: float, R_tilde: float, max_n: int = 5, max_k: int = 5,
                   tol: float = RESONANCE_TOL) -> list[Resonance]:
    """All (n, k) with |mu R - rho_k^(n)| <= tol, i.e. mu^2 = -nu_{n,k}."""
    if not (mu > 0 and R_tilde > 0 and max_n >= 0 and max_k >= 1):
        raise ValueError("bounds must be positive")
    target = mu * R_tilde
    hits = []
    for n in range(max_n + 1):
        for k in range(1, max_k + 1):
            d = abs(target - spherical_bessel_zero(n, k))
            if d <= tol:
                hits.append(Resonance(n, k, d))
    return sorted(hits, key=lambda h: (h.mismatch, h.n, h.k))


def first_modes(count: int = 6, R_tilde: float = 1.0) -> list[Eigenmode]:
    """Distinct modes (n <= 2, both branches) ordered by eigenvalue then index."""
    modes = []
    for n in range(0, 3):
        for k in range(1, 3):
            for j in range(n + 1):
                modes.append(Eigenmode(n, j, k, Branch.COS, R_tilde))
                if j >= 1:
                    modes.append(Eigenmode(n, j, k, Branch.SIN, R_tilde))
    modes.sort(key=lambda m: (-m.nu, m.n, m.j, m.branch.value))
    return modes[:count]


def ball_inner_product(a: Eigenmode, b: Eigenmode, n_r: int = 64, n_theta: int = 32,
                       n_phi: int = 32) -> float:
    """Integral of psi_a psi_b over the ball by tensor Gauss-Legendre quadrature."""
    if a.R_tilde != b.R_tilde:
        raise ValueError("modes must share the ball")
    R = a.R_tilde
    xr, wr = np.polynomial.legendre.leggauss(n_r)
    xt, wt = np.polynomial.legendre.leggauss(n_theta)
    r = 0.5 * R * (xr + 1)
    wr = 0.5 * R * wr
    cos_t = xt
    ph = 2 * math.pi * (np.arange(n_phi) + 0.5) / n_phi  # periodic: midpoint is spectral
    wp = np.full(n_phi, 2 * math.pi / n_phi)

    def factors(m: Eigenmode):
        rad = radial_part(m, r)
        ang = np.array([assoc_legendre(m.n, m.j, c) for c in cos_t])
        az = np.cos(m.j * ph) if m.branch is Branch.COS else np.sin(m.j * ph)
        return rad, ang, az

    ra, aa, za = factors(a)
    rb, ab, zb = factors(b)
    return float(np.sum(wr * r**2 * ra * rb) * np.sum(wt * aa * ab) * np.sum(wp * za * zb))
