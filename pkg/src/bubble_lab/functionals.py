"""Scalar diagnostics of trajectories: moments, energy and signedness fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .eigenmodes import Eigenmode, radial_part
from .field_solver import (
    Form,
    Geometry,
    ModelParams,
    Spacetime,
    Trajectory,
    quadrature_weights,
    signed_power,
)

DENOM_TOL = 1e-14
SUPPORT_TOL = 1e-10


@dataclass(frozen=True)
class ConstantWeight:
    value: float = 1.0

    def to_dict(self) -> dict:
        return {"kind": "constant", "value": self.value}

    @property
    def nu(self) -> float:
        return 0.0


Weight = ConstantWeight | Eigenmode


def weight_id(weight: Weight) -> dict:
    if isinstance(weight, ConstantWeight):
        return weight.to_dict()
    return {"kind": "eigenmode", **weight.to_dict()}


def weight_on_grid(weight: Weight, grid: np.ndarray, geometry: Geometry) -> np.ndarray:
    """Samples of psi on the grid; eigenmodes vanish outside the ball."""
    geometry = Geometry(geometry)
    if isinstance(weight, ConstantWeight):
        return np.full(grid.shape, float(weight.value))
    if geometry is not Geometry.RADIAL3D:
        raise ValueError("eigenmode weights need the radial3d geometry")
    if not weight.is_radial:
        # angular factor integrates to zero against a radial field
        raise ValueError("only n = 0 eigenmodes act on radial fields")
    out = np.zeros(grid.shape)
    inside = grid <= weight.R_tilde
    out[inside] = radial_part(weight, grid[inside])
    return out


def _check_weight_support(weight: Weight, traj: Trajectory):
    if isinstance(weight, ConstantWeight):
        return
    outside = traj.grid > weight.R_tilde
    if np.any(np.abs(traj.values[:, outside]) > SUPPORT_TOL):
        raise ValueError("field leaves the eigenmode ball; the weighted moment is not defined")


@dataclass
class MomentSeries:
    times: np.ndarray
    F: np.ndarray
    S: np.ndarray
    weight_id: dict
    p: float

    def __post_init__(self):
        if not (len(self.times) == len(self.F) == len(self.S)):
            raise ValueError("misaligned moment series")


@dataclass(frozen=True)
class InitialConstants:
    C0: float
    C1: float
    weight_id: dict = field(default_factory=lambda: {"kind": "constant", "value": 1.0})


def moments(traj: Trajectory, weight: Weight = ConstantWeight()) -> MomentSeries:
    _check_weight_support(weight, traj)
    w = quadrature_weights(traj.grid, traj.geometry) * weight_on_grid(
        weight, traj.grid, traj.geometry
    )
    p = traj.params.p
    F = traj.values @ w
    S = signed_power(traj.values, p) @ w
    return MomentSeries(traj.times.copy(), F, S, weight_id(weight), p)


def initial_constants(traj: Trajectory, weight: Weight = ConstantWeight()) -> InitialConstants:
    _check_weight_support(weight, traj)
    w = quadrature_weights(traj.grid, traj.geometry) * weight_on_grid(
        weight, traj.grid, traj.geometry
    )
    return InitialConstants(float(traj.values[0] @ w), float(traj.velocities[0] @ w),
                            weight_id(weight))


def free_moment_formula(C: InitialConstants, M_eff: float, t):
    """C0 cosh(M t) + C1 sinh(M t)/M, or C0 + C1 t when M = 0."""
    if M_eff < 0:
        raise ValueError("M_eff must be >= 0")
    t = np.asarray(t, dtype=float)
    if M_eff == 0.0:
        out = C.C0 + C.C1 * t
    else:
        out = C.C0 * np.cosh(M_eff * t) + C.C1 * np.sinh(M_eff * t) / M_eff
    return out if out.ndim else float(out)


def _require_desitter_phi(params: ModelParams):
    if params.spacetime is not Spacetime.DE_SITTER or params.form is not Form.PHI:
        raise ValueError("energy is defined for the de Sitter phi_form only")


def _gradient(phi: np.ndarray, h: float) -> np.ndarray:
    return np.gradient(phi, h, edge_order=2)


def energy_density(phi, phi_t, t: float, params: ModelParams, h: float | None = None):
    """Integrand of E(t); the gradient term is skipped when h is None."""
    _require_desitter_phi(params)
    n, p = params.n, params.p
    phi = np.asarray(phi, dtype=float)
    dens = (
        0.5 * (np.asarray(phi_t) + 0.5 * n * phi) ** 2
        - 0.5 * params.M**2 * phi**2
        + params.lam / (p + 1) * np.abs(phi) ** (p + 1)
    )
    if h is not None:
        dens = dens + 0.5 * math.exp(-2 * t) * _gradient(phi, h) ** 2
    return math.exp(n * t) * dens


def energy(phi, phi_t, t: float, params: ModelParams, grid, geometry) -> float:
    grid = np.asarray(grid, dtype=float)
    h = grid[1] - grid[0]
    dens = energy_density(phi, phi_t, t, params, h)
    return float(quadrature_weights(grid, geometry) @ dens)


def energy_series(traj: Trajectory) -> np.ndarray:
    _require_desitter_phi(traj.params)
    return np.array(
        [
            energy(traj.values[i], traj.velocities[i], float(traj.times[i]), traj.params,
                   traj.grid, traj.geometry)
            for i in range(len(traj.times))
        ]
    )


def dissipation_rhs(phi, t: float, params: ModelParams, grid, geometry) -> float:
    """-e^{nt} int (e^{-2t}|grad phi|^2 + lam n(p-1)/(2(p+1)) |phi|^{p+1})."""
    _require_desitter_phi(params)
    grid = np.asarray(grid, dtype=float)
    h = grid[1] - grid[0]
    n, p = params.n, params.p
    integrand = math.exp(-2 * t) * _gradient(phi, h) ** 2 + params.lam * n * (p - 1) / (
        2 * (p + 1)
    ) * np.abs(phi) ** (p + 1)
    return -math.exp(n * t) * float(quadrature_weights(grid, geometry) @ integrand)


@dataclass
class DissipationSeries:
    t_mid: np.ndarray
    dE_dt: np.ndarray
    rhs: np.ndarray
    E: np.ndarray


def energy_dissipation(traj: Trajectory) -> DissipationSeries:
    """Slice-to-slice dE/dt against the averaged dissipation integrand."""
    E = energy_series(traj)
    rhs = np.array(
        [dissipation_rhs(traj.values[i], float(traj.times[i]), traj.params, traj.grid,
                         traj.geometry) for i in range(len(traj.times))]
    )
    dt = np.diff(traj.times)
    return DissipationSeries(
        0.5 * (traj.times[1:] + traj.times[:-1]), np.diff(E) / dt, 0.5 * (rhs[1:] + rhs[:-1]), E
    )


@dataclass
class SignednessFit:
    p: float
    sigma: int
    a: float
    b: float
    C: float | None
    window: tuple[float, float]
    verdict: str  # "satisfiable" | "violated"
    n_indeterminate: int = 0
    n_checked: int = 0
    first_violation: float | None = None

    def to_dict(self) -> dict:
        return {
            "p": self.p, "sigma": self.sigma, "a": self.a, "b": self.b, "C": self.C,
            "window": list(self.window), "verdict": self.verdict,
            "n_indeterminate": self.n_indeterminate, "n_checked": self.n_checked,
            "first_violation": self.first_violation,
        }


def time_weight(a: float, b: float, t):
    t = np.asarray(t, dtype=float)
    return np.exp(a * t) * t**b


def fit_signedness(series: MomentSeries, sigma: int, a: float, b: float,
                   window: tuple[float, float]) -> SignednessFit:
    """Smallest C >= 0 with |F|^p <= -sigma C nu(t) S on the window slices.

    nu(t) = e^{at} t^b. A slice with |F| > 0 but -sigma S <= tol cannot be
    satisfied by any finite C and makes the verdict "violated".
    """
    if sigma not in (1, -1):
        raise ValueError("sigma must be +1 or -1")
    t_lo, t_hi = float(window[0]), float(window[1])
    if not 0 < t_lo <= t_hi:
        raise ValueError("window must satisfy 0 < t_lo <= t_hi")
    sel = (series.times >= t_lo - 1e-12) & (series.times <= t_hi + 1e-12)
    if not np.any(sel):
        raise ValueError("window contains no slices")
    t = series.times[sel]
    lhs = np.abs(series.F[sel]) ** series.p
    den = -sigma * time_weight(a, b, t) * series.S[sel]
    C = 0.0
    n_ind = 0
    first_bad = None
    for ti, l, d in zip(t, lhs, den):
        if d > DENOM_TOL:
            C = max(C, l / d)
        elif l > DENOM_TOL:
            if first_bad is None:
                first_bad = float(ti)
        else:
            n_ind += 1
    verdict = "violated" if first_bad is not None else "satisfiable"
    return SignednessFit(series.p, sigma, a, b, None if first_bad is not None else float(C),
                         (t_lo, t_hi), verdict, n_ind, int(t.size), first_bad)
