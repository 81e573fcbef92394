"""Time-domain solvers for the semilinear field equations.

Supported equations (geometry "line" is 1D, "radial3d" is a radially
symmetric field in R^3):

* Minkowski, phi form:  phi_tt - Lap phi = mu^2 phi - Gamma(t) |I|^beta |phi|^{p-1} phi
* de Sitter, phi form:  phi_tt + n phi_t - e^{-2t} Lap phi = mu^2 phi - lambda |phi|^{p-1} phi
* de Sitter, u form:    u_tt - e^{-2t} Lap u - M^2 u = -Gamma(t) |I|^beta |u|^{p-1} u

where I = int |u|^{p-1} u dy is the non-local self-interaction and
M^2 = n^2/4 + mu^2. Leapfrog in time, centered second differences in
space; boundary nodes stay frozen at their initial (equilibrium) values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

DIVERGENCE_THRESHOLD = 1e8
SUPPORT_TOL = 1e-10
CFL_LINE = 0.9
# the r = 0 row 6(phi_1 - phi_0)/dr^2 has eigenvalue -6/dr^2, so leapfrog
# needs dt <= 2/sqrt(6) dr ~ 0.816 dr
CFL_RADIAL = 0.8


class Spacetime(str, Enum):
    MINKOWSKI = "minkowski"
    DE_SITTER = "desitter"


class Form(str, Enum):
    PHI = "phi_form"
    U = "u_form"


class Geometry(str, Enum):
    LINE = "line"
    RADIAL3D = "radial3d"


class SolverPreconditionError(ValueError):
    """Solver inputs violate CFL, support-margin or consistency requirements."""


@dataclass(frozen=True)
class GammaSpec:
    """Gamma(t) = coef * exp(-rate * t); rate = 0 is the constant case."""

    coef: float
    rate: float = 0.0

    def __call__(self, t):
        return self.coef * np.exp(-self.rate * t)

    @property
    def monotone(self) -> str:
        if self.rate == 0.0 or self.coef == 0.0:
            return "constant"
        return "non-increasing" if self.rate * self.coef > 0 else "non-decreasing"


@dataclass(frozen=True)
class ModelParams:
    spacetime: Spacetime
    n: int
    mu: float
    lam: float
    p: float = 3.0
    beta: float = 0.0
    gamma: GammaSpec | None = None
    form: Form = Form.PHI

    def __post_init__(self):
        object.__setattr__(self, "spacetime", Spacetime(self.spacetime))
        object.__setattr__(self, "form", Form(self.form))
        if self.n not in (1, 3):
            raise ValueError(f"spatial dimension must be 1 or 3, got {self.n}")
        if not self.lam > 0:
            raise ValueError("lambda must be > 0")
        if not self.p > 1:
            raise ValueError("p must be > 1")
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if self.form is Form.U and self.spacetime is Spacetime.MINKOWSKI:
            raise ValueError("u_form only exists in de Sitter spacetime")
        if self.spacetime is Spacetime.DE_SITTER and self.form is Form.PHI:
            if self.beta != 0.0 or self.gamma is not None:
                raise ValueError("de Sitter phi_form is local; use u_form for Gamma/beta")

    @property
    def M(self) -> float:
        """Curved mass sqrt(n^2/4 + mu^2)."""
        return math.sqrt(self.n**2 / 4 + self.mu**2)

    @property
    def gamma_spec(self) -> GammaSpec:
        if self.gamma is not None:
            return self.gamma
        if self.form is Form.U:
            return GammaSpec(self.lam, self.n * (self.p - 1) / 2)
        return GammaSpec(self.lam, 0.0)

    @property
    def mass2(self) -> float:
        return self.M**2 if self.form is Form.U else self.mu**2

    @property
    def damping(self) -> float:
        if self.spacetime is Spacetime.DE_SITTER and self.form is Form.PHI:
            return float(self.n)
        return 0.0

    def wave_coef(self, t: float) -> float:
        return math.exp(-2.0 * t) if self.spacetime is Spacetime.DE_SITTER else 1.0

    def vacuum(self) -> float:
        return self.mu / math.sqrt(self.lam)

    @property
    def geometry(self) -> Geometry:
        return Geometry.LINE if self.n == 1 else Geometry.RADIAL3D


@dataclass
class Field:
    grid: np.ndarray
    values: np.ndarray
    time: float
    geometry: Geometry

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.geometry = Geometry(self.geometry)
        if self.grid.shape != self.values.shape:
            raise ValueError("grid and values must have the same shape")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")
        d = np.diff(self.grid)
        if d.size and not np.allclose(d, d[0], rtol=1e-9, atol=0):
            raise ValueError("grid must be uniform")
        if self.geometry is Geometry.RADIAL3D and self.grid[0] != 0.0:
            raise ValueError("radial grid must start at r = 0")

    @property
    def dx(self) -> float:
        return float(self.grid[1] - self.grid[0])


@dataclass
class Trajectory:
    params: ModelParams
    grid: np.ndarray
    times: np.ndarray
    values: np.ndarray  # (n_slices, n_grid)
    velocities: np.ndarray
    dt: float
    geometry: Geometry
    blowup: tuple[float, str] | None = None
    save_every: int = 1

    @property
    def dx(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def slice(self, i: int) -> Field:
        return Field(self.grid, self.values[i], float(self.times[i]), self.geometry)

    @property
    def slices(self) -> list[Field]:
        return [self.slice(i) for i in range(len(self.times))]

    def __len__(self):
        return len(self.times)


def make_grid(geometry: Geometry | str, L: float, dx: float) -> np.ndarray:
    geometry = Geometry(geometry)
    n = int(round(L / dx))
    if n < 2 or abs(n * dx - L) > 1e-9 * max(L, 1.0):
        raise SolverPreconditionError(f"L={L} is not a multiple of dx={dx}")
    if geometry is Geometry.LINE:
        return np.linspace(-L, L, 2 * n + 1)
    return np.linspace(0.0, L, n + 1)


def quadrature_weights(grid: np.ndarray, geometry: Geometry | str) -> np.ndarray:
    """Trapezoid weights for int f dx (line) or int f 4 pi r^2 dr (radial3d)."""
    geometry = Geometry(geometry)
    h = grid[1] - grid[0]
    w = np.full(grid.shape, h)
    w[0] *= 0.5
    w[-1] *= 0.5
    if geometry is Geometry.RADIAL3D:
        w = w * 4.0 * np.pi * grid**2
    return w


def signed_power(phi, p: float):
    """|phi|^{p-1} phi computed as sign(phi) |phi|^p."""
    return np.sign(phi) * np.abs(phi) ** p


def laplacian(phi: np.ndarray, h: float, geometry: Geometry) -> np.ndarray:
    """Second-order Laplacian; boundary rows (frozen nodes) are zero."""
    out = np.zeros_like(phi)
    inv = 1.0 / (h * h)
    out[1:-1] = (phi[2:] - 2.0 * phi[1:-1] + phi[:-2]) * inv
    if geometry is Geometry.RADIAL3D:
        r = np.arange(1, phi.size - 1) * h
        out[1:-1] += (phi[2:] - phi[:-2]) / (r * h)
        # even reflection phi(-h) = phi(h); Lap -> 3 phi_rr at the origin
        out[0] = 6.0 * (phi[1] - phi[0]) * inv
    return out


def _frozen_mask(n: int, geometry: Geometry) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    mask[-1] = True
    if geometry is Geometry.LINE:
        mask[0] = True
    return mask


def _nonlocal_factor(u: np.ndarray, params: ModelParams, weights: np.ndarray) -> float:
    if params.beta == 0.0:
        return 1.0
    integral = float(np.dot(weights, signed_power(u, params.p)))
    return abs(integral) ** params.beta


def _force(phi, t, params: ModelParams, h, geometry, weights):
    coef = params.gamma_spec(t) * _nonlocal_factor(phi, params, weights)
    return (
        params.wave_coef(t) * laplacian(phi, h, geometry)
        + params.mass2 * phi
        - coef * signed_power(phi, params.p)
    )


def _is_equilibrium(value: float, params: ModelParams) -> bool:
    if value == 0.0:
        return True
    if params.form is Form.U:
        return False
    return math.isclose(abs(value), params.vacuum(), rel_tol=1e-12, abs_tol=1e-14)


def support_extent(values: np.ndarray, grid: np.ndarray, geometry: Geometry,
                   ref: np.ndarray | None = None, tol: float = SUPPORT_TOL):
    """Extent [lo, hi] of the region where values deviate from the far-field reference.

    For compact data the reference is 0. Returns None when nothing deviates.
    """
    geometry = Geometry(geometry)
    if ref is None:
        ref = np.zeros_like(values)
    active = np.abs(values - ref) > tol
    if not np.any(active):
        return None
    idx = np.nonzero(active)[0]
    if geometry is Geometry.RADIAL3D:
        return 0.0, float(grid[idx[-1]])
    return float(grid[idx[0]]), float(grid[idx[-1]])


def _far_field(values: np.ndarray, geometry: Geometry) -> np.ndarray:
    # piecewise-constant reference: left boundary value left of the midpoint, right value right
    ref = np.full_like(values, values[-1])
    if geometry is Geometry.LINE:
        ref[: values.size // 2] = values[0]
    return ref


def check_preconditions(params: ModelParams, phi0: Field, v0: Field, t_end: float, dt: float):
    geometry = phi0.geometry
    if geometry is not params.geometry:
        raise SolverPreconditionError(f"geometry {geometry.value} does not match n={params.n}")
    if not (dt > 0 and t_end > 0):
        raise SolverPreconditionError("dt and t_end must be positive")
    if phi0.grid.shape != v0.grid.shape or not np.array_equal(phi0.grid, v0.grid):
        raise SolverPreconditionError("phi and phi_t must share a grid")
    h = phi0.dx
    cfl = CFL_LINE if geometry is Geometry.LINE else CFL_RADIAL
    if dt > cfl * h * (1 + 1e-12):
        raise SolverPreconditionError(f"CFL violated: dt={dt} > {cfl} * dx={cfl * h}")
    ends = [phi0.values[-1]] if geometry is Geometry.RADIAL3D else [phi0.values[0], phi0.values[-1]]
    for val in ends:
        if not _is_equilibrium(float(val), params):
            raise SolverPreconditionError(f"boundary value {val} is not an equilibrium")
    margin_needed = t_end if params.spacetime is Spacetime.MINKOWSKI else 1.0
    ref = _far_field(phi0.values, geometry)
    ext_phi = support_extent(phi0.values, phi0.grid, geometry, ref)
    ext_v = support_extent(v0.values, v0.grid, geometry)
    exts = [e for e in (ext_phi, ext_v) if e is not None]
    if not exts:
        return
    lo = min(e[0] for e in exts)
    hi = max(e[1] for e in exts)
    margin = phi0.grid[-1] - hi
    if geometry is Geometry.LINE:
        margin = min(margin, lo - phi0.grid[0])
    if margin < margin_needed - 1e-12:
        raise SolverPreconditionError(
            f"support margin {margin:.4g} < required {margin_needed:.4g}"
        )


def simulate(
    params: ModelParams,
    initial: tuple[Field, Field],
    t_end: float,
    dt: float,
    save_every: int = 1,
    check_margin: bool = True,
) -> Trajectory:
    """Evolve (phi, phi_t) from t = 0 to t_end with the leapfrog scheme."""
    phi0, v0 = initial
    if check_margin:
        check_preconditions(params, phi0, v0, t_end, dt)
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * t_end:
        raise SolverPreconditionError("t_end must be an integer multiple of dt")
    geometry = phi0.geometry
    grid = phi0.grid
    h = phi0.dx
    weights = quadrature_weights(grid, geometry)
    frozen = _frozen_mask(grid.size, geometry)
    d = params.damping

    prev = phi0.values.copy()
    acc0 = _force(prev, 0.0, params, h, geometry, weights) - d * v0.values
    cur = prev + dt * v0.values + 0.5 * dt * dt * acc0
    cur[frozen] = prev[frozen]

    saved_t = [0.0]
    saved_phi = [prev.copy()]
    saved_v = [v0.values.copy()]
    blowup = None
    lo_coef = 1.0 - 0.5 * d * dt
    inv_hi = 1.0 / (1.0 + 0.5 * d * dt)
    # cur holds step k, prev step k - 1
    for k in range(1, n_steps + 1):
        t = k * dt
        force = _force(cur, t, params, h, geometry, weights)
        nxt = (2.0 * cur - lo_coef * prev + dt * dt * force) * inv_hi
        nxt[frozen] = cur[frozen]
        if k % save_every == 0:
            saved_t.append(t)
            saved_phi.append(cur.copy())
            saved_v.append((nxt - prev) / (2.0 * dt))
        if not np.all(np.isfinite(nxt)) or np.max(np.abs(nxt)) > DIVERGENCE_THRESHOLD:
            blowup = (t, f"max|phi| exceeded {DIVERGENCE_THRESHOLD:g}")
            break
        prev, cur = cur, nxt

    return Trajectory(
        params=params,
        grid=grid.copy(),
        times=np.array(saved_t),
        values=np.array(saved_phi),
        velocities=np.array(saved_v),
        dt=dt,
        geometry=geometry,
        blowup=blowup,
        save_every=save_every,
    )


@dataclass
class ScalarTrajectory:
    times: np.ndarray
    phi: np.ndarray
    phidot: np.ndarray
    blowup: tuple[float, str] | None = None


def simulate_duffing(mu, lam, phi0, phidot0, t_end, dt, damping=3.0) -> ScalarTrajectory:
    """Classical RK4 for phi'' + damping phi' = mu^2 phi - lam phi^3."""
    if not (dt > 0 and t_end > 0):
        raise ValueError("dt and t_end must be positive")
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    mu2 = mu * mu

    def f(y, w):
        return w, mu2 * y - lam * y**3 - damping * w

    ts = [0.0]
    ys = [float(phi0)]
    ws = [float(phidot0)]
    y, w = float(phi0), float(phidot0)
    blowup = None
    for k in range(n_steps):
        h = min(dt, t_end - k * dt)
        k1y, k1w = f(y, w)
        k2y, k2w = f(y + 0.5 * h * k1y, w + 0.5 * h * k1w)
        k3y, k3w = f(y + 0.5 * h * k2y, w + 0.5 * h * k2w)
        k4y, k4w = f(y + h * k3y, w + h * k3w)
        y = y + h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        w = w + h / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
        ts.append(ts[-1] + h)
        ys.append(y)
        ws.append(w)
        if not math.isfinite(y) or abs(y) > DIVERGENCE_THRESHOLD:
            blowup = (ts[-1], f"|phi| exceeded {DIVERGENCE_THRESHOLD:g}")
            break
    return ScalarTrajectory(np.array(ts), np.array(ys), np.array(ws), blowup)


class ExactKind(str, Enum):
    CONSTANT_VACUUM = "constant_vacuum"
    STATIC_TANH = "static_tanh"
    TRAVELING_TANH = "traveling_tanh"


@dataclass(frozen=True)
class ExactSolutionSpec:
    """Closed-form solution descriptor.

    ``convention`` selects the kink slope: "resolved" uses mu/sqrt(2), which
    annihilates phi_tt - phi_xx = mu^2 phi - lambda phi^3; "printed" uses the
    alternative mu^2/2 slope, which is correct only at mu^2 = 2.
    """

    kind: ExactKind
    direction: int = 1
    x0: float = 0.0
    t0: float = 0.0
    v: float = 0.0
    sign: int = 1
    convention: str = "resolved"

    def __post_init__(self):
        object.__setattr__(self, "kind", ExactKind(self.kind))
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1 in 1D")
        if self.kind is ExactKind.TRAVELING_TANH and not 0 < abs(self.v) < 1:
            raise ValueError("traveling kink needs 0 < |v| < 1")
        if self.convention not in ("resolved", "printed"):
            raise ValueError(f"unknown convention {self.convention!r}")


def kink_slope(mu: float, convention: str = "resolved") -> float:
    if convention == "printed":
        return mu * mu / 2.0
    return mu / math.sqrt(2.0)


def _kink_arg(spec: ExactSolutionSpec, params: ModelParams, x, t):
    k = kink_slope(params.mu, spec.convention)
    s = spec.direction * (np.asarray(x, dtype=float) - spec.x0)
    if spec.kind is ExactKind.TRAVELING_TANH:
        gamma = 1.0 / math.sqrt(1.0 - spec.v**2)
        return k * gamma * (s - spec.v * (t - spec.t0)), k * gamma
    return k * s, k


def _check_exact(spec: ExactSolutionSpec, params: ModelParams):
    if spec.kind is not ExactKind.CONSTANT_VACUUM:
        if params.spacetime is not Spacetime.MINKOWSKI or params.n != 1:
            raise ValueError(f"{spec.kind.value} requires the 1D Minkowski equation")
        if params.p != 3:
            raise ValueError("kink solutions need the cubic nonlinearity p = 3")


def eval_exact(spec: ExactSolutionSpec, params: ModelParams, x, t: float = 0.0):
    """Closed-form value of a known exact solution (phi, or u = e^{nt/2} phi in u_form)."""
    _check_exact(spec, params)
    amp = spec.sign * params.vacuum()
    if spec.kind is ExactKind.CONSTANT_VACUUM:
        out = np.full(np.shape(x), amp, dtype=float)
        if params.form is Form.U:
            out = out * math.exp(params.n * t / 2)
        return out if out.ndim else float(out)
    arg, _ = _kink_arg(spec, params, x, t)
    out = amp * np.tanh(arg)
    return out if np.ndim(out) else float(out)


def eval_exact_velocity(spec: ExactSolutionSpec, params: ModelParams, x, t: float = 0.0):
    """Time derivative of :func:`eval_exact`."""
    _check_exact(spec, params)
    amp = spec.sign * params.vacuum()
    if spec.kind is ExactKind.CONSTANT_VACUUM:
        rate = params.n / 2 if params.form is Form.U else 0.0
        out = np.full(np.shape(x), amp * rate * math.exp(rate * t), dtype=float)
        return out if out.ndim else float(out)
    if spec.kind is ExactKind.STATIC_TANH:
        out = np.zeros(np.shape(x))
        return out if out.ndim else 0.0
    arg, kg = _kink_arg(spec, params, x, t)
    out = -amp * kg * spec.v / np.cosh(arg) ** 2
    return out if np.ndim(out) else float(out)


def exact_trajectory(spec: ExactSolutionSpec, params: ModelParams, grid, times) -> Trajectory:
    times = np.asarray(times, dtype=float)
    grid = np.asarray(grid, dtype=float)
    vals = np.array([np.broadcast_to(eval_exact(spec, params, grid, t), grid.shape) for t in times])
    vels = np.array(
        [np.broadcast_to(eval_exact_velocity(spec, params, grid, t), grid.shape) for t in times]
    )
    dt = float(times[1] - times[0]) if times.size > 1 else 0.0
    return Trajectory(params, grid, times, vals, vels, dt, params.geometry)


# fourth-order stencils for residual evaluation
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2_3 = np.array([1.0, -2.0, 1.0])
_D1_3 = np.array([-0.5, 0.0, 0.5])


@dataclass
class ResidualReport:
    times: np.ndarray
    norms: np.ndarray
    order: int


def _space_ops4(phi: np.ndarray, h: float, geometry: Geometry):
    """Fourth-order Laplacian on nodes that have a full stencil (ghost reflection at r = 0)."""
    if geometry is Geometry.RADIAL3D:
        ext = np.concatenate([phi[2:0:-1], phi])  # phi(-2h), phi(-h), phi(0), ...
        off = 2
        idx = np.arange(0, phi.size - 2)
    else:
        ext = phi
        off = 0
        idx = np.arange(2, phi.size - 2)
    j = idx + off
    d2 = sum(_D2[m] * ext[j + m - 2] for m in range(5)) / (h * h)
    if geometry is Geometry.RADIAL3D:
        d1 = sum(_D1[m] * ext[j + m - 2] for m in range(5)) / h
        r = idx * h
        lap = np.empty_like(d2)
        lap[0] = 3.0 * d2[0]
        lap[1:] = d2[1:] + 2.0 * d1[1:] / r[1:]
    else:
        lap = d2
    return idx, lap


def check_residual(traj: Trajectory) -> ResidualReport:
    """L2 norm of the continuous PDE residual of the stored solution, per slice.

    Uses fourth-order stencils in space and time (second order in time when
    only three or four slices are stored), so the residual of a second-order
    solution scales with its truncation error.
    """
    n_sl = len(traj.times)
    if n_sl < 3:
        raise ValueError("need at least 3 slices")
    dts = np.diff(traj.times)
    if not np.allclose(dts, dts[0], rtol=1e-9):
        raise ValueError("slices must be equally spaced in time")
    tau = float(dts[0])
    params = traj.params
    h = traj.dx
    u = traj.values
    weights = quadrature_weights(traj.grid, traj.geometry)
    if n_sl >= 5:
        order, half, st2, st1 = 4, 2, _D2, _D1
    else:
        order, half, st2, st1 = 2, 1, _D2_3, _D1_3
    out_t, out_n = [], []
    for k in range(half, n_sl - half):
        window = u[k - half : k + half + 1]
        u_tt = np.tensordot(st2, window, axes=1) / (tau * tau)
        u_t = np.tensordot(st1, window, axes=1) / tau
        t = float(traj.times[k])
        idx, lap = _space_ops4(u[k], h, traj.geometry)
        coef = params.gamma_spec(t) * _nonlocal_factor(u[k], params, weights)
        res = (
            u_tt[idx]
            + params.damping * u_t[idx]
            - params.wave_coef(t) * lap
            - params.mass2 * u[k][idx]
            + coef * signed_power(u[k][idx], params.p)
        )
        out_t.append(t)
        out_n.append(math.sqrt(float(np.dot(weights[idx], res * res))))
    return ResidualReport(np.array(out_t), np.array(out_n), order)


@dataclass
class FiniteSpeedReport:
    passed: bool
    margin: float
    growth: np.ndarray = field(repr=False)
    allowed: np.ndarray = field(repr=False)


def light_cone_growth(params: ModelParams, t):
    t = np.asarray(t, dtype=float)
    if params.spacetime is Spacetime.MINKOWSKI:
        return t
    return 1.0 - np.exp(-t)


def finite_speed_check(traj: Trajectory, tol: float = SUPPORT_TOL,
                       initial_extent: tuple[float, float] | None = None) -> FiniteSpeedReport:
    """Numerical support (|phi - far field| > tol) must stay inside the light cone.

    The initial support is the exact one (every node that differs from the far
    field at all) unless given explicitly: sub-threshold tails of the data are
    part of the support and may grow above tol under the tachyonic mass term.
    """
    ref = _far_field(traj.values[0], traj.geometry)
    h = traj.dx
    if initial_extent is None:
        ext0 = support_extent(traj.values[0], traj.grid, traj.geometry, ref, 0.0)
        ext_v = support_extent(traj.velocities[0], traj.grid, traj.geometry, None, 0.0)
        exts = [e for e in (ext0, ext_v) if e is not None]
    else:
        exts = [tuple(initial_extent)]
    allowed = light_cone_growth(traj.params, traj.times) + h
    growth = np.zeros(len(traj.times))
    for i in range(len(traj.times)):
        ext = support_extent(traj.values[i], traj.grid, traj.geometry, ref, tol)
        if ext is None:
            continue
        if not exts:
            growth[i] = np.inf
            continue
        lo0 = min(e[0] for e in exts)
        hi0 = max(e[1] for e in exts)
        g = ext[1] - hi0
        if traj.geometry is Geometry.LINE:
            g = max(g, lo0 - ext[0])
        growth[i] = max(g, 0.0)
    margin = float(np.min(allowed - growth))
    return FiniteSpeedReport(bool(margin >= -1e-12), margin, growth, allowed)
