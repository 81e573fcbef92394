import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bubble_lab.eigenmodes import Eigenmode
from bubble_lab.field_solver import (
    Field,
    GammaSpec,
    ModelParams,
    Trajectory,
    make_grid,
    quadrature_weights,
    simulate,
)
from bubble_lab.functionals import (
    ConstantWeight,
    InitialConstants,
    MomentSeries,
    energy_density,
    energy_dissipation,
    energy_series,
    fit_signedness,
    free_moment_formula,
    initial_constants,
    moments,
    time_weight,
    weight_on_grid,
)


def bump(grid, amp, width, plateau=1, power=16):
    s = np.clip(np.abs(grid) / width, 0.0, 1.0)
    return amp * (1.0 - s ** (2 * plateau)) ** power


def run(params, L, dx, phi, v, t_end, save_every=1):
    g = make_grid(params.geometry, L, dx)
    geo = params.geometry
    init = (Field(g, phi(g), 0.0, geo), Field(g, v(g), 0.0, geo))
    return simulate(params, init, t_end, dx / 2, save_every=save_every)


def series(F, S, times=None, p=3.0):
    F = np.asarray(F, dtype=float)
    times = np.linspace(0.5, 1.5, F.size) if times is None else np.asarray(times)
    return MomentSeries(times, F, np.asarray(S, dtype=float), {"kind": "constant"}, p)


# -------------------------------------------------------------------- moments

def test_moments_of_constant_field():
    params = ModelParams("minkowski", 1, 1.0, 1.0)
    g = make_grid("line", 1.0, 0.1)
    vals = np.full((2, g.size), 2.0)
    traj = Trajectory(params, g, np.array([0.0, 0.1]), vals, np.zeros_like(vals), 0.1, "line")
    s = moments(traj)
    assert s.F == pytest.approx([4.0, 4.0])
    assert s.S == pytest.approx([16.0, 16.0])


def test_free_moment_formula():
    C = InitialConstants(1.0, 2.0)
    assert free_moment_formula(C, 0.0, 3.0) == 7.0
    assert free_moment_formula(C, 1.0, 0.5) == pytest.approx(math.cosh(0.5) + 2 * math.sinh(0.5))
    with pytest.raises(ValueError):
        free_moment_formula(C, -1.0, 1.0)


def test_small_data_moment_follows_free_formula():
    params = ModelParams("minkowski", 1, 1.0, 1.0)
    traj = run(params, 4.0, 0.02, lambda g: bump(g, 1e-5, 1.0), lambda g: bump(g, 2e-5, 1.0), 1.0)
    C = initial_constants(traj)
    F = moments(traj).F
    ref = free_moment_formula(C, 1.0, traj.times)
    assert np.max(np.abs(F - ref)) <= 1e-4 * np.max(np.abs(ref))


def test_moment_ode_in_minkowski():
    # F'' = mu^2 F - lam S for the constant weight
    params = ModelParams("minkowski", 1, 1.0, 1.0)
    traj = run(params, 4.0, 0.01, lambda g: bump(g, 0.8, 1.0), lambda g: 0 * g, 1.0)
    s = moments(traj)
    tau = traj.times[1] - traj.times[0]
    Fdd = (s.F[2:] - 2 * s.F[1:-1] + s.F[:-2]) / tau**2
    rhs = s.F[1:-1] - s.S[1:-1]
    assert np.max(np.abs(Fdd - rhs)) <= 1e-3 * np.max(np.abs(rhs))


def test_eigenmode_moment_ode_in_minkowski_3d():
    # F_psi'' = (mu^2 + nu) F_psi - lam S_psi while the field stays in the ball
    params = ModelParams("minkowski", 3, 1.0, 1.0)
    mode = Eigenmode(0, 0, 1, "cos", 4.0)
    traj = run(params, 4.0, 0.01, lambda g: bump(g, 0.5, 1.0), lambda g: 0 * g, 1.0)
    s = moments(traj, mode)
    tau = traj.times[1] - traj.times[0]
    Fdd = (s.F[2:] - 2 * s.F[1:-1] + s.F[:-2]) / tau**2
    rhs = (1.0 + mode.nu) * s.F[1:-1] - s.S[1:-1]
    assert np.max(np.abs(Fdd - rhs)) <= 2e-3 * np.max(np.abs(rhs))


def test_eigenmode_weight_zero_outside_ball():
    mode = Eigenmode(0, 0, 1, "cos", 1.0)
    r = make_grid("radial3d", 2.0, 0.1)
    w = weight_on_grid(mode, r, "radial3d")
    assert np.all(w[r > 1.0] == 0.0)
    assert w[0] == 1.0
    with pytest.raises(ValueError):
        weight_on_grid(mode, make_grid("line", 1.0, 0.1), "line")
    with pytest.raises(ValueError):
        weight_on_grid(Eigenmode(1, 0, 1), r, "radial3d")


def test_eigenmode_moment_requires_field_in_ball():
    params = ModelParams("desitter", 3, 1.0, 1.0)
    traj = run(params, 3.0, 0.05, lambda g: bump(g, 0.5, 1.5), lambda g: 0 * g, 0.2)
    with pytest.raises(ValueError, match="ball"):
        moments(traj, Eigenmode(0, 0, 1, "cos", 1.0))


# --------------------------------------------------------------------- energy

def test_energy_density_of_vacuum():
    # independent evaluation: e^{nt} (n^2 v^2/8 - M^2 v^2/2 + lam v^4/4) with v^2 = mu^2/lam
    for n, mu, lam, t in ((3, 1.0, 1.0, 0.0), (1, 0.7, 2.0, 0.5), (3, 1.3, 0.4, 1.2)):
        params = ModelParams("desitter", n, mu, lam)
        v = params.vacuum()
        expected = -math.exp(n * t) * mu**4 / (4 * lam)
        assert energy_density(v, 0.0, t, params) == pytest.approx(expected, rel=1e-12)


def test_energy_requires_desitter_phi_form():
    with pytest.raises(ValueError):
        energy_density(0.0, 0.0, 0.0, ModelParams("minkowski", 1, 1.0, 1.0))


def _dissipation(dr):
    params = ModelParams("desitter", 3, 1.0, 1.0)
    traj = run(params, 3.0, dr, lambda g: bump(g, 0.8, 1.0), lambda g: bump(g, 0.3, 1.0), 1.0,
               save_every=int(round(0.02 / (dr / 2))))
    return energy_dissipation(traj)


def test_energy_non_increasing_and_matches_dissipation():
    d1, d2 = _dissipation(0.04), _dissipation(0.02)
    assert np.all(np.diff(d2.E) <= 1e-8)
    e1 = np.max(np.abs(d1.dE_dt - d1.rhs))
    e2 = np.max(np.abs(d2.dE_dt - d2.rhs))
    assert 3.0 <= e1 / e2 <= 5.0


# ------------------------------------------------------------------ signedness

def test_fit_signedness_simple():
    t = np.array([1.0, 2.0])
    fit = fit_signedness(series([1.0, 1.0], [-1.0, -2.0], t), 1, 0.0, 0.0, (1.0, 2.0))
    assert fit.verdict == "satisfiable"
    assert fit.C == pytest.approx(1.0)


def test_fit_signedness_violation():
    t = np.array([1.0, 2.0])
    fit = fit_signedness(series([1.0, 1.0], [-1.0, 0.5], t), 1, 0.0, 0.0, (1.0, 2.0))
    assert fit.verdict == "violated"
    assert fit.first_violation == 2.0
    assert fit.C is None
    flipped = fit_signedness(series([1.0, 1.0], [1.0, 0.5], t), -1, 0.0, 0.0, (1.0, 2.0))
    assert flipped.verdict == "satisfiable"


def test_fit_signedness_indeterminate_slices():
    fit = fit_signedness(series([0.0, 0.0, 1.0], [0.0, 0.0, -1.0]), 1, 0.0, 0.0, (0.5, 1.5))
    assert fit.n_indeterminate == 2
    assert fit.n_checked == 3


def test_fit_signedness_window_validation():
    s = series([1.0], [-1.0], [1.0])
    with pytest.raises(ValueError):
        fit_signedness(s, 1, 0.0, 0.0, (0.0, 1.0))
    with pytest.raises(ValueError):
        fit_signedness(s, 2, 0.0, 0.0, (0.5, 1.0))
    with pytest.raises(ValueError):
        fit_signedness(s, 1, 0.0, 0.0, (2.0, 3.0))


def test_time_weight():
    assert time_weight(1.0, 2.0, 2.0) == pytest.approx(4 * math.e**2)


pos = st.floats(0.1, 10.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), pos), min_size=1, max_size=8), pos,
       st.floats(0.0, 2.0), st.floats(-2.0, 2.0))
def test_fit_constant_scales_inversely_with_S(rows, k, a, b):
    F = [r[0] for r in rows]
    S = [-r[1] for r in rows]
    base = fit_signedness(series(F, S), 1, a, b, (0.5, 1.5))
    scaled = fit_signedness(series(F, [k * x for x in S]), 1, a, b, (0.5, 1.5))
    assert base.verdict == scaled.verdict == "satisfiable"
    assert scaled.C == pytest.approx(base.C / k, rel=1e-10, abs=1e-300)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), pos), min_size=1, max_size=8), st.floats(0.0, 2.0))
def test_fit_constant_is_tight(rows, a):
    F = np.array([r[0] for r in rows])
    S = -np.array([r[1] for r in rows])
    s = series(F, S)
    fit = fit_signedness(s, 1, a, 0.0, (0.5, 1.5))
    bound = fit.C * time_weight(a, 0.0, s.times) * (-S)
    assert np.all(np.abs(F) ** 3 <= bound * (1 + 1e-12) + 1e-300)


def test_constant_weight_nu_is_zero():
    assert ConstantWeight().nu == 0.0


# ------------------------------------------------------- properties of moments

def _bump_traj(amp=0.8, geometry_params=None, t_end=0.4, L=3.0, dx=0.02):
    params = geometry_params or ModelParams("desitter", 3, 1.0, 1.0)
    return run(params, L, dx, lambda g: bump(g, amp, 1.0), lambda g: bump(g, 0.3 * amp, 1.0),
               t_end, save_every=4)


def test_zero_data_moments_and_constants():
    traj = _bump_traj(amp=0.0)
    s = moments(traj)
    assert np.all(s.F == 0.0) and np.all(s.S == 0.0)
    C = initial_constants(traj)
    assert (C.C0, C.C1) == (0.0, 0.0)
    fit = fit_signedness(s, 1, 0.0, 0.0, (0.1, 0.4))
    assert fit.verdict == "satisfiable" and fit.C == 0.0


def test_zero_velocity_gives_zero_C1():
    params = ModelParams("minkowski", 1, 1.0, 1.0)
    traj = run(params, 3.0, 0.02, lambda g: bump(g, 0.5, 1.0), lambda g: 0 * g, 0.1)
    assert initial_constants(traj).C1 == 0.0


def test_clipped_constant_mass():
    params = ModelParams("minkowski", 1, 1.0, 1.0)
    g = make_grid("line", 2.0, 0.01)
    v = params.vacuum()
    vals = np.where(np.abs(g) <= 1.0, v, 0.0)[None, :]
    traj = Trajectory(params, g, np.array([0.0]), vals, np.zeros_like(vals), 0.01, "line")
    # trapezoid on the clipped profile: 201 nodes carry v, the edge nodes are interior nodes
    assert moments(traj).F[0] == pytest.approx(201 * 0.01 * v, rel=1e-12)


def test_unit_mass_bump():
    # normalize numerically on the same grid; C0 is then 1 to rounding
    params = ModelParams("minkowski", 1, 1.0, 1.0)
    g = make_grid("line", 3.0, 0.005)
    b = bump(g, 1.0, 1.0)
    b /= quadrature_weights(g, "line") @ b
    traj = Trajectory(params, g, np.array([0.0]), b[None, :], np.zeros((1, g.size)), 0.005, "line")
    assert initial_constants(traj).C0 == pytest.approx(1.0, abs=1e-8)


def test_eigenfunction_profile_self_moment():
    # F(0) for phi = psi is int psi^2 = 2/pi R^3 on the ball of radius R (here R = 2)
    mode = Eigenmode(0, 0, 1, "cos", 2.0)
    params = ModelParams("desitter", 3, 1.0, 1.0)
    r = make_grid("radial3d", 2.0, 0.01)
    psi = weight_on_grid(mode, r, "radial3d")
    traj = Trajectory(params, r, np.array([0.0]), psi[None, :], np.zeros((1, r.size)), 0.01,
                      "radial3d")
    # 4 pi r^2 psi^2 = (16/pi) sin^2(pi r/2): one full period, so the trapezoid rule is exact
    assert moments(traj, mode).F[0] == pytest.approx(16 / math.pi, rel=1e-10)


def test_free_formula_derivative_at_zero():
    C = InitialConstants(0.7, -1.3)
    h = 1e-6
    for M in (0.0, 0.5, 2.0):
        d = (free_moment_formula(C, M, h) - free_moment_formula(C, M, -h)) / (2 * h)
        assert d == pytest.approx(C.C1, abs=1e-6)
        assert free_moment_formula(C, M, 0.0) == C.C0


def test_linear_u_form_moment_matches_free_formula():
    # Gamma = 0: u_tt - e^{-2t} Lap u - M^2 u = 0, so int u solves the free ODE with M
    params = ModelParams("desitter", 3, 1.0, 1.0, gamma=GammaSpec(0.0, 0.0), form="u_form")
    traj = run(params, 4.0, 0.02, lambda g: bump(g, 0.5, 1.0), lambda g: bump(g, 0.2, 1.0), 2.0,
               save_every=20)
    ref = free_moment_formula(initial_constants(traj), params.M, traj.times[-1])
    assert abs(moments(traj).F[-1] - ref) <= 1e-3 * abs(ref)


def test_holder_bound_on_every_slice():
    traj = _bump_traj(amp=-0.8)
    w = quadrature_weights(traj.grid, traj.geometry)
    s = moments(traj)
    for k in range(len(traj.times)):
        supp = w @ (np.abs(traj.values[k]) > 0)
        lhs = abs(s.F[k]) ** 3
        rhs = supp**2 * (w @ np.abs(traj.values[k]) ** 3)
        assert lhs <= rhs * (1 + 1e-8)


def test_sign_definite_data_is_signed_with_holder_constant():
    # phi <= 0 with support inside the ball of radius 1: C <= |supp|^{p-1}
    params = ModelParams("desitter", 3, 1.0, 1.0)
    g = make_grid("radial3d", 1.0, 0.01)
    vals = np.array([-bump(g, 0.5, 1.0) * (1 + 0.1 * k) for k in range(5)])
    traj = Trajectory(params, g, np.linspace(0, 0.4, 5), vals, np.zeros_like(vals), 0.1,
                      "radial3d")
    fit = fit_signedness(moments(traj), 1, 0.0, 0.0, (0.1, 0.4))
    assert fit.verdict == "satisfiable"
    assert fit.C <= (4 * math.pi / 3) ** 2


@pytest.mark.parametrize("c", [0.1, 10.0, -2.0])
def test_moment_homogeneity(c):
    traj = _bump_traj()
    scaled = Trajectory(traj.params, traj.grid, traj.times, c * traj.values,
                        c * traj.velocities, traj.dt, traj.geometry)
    s, sc = moments(traj), moments(scaled)
    assert np.allclose(sc.F, c * s.F, rtol=1e-12, atol=0)
    assert np.allclose(sc.S, np.sign(c) * abs(c) ** 3 * s.S, rtol=1e-10, atol=0)


@pytest.mark.parametrize("c", [0.1, 10.0])
def test_signedness_verdict_scale_invariant(c):
    for amp in (-0.8, 0.8):
        traj = _bump_traj(amp=amp, t_end=1.0)
        scaled = Trajectory(traj.params, traj.grid, traj.times, c * traj.values,
                            c * traj.velocities, traj.dt, traj.geometry)
        v1 = fit_signedness(moments(traj), 1, 0.0, 0.0, (0.5, 1.0)).verdict
        v2 = fit_signedness(moments(scaled), 1, 0.0, 0.0, (0.5, 1.0)).verdict
        assert v1 == v2


def test_zero_field_has_zero_energy():
    traj = _bump_traj(amp=0.0)
    assert np.all(energy_series(traj) == 0.0)
