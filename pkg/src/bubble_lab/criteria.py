"""Theorem hypotheses, bubble detection and ODE life-span checks on trajectories."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp

from .eigenmodes import Eigenmode
from .field_solver import Form, Spacetime, Trajectory
from .functionals import (
    ConstantWeight,
    Weight,
    fit_signedness,
    initial_constants,
    moments,
    weight_id,
)

NEIGHBORHOOD_DELTA = 0.1
TERMINAL_FRACTION = 0.25
BUBBLE_THRESHOLD = 1e-10
ZERO_MASS_TOL = 1e-9
ODE_DIVERGENCE = 1e8


class TheoremId(str, Enum):
    T1_3 = "T1_3"  # u form, plain moments, non-local power beta
    T1_5 = "T1_5"  # u form, psi-weighted
    T2_1 = "T2_1"  # Minkowski, plain moments
    T2_5 = "T2_5"  # Minkowski, psi-weighted
    T4_1 = "T4_1"  # de Sitter phi form, n = 3, p = 3
    T4_5 = "T4_5"  # de Sitter phi form, Dirichlet eigenmode weight
    C4_6 = "C4_6"  # resonance mu^2 = -nu_{n,k}


class MEffReading(str, Enum):
    SQRT = "sqrt"  # sqrt(M^2 + nu), what the psi-weighted reduction produces
    LINEAR = "linear"  # M + nu, the alternative reading of the weighted u-form mass


class BetaReading(str, Enum):
    RECIPROCAL_MINUS_ONE = "1/p-1"  # beta > (1/p) - 1
    RECIPROCAL_OF_DIFF = "1/(p-1)"  # beta > 1/(p-1)



class TheoremMismatchError(ValueError):
    """The trajectory or weight does not fit the theorem's setting."""


@dataclass
class Verdict:
    passed: bool | None  # None = indeterminate
    value: float | None = None
    detail: str = ""

    @property
    def label(self) -> str:
        return {True: "pass", False: "fail", None: "indeterminate"}[self.passed]


@dataclass
class WeightRegion:
    """Admissible nu(t) = e^{at} t^b: a < a_crit, or a == a_crit and b < b_crit
    (b <= b_crit when ``b_inclusive``)."""

    a_crit: float
    b_crit: float
    b_inclusive: bool
    a_fixed: bool  # only a == a_crit allowed (zero effective mass)
    description: str

    def admits(self, a: float, b: float, tol: float = 1e-12) -> bool:
        # the definition asks for a non-decreasing positive weight
        if a < 0 or (a == 0 and b < 0):
            return False
        if abs(a - self.a_crit) <= tol:
            return b <= self.b_crit if self.b_inclusive else b < self.b_crit
        return (not self.a_fixed) and a < self.a_crit

    def sample(self) -> list[tuple[float, float]]:
        """A few admissible weights used to exercise signedness fits."""
        pts = []
        if self.a_fixed or self.a_crit <= 0:
            pts += [(self.a_crit, 0.0), (self.a_crit, self.b_crit if self.b_inclusive else self.b_crit - 1)]
        else:
            pts += [(0.0, 0.0), (0.5 * self.a_crit, 1.0), (self.a_crit, self.b_crit - 0.5)]
        return [(a, b) for a, b in pts if self.admits(a, b)]

    def to_dict(self) -> dict:
        return {"a_crit": self.a_crit, "b_crit": self.b_crit, "b_inclusive": self.b_inclusive,
                "a_fixed": self.a_fixed, "description": self.description}


@dataclass
class HypothesisReport:
    theorem_id: TheoremId
    sigma: int
    C0: float
    C1: float
    c0c1_check: Verdict
    sign_condition: Verdict
    sign_window: tuple[float, float]
    sign_series: list[bool] = field(repr=False)
    weight_thresholds: WeightRegion | None
    M_eff: float | None
    M_eff_reading: str
    beta_reading: str | None
    applicability: Verdict
    neighborhood_delta: float
    terminal_fraction: float
    weight: dict
    overall: str

    def to_dict(self) -> dict:
        return {
            "theorem_id": self.theorem_id.value,
            "sigma": self.sigma,
            "weight": self.weight,
            "C0": self.C0,
            "C1": self.C1,
            "c0c1_check": {"value": self.c0c1_check.value, "verdict": self.c0c1_check.label,
                           "detail": self.c0c1_check.detail},
            "sign_condition": {"verdict": self.sign_condition.label,
                               "window": list(self.sign_window),
                               "detail": self.sign_condition.detail,
                               "neighborhood_delta": self.neighborhood_delta,
                               "terminal_fraction": self.terminal_fraction},
            "weight_thresholds": None if self.weight_thresholds is None
            else self.weight_thresholds.to_dict(),
            "applicability": {"verdict": self.applicability.label,
                              "detail": self.applicability.detail},
            "M_eff": self.M_eff,
            "M_eff_reading": self.M_eff_reading,
            "beta_reading": self.beta_reading,
            "overall": self.overall,
        }


def _weight_nu(weight: Weight) -> float:
    return 0.0 if isinstance(weight, ConstantWeight) else weight.nu


def _check_setting(traj: Trajectory, weight: Weight, tid: TheoremId):
    params = traj.params
    if tid in (TheoremId.T2_1, TheoremId.T2_5):
        if params.spacetime is not Spacetime.MINKOWSKI:
            raise TheoremMismatchError(f"{tid.value} needs a Minkowski trajectory")
    elif tid in (TheoremId.T1_3, TheoremId.T1_5):
        if params.form is not Form.U:
            raise TheoremMismatchError(f"{tid.value} needs a de Sitter u_form trajectory")
    else:
        if params.spacetime is not Spacetime.DE_SITTER or params.form is not Form.PHI:
            raise TheoremMismatchError(f"{tid.value} needs a de Sitter phi_form trajectory")
        if params.n != 3 or params.p != 3:
            raise TheoremMismatchError(f"{tid.value} is stated for n = 3, p = 3")
    if tid in (TheoremId.T2_1, TheoremId.T1_3, TheoremId.T4_1):
        if not isinstance(weight, ConstantWeight):
            raise TheoremMismatchError(f"{tid.value} uses the constant weight")
    if tid in (TheoremId.T4_5, TheoremId.C4_6) and not isinstance(weight, Eigenmode):
        raise TheoremMismatchError(f"{tid.value} needs a Dirichlet eigenmode weight")
    if tid is TheoremId.T2_1 or tid is TheoremId.T1_3:
        if isinstance(weight, ConstantWeight) and weight.value != 1.0:
            raise TheoremMismatchError("plain moments use psi = 1")


def _region_exp(a_crit: float, b_crit: float, what: str) -> WeightRegion:
    return WeightRegion(a_crit, b_crit, False, False,
                        f"a < {what} = {a_crit:.12g}, or a = {what} and b < {b_crit:.12g}")


def _region_zero(b_crit: float, what: str) -> WeightRegion:
    return WeightRegion(0.0, b_crit, True, True, f"a = 0 and b <= {b_crit:.12g} ({what})")


def _beta_ok(beta: float, p: float, reading: BetaReading) -> bool:
    if reading is BetaReading.RECIPROCAL_MINUS_ONE:
        return beta > 1.0 / p - 1.0
    return beta > 1.0 / (p - 1.0)


def check_hypotheses(
    traj: Trajectory,
    weight: Weight,
    theorem_id: TheoremId | str,
    sigma: int = 1,
    neighborhood_delta: float = NEIGHBORHOOD_DELTA,
    terminal_fraction: float = TERMINAL_FRACTION,
    M_eff_reading: MEffReading | str = MEffReading.SQRT,
    beta_reading: BetaReading | str = BetaReading.RECIPROCAL_MINUS_ONE,
) -> HypothesisReport:
    """Evaluate the initial-constant, sign and weight-region hypotheses of a theorem.

    For the psi-weighted statements the sign sigma = -1 is realized by the
    eigenfunction -psi, which multiplies C0, C1 and S by sigma.
    """
    tid = TheoremId(theorem_id)
    M_eff_reading = MEffReading(M_eff_reading)
    beta_reading = BetaReading(beta_reading)
    if sigma not in (1, -1):
        raise ValueError("sigma must be +1 or -1")
    if not neighborhood_delta > 0:
        raise ValueError("neighborhood_delta must be > 0")
    if not 0 < terminal_fraction <= 1:
        raise ValueError("terminal_fraction must be in (0, 1]")
    _check_setting(traj, weight, tid)
    params = traj.params
    p = params.p
    nu = _weight_nu(weight)
    C = initial_constants(traj, weight)
    series = moments(traj, weight)
    C0, C1 = C.C0, C.C1

    applicable = Verdict(True)
    beta_used = None
    zero_mass = False
    if tid is TheoremId.T2_1:
        M_eff = params.mu
        zero_mass = M_eff == 0.0
        c0c1 = sigma * (M_eff * C0 + C1)
        region = _region_zero(1 + p, "zero mass") if zero_mass else _region_exp(
            M_eff * (p - 1), -2.0, "mu (p-1)")
        reading = "mu"
    elif tid is TheoremId.T2_5:
        disc = params.mu**2 + nu
        reading = "sqrt(mu^2+nu)"
        if disc < -ZERO_MASS_TOL:
            applicable = Verdict(False, disc, "mu^2 + nu < 0")
            disc = 0.0
        M_eff = math.sqrt(max(disc, 0.0))
        zero_mass = abs(params.mu**2 + nu) <= ZERO_MASS_TOL
        c0c1 = sigma * (M_eff * C0 + C1)
        region = _region_zero(1 + p, "mu^2 + nu = 0") if zero_mass else _region_exp(
            M_eff * (p - 1), -2.0, "mu_1 (p-1)")
    elif tid in (TheoremId.T1_3, TheoremId.T1_5):
        beta = params.beta if tid is TheoremId.T1_3 else 0.0
        if tid is TheoremId.T1_3:
            M_eff = params.M
            reading = "M"
            beta_used = beta_reading.value
            if not _beta_ok(beta, p, beta_reading):
                applicable = Verdict(False, beta, f"beta fails beta > {beta_reading.value}")
        else:
            reading = M_eff_reading.value
            if M_eff_reading is MEffReading.SQRT:
                disc = params.M**2 + nu
                M_eff = math.sqrt(max(disc, 0.0))
                if disc < -ZERO_MASS_TOL:
                    applicable = Verdict(False, disc, "M^2 + nu < 0")
            else:
                M_eff = params.M + nu
                if M_eff < -ZERO_MASS_TOL:
                    applicable = Verdict(False, M_eff, "M + nu < 0")
                M_eff = max(M_eff, 0.0)
        zero_mass = M_eff <= ZERO_MASS_TOL
        if params.gamma_spec.monotone not in ("constant", "non-increasing", "non-decreasing"):
            applicable = Verdict(False, None, "Gamma not monotone")
        c0c1 = sigma * (M_eff * C0 + C1)
        q = p * (beta + 1)
        k = params.gamma_spec.rate
        if params.gamma_spec.coef <= 0:
            applicable = Verdict(False, params.gamma_spec.coef, "Gamma must be positive")
        # Gamma = c e^{-kt} >= nu^{beta+1} e^{-M(q-1)t} t^{2+eps}, nu = e^{at} t^b
        if zero_mass:
            region = WeightRegion(-k / (beta + 1), (1 + q) / (beta + 1), True, True,
                                  "Gamma >= c t^{-1-p(beta+1)} nu^{beta+1}")
        else:
            a_crit = (M_eff * (q - 1) - k) / (beta + 1)
            region = _region_exp(a_crit, -2.0 / (beta + 1), "(M_eff(p(beta+1)-1) - k)/(beta+1)")
    else:
        disc = params.mu**2 + nu
        reading = "sqrt(M^2+nu)"
        if tid is TheoremId.C4_6:
            R = weight.R_tilde
            if abs(params.mu * R - weight.rho) > ZERO_MASS_TOL:
                applicable = Verdict(False, params.mu * R - weight.rho, "no resonance mu^2 = -nu")
            zero_mass = True
            c0c1 = sigma * (3 * C0 + C1)
            M_eff = 1.5
        else:
            if disc < -ZERO_MASS_TOL:
                applicable = Verdict(False, disc, "mu^2 + nu < 0")
            zero_mass = abs(disc) <= ZERO_MASS_TOL
            root = math.sqrt(9 + 4 * max(disc, 0.0))
            c0c1 = sigma * ((root + 3) * C0 + 2 * C1)
            M_eff = root / 2
        region = _region_zero(4.0, "mu^2 + nu = 0") if zero_mass else _region_exp(
            math.sqrt(9 + 4 * disc) - 3, -2.0, "sqrt(9+4(mu^2+nu)) - 3")

    c0c1_v = Verdict(bool(c0c1 > 0), float(c0c1), "initial-constant combination")

    t = series.times
    t_end = float(t[-1])
    if zero_mass:
        lo = t_end * (1 - terminal_fraction)
        window = (lo, t_end)
    else:
        window = (neighborhood_delta, t_end)
    sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    sS = sigma * series.S[sel]
    ok = sS <= 0.0
    if not np.any(sel):
        sign_v = Verdict(None, None, "no slices in the sign window")
    else:
        n_bad = int(np.count_nonzero(~ok))
        first = float(t[sel][~ok][0]) if n_bad else None
        sign_v = Verdict(n_bad == 0, float(np.max(sS)),
                         f"{n_bad} of {int(ok.size)} slices violate"
                         + (f", first at t={first:.6g}" if first is not None else ""))

    all_zero = np.all(series.F == 0.0) and np.all(series.S == 0.0) and C0 == 0.0 and C1 == 0.0
    if all_zero:
        overall = "indeterminate"
        c0c1_v = Verdict(None, 0.0, "all functionals vanish")
        sign_v = Verdict(None, 0.0, "all functionals vanish")
    elif applicable.passed and c0c1_v.passed and sign_v.passed:
        overall = "hypotheses_met"
    elif sign_v.passed is None:
        overall = "indeterminate"
    else:
        overall = "not_met"

    return HypothesisReport(
        theorem_id=tid, sigma=sigma, C0=C0, C1=C1, c0c1_check=c0c1_v, sign_condition=sign_v,
        sign_window=window, sign_series=[bool(x) for x in ok], weight_thresholds=region,
        M_eff=M_eff, M_eff_reading=reading, beta_reading=beta_used, applicability=applicable,
        neighborhood_delta=neighborhood_delta, terminal_fraction=terminal_fraction,
        weight=weight_id(weight), overall=overall,
    )


@dataclass
class BubbleEvent:
    time: float
    locations: list[float]

    def to_dict(self) -> dict:
        return asdict(self)


def slice_zeros(values: np.ndarray, grid: np.ndarray, threshold: float = BUBBLE_THRESHOLD):
    """Interior sign changes of one slice, located by linear interpolation.

    Consecutive significant nodes (|phi| > threshold) of opposite sign bracket
    a wall when at most one insignificant node separates them.
    """
    sig = np.nonzero(np.abs(values) > threshold)[0]
    out = []
    for i, j in zip(sig[:-1], sig[1:]):
        if j - i > 2:
            continue
        vi, vj = values[i], values[j]
        if vi * vj < 0:
            out.append(float(grid[i] + (grid[j] - grid[i]) * vi / (vi - vj)))
    return out


def detect_bubbles(traj: Trajectory, threshold: float = BUBBLE_THRESHOLD) -> list[BubbleEvent]:
    events = []
    for k, t in enumerate(traj.times):
        zs = slice_zeros(traj.values[k], traj.grid, threshold)
        if zs:
            events.append(BubbleEvent(float(t), zs))
    return events


@dataclass
class LifespanEstimate:
    mode: str
    params: dict
    admissibility: dict
    blowup_time_upper: float | None

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def admissible(self) -> bool:
        return all(self.admissibility.values())


def _diverge(rhs, t0: float, y0, t_max: float):
    def big(t, y):
        return ODE_DIVERGENCE - y[0]

    big.terminal = True
    sol = solve_ivp(rhs, (t0, t_max), y0, method="DOP853", rtol=1e-10, atol=1e-12,
                    events=big)
    if sol.t_events[0].size:
        return float(sol.t_events[0][0])
    return None


def kato_lifespan(p: float, delta0: float, weight_b: float, F0: float, Fdot0: float,
                  t0: float = 1.0, t_max: float = 1e4) -> LifespanEstimate:
    """Integrate F'' = delta0 t^{-b} F^p; the divergence time bounds the life-span."""
    adm = {
        "p>1": bool(p > 1),
        "delta0>0": bool(delta0 > 0),
        "F0>0": bool(F0 > 0),
        "t0>0": bool(t0 > 0),
        "weight_b<=1+p": bool(weight_b <= 1 + p),
    }
    est = LifespanEstimate("kato", {"p": p, "delta0": delta0, "weight_b": weight_b, "F0": F0,
                                    "Fdot0": Fdot0, "t0": t0}, adm, None)
    if not est.admissible:
        return est

    def rhs(t, y):
        return [y[1], delta0 * t ** (-weight_b) * abs(y[0]) ** p]

    est.blowup_time_upper = _diverge(rhs, t0, [F0, Fdot0], t_max)
    return est


@dataclass(frozen=True)
class ExpPowDescriptor:
    """coef * e^{rate t} * t^power."""

    coef: float
    rate: float = 0.0
    power: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.coef * np.exp(self.rate * t) * t**self.power

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return self(t) * (self.rate + self.power / t)


def odiexp_check(A: ExpPowDescriptor, gamma: ExpPowDescriptor, p: float, c0: float,
                 window: tuple[float, float], t_max: float | None = None) -> LifespanEstimate:
    """Side conditions of the exponential-kernel ODE-inequality lemma, then integrate."""
    t_lo, t_hi = map(float, window)
    if not 0 < t_lo < t_hi:
        raise ValueError("window must satisfy 0 < t_lo < t_hi")
    if A.coef <= 0 or gamma.coef < 0:
        raise ValueError("descriptors must be non-negative with A > 0")
    a, mA = A.rate, A.power
    g, mg = gamma.rate, gamma.power
    a_to_inf = a > 0 or (a == 0 and mA > 0)
    # d/dt(gamma A^{-p}) = h(t) ((g - p a) + (mg - p mA)/t), affine in 1/t
    if gamma.coef == 0:
        monotone = True
    else:
        k0, k1 = g - p * a, mg - p * mA
        monotone = all(k0 + k1 / s <= 0 for s in (t_lo, t_hi))
    if gamma.coef == 0:
        gamma_ap = False
    elif a > 0:
        # A (ln A)^{2+eps} ~ e^{at} t^{mA + 2 + eps}
        gamma_ap = g > a or (g == a and mg - mA > 2)
    elif a == 0 and mA > 0:
        # A (ln A)^{2+eps} ~ t^{mA} (ln t)^{2+eps}
        gamma_ap = g > 0 or (g == 0 and mg > mA)
    else:
        gamma_ap = False
    adm = {"p>1": bool(p > 1), "c0>0": bool(c0 > 0), "A_to_infinity": bool(a_to_inf),
           "gammaA^-p_nonincreasing": bool(monotone), "GammaAp": bool(gamma_ap)}
    est = LifespanEstimate("odiexp", {"A": asdict(A), "gamma": asdict(gamma), "p": p, "c0": c0,
                                      "window": [t_lo, t_hi]}, adm, None)
    if not est.admissible:
        return est
    kern = ExpPowDescriptor(gamma.coef / A.coef**p, g - p * a, mg - p * mA)

    def rhs(t, y):
        return [y[1], float(kern(t)) * abs(y[0]) ** p]

    y0 = [c0 * float(A(t_lo)), c0 * float(A.derivative(t_lo))]
    est.blowup_time_upper = _diverge(rhs, t_lo, y0, t_max if t_max is not None else t_hi)
    return est


def counterexample_residual(d: float, p: float, t) -> float:
    """max |F'' - e^{-dt} F^p| for F = c_F e^{dt/(p-1)}, c_F = (d/(p-1))^{2/(p-1)}."""
    t = np.asarray(t, dtype=float)
    k = d / (p - 1)
    cF = k ** (2 / (p - 1))
    F = cF * np.exp(k * t)
    Fdd = k * k * F
    return float(np.max(np.abs(Fdd - np.exp(-d * t) * F**p) / np.maximum(Fdd, 1.0)))


def counterexample_descriptors(d: float, p: float) -> tuple[ExpPowDescriptor, ExpPowDescriptor]:
    """(A, gamma) with gamma A^{-p} = e^{-dt} and A = e^{dt/(p-1)}."""
    a = d / (p - 1)
    return ExpPowDescriptor(1.0, a), ExpPowDescriptor(1.0, p * a - d)


@dataclass
class DichotomyOutcome:
    bubble: bool
    divergence: bool
    violation_all_weights: bool
    fits: list[dict]

    @property
    def resolved(self) -> bool:
        return self.bubble or self.divergence or self.violation_all_weights


def dichotomy_outcome(traj: Trajectory, weight: Weight, report: HypothesisReport,
                      threshold: float = BUBBLE_THRESHOLD) -> DichotomyOutcome:
    """Which escape the theorem forces: a wall, divergence, or no admissible weight works.

    Fitting the plain series with sigma is the same as fitting the series of
    the sign-flipped eigenfunction sigma psi with +1.
    """
    bubble = bool(detect_bubbles(traj, threshold))
    divergence = traj.blowup is not None
    series = moments(traj, weight)
    region = report.weight_thresholds
    fits = [
        fit_signedness(series, report.sigma, a, b, report.sign_window).to_dict()
        for a, b in (region.sample() if region is not None else [])
    ]
    violation = bool(fits) and all(f["verdict"] == "violated" for f in fits)
    return DichotomyOutcome(bubble, divergence, violation, fits)


def default_window(traj: Trajectory, fraction: float = TERMINAL_FRACTION) -> tuple[float, float]:
    t_end = float(traj.times[-1])
    return (max(t_end * (1 - fraction), float(traj.times[1])), t_end)


__all__ = [
    "TheoremId", "MEffReading", "BetaReading", "HypothesisReport", "WeightRegion", "Verdict",
    "check_hypotheses", "BubbleEvent", "detect_bubbles", "slice_zeros", "LifespanEstimate",
    "kato_lifespan", "ExpPowDescriptor", "odiexp_check", "counterexample_residual",
    "counterexample_descriptors", "dichotomy_outcome", "DichotomyOutcome", "default_window",
    "TheoremMismatchError",
]
