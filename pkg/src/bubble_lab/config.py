"""Experiment configuration: parsing, defaults and initial-data profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .eigenmodes import Eigenmode, radial_part
from .field_solver import (
    ExactSolutionSpec,
    Field,
    GammaSpec,
    Geometry,
    ModelParams,
    eval_exact,
    eval_exact_velocity,
    make_grid,
)
from .functionals import ConstantWeight


class ConfigError(ValueError):
    """Configuration does not parse or validate."""


PROFILE_DEFAULTS: dict[str, dict[str, Any]] = {
    "gaussian_bump": {"amplitude": 1.0, "center": 0.0, "width": 1.0},
    "compact_bump": {"amplitude": 1.0, "center": 0.0, "width": 1.0, "power": 16, "plateau": 1},
    "tanh_kink": {"x0": 0.0, "sign": 1, "direction": 1, "convention": "resolved"},
    "traveling_kink": {"x0": 0.0, "t0": 0.0, "v": 0.5, "sign": 1, "direction": 1,
                       "convention": "resolved"},
    "eigenmode_profile": {"mode": None, "amplitude": 1.0},
    "constant_clipped": {"value": None, "radius": 1.0},
}

ANALYSIS_DEFAULTS: dict[str, dict[str, Any]] = {
    "moments": {"weight": {"kind": "constant", "value": 1.0}},
    "energy": {},
    "signedness": {"sigma": 1, "a": 0.0, "b": 0.0, "window": None,
                   "weight": {"kind": "constant", "value": 1.0}},
    "hypotheses": {"theorem_id": None, "sigma": 1, "neighborhood_delta": 0.1,
                   "terminal_fraction": 0.25, "M_eff_reading": "sqrt", "beta_reading": "1/p-1",
                   "weight": {"kind": "constant", "value": 1.0}},
    "bubbles": {"threshold": 1e-10},
    "kernel_verify": {},
    "lifespan": {"mode": "kato"},
    "finite_speed": {},
    "residual": {},
}

LIFESPAN_DEFAULTS = {
    "kato": {"p": 3.0, "delta0": 1.0, "weight_b": 0.0, "F0": 1.0, "Fdot0": 0.0, "t0": 1.0},
    "odiexp": {"A": {"coef": 1.0, "rate": 1.0, "power": 0.0},
               "gamma": {"coef": 1.0, "rate": 1.1, "power": 0.0},
               "p": 2.0, "c0": 1.0, "window": [1.0, 20.0]},
}

_MODEL_KEYS = {"spacetime", "n", "mu", "lambda", "p", "beta", "gamma", "form"}


def _merge(defaults: dict, given: dict, where: str) -> dict:
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    out = dict(defaults)
    out.update(given)
    return out


def parse_mode(d: dict) -> Eigenmode:
    if not isinstance(d, dict):
        raise ConfigError("mode must be an object {n, j, k, branch, R_tilde}")
    try:
        return Eigenmode(int(d["n"]), int(d.get("j", 0)), int(d["k"]), d.get("branch", "cos"),
                         float(d.get("R_tilde", 1.0)))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid mode {d}: {exc}") from exc


def parse_weight(d: dict):
    kind = d.get("kind", "constant")
    if kind == "constant":
        return ConstantWeight(float(d.get("value", 1.0)))
    if kind == "eigenmode":
        return parse_mode({k: v for k, v in d.items() if k != "kind"})
    raise ConfigError(f"unknown weight kind {kind!r}")


def parse_model(d: dict) -> ModelParams:
    unknown = set(d) - _MODEL_KEYS
    if unknown:
        raise ConfigError(f"model: unknown keys {sorted(unknown)}")
    try:
        gamma = d.get("gamma")
        gspec = None if gamma is None else GammaSpec(float(gamma["coef"]),
                                                     float(gamma.get("rate", 0.0)))
        return ModelParams(d["spacetime"], int(d["n"]), float(d["mu"]), float(d["lambda"]),
                           float(d.get("p", 3.0)), float(d.get("beta", 0.0)), gspec,
                           d.get("form", "phi_form"))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid model: {exc}") from exc


def resolve_model(params: ModelParams) -> dict:
    g = params.gamma_spec
    return {"spacetime": params.spacetime.value, "n": params.n, "mu": params.mu,
            "lambda": params.lam, "p": params.p, "beta": params.beta,
            "gamma": {"coef": g.coef, "rate": g.rate}, "form": params.form.value,
            "M": params.M}


def _resolve_profiles(items, where: str) -> list[dict]:
    if items is None:
        return []
    if isinstance(items, dict):
        items = [items]
    out = []
    for it in items:
        kind = it.get("kind")
        if kind not in PROFILE_DEFAULTS:
            raise ConfigError(f"{where}: unknown profile kind {kind!r}")
        body = _merge(PROFILE_DEFAULTS[kind], {k: v for k, v in it.items() if k != "kind"},
                      f"{where}.{kind}")
        if kind == "eigenmode_profile":
            body["mode"] = parse_mode(body["mode"]).to_dict()
        if kind == "constant_clipped" and body["value"] is None:
            raise ConfigError(f"{where}: constant_clipped needs a value")
        out.append({"kind": kind, **body})
    return out


def _kink_spec(body: dict, kind: str) -> ExactSolutionSpec:
    return ExactSolutionSpec(
        "static_tanh" if kind == "tanh_kink" else "traveling_tanh",
        direction=int(body["direction"]), x0=float(body["x0"]),
        t0=float(body.get("t0", 0.0)), v=float(body.get("v", 0.0)), sign=int(body["sign"]),
        convention=body["convention"],
    )


def evaluate_profile(prof: dict, grid: np.ndarray, geometry: Geometry, params: ModelParams,
                     derivative: bool = False) -> np.ndarray:
    """Sample one profile; ``derivative`` gives d/dt at t = 0 for kink kinds."""
    kind = prof["kind"]
    x = grid
    if kind == "gaussian_bump":
        return prof["amplitude"] * np.exp(-(((x - prof["center"]) / prof["width"]) ** 2))
    if kind == "compact_bump":
        s = np.clip(np.abs(x - prof["center"]) / prof["width"], 0.0, 1.0)
        return prof["amplitude"] * (1.0 - s ** (2 * int(prof["plateau"]))) ** int(prof["power"])
    if kind in ("tanh_kink", "traveling_kink"):
        if geometry is not Geometry.LINE:
            raise ConfigError("kink profiles need the line geometry")
        spec = _kink_spec(prof, kind)
        f = eval_exact_velocity if derivative else eval_exact
        return np.asarray(f(spec, params, x, 0.0), dtype=float)
    if kind == "eigenmode_profile":
        mode = parse_mode(prof["mode"])
        if geometry is not Geometry.RADIAL3D or not mode.is_radial:
            raise ConfigError("eigenmode_profile needs radial3d and an n = 0 mode")
        out = np.zeros_like(x)
        inside = x <= mode.R_tilde
        out[inside] = prof["amplitude"] * radial_part(mode, x[inside])
        return out
    if kind == "constant_clipped":
        return np.where(np.abs(x) <= prof["radius"], float(prof["value"]), 0.0)
    raise ConfigError(f"unknown profile {kind!r}")


@dataclass
class ExperimentConfig:
    model: ModelParams | None
    grid: dict | None
    time: dict | None
    initial: dict = field(default_factory=dict)
    analyses: list[dict] = field(default_factory=list)
    output: str = "out"

    @property
    def geometry(self) -> Geometry:
        return self.model.geometry

    def build_grid(self) -> np.ndarray:
        return make_grid(self.geometry, float(self.grid["L"]), float(self.grid["dx"]))

    def initial_fields(self) -> tuple[Field, Field]:
        grid = self.build_grid()
        phi = np.zeros_like(grid)
        vel = np.zeros_like(grid)
        for prof in self.initial["phi"]:
            phi += evaluate_profile(prof, grid, self.geometry, self.model)
        for prof in self.initial["phi_t"]:
            vel += evaluate_profile(prof, grid, self.geometry, self.model, derivative=True)
        return Field(grid, phi, 0.0, self.geometry), Field(grid, vel, 0.0, self.geometry)

    def resolved(self) -> dict:
        return {
            "model": None if self.model is None else resolve_model(self.model),
            "grid": self.grid,
            "time": self.time,
            "initial": self.initial,
            "analyses": self.analyses,
            "output": self.output,
        }


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {"model", "grid", "time", "initial", "analyses", "output"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    analyses = []
    for i, a in enumerate(raw.get("analyses", [])):
        kind = a.get("type")
        if kind not in ANALYSIS_DEFAULTS:
            raise ConfigError(f"analyses[{i}]: unknown type {kind!r}")
        body = {k: v for k, v in a.items() if k != "type"}
        if kind == "lifespan":
            mode = body.get("mode", "kato")
            if mode not in LIFESPAN_DEFAULTS:
                raise ConfigError(f"analyses[{i}]: unknown lifespan mode {mode!r}")
            merged = {"mode": mode, **_merge(LIFESPAN_DEFAULTS[mode],
                                             {k: v for k, v in body.items() if k != "mode"},
                                             f"analyses[{i}]")}
        else:
            merged = _merge(ANALYSIS_DEFAULTS[kind], body, f"analyses[{i}]")
        if "weight" in merged:
            parse_weight(merged["weight"])
        if kind == "hypotheses" and merged["theorem_id"] is None:
            raise ConfigError(f"analyses[{i}]: hypotheses needs theorem_id")
        if kind in ("signedness", "hypotheses") and merged["sigma"] not in (1, -1):
            raise ConfigError(f"analyses[{i}]: sigma must be +1 or -1")
        analyses.append({"type": kind, **merged})

    needs_sim = any(a["type"] not in ("kernel_verify", "lifespan") for a in analyses)
    if "model" not in raw:
        if needs_sim:
            raise ConfigError("model is required for simulation analyses")
        return ExperimentConfig(None, None, None, {}, analyses, str(raw.get("output", "out")))

    model = parse_model(raw["model"])
    grid = raw.get("grid")
    tim = raw.get("time")
    if not isinstance(grid, dict) or not {"L", "dx"} <= set(grid):
        raise ConfigError("grid needs L and dx")
    if not isinstance(tim, dict) or not {"t_end", "dt"} <= set(tim):
        raise ConfigError("time needs t_end and dt")
    grid = _merge({"L": None, "dx": None}, grid, "grid")
    tim = _merge({"t_end": None, "dt": None, "save_every": 1}, tim, "time")
    for key, val in (("grid.L", grid["L"]), ("grid.dx", grid["dx"]), ("time.t_end", tim["t_end"]),
                     ("time.dt", tim["dt"])):
        if not isinstance(val, (int, float)) or not math.isfinite(val) or val <= 0:
            raise ConfigError(f"{key} must be a positive number")
    if not isinstance(tim["save_every"], int) or tim["save_every"] < 1:
        raise ConfigError("time.save_every must be a positive integer")
    init = raw.get("initial", {}) or {}
    unknown = set(init) - {"phi", "phi_t"}
    if unknown:
        raise ConfigError(f"initial: unknown keys {sorted(unknown)}")
    initial = {"phi": _resolve_profiles(init.get("phi"), "initial.phi"),
               "phi_t": _resolve_profiles(init.get("phi_t"), "initial.phi_t")}
    return ExperimentConfig(model, grid, tim, initial, analyses, str(raw.get("output", "out")))
