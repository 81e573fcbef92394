import csv
import json
import subprocess
import sys

import pytest

from bubble_lab.cli import EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_OK, EXIT_PRECONDITION, main
from bubble_lab.config import ConfigError, parse_config

BUMP_RUN = {
    "model": {"spacetime": "desitter", "n": 3, "mu": 1.0, "lambda": 1.0},
    "grid": {"L": 3.0, "dx": 0.05},
    "time": {"t_end": 1.0, "dt": 0.025, "save_every": 4},
    "initial": {
        "phi": [{"kind": "compact_bump", "amplitude": -1.0, "width": 1.0, "plateau": 4}],
        "phi_t": [{"kind": "compact_bump", "amplitude": 0.2, "width": 1.5}],
    },
    "analyses": [
        {"type": "moments"},
        {"type": "moments", "weight": {"kind": "eigenmode", "n": 0, "k": 1, "R_tilde": 3.0}},
        {"type": "energy"},
        {"type": "hypotheses", "theorem_id": "T4_1"},
        {"type": "signedness", "window": [0.5, 1.0]},
        {"type": "bubbles"},
        {"type": "finite_speed"},
        {"type": "residual"},
    ],
}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_full_run_artifacts(tmp_path):
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, BUMP_RUN), "--out", str(out)]) == EXIT_OK
    traj = read_csv(out / "trajectory.csv")
    assert traj[0] == ["t", "r", "phi", "phi_t"]
    assert len(traj) == 1 + 11 * 61  # slices x nodes
    mom = read_csv(out / "moments.csv")
    assert mom[0] == ["t", "F", "S", "F_w1", "S_w1", "E"]
    assert len(mom) == 12
    report = json.loads((out / "report.json").read_text())
    assert {"config", "readings", "analyses", "overall", "simulation"} <= set(report)
    kinds = [a["type"] for a in report["analyses"]]
    assert kinds == [a["type"] for a in BUMP_RUN["analyses"]]


def test_config_echo_contains_defaults(tmp_path):
    out = tmp_path / "out"
    main(["run", write(tmp_path, BUMP_RUN), "--out", str(out)])
    cfg = json.loads((out / "report.json").read_text())["config"]
    hyp = [a for a in cfg["analyses"] if a["type"] == "hypotheses"][0]
    assert hyp["neighborhood_delta"] == 0.1
    assert hyp["terminal_fraction"] == 0.25
    assert hyp["M_eff_reading"] == "sqrt"
    assert hyp["beta_reading"] == "1/p-1"
    assert cfg["model"]["p"] == 3.0 and cfg["model"]["gamma"] == {"coef": 1.0, "rate": 0.0}
    assert cfg["initial"]["phi_t"][0]["power"] == 16


def test_zero_data_run(tmp_path):
    cfg = {
        "model": {"spacetime": "minkowski", "n": 1, "mu": 1.0, "lambda": 1.0},
        "grid": {"L": 4.0, "dx": 0.05},
        "time": {"t_end": 1.0, "dt": 0.025},
        "analyses": [{"type": "moments"}, {"type": "hypotheses", "theorem_id": "T2_1"}],
    }
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, cfg), "--out", str(out)]) == EXIT_OK
    for row in read_csv(out / "trajectory.csv")[1:]:
        assert float(row[2]) == 0.0 and float(row[3]) == 0.0
    for row in read_csv(out / "moments.csv")[1:]:
        assert float(row[1]) == 0.0 and float(row[2]) == 0.0
    assert json.loads((out / "report.json").read_text())["overall"] == "indeterminate"


def test_kernel_verify_only(tmp_path):
    out = tmp_path / "out"
    cfg = {"analyses": [{"type": "kernel_verify"}]}
    assert main(["run", write(tmp_path, cfg), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    res = report["analyses"][0]["result"]
    assert res["pass"] and res["max_error_cone_grid"] <= 1e-7
    assert sum(1 for r in res["rows"] if r["name"].startswith("cone")) == 125
    assert not (out / "trajectory.csv").exists()


def test_lifespan_only(tmp_path):
    out = tmp_path / "out"
    cfg = {"analyses": [{"type": "lifespan", "mode": "kato"},
                        {"type": "lifespan", "mode": "odiexp"}]}
    assert main(["run", write(tmp_path, cfg), "--out", str(out)]) == EXIT_OK
    res = [a["result"] for a in json.loads((out / "report.json").read_text())["analyses"]]
    assert res[0]["blowup_time_upper"] == pytest.approx(2.854074663, abs=1e-6)
    assert res[1]["blowup_time_upper"] is not None


def test_cfl_violation_leaves_no_artifacts(tmp_path):
    cfg = json.loads(json.dumps(BUMP_RUN))
    cfg["time"]["dt"] = 0.1
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, cfg), "--out", str(out)]) == EXIT_PRECONDITION
    assert not out.exists()


@pytest.mark.parametrize("mutate", [
    lambda c: c.update(bogus=1),
    lambda c: c["model"].update(spacetime="anti-desitter"),
    lambda c: c["analyses"].append({"type": "hypotheses"}),
    lambda c: c["analyses"].append({"type": "signedness", "sigma": 2}),
    lambda c: c["initial"]["phi"].append({"kind": "square_wave"}),
    lambda c: c["time"].update(save_every=0),
    lambda c: c["grid"].pop("dx"),
])
def test_invalid_config_exit_1(tmp_path, mutate):
    cfg = json.loads(json.dumps(BUMP_RUN))
    mutate(cfg)
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, cfg), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists()


def test_unreadable_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == EXIT_CONFIG
    assert main(["run", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_divergence_before_window(tmp_path):
    cfg = {
        "model": {"spacetime": "desitter", "n": 1, "mu": 1.0, "lambda": 1.0, "form": "u_form",
                  "gamma": {"coef": -1.0, "rate": 0.0}},
        "grid": {"L": 4.0, "dx": 0.05},
        "time": {"t_end": 2.0, "dt": 0.025},
        "initial": {"phi": [{"kind": "compact_bump", "amplitude": 10.0, "width": 1.0}]},
        "analyses": [{"type": "signedness", "window": [1.0, 2.0]}],
    }
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, cfg), "--out", str(out)]) == EXIT_DIVERGENCE
    report = json.loads((out / "report.json").read_text())
    assert report["overall"] == "divergence_before_analysis_window"
    assert report["simulation"]["blowup"]["time"] < 1.0


def test_divergence_inside_window_is_a_finding(tmp_path):
    cfg = {
        "model": {"spacetime": "desitter", "n": 1, "mu": 1.0, "lambda": 1.0, "form": "u_form",
                  "gamma": {"coef": -1.0, "rate": 0.0}},
        "grid": {"L": 4.0, "dx": 0.05},
        "time": {"t_end": 2.0, "dt": 0.025},
        "initial": {"phi": [{"kind": "compact_bump", "amplitude": 10.0, "width": 1.0}]},
        "analyses": [{"type": "signedness", "window": [0.05, 2.0]}],
    }
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, cfg), "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "report.json").read_text())["simulation"]["blowup"] is not None


def test_reproducible_csvs_and_thread_invariance(tmp_path):
    path = write(tmp_path, BUMP_RUN)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", path, "--out", str(a), "--threads", "1"]) == EXIT_OK
    assert main(["run", path, "--out", str(b), "--threads", "4"]) == EXIT_OK
    for name in ("trajectory.csv", "moments.csv", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_threads_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("BUBBLE_LAB_THREADS", "3")
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, {"analyses": [{"type": "lifespan"}]}), "--out",
                 str(out)]) == EXIT_OK


@pytest.mark.parametrize("suite", ["exact", "kernel", "specfun"])
def test_verify_suites(tmp_path, suite):
    out = tmp_path / suite
    assert main(["verify", suite, "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["pass"] is True
    assert report["suite"] == suite


def test_verify_exact_flags_convention(tmp_path):
    main(["verify", "exact", "--out", str(tmp_path)])
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["annihilating_convention"] == "resolved"
    assert report["printed_convention_annihilates_only_at_mu_sqrt2"] is True


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bubble_lab.cli", "verify", "specfun", "--out",
                           str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "verify specfun: pass" in proc.stdout


def test_parse_config_rejects_eigenmode_profile_on_line():
    cfg = {
        "model": {"spacetime": "minkowski", "n": 1, "mu": 1.0, "lambda": 1.0},
        "grid": {"L": 4.0, "dx": 0.05},
        "time": {"t_end": 1.0, "dt": 0.025},
        "initial": {"phi": [{"kind": "eigenmode_profile", "mode": {"n": 0, "k": 1}}]},
    }
    parsed = parse_config(cfg)
    with pytest.raises(ConfigError):
        parsed.initial_fields()
