import csv
import filecmp
import json
import math

import numpy as np
import pytest

from mcflab import cli
from mcflab import config as cfgmod
from mcflab import model_spaces as ms
from mcflab.errors import ConfigError
from mcflab.pointwise_geometry import MapState, geometry_field

CONSTANT = {
    "domain": {"kind": "torus", "resolution": [16, 16]},
    "target": {"kind": "torus"},
    "initial_map": {"family": "Constant", "params": {}},
    "flow": {"dt": 0.01, "t_end": 1.0, "output_stride": 10},
}

CAP = {
    "domain": {"kind": "sphere", "resolution": [32]},
    "target": {"kind": "sphere"},
    "mode": "Equivariant",
    "initial_map": {"family": "Cap", "params": {"a": 0.5}},
    "flow": {"t_end": 50.0, "output_stride": 500, "stop_rules": {"sup_lambda_below": 1e-3}},
}


def _write(tmp_path, tree, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(tree, indent=2), encoding="utf-8")
    return str(p)


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


# ------------------------------------------------------------------- config


def test_canonical_round_trip():
    cfg = cfgmod.parse(json.dumps(CAP))
    text = cfgmod.dumps(cfg)
    again = cfgmod.parse(text)
    assert again == cfg and cfgmod.dumps(again) == text
    assert cfg.tree["flow"]["cfl_safety"] == 0.25 and cfg.tree["output"]["stride"] == 500


def test_resolution_below_minimum_has_diagnostics():
    tree = json.loads(json.dumps(CONSTANT))
    tree["domain"]["resolution"] = [4, 4]
    text = json.dumps(tree, indent=2)
    with pytest.raises(ConfigError) as info:
        cfgmod.parse(text)
    err = info.value
    assert err.field.startswith("domain") and err.line == text.splitlines().index('    "resolution": [') + 1


def test_invalid_json_reports_line():
    with pytest.raises(ConfigError) as info:
        cfgmod.parse('{\n  "domain": ,\n}')
    assert info.value.line == 2


def test_unknown_family():
    tree = dict(CONSTANT, initial_map={"family": "Spiral"})
    with pytest.raises(ConfigError) as info:
        cfgmod.parse(json.dumps(tree))
    assert "initial_map" in info.value.field


# ---------------------------------------------------------------- rescaling


def test_cor51_halves_singular_values():
    s = cfgmod.normalize_metrics("cor51", L=2.0)
    assert s.lambda_factor == pytest.approx(0.5) and s.pair_factor == pytest.approx(0.25)
    T = ms.flat_torus()
    st = MapState(T, T, ms.grid(T, 16), np.zeros((2, 16, 16)), winding=np.array([[2, 0], [0, 1]]))
    lam0 = geometry_field(st).lam
    lam1 = geometry_field(cfgmod.apply_rescale(st, s)).lam
    assert np.allclose(lam1, lam0 / 2, rtol=1e-12)
    assert (lam1[:, 0] * lam1[:, 1]).max() <= 0.5


def test_cor52_scales_two_dilation():
    s = cfgmod.normalize_metrics("cor52", k1=4.0, k2=1.0)
    assert 3.9 * s.pair_factor == pytest.approx(3.9 / 4) and 3.9 * s.pair_factor < 1
    same = cfgmod.normalize_metrics("cor52", k1=1.0, k2=1.0)
    assert same.lambda_factor == 1.0 and same.pair_factor == 1.0


def test_cor52_on_spheres():
    S = ms.round_sphere()
    g = ms.grid(S, 32, equivariant=True)
    st = MapState(S, S, g, 0.5 * np.sin(g.axes[0]))
    out = cfgmod.apply_rescale(st, cfgmod.normalize_metrics("cor52", k1=4.0, k2=1.0))
    assert out.domain.curvature == pytest.approx(0.25) and out.target.curvature == pytest.approx(1.0)
    assert np.allclose(geometry_field(out).lam, geometry_field(st).lam / 2, rtol=1e-12)


# ---------------------------------------------------------------------- run


def test_run_constant(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", _write(tmp_path, CONSTANT), "--output-dir", str(out)]) == 0
    rows = _rows(out / "series.csv")
    assert rows[0] == list(cli.monitors.COLUMNS)
    assert len(rows) - 1 == round(1.0 / (0.01 * 10)) + 1
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "ReachedTEnd" and summary["exit_code"] == 0
    assert rows[1][-1] == ""  # no residual at the first snapshot


def test_run_cap_converges(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", _write(tmp_path, CAP), "--output-dir", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "Converged" and summary["decay"]["branch"] == "b"
    assert all(f["passed"] for f in summary["flags"].values() if f["applicable"])


def test_run_exit_codes(tmp_path, capsys):
    bad = json.loads(json.dumps(CONSTANT))
    bad["domain"]["resolution"] = [4, 4]
    assert cli.main(["run", _write(tmp_path, bad), "--output-dir", str(tmp_path / "a")]) == 2
    assert "resolution" in capsys.readouterr().err

    blow = {"domain": {"kind": "torus", "resolution": [16, 16]}, "target": {"kind": "torus"},
            "initial_map": {"family": "LinearPlusWave", "params": {"amplitudes": [1.0, 0.0]}},
            "flow": {"dt": 5.0, "t_end": 1e4}}
    with np.errstate(all="ignore"):
        assert cli.main(["run", _write(tmp_path, blow), "--output-dir", str(tmp_path / "b")]) == 3
    assert "grid point" in capsys.readouterr().err

    lost = dict(blow, flow={"t_end": 1.0, "stop_rules": {"min_omega_below": 0.99}})
    assert cli.main(["run", _write(tmp_path, lost), "--output-dir", str(tmp_path / "c")]) == 4


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MCFLAB_OUTPUT_DIR", str(tmp_path / "env"))
    assert cli.main(["run", _write(tmp_path, CONSTANT)]) == 0
    assert (tmp_path / "env" / "series.csv").exists()


def test_run_deterministic(tmp_path):
    tree = {"domain": {"kind": "torus", "resolution": [16, 16]}, "target": {"kind": "torus"},
            "initial_map": {"family": "RandomFourier", "params": {"seed": 4, "max_mode": 2, "amplitude": 0.4}},
            "flow": {"t_end": 0.5, "output_stride": 5}}
    path = _write(tmp_path, tree)
    for d in ("a", "b"):
        assert cli.main(["run", path, "--output-dir", str(tmp_path / d)]) == 0
    for f in ("series.csv", "summary.json"):
        assert filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False)


# ------------------------------------------------------------------- report


def test_report_recomputes_flags(tmp_path):
    out = tmp_path / "out"
    cli.main(["run", _write(tmp_path, CAP), "--output-dir", str(out)])
    assert cli.main(["report", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    summary["flags"]["decay"]["passed"] = False
    (out / "summary.json").write_text(json.dumps(summary))
    assert cli.main(["report", str(out)]) == 4
    assert cli.main(["report", str(tmp_path / "missing")]) == 2


def test_series_csv_reader_round_trip(tmp_path):
    out = tmp_path / "out"
    cli.main(["run", _write(tmp_path, CAP), "--output-dir", str(out)])
    s = cli.read_series_csv(out / "series.csv")
    summary = json.loads((out / "summary.json").read_text())
    assert min(s.min_omega) == summary["min_omega_over_run"]
    assert math.isnan(s.residual_linf[0]) and math.isnan(s.residual_linf[-1])


# ------------------------------------------------------- verify-inequalities


def _oracle_spec(tmp_path, checks, samples=2000):
    return _write(tmp_path, {"checks": checks, "sample_count": samples}, "spec.json")


def test_verify_zero_epsilon_is_config_error(tmp_path):
    spec = _oracle_spec(tmp_path, [{"check": "check_I_geq_deltaA2",
                                    "domain": {"n": 2, "m": 2, "lambda_constraint": "DetRatioBelow",
                                               "epsilon": 0.0}}])
    assert cli.main(["verify-inequalities", spec, "--output-dir", str(tmp_path)]) == 2


def test_verify_passing_spec(tmp_path):
    checks = [c for c in cli.DEFAULT_ORACLE_SPEC["checks"]
              if not (c["check"] == "check_thm2_termI" and c["domain"]["k2"] > 0)]
    spec = _oracle_spec(tmp_path, checks)
    assert cli.main(["verify-inequalities", spec, "--output-dir", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "inequalities.json").read_text())
    assert data["passed"] and all(math.isfinite(r["worst_margin"]) for r in data["records"])


def test_verify_ten_samples_records_margins(tmp_path):
    # the default spec includes the Theorem 2 chain with the faulty step, which stays red
    code = cli.main(["verify-inequalities", "--samples", "10", "--output-dir", str(tmp_path)])
    data = json.loads((tmp_path / "inequalities.json").read_text())
    failing = [r["name"] for r in data["records"] if r["asserted"] and not r["passed"]]
    assert failing == ["check_thm2_termI[b]"] and code == 4
    assert all(r["worst_margin"] is not None for r in data["records"])


# ------------------------------------------------------------------ residual


def test_residual_stationary_below_floor(tmp_path):
    tree = dict(CONSTANT, residual={"levels": 2, "t_end": 0.02})
    assert cli.main(["residual", _write(tmp_path, tree), "--output-dir", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "residual.json").read_text())
    assert data["below_floor"]


def test_residual_single_level_rejected(tmp_path):
    tree = dict(CONSTANT, residual={"levels": 1})
    assert cli.main(["residual", _write(tmp_path, tree), "--output-dir", str(tmp_path)]) == 2
