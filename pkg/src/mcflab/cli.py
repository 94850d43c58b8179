"""Command-line driver.

Subcommands::

    mcflab run CONFIG                 flow run -> series.csv, summary.json
    mcflab verify-inequalities [SPEC] randomised inequality checks -> inequalities.json
    mcflab residual CONFIG            refinement ladder of the ln*Omega residual -> residual.csv, residual.json
    mcflab report DIR                 re-derive the flags of a finished run from its series.csv

Outputs go to ``output.directory`` of the config, overridden by the
``MCFLAB_OUTPUT_DIR`` environment variable, overridden by ``--output-dir``.
``MCFLAB_NUMBA=0`` selects the pure-numpy kernels.

Exit codes: 0 success, 2 config or validation error, 3 numerical failure,
4 monitor or check failure (including runs that stop with
GraphConditionLost or StepLimit).
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import os
import sys

import numpy as np

from . import config as cfgmod
from . import monitors
from .errors import ConfigError, StepError
from .flow_engine import Status, run, step
from .inequality_oracle import (
    SampleDomain,
    check_I_geq_deltaA2,
    check_II_lower_bound,
    check_II_nonneg,
    check_thm2_termI,
    probe_thm2_termII,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_FLAG = 4

SUMMARY_SCHEMA = "mcflab.run-summary/1"
ORACLE_SCHEMA = "mcflab.inequalities/1"
RESIDUAL_SCHEMA = "mcflab.residual/1"
RATIO_BAND = (3.2, 4.8)
RESIDUAL_FLOOR = 1e-10

CHECKS = {
    "check_I_geq_deltaA2": check_I_geq_deltaA2,
    "check_II_nonneg": check_II_nonneg,
    "check_II_lower_bound": check_II_lower_bound,
    "check_thm2_termI": check_thm2_termI,
    "probe_thm2_termII": probe_thm2_termII,
}

DEFAULT_ORACLE_SPEC = {
    "checks": [
        {"check": "check_I_geq_deltaA2",
         "domain": {"n": 2, "m": 2, "lambda_constraint": "DetRatioBelow", "epsilon": 0.5, "seed": 42}},
        {"check": "check_II_nonneg",
         "domain": {"n": 3, "m": 3, "lambda_constraint": "PairProductBelow", "epsilon": 0.01,
                    "k1": 1.0, "k2": -1.0, "seed": 7}},
        {"check": "check_II_nonneg",
         "domain": {"n": 3, "m": 3, "lambda_constraint": "PairProductBelow", "epsilon": 0.01,
                    "k1": 1.0, "k2": 0.5, "seed": 7}},
        {"check": "check_II_lower_bound",
         "domain": {"n": 2, "m": 2, "lambda_constraint": "DetRatioBelow", "epsilon": 0.5,
                    "k1": 1.0, "k2": -1.0, "seed": 5}},
        {"check": "check_II_lower_bound",
         "domain": {"n": 2, "m": 2, "lambda_constraint": "DetRatioBelow", "epsilon": 0.5,
                    "k1": 1.0, "k2": 1.0, "seed": 5}},
        {"check": "check_thm2_termI",
         "domain": {"n": 3, "m": 3, "lambda_constraint": "Thm2NullConfig", "k1": 1.0, "k2": 0.0, "seed": 11}},
        {"check": "check_thm2_termI",
         "domain": {"n": 3, "m": 3, "lambda_constraint": "Thm2NullConfig", "k1": 1.0, "k2": 1.0, "seed": 11}},
        {"check": "probe_thm2_termII",
         "domain": {"n": 2, "m": 2, "lambda_constraint": "Thm2NullConfig", "seed": 3}},
    ],
    "sample_count": 1_000_000,
}


# ------------------------------------------------------------------ helpers


def _output_dir(configured: str, override: str = None) -> str:
    path = override or os.environ.get("MCFLAB_OUTPUT_DIR") or configured
    os.makedirs(path, exist_ok=True)
    return path


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".17g")


def _json_clean(obj):
    """Replace non-finite floats by ``None`` so the output is strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_clean(obj.item())
    return obj


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(_json_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n")


def write_series_csv(path, series: monitors.MonitorSeries):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(monitors.COLUMNS)
        for row in series.rows():
            w.writerow([_fmt(v) for v in row])


def read_series_csv(path, n: int = 2) -> monitors.MonitorSeries:
    series = monitors.MonitorSeries(n=n)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != monitors.COLUMNS:
            raise ConfigError(f"unexpected series columns {header}", field="series.csv")
        for row in reader:
            for name, cell in zip(monitors.COLUMNS, row):
                getattr(series, name).append(float(cell) if cell != "" else math.nan)
    return series


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------- run


def execute_run(cfg: cfgmod.RunConfigFile):
    """Run the configured flow; returns ``(flow_run, series, summary, exit_code)``."""
    state = cfgmod.build_state(cfg)
    fc = cfgmod.flow_config(cfg)
    mon = cfg.tree["monitors"]
    rec = monitors.Recorder(state.n, state.grid.min_spacing, residual=mon["residual"])
    fr = run(state, fc, rec)
    series = rec.series
    k1, k2 = state.domain.curvature, state.target.curvature
    flags, tolerances, decay = monitors.evaluate_flags(
        series, k1, k2,
        monotone_tol=mon["monotone_tol"], area_tol=mon["area_tol"], decay_tol=mon["decay_tol"],
        decay_branch=mon["decay_branch"], min_omega_below=fc.stop_rules.min_omega_below,
    )
    ok_status = fr.status in (Status.REACHED_T_END, Status.CONVERGED)
    flags_ok = all(f["passed"] for f in flags.values() if f["applicable"])
    code = EXIT_OK if ok_status and flags_ok else EXIT_FLAG
    summary = {
        "schema": SUMMARY_SCHEMA,
        "status": fr.status.value,
        "exit_code": code,
        "final_time": fr.final.time,
        "final_sup_lambda1": series.sup_lambda[-1],
        "min_omega_over_run": float(min(series.min_omega)),
        "steps": fr.steps,
        "dt_max": fr.dt_max,
        "dt_min": fr.dt_min,
        "curvatures": {"k1": k1, "k2": k2},
        "n": state.n,
        "flags": flags,
        "tolerances": tolerances,
        "decay": decay,
        "config": cfgmod.canonical(cfg),
    }
    return fr, series, summary, code


def cmd_run(args) -> int:
    try:
        cfg = cfgmod.load(args.config)
        outdir = _output_dir(cfg.tree["output"]["directory"], args.output_dir)
        fr, series, summary, code = execute_run(cfg)
    except ConfigError as exc:
        _err(exc)
        return EXIT_CONFIG
    except StepError as exc:
        _err(f"numerical failure at step {exc.step_index}, grid point {exc.point_index}: {exc}")
        return EXIT_NUMERIC
    formats = cfg.tree["output"]["formats"]
    if "csv" in formats:
        write_series_csv(os.path.join(outdir, "series.csv"), series)
    if "json" in formats:
        _write_json(os.path.join(outdir, "summary.json"), summary)
    print(f"status {summary['status']}  t={summary['final_time']:.6g}  steps={summary['steps']}  "
          f"min*Omega={summary['min_omega_over_run']:.9g}  exit {code}")
    for name, f in summary["flags"].items():
        state = "n/a" if not f["applicable"] else ("pass" if f["passed"] else f"FAIL at t={f['first_failure_time']}")
        print(f"  {name}: {state}")
    return code


# -------------------------------------------------------- verify-inequalities


def load_oracle_spec(path=None, samples=None) -> list:
    if path is None:
        spec = copy.deepcopy(DEFAULT_ORACLE_SPEC)
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
            spec = json.loads(text)
        except OSError as exc:
            raise ConfigError(f"cannot read spec: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(spec, dict) or not isinstance(spec.get("checks"), list) or not spec["checks"]:
        raise ConfigError("spec needs a non-empty 'checks' list", field="checks")
    default_count = spec.get("sample_count", DEFAULT_ORACLE_SPEC["sample_count"])
    jobs = []
    for i, item in enumerate(spec["checks"]):
        name = item.get("check")
        if name not in CHECKS:
            raise ConfigError(f"unknown check {name!r}", field=f"checks[{i}].check")
        dom = dict(item.get("domain", {}))
        dom.setdefault("sample_count", default_count)
        if samples is not None:
            dom["sample_count"] = samples
        try:
            jobs.append((name, SampleDomain(**dom)))
        except TypeError as exc:
            raise ConfigError(str(exc), field=f"checks[{i}].domain") from None
        except ConfigError as exc:
            raise ConfigError(exc.message, field=f"checks[{i}].domain.{exc.field}") from None
    return jobs


def verify_inequalities(jobs) -> tuple:
    records = []
    ok = True
    for name, dom in jobs:
        rep = CHECKS[name](dom)
        rec = rep.as_dict()
        rec["check"] = name
        rec["domain"] = dict(dom.__dict__)
        records.append(rec)
        if rep.asserted and not rep.passed:
            ok = False
    return records, ok


def cmd_verify(args) -> int:
    try:
        jobs = load_oracle_spec(args.spec, args.samples)
        outdir = _output_dir("out", args.output_dir)
    except ConfigError as exc:
        _err(exc)
        return EXIT_CONFIG
    records, ok = verify_inequalities(jobs)
    _write_json(os.path.join(outdir, "inequalities.json"),
                {"schema": ORACLE_SCHEMA, "passed": ok, "records": records})
    for r in records:
        tag = "probe" if not r["asserted"] else ("pass" if r["passed"] else "FAIL")
        print(f"{r['name']:32s} checked={r['checked']:<9d} worst={r['worst_margin']:.3e} "
              f"violations={r['violation_count']:<7d} identity_err={r['identity_max_err']:.1e} {tag}")
    return EXIT_OK if ok else EXIT_FLAG


# ----------------------------------------------------------------- residual


def _scaled_resolution(res, factor):
    return [r * factor for r in res]


def residual_ladder(cfg: cfgmod.RunConfigFile):
    """Residual at ``residual.t_end`` on ``levels`` grids, each twice as fine as the last.

    Fixed ``dt`` shrinks by 4 per level (``dt ~ h^2``); ``"auto"`` does so by itself.
    """
    levels = cfg.tree["residual"]["levels"]
    if levels < 2:
        raise ConfigError("the ladder needs at least two levels", field="residual.levels")
    t_res = cfg.tree["residual"]["t_end"]
    base = cfg.tree["domain"]["resolution"]
    rows = []
    for lev in range(levels):
        f = 2**lev
        res = _scaled_resolution(base, f)
        state = cfgmod.build_state(cfg, res)
        dt = cfg.tree["flow"]["dt"]
        dt = dt if dt == "auto" else dt / (f * f)
        fc = cfgmod.flow_config(cfg, dt=dt, t_end=t_res, output_stride=10**9,
                                stop_rules={"sup_lambda_below": None, "min_omega_below": None,
                                            "max_steps": cfg.tree["flow"]["stop_rules"]["max_steps"]})
        fr = run(state, fc)
        s0 = fr.final
        s1 = step(s0, fc)
        s2 = step(s1, fc, dt=s1.time - s0.time)
        r = monitors.residual_linf(s0, s1, s2)
        rows.append({"resolution": res, "h": s0.grid.min_spacing, "dt": s1.time - s0.time,
                     "time": s1.time, "residual_linf": r})
    for a, b in zip(rows, rows[1:]):
        b["ratio"] = a["residual_linf"] / b["residual_linf"] if b["residual_linf"] > 0 else math.inf
    rows[0]["ratio"] = None
    below_floor = all(r["residual_linf"] < RESIDUAL_FLOOR for r in rows)
    ratios = [r["ratio"] for r in rows[1:]]
    passed = below_floor or all(RATIO_BAND[0] <= q <= RATIO_BAND[1] for q in ratios)
    return rows, passed, below_floor


def cmd_residual(args) -> int:
    try:
        cfg = cfgmod.load(args.config)
        outdir = _output_dir(cfg.tree["output"]["directory"], args.output_dir)
        rows, passed, below_floor = residual_ladder(cfg)
    except ConfigError as exc:
        _err(exc)
        return EXIT_CONFIG
    except StepError as exc:
        _err(f"numerical failure at step {exc.step_index}, grid point {exc.point_index}: {exc}")
        return EXIT_NUMERIC
    with open(os.path.join(outdir, "residual.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["resolution", "h", "dt", "time", "residual_linf", "ratio"])
        for r in rows:
            w.writerow(["x".join(str(v) for v in r["resolution"]), _fmt(r["h"]), _fmt(r["dt"]), _fmt(r["time"]),
                        _fmt(r["residual_linf"]), _fmt(r["ratio"])])
    _write_json(os.path.join(outdir, "residual.json"),
                {"schema": RESIDUAL_SCHEMA, "rows": rows, "passed": passed, "below_floor": below_floor,
                 "ratio_band": list(RATIO_BAND), "floor": RESIDUAL_FLOOR, "config": cfgmod.canonical(cfg)})
    for r in rows:
        ratio = "" if r["ratio"] is None else f"  ratio {r['ratio']:.3f}"
        print(f"{'x'.join(map(str, r['resolution'])):>10s}  residual {r['residual_linf']:.6e}{ratio}")
    if below_floor:
        print("all residuals below the floor; ratio test skipped")
    return EXIT_OK if passed else EXIT_FLAG


# ------------------------------------------------------------------- report


def recompute_flags(series_path, summary: dict) -> dict:
    """Flags from ``series.csv`` and the curvatures and tolerances stored in the summary."""
    series = read_series_csv(series_path, n=summary["n"])
    tol = summary["tolerances"]
    cfgm = summary["config"]["monitors"]
    flags, _, _ = monitors.evaluate_flags(
        series, summary["curvatures"]["k1"], summary["curvatures"]["k2"],
        monotone_tol=tol["monotone"], area_tol=tol["area"], decay_tol=tol["decay"],
        decay_branch=cfgm["decay_branch"],
        min_omega_below=summary["config"]["flow"]["stop_rules"]["min_omega_below"],
    )
    return _json_clean(flags)


def cmd_report(args) -> int:
    series_path = os.path.join(args.directory, "series.csv")
    summary_path = os.path.join(args.directory, "summary.json")
    try:
        with open(summary_path, encoding="utf-8") as fh:
            summary = json.load(fh)
        if summary.get("schema") != SUMMARY_SCHEMA:
            raise ConfigError(f"unknown summary schema {summary.get('schema')!r}", field="schema")
        flags = recompute_flags(series_path, summary)
    except (OSError, json.JSONDecodeError) as exc:
        _err(f"cannot read run outputs: {exc}")
        return EXIT_CONFIG
    except (ConfigError, KeyError) as exc:
        _err(exc)
        return EXIT_CONFIG
    consistent = flags == summary["flags"]
    print(f"run in {args.directory}: status {summary['status']}, final t={summary['final_time']:.6g}, "
          f"final sup lambda1={summary['final_sup_lambda1']:.6g}")
    if summary.get("decay"):
        d = summary["decay"]
        print(f"  decay branch {d['branch']}, c0={d['c0']:.6g}")
    for name, f in flags.items():
        state = "n/a" if not f["applicable"] else ("pass" if f["passed"] else f"FAIL at t={f['first_failure_time']}")
        print(f"  {name}: {state}")
    print("  flags consistent with series.csv" if consistent else "  flags DIFFER from summary.json")
    if not consistent:
        return EXIT_FLAG
    return summary["exit_code"]


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcflab", description="Graphical mean curvature flow laboratory")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a flow from a JSON config")
    r.add_argument("config")
    r.add_argument("--output-dir")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("verify-inequalities", help="randomised checks of the algebraic inequalities")
    v.add_argument("spec", nargs="?")
    v.add_argument("--samples", type=int, help="override sample_count of every check")
    v.add_argument("--output-dir")
    v.set_defaults(func=cmd_verify)
    s = sub.add_parser("residual", help="refinement ladder of the evolution-equation residual")
    s.add_argument("config")
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_residual)
    rep = sub.add_parser("report", help="re-derive flags of a finished run")
    rep.add_argument("directory")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
