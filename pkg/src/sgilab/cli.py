"""Command-line scenario runner.

``sgilab <subcommand> --config FILE [--out DIR] [--seed N] [--format csv|json] [--quiet]``

Subcommands and the experiments they accept:

=============  ==========================================
simulate       simulate, jitter
scan           scan, single_kick, half_vs_full
optimize       optimize
fit            fit
feasibility    feasibility
selftest       (no config) runs the acceptance suite
=============  ==========================================

Exit status: 0 success, 1 selftest with failing criteria, 2 configuration
error, 3 numerical or field-domain failure. Errors are reported as one JSON
object on stderr.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import os
import platform
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import extract_lp, extract_lz, fit_gaussian_sine, fit_sine
from .errors import ConfigError, FieldDomainError, NumericalError
from .feasibility import feasibility_report, wire_evaluation_point
from .interferometer import (
    Jitter,
    build_timeline,
    delay_scan,
    fringe_scan,
    hd_contrast,
    jitter_monte_carlo,
    max_separation,
    phenomenological_contrast,
    relative_phase,
    run,
    run_batch,
)
from .magnetics import CalibratedAcceleration, RectWire, ThinWire
from .optimizer import OptimizationProblem, minimize_residuals, scan_reverse_pulse
from .scenario import (
    Scenario,
    ScenarioError,
    build_field,
    build_initial,
    build_macro_spec,
    build_timeline_from,
    parse_scenario,
    require,
)
from .wavepacket import coherence_scales

SUBCOMMAND_EXPERIMENTS = {
    "simulate": ("simulate", "jitter"),
    "scan": ("scan", "single_kick", "half_vs_full"),
    "optimize": ("optimize",),
    "fit": ("fit",),
    "feasibility": ("feasibility",),
}

TRAJECTORY_COLUMNS = ("t_s", "z1_m", "z2_m", "p1_kgms", "p2_kgms", "dz_m", "dp_kgms", "phase_rad")


# --- output helpers -----------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def _plain(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


class ArtifactWriter:
    """Writes series as CSV (header with units) or JSON, records every file."""

    def __init__(self, out_dir: Path, fmt: str):
        self.out_dir = out_dir
        self.fmt = fmt
        self.files: list[Path] = []

    def series(self, stem: str, columns, rows) -> Path:
        rows = np.asarray(rows, dtype=float)
        if self.fmt == "json":
            path = self.out_dir / f"{stem}.json"
            text = dumps_json({"columns": list(columns), "rows": rows.tolist()})
        else:
            path = self.out_dir / f"{stem}.csv"
            lines = [",".join(columns)]
            lines += [",".join(_fmt(v) for v in row) for row in rows]
            text = "\n".join(lines) + "\n"
        _atomic_write(path, text)
        self.files.append(path)
        return path

    def json(self, stem: str, obj) -> Path:
        path = self.out_dir / f"{stem}.json"
        _atomic_write(path, dumps_json(obj))
        self.files.append(path)
        return path

    def text(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        _atomic_write(path, text)
        self.files.append(path)
        return path


def _fit_dict(fit):
    return {
        "model": fit.model,
        "params": fit.params,
        "uncertainties": fit.uncertainties,
        "residual_rms": fit.residual_rms,
        "converged": fit.converged,
        "flags": list(fit.flags),
        "extras": fit.extras,
    }


def read_xy_csv(path: Path) -> np.ndarray:
    """First two numeric columns of a CSV; a non-numeric first row is a header."""
    rows = []
    for i, line in enumerate(path.read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        cells = [c.strip() for c in line.split(",")]
        try:
            rows.append([float(cells[0]), float(cells[1])])
        except (ValueError, IndexError):
            if i == 0:
                continue
            raise ConfigError(f"{path}: line {i + 1} is not numeric")
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return np.array(rows)


def _scan_grid(scenario: Scenario, default_points: int = 101):
    require(scenario, "scan.start", "scan.stop")
    n = scenario.get("scan.points", default_points)
    if n < 2:
        raise ScenarioError("bad_value", "scan.points must be at least 2", "scan.points")
    return np.linspace(scenario.get("scan.start"), scenario.get("scan.stop"), n)


# --- experiments ---------------------------------------------------------------------


def _exp_simulate(sc: Scenario, w: ArtifactWriter, cfg_dir: Path):
    tl = build_timeline_from(sc)
    initial = build_initial(sc)
    rec = run(tl, initial, samples_per_segment=sc.get("samples_per_segment", 1))
    b1, b2 = rec.branch1, rec.branch2
    rows = [
        (t, s1.z, s2.z, s1.p, s2.p, dz, dp, ph)
        for t, s1, s2, dz, dp, ph in zip(rec.times, b1, b2, rec.delta_z, rec.delta_p, rec.rel_phase)
    ]
    w.series("trajectory", TRAJECTORY_COLUMNS, rows)
    phi = np.linspace(0.0, 2.0 * np.pi, sc.get("phi.points", 73))
    w.series("fringe", ("phi_rad", "P1"), fringe_scan(tl, initial, phi))
    start = rec.initial
    dz_max, dp_max = max_separation(rec)
    summary = {
        "final_contrast": rec.final_contrast,
        "final_phase_rad": rec.final_phase,
        "dz_final_m": rec.delta_z[-1],
        "dp_final_kgms": rec.delta_p[-1],
        "dz_max_m": dz_max,
        "dp_max_kgms": dp_max,
        "overlap_final": rec.contrast[-1],
        "hd_contrast": hd_contrast(rec.delta_z[-1], rec.delta_p[-1], start.sigma_z, start.sigma_p),
        "phenomenological_contrast": phenomenological_contrast(
            rec.delta_z[-1], rec.delta_p[-1], coherence_scales(start)
        ),
    }
    try:
        poly = relative_phase(rec)
        summary["phase_polynomial"] = {"delay": poly.delay, "coefficients": poly.coefficients}
    except ConfigError:
        summary["phase_polynomial"] = None
    w.json("summary", summary)


def _exp_jitter(sc: Scenario, w: ArtifactWriter, cfg_dir: Path):
    tl = build_timeline_from(sc)
    initial = build_initial(sc)
    jit = Jitter(sc.get("jitter.current_rel_sigma", 0.0), sc.get("jitter.timing_sigma", 0.0))
    n = sc.get("jitter.shots", 200)
    phase_std, mean_c = jitter_monte_carlo(tl, jit, n, sc.seed, initial)
    single = run(tl, initial).final_contrast
    w.json(
        "jitter",
        {
            "phase_std_rad": phase_std,
            "mean_contrast": mean_c,
            "single_shot_contrast": single,
            "shots": n,
            "seed": sc.seed,
        },
    )


def _exp_scan(sc: Scenario, w: ArtifactWriter, cfg_dir: Path):
    require(sc, "scan.variable")
    var = sc.get("scan.variable")
    initial = build_initial(sc)
    grid = _scan_grid(sc)
    if var == "phi":
        tl = build_timeline_from(sc)
        w.series("fringe", ("phi_rad", "P1"), fringe_scan(tl, initial, grid))
        return
    if var == "Td":
        tl = build_timeline_from(sc)
        out = delay_scan(tl, initial, grid)
        readout = sc.get("readout_phase", 0.0)
        P1 = 0.5 + 0.5 * out["contrast"] * np.sin(readout + out["phase"])
        w.series("delay_scan", ("Td_s", "contrast", "phase_rad", "P1"), np.column_stack([grid, out["contrast"], out["phase"], P1]))
        return
    tl = build_timeline_from(sc)
    problem = OptimizationProblem(tl, initial, ("T23",), constraint="fixed_total_time")
    rows = scan_reverse_pulse(problem, (grid[0], grid[-1], len(grid)), sc.get("readout_phase"))
    w.series("reverse_pulse_scan", ("T23_s", "P1"), rows)
    fit = fit_gaussian_sine(rows, phase_degree=2)
    w.json("reverse_pulse_fit", {"fit": _fit_dict(fit), "envelope_peak_s": fit.params["x0"]})


def _exp_single_kick(sc: Scenario, w: ArtifactWriter, cfg_dir: Path):
    require(sc, "acceleration")
    a = sc.get("acceleration")
    if a <= 0:
        raise ScenarioError("bad_value", "single-kick scans need a positive acceleration", "acceleration")
    initial = build_initial(sc)
    dv = _scan_grid(sc)
    tls = [build_timeline("SingleKick", {"T1": v / a}, CalibratedAcceleration(a), gravity=sc.get("gravity", True)) for v in dv]
    out = run_batch(tls, initial)
    P1 = 0.5 + 0.5 * out["contrast"]  # readout aligned to the fringe peak at every point
    rows = np.column_stack([dv, P1, out["contrast"]])
    w.series("single_kick", ("dv_m_per_s", "P1", "contrast"), rows)
    est = extract_lp(rows[:, :2], tls[0].mass)
    w.json(
        "single_kick_fit",
        {
            "l_p_kgms": est.value,
            "l_p_over_m_m_per_s": est.value / tls[0].mass,
            "flagged": est.flagged,
            "reason": est.reason,
            "fit": _fit_dict(est.fit),
        },
    )


def _exp_half_vs_full(sc: Scenario, w: ArtifactWriter, cfg_dir: Path):
    require(sc, "T1")
    initial = build_initial(sc)
    td = _scan_grid(sc)
    T1 = sc.get("T1")
    T2 = sc.get("T2", T1)
    field = build_field(sc)
    gravity = sc.get("gravity", True)
    half = build_timeline("HalfLoop", {"T1": T1, "T2": T2, "Td0": sc.get("Td0", 0.0)}, field, gravity=gravity)
    full = build_timeline(
        sc.get("scheme", "CurrentInversionA"),
        {"T1": T1, "T2": T2, "T3": sc.get("T3", T2), "T4": sc.get("T4", T1), "Td0": sc.get("Td0", 0.0)},
        field,
        gravity=gravity,
    )
    h = delay_scan(half, initial, td, "Td1")
    f = delay_scan(full, initial, td, "both")
    cols = ("Td_s", "contrast", "phase_rad")
    w.series("half_loop", cols, np.column_stack([td, h["contrast"], h["phase"]]))
    w.series("full_loop", cols, np.column_stack([td, f["contrast"], f["phase"]]))
    fit = fit_gaussian_sine(np.column_stack([td, h["contrast"]]), phase_degree=0, fixed={"x0": 0.0, "c": 0.0})
    report = {"half_loop_envelope": _fit_dict(fit)}
    if isinstance(field, CalibratedAcceleration) and np.isfinite(fit.params["tau"]):
        report["l_z_from_tau_m"] = extract_lz(field.acceleration, T1, fit.params["tau"])
    report["full_loop_contrast_range"] = [float(np.min(f["contrast"])), float(np.max(f["contrast"]))]
    w.json("half_vs_full_fit", report)


def _exp_optimize(sc: Scenario, w: ArtifactWriter, cfg_dir: Path):
    require(sc, "optimize.free")
    tl = build_timeline_from(sc)
    problem = OptimizationProblem(
        tl,
        build_initial(sc),
        tuple(sc.get("optimize.free")),
        constraint=sc.get("optimize.constraint", "none"),
        objective=sc.get("optimize.objective", "HDPenalty"),
    )
    res = minimize_residuals(problem, grid_points=sc.get("optimize.grid_points", 5))
    w.json(
        "optimize",
        {
            "params_s": res.params,
            "J": res.J,
            "dz_final_m": res.dz_final,
            "dp_final_kgms": res.dp_final,
            "grid_min_J": res.grid_min,
            "flagged": res.flagged,
            "durations_s": res.timeline.durations(),
        },
    )


def _exp_fit(sc: Scenario, w: ArtifactWriter, cfg_dir: Path):
    require(sc, "fit.input")
    path = Path(sc.get("fit.input"))
    if not path.is_absolute():
        path = cfg_dir / path
    if not path.exists():
        raise ScenarioError("bad_value", f"fit input {str(path)!r} not found", "fit.input")
    data = read_xy_csv(path)
    model = sc.get("fit.model", "sine")
    if model == "sine":
        fit = fit_sine(data)
    else:
        fixed = {"x0": sc.get("fit.center")} if "fit.center" in sc.parameters else None
        fit = fit_gaussian_sine(data, phase_degree=sc.get("fit.phase_degree", 1), fixed=fixed)
    w.json("fit", _fit_dict(fit))


def _exp_feasibility(sc: Scenario, w: ArtifactWriter, cfg_dir: Path):
    spec = build_macro_spec(sc)
    if "field" in sc.parameters:
        wire = build_field(sc)
        if not isinstance(wire, (RectWire, ThinWire)):
            raise ScenarioError("bad_value", "feasibility needs a rect_wire or thin_wire field", "field")
    else:
        wire = RectWire(1.0, 1e-6, 1e-6, 0.5e-6)
    T_list = [q.value for q in sc.parameters.get("feasibility.T_list", [])] or [1e-4, 1e-3, 1e-2, 1e-1]
    distance = sc.get("feasibility.distance", 1e-6)
    report = feasibility_report(spec, wire, distance, T_list)
    out = report.as_dict()
    out["evaluation_height_m"] = wire_evaluation_point(wire, distance)
    out["spin_moment_muB"] = spec.spin_moment
    w.json("feasibility", out)
    w.text("feasibility.txt", report.table() + "\n")


EXPERIMENT_RUNNERS = {
    "simulate": _exp_simulate,
    "jitter": _exp_jitter,
    "scan": _exp_scan,
    "single_kick": _exp_single_kick,
    "half_vs_full": _exp_half_vs_full,
    "optimize": _exp_optimize,
    "fit": _exp_fit,
    "feasibility": _exp_feasibility,
}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def execute(scenario: Scenario, out_dir, cfg_dir=".", fmt: str | None = None) -> list[Path]:
    """Run ``scenario``, write its data files and a manifest; returns the data files."""
    out_dir = Path(out_dir)
    writer = ArtifactWriter(out_dir, fmt or scenario.output_format)
    t0 = time.perf_counter()
    EXPERIMENT_RUNNERS[scenario.experiment](scenario, writer, Path(cfg_dir))
    wall = time.perf_counter() - t0
    manifest = {
        "scenario": scenario.as_dict(),
        "seed": scenario.seed,
        "versions": {
            "sgilab": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "wall_time_s": wall,
        "artifacts": {p.name: _sha256(p) for p in writer.files},
    }
    _atomic_write(out_dir / "manifest.json", dumps_json(manifest))
    return list(writer.files)


# --- entry point --------------------------------------------------------------------------


def _error(kind: str, message: str, code: int, extra: dict | None = None) -> int:
    payload = {"error": kind, "message": message, "exit_code": code}
    if extra:
        payload.update(extra)
    sys.stderr.write(json.dumps(_plain(payload), sort_keys=True) + "\n")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgilab", description="Full-loop Stern-Gerlach interferometer laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*SUBCOMMAND_EXPERIMENTS, "selftest"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=name != "selftest")
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--quiet", action="store_true")
    return parser


def _selftest(args) -> int:
    from .acceptance import run_all

    out = args.out or Path("selftest_artifacts")
    results = run_all(out_dir=out, seed=0 if args.seed is None else args.seed)
    if not args.quiet:
        for r in results:
            print(r.line())
        n_pass = sum(r.passed for r in results)
        print(f"{n_pass}/{len(results)} criteria passed")
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return _selftest(args)
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioError("io", f"cannot read {args.config}: {exc.strerror}") from exc
        scenario = parse_scenario(text)
        if args.seed is not None:
            scenario = Scenario(
                scenario.name, scenario.experiment, scenario.parameters, scenario.output_format, scenario.output_path, args.seed
            )
        if scenario.experiment not in SUBCOMMAND_EXPERIMENTS[args.command]:
            raise ScenarioError(
                "wrong_subcommand",
                f"experiment {scenario.experiment!r} is not run by '{args.command}'"
                f" (expected one of {', '.join(SUBCOMMAND_EXPERIMENTS[args.command])})",
                "experiment",
            )
        out_dir = args.out or (args.config.parent / scenario.output_path)
        files = execute(scenario, out_dir, cfg_dir=args.config.parent, fmt=args.format)
        if not args.quiet:
            for f in files:
                print(f)
        return 0
    except ScenarioError as exc:
        return _error(exc.kind, str(exc), 2, {"key": exc.key, "line": exc.line, "column": exc.col})
    except ConfigError as exc:
        return _error("config", str(exc), 2)
    except (NumericalError, FieldDomainError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return _error("numerical", str(exc), 3)


if __name__ == "__main__":
    sys.exit(main())
