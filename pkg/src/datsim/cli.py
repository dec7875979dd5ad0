"""Command line interface: run scenarios, check gains, benchmark backends.

Exit codes: 0 success, 1 model property failure (validate-model), 2 scenario
validation hard error, 3 divergence during integration.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import accel, metrics
from .control_direct import validate_gains_direct
from .control_estimator import validate_gains_est
from .dynamics import EULER_LAGRANGE, verify_properties
from .errors import DivergenceError, ScenarioError, UnboundedReferenceError
from .scenario import Scenario, dump_scenario, parse_scenario_text
from .signals import reference_bounds
from .simulator import integrate

EXIT_OK = 0
EXIT_MODEL_FAIL = 1
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="datsim",
        description="Distributed average tracking simulator for heterogeneous "
        "multi-agent networks.",
    )
    sub = parser.add_subparsers(required=True)

    run = sub.add_parser("run", help="simulate a scenario and write trace/metrics CSVs")
    _scenario_args(run)
    run.add_argument("--out", required=True, help="output directory")
    run.set_defaults(func=_cmd_run)

    check = sub.add_parser("check-gains", help="print the gain report without running")
    _scenario_args(check)
    check.set_defaults(func=_cmd_check_gains)

    vm = sub.add_parser(
        "validate-model", help="check P1-P3 for every Euler-Lagrange model"
    )
    _scenario_args(vm)
    vm.add_argument("--samples", type=int, default=1000)
    vm.add_argument("--seed", type=int, default=0)
    vm.set_defaults(func=_cmd_validate_model)

    bench = sub.add_parser(
        "bench", help="time the numba and numpy kernel backends on one scenario"
    )
    _scenario_args(bench)
    bench.add_argument("--out", default=None, help="directory for the two runs")
    bench.set_defaults(func=_cmd_bench)

    sweep = sub.add_parser("sweep", help="run several scenarios concurrently")
    sweep.add_argument("scenarios", nargs="+", help="scenario files")
    sweep.add_argument("--out", required=True, help="root output directory")
    sweep.add_argument("--jobs", type=int, default=None)
    sweep.set_defaults(func=_cmd_sweep)

    return parser


def _scenario_args(sub) -> None:
    sub.add_argument("scenario", help="scenario file path")
    sub.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="PATH=VALUE",
        help="override a scenario field by dotted path, e.g. --set sim.h=5e-4",
    )


def _load(args) -> Scenario:
    path = Path(args.scenario)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    return parse_scenario_text(text, name=path.stem, overrides=args.overrides)


def gain_report(scenario: Scenario):
    if scenario.algorithm == "direct":
        try:
            bounds = reference_bounds(scenario.references)
        except UnboundedReferenceError:
            bounds = None
        return validate_gains_direct(scenario.gains, bounds)
    return validate_gains_est(scenario.gains)


def _cmd_run(args) -> int:
    return run_scenario(_load(args), args.out)


def run_scenario(scenario: Scenario, out_dir) -> int:
    """Simulate one scenario, write all artifacts, return the exit status."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    report = gain_report(scenario)
    (out / "validation.txt").write_text(report.format() + "\n")
    (out / "scenario_normalized.yaml").write_text(dump_scenario(scenario))
    for line in report.format().splitlines():
        print(line)

    info = {
        "backend": accel.backend_name(),
        "n_steps": scenario.sim.n_steps,
        "status": "ok",
    }
    _warm_kernels(scenario)
    t0 = time.perf_counter()
    try:
        trace = integrate(scenario)
    except DivergenceError as exc:
        info.update(status="divergence", blowup_time=exc.time,
                    wall_seconds=time.perf_counter() - t0)
        (out / "run_info.json").write_text(json.dumps(info, indent=2))
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    info["wall_seconds"] = time.perf_counter() - t0
    info["n_samples"] = trace.n_samples
    info["fingerprint"] = trace.fingerprint
    (out / "run_info.json").write_text(json.dumps(info, indent=2))

    write_trace_csv(trace, out / "trace.csv")
    write_metrics_csv(trace, scenario, out / "metrics.csv")

    err = metrics.tracking_error(trace, scenario.references)
    print(
        f"completed {scenario.sim.n_steps} steps in {info['wall_seconds']:.2f} s "
        f"({info['backend']} backend)"
    )
    print(
        f"final max tracking error {float(np.max(err[-1])):.4g}; "
        f"steady (last 20%) {metrics.steady_state_error(trace.t, np.max(err, axis=1)):.4g}"
    )
    print(f"outputs in {out}")
    return EXIT_OK


def _warm_kernels(scenario) -> None:
    # a two-step run triggers kernel compilation / cache loading so the
    # reported wall time measures the integration itself
    from .simulator import SimConfig

    cfg = scenario.sim
    try:
        integrate(scenario, SimConfig(h=cfg.h, t_final=2 * cfg.h, stride=1,
                                      scheme=cfg.scheme, eps=cfg.eps))
    except DivergenceError:
        pass


def _cmd_check_gains(args) -> int:
    scenario = _load(args)
    print(gain_report(scenario).format())
    return EXIT_OK


def _cmd_validate_model(args) -> int:
    scenario = _load(args)
    any_el = False
    all_ok = True
    for idx, kind in enumerate(scenario.kinds):
        if kind.kind != EULER_LAGRANGE:
            continue
        any_el = True
        report = verify_properties(
            kind.model, kind.model.theta, sample_count=args.samples, rng_seed=args.seed
        )
        print(f"agent {idx + 1}:")
        print("  " + report.format().replace("\n", "\n  "))
        all_ok = all_ok and report.all_ok
    if not any_el:
        print("scenario has no Euler-Lagrange agents; nothing to validate")
    return EXIT_OK if all_ok else EXIT_MODEL_FAIL


def _cmd_bench(args) -> int:
    import tempfile

    out_root = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="datsim-bench-"))
    out_root.mkdir(parents=True, exist_ok=True)
    results = {}
    for backend in ("numba", "numpy"):
        out = out_root / backend
        cmd = [sys.executable, "-m", "datsim.cli", "run", args.scenario, "--out", str(out)]
        for setting in args.overrides:
            cmd += ["--set", setting]
        env = dict(os.environ, DATSIM_BACKEND=backend)
        t0 = time.perf_counter()
        proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
        wall = time.perf_counter() - t0
        if proc.returncode != 0:
            print(f"{backend}: failed (exit {proc.returncode})")
            print(proc.stderr.strip())
            results[backend] = None
            continue
        info = json.loads((out / "run_info.json").read_text())
        results[backend] = info
        print(
            f"{backend:5s}: integrate {info['wall_seconds']:8.3f} s "
            f"(process total {wall:.2f} s)"
        )
    if all(results.get(b) for b in ("numba", "numpy")):
        speedup = results["numpy"]["wall_seconds"] / results["numba"]["wall_seconds"]
        print(f"speedup: {speedup:.1f}x")
        diff = _max_trace_diff(out_root / "numba" / "trace.csv",
                               out_root / "numpy" / "trace.csv")
        print(f"max |trace difference| between backends: {diff:.3e}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    jobs = []
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        for path in args.scenarios:
            out = out_root / Path(path).stem
            jobs.append((path, pool.submit(_run_file, path, str(out))))
        worst = EXIT_OK
        for path, fut in jobs:
            code = fut.result()
            print(f"{path}: exit {code}")
            worst = max(worst, code)
    return worst


def _run_file(scenario_path: str, out_dir: str) -> int:
    return main(["run", scenario_path, "--out", out_dir])


# ---------------------------------------------------------------------------
# CSV output

def _fmt(value: float) -> str:
    return "" if np.isnan(value) else f"{value:.17g}"


def write_trace_csv(trace: metrics.Trace, path) -> None:
    """One row per (sample, agent); NaN state entries become empty cells.

    Header: ``t,agent,x0..,v0..,u0..,theta_hat0,theta_hat1,p0..,q0..``.
    """
    p = trace.dim
    header = (
        ["t", "agent"]
        + [f"x{d}" for d in range(p)]
        + [f"v{d}" for d in range(p)]
        + [f"u{d}" for d in range(p)]
        + ["theta_hat0", "theta_hat1"]
        + [f"p{d}" for d in range(p)]
        + [f"q{d}" for d in range(p)]
    )
    nan_block = np.full(p, np.nan)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(trace.n_samples):
            t_str = f"{trace.t[k]:.17g}"
            for idx in range(trace.n_agents):
                filt_p = trace.p[k, idx] if trace.p is not None else nan_block
                filt_q = trace.q[k, idx] if trace.q is not None else nan_block
                cells = np.concatenate(
                    (trace.x[k, idx], trace.v[k, idx], trace.u[k, idx],
                     trace.theta_hat[k, idx], filt_p, filt_q)
                )
                writer.writerow([t_str, idx + 1] + [_fmt(v) for v in cells])


def write_metrics_csv(trace: metrics.Trace, scenario: Scenario, path) -> None:
    """Per sample: one network-level row (empty agent cell), then agent rows.

    Columns: ``t,agent,tracking_error,estimation_error_p,estimation_error_q,
    consensus_error,S1_norm,S2_norm,V1,Ve,Vd``.
    """
    te = metrics.tracking_error(trace, scenario.references)
    ce = metrics.consensus_error_series(trace)
    s1, s2 = metrics.aggregate_sums(trace, scenario.references)
    s1_norm = np.linalg.norm(s1, axis=1)
    s2_norm = np.linalg.norm(s2, axis=1) if s2 is not None else None

    is_est = trace.algorithm == "estimator"
    if is_est:
        ep, eq = metrics.estimation_error(trace, scenario.references)
        mon = metrics.lyapunov_monitors(trace, scenario)
        ve_by_agent = dict(zip(mon.ve_agents, mon.ve.T))
        vd_by_agent = dict(zip(mon.vd_agents, mon.vd.T))

    header = ["t", "agent", "tracking_error", "estimation_error_p",
              "estimation_error_q", "consensus_error", "S1_norm", "S2_norm",
              "V1", "Ve", "Vd"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(trace.n_samples):
            t_str = f"{trace.t[k]:.17g}"
            writer.writerow(
                [t_str, "", "", "", "", _fmt(ce[k]), _fmt(s1_norm[k]),
                 _fmt(s2_norm[k]) if is_est else "",
                 _fmt(mon.v1[k]) if is_est else "", "", ""]
            )
            for idx in range(trace.n_agents):
                label = idx + 1
                row = [t_str, label, _fmt(te[k, idx])]
                if is_est:
                    row += [_fmt(ep[k, idx]), _fmt(eq[k, idx])]
                else:
                    row += ["", ""]
                row += ["", "", ""]
                if is_est and label in ve_by_agent:
                    row += ["", _fmt(ve_by_agent[label][k]), ""]
                elif is_est and label in vd_by_agent:
                    row += ["", "", _fmt(vd_by_agent[label][k])]
                else:
                    row += ["", "", ""]
                writer.writerow(row)


def _load_csv_numeric(path) -> list[list[float]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            rows.append([float(c) if c else np.nan for c in row[0:1] + row[2:]])
    return rows


def _max_trace_diff(path_a, path_b) -> float:
    a = _load_csv_numeric(path_a)
    b = _load_csv_numeric(path_b)
    if len(a) != len(b):
        return float("inf")
    arr_a = np.array(a)
    arr_b = np.array(b)
    both_nan = np.isnan(arr_a) & np.isnan(arr_b)
    diff = np.abs(arr_a - arr_b)
    diff[both_nan] = 0.0
    diff[np.isnan(diff)] = np.inf  # NaN on one side only
    return float(np.max(diff))


if __name__ == "__main__":
    sys.exit(main())
