"""Command-line interface.

Subcommands: synthesize, simulate, reachable, check-spectral, sweep.
Every successful run writes a machine-readable JSON document or CSV.

Exit codes: 0 success, 2 usage/configuration error, 3 numerical failure
(singular system, divergence), 4 infeasible request (target not in the
image of B, target off the reachable chart).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import Divergence, IntegrationBudgetExceeded, SingularSystem, TargetOffChart
from .flow import IntegratorConfig, StepSchedule, flow_forward, simulate_controlled
from .harness import (
    desk_config_experiment1,
    desk_config_experiment2,
    load_sweep_config,
    paper_scale_config_experiment1,
    paper_scale_config_experiment2,
    run_experiment_1,
    run_experiment_2,
    summarize,
    write_csv,
    write_run_metadata,
)
from .linalg import eigenvalues
from .model import canonical_input_matrix, drift_jacobian, load_model
from .synthesis import (
    METHOD_BACKWARD,
    METHOD_FORWARD,
    METHOD_LINEAR,
    METHOD_LINEARIZED,
    SynthesisRequest,
    reachable_chart,
    reachable_control,
    spectral_condition,
    synthesize,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_INFEASIBLE = 4

_METHOD_BY_FLAG = {
    "linear": METHOD_LINEAR,
    "forward": METHOD_FORWARD,
    "backward": METHOD_BACKWARD,
    "linearized": METHOD_LINEARIZED,
}


def _parse_vector(inline: str | None, file_path: str | None, name: str) -> np.ndarray:
    """Vector from an inline comma-separated string or a one-column file.

    Inline takes precedence over the file form.
    """
    if inline is not None:
        try:
            return np.array([float(tok) for tok in inline.split(",") if tok.strip() != ""])
        except ValueError as exc:
            raise ValueError(f"cannot parse inline vector for {name}: {exc}") from exc
    if file_path is not None:
        values = []
        with open(file_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    values.append(float(line))
        return np.array(values)
    raise ValueError(f"missing {name}: give --{name} or --{name}-file")


def _write_doc(doc: dict, out_path: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _integrator(args) -> IntegratorConfig:
    return IntegratorConfig(rel_tol=args.rtol, abs_tol=args.atol)


def _add_tolerance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rtol", type=float, default=1e-13, help="relative integration tolerance")
    p.add_argument("--atol", type=float, default=1e-14, help="absolute integration tolerance")


def _rel_error(endpoint, x1, x0) -> float:
    denom = float(np.linalg.norm(np.asarray(x1) - np.asarray(x0)))
    err = float(np.linalg.norm(np.asarray(endpoint) - np.asarray(x1)))
    return err / denom if denom > 0.0 else err


def cmd_synthesize(args) -> int:
    model = load_model(args.model)
    x0 = _parse_vector(args.x0, args.x0_file, "x0")
    x1 = _parse_vector(args.x1, args.x1_file, "x1")
    cfg = _integrator(args)
    req = SynthesisRequest(
        model=model, x0=x0, x1=x1, T=args.T,
        method=_METHOD_BY_FLAG[args.method], tau=args.tau,
    )
    result = synthesize(req, cfg)
    sim = simulate_controlled(model, x0, result.input, args.T, cfg)
    doc = {
        "method": req.method,
        "T": args.T,
        "not_in_image": result.not_in_image,
        "residual": result.residual,
        "spectral_margin": result.spectral_margin,
        "predicted_endpoint": sim.terminal_state.tolist(),
        "rel_endpoint_error": _rel_error(sim.terminal_state, x1, x0),
        "diagnostics": {
            "rcond": result.diagnostics.get("rcond"),
            "warnings": result.diagnostics.get("warnings", []),
        },
    }
    if isinstance(result.input, StepSchedule):
        doc["schedule"] = {
            "horizon": result.input.horizon,
            "switch_time": result.input.switch_time,
            "u_before": result.input.values[0].tolist(),
            "u_after": result.input.values[1].tolist(),
        }
    else:
        doc["u"] = result.input.tolist()
    _write_doc(doc, args.out)
    return EXIT_INFEASIBLE if result.not_in_image else EXIT_OK


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    x0 = _parse_vector(args.x0, args.x0_file, "x0")
    cfg = _integrator(args)
    if args.schedule is not None:
        with open(args.schedule, "r", encoding="utf-8") as fh:
            sched_doc = json.load(fh)
        schedule = StepSchedule(
            horizon=float(sched_doc["horizon"]),
            switch_time=float(sched_doc["switch_time"]),
            values=(np.asarray(sched_doc["u_before"], dtype=float),
                    np.asarray(sched_doc["u_after"], dtype=float)),
        )
        if abs(schedule.horizon - args.T) > 1e-12 * max(1.0, args.T):
            raise ValueError(
                f"schedule horizon {schedule.horizon} does not match --T {args.T}"
            )
        result = simulate_controlled(model, x0, schedule, args.T, cfg)
    elif args.u is not None or args.u_file is not None:
        u = _parse_vector(args.u, args.u_file, "u")
        result = simulate_controlled(model, x0, u, args.T, cfg)
    else:
        result = flow_forward(model, x0, args.T, cfg)
    doc = {
        "T": args.T,
        "terminal_state": result.terminal_state.tolist(),
        "steps_accepted": result.steps_accepted,
        "steps_rejected": result.steps_rejected,
        "rhs_evaluations": result.rhs_evaluations,
    }
    _write_doc(doc, args.out)
    return EXIT_OK


def cmd_reachable(args) -> int:
    model = load_model(args.model)
    x0 = _parse_vector(args.x0, args.x0_file, "x0")
    cfg = _integrator(args)
    d = model.dim
    k = args.k
    if not 1 <= k <= d:
        raise ValueError(f"--k must be in [1, {d}], got {k}")
    doc: dict = {"T": args.T, "k": k, "d": d}

    fully_actuated = k == d
    if fully_actuated:
        anchor = flow_forward(model.with_input_matrix(np.eye(d)), x0, args.T,
                              cfg).terminal_state
        doc["anchor"] = anchor.tolist()
        doc["basis"] = "full"
        doc["note"] = "k = d: the chart spans the whole state space"
    else:
        chart_model = model.with_input_matrix(canonical_input_matrix(d, k))
        chart = reachable_chart(chart_model, x0, args.T, cfg)
        anchor = chart.anchor
        doc["anchor"] = anchor.tolist()
        doc["basis"] = chart.basis.basis.tolist()
        doc["spectral_margin"] = chart.spectral_margin

    samples_path = None
    if args.samples > 0:
        rng = np.random.Generator(np.random.Philox(key=args.seed))
        chart_model = model.with_input_matrix(
            np.eye(d) if fully_actuated else canonical_input_matrix(d, k))
        rows = []
        for _ in range(args.samples):
            xi = rng.normal(size=k) * np.sqrt(args.sigma2)
            if fully_actuated:
                x1 = anchor + xi
                req = SynthesisRequest(model=chart_model, x0=x0, x1=x1, T=args.T,
                                       method=METHOD_FORWARD)
                u = synthesize(req, cfg).input
            else:
                x1 = anchor + chart.basis.basis @ xi
                u = reachable_control(chart, x1)
            sim = simulate_controlled(chart_model, x0, u, args.T, cfg)
            rows.append((xi, x1, u, _rel_error(sim.terminal_state, x1, x0)))
        samples_path = str(args.out) + ".samples.csv"
        header = (
            [f"xi_{i}" for i in range(k)]
            + [f"x1_{i}" for i in range(d)]
            + [f"u_{i}" for i in range(k)]
            + ["rel_endpoint_error"]
        )
        with open(samples_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for xi, x1, u, err in rows:
                vals = list(xi) + list(x1) + list(u) + [err]
                fh.write(",".join(f"{v:.17g}" for v in vals) + "\n")
        doc["samples_csv"] = samples_path
        doc["n_samples"] = args.samples
    _write_doc(doc, args.out)
    return EXIT_OK


def cmd_check_spectral(args) -> int:
    model = load_model(args.model)
    cfg = _integrator(args)
    if args.at is not None:
        point = _parse_vector(args.at, None, "at")
        jac = drift_jacobian(model, point)
        where = "given point"
    elif args.at_flow is not None:
        x0 = _parse_vector(args.at_flow, None, "at-flow")
        endpoint = flow_forward(model, x0, args.T, cfg).terminal_state
        jac = drift_jacobian(model, endpoint)
        where = "free-flow endpoint"
    else:
        jac = -np.diag(model.decay) + model.W
        where = "linear part (-D + W)"
    ok, margin = spectral_condition(jac, args.T)
    eigs = eigenvalues(jac)
    doc = {
        "T": args.T,
        "jacobian_at": where,
        "eigenvalues": [[float(e.real), float(e.imag)] for e in eigs],
        "margin": margin,
        "ok": bool(ok),
    }
    _write_doc(doc, args.out)
    sys.stdout.write(
        f"spectral condition {'ok' if ok else 'VIOLATED'} at T={args.T:g} "
        f"(margin {margin:.6e}, Jacobian at {where})\n"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.config is not None:
        cfg1 = load_sweep_config(args.config)
        cfg2 = cfg1 if cfg1.k_values else None
    elif args.paper_scale:
        cfg1 = paper_scale_config_experiment1()
        cfg2 = paper_scale_config_experiment2()
    else:
        cfg1 = desk_config_experiment1()
        cfg2 = desk_config_experiment2()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    records1 = run_experiment_1(cfg1, workers=args.workers)
    write_csv(records1, out_dir / "experiment1.csv")
    write_run_metadata(cfg1, out_dir / "experiment1_metadata.json", "experiment1")
    sys.stdout.write(f"experiment 1: {len(records1)} trials -> {out_dir / 'experiment1.csv'}\n")
    sys.stdout.write("family                  T         method            median_err    ok/total\n")
    for family, T, method, median, n_ok, n_total in summarize(records1):
        sys.stdout.write(
            f"{family:<22}{T:>8g}  {method:<18}{median:>12.3e}  {n_ok:>5}/{n_total}\n"
        )

    if cfg2 is not None:
        records2 = run_experiment_2(cfg2, workers=args.workers)
        write_csv(records2, out_dir / "experiment2.csv")
        write_run_metadata(cfg2, out_dir / "experiment2_metadata.json", "experiment2")
        sys.stdout.write(
            f"experiment 2: {len(records2)} trials -> {out_dir / 'experiment2.csv'}\n"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rnn-constctl",
        description="Constant and step-function control synthesis for "
                    "continuous-time Hopfield-type recurrent networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="compute a steering input")
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--x0", help="initial state, comma separated")
    p.add_argument("--x0-file", help="initial state, one value per line")
    p.add_argument("--x1", help="target state, comma separated")
    p.add_argument("--x1-file", help="target state, one value per line")
    p.add_argument("--T", type=float, required=True, help="horizon")
    p.add_argument("--method", choices=sorted(_METHOD_BY_FLAG), required=True)
    p.add_argument("--tau", type=float, default=None,
                   help="step-function window; input is zero before T - tau")
    p.add_argument("--out", help="result JSON path (stdout when omitted)")
    _add_tolerance_flags(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="integrate the controlled network")
    p.add_argument("--model", required=True)
    p.add_argument("--x0", help="initial state, comma separated")
    p.add_argument("--x0-file")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--u", help="constant input, comma separated")
    p.add_argument("--u-file")
    p.add_argument("--schedule", help="step-schedule JSON file")
    p.add_argument("--out")
    _add_tolerance_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reachable", help="reachable-set chart for canonical actuation")
    p.add_argument("--model", required=True)
    p.add_argument("--x0", help="initial state, comma separated")
    p.add_argument("--x0-file")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--k", type=int, required=True,
                   help="number of directly actuated coordinates")
    p.add_argument("--sample", dest="samples", type=int, default=0,
                   help="number of on-chart targets to synthesize and simulate")
    p.add_argument("--sigma2", type=float, default=0.01,
                   help="variance of the on-chart offsets")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="chart JSON path")
    _add_tolerance_flags(p)
    p.set_defaults(func=cmd_reachable)

    p = sub.add_parser("check-spectral", help="eigenvalues vs the horizon lattice")
    p.add_argument("--model", required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--at", help="evaluate the Jacobian at this state")
    p.add_argument("--at-flow", help="evaluate the Jacobian at the flow endpoint from this state")
    p.add_argument("--out")
    _add_tolerance_flags(p)
    p.set_defaults(func=cmd_check_spectral)

    p = sub.add_parser("sweep", help="run the experiment sweeps, write CSVs")
    p.add_argument("config", nargs="?", help="sweep config JSON (desk defaults when omitted)")
    p.add_argument("--out-dir", required=True)
    scale = p.add_mutually_exclusive_group()
    scale.add_argument("--desk", action="store_true", help="desk-scale built-in config (default)")
    scale.add_argument("--paper-scale", action="store_true", help="full-scale built-in config")
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker threads (default: RNN_CONSTCTL_THREADS or logical cores)")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (SingularSystem, Divergence, IntegrationBudgetExceeded) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except TargetOffChart as exc:
        sys.stderr.write(f"infeasible: {exc}\n")
        return EXIT_INFEASIBLE
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
