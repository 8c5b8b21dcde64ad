"""Command-line front end: run, sweep, analyze, plot, preset.

Exit codes: 0 success, 2 configuration/schema error, 3 theorem-hypothesis
violation raised by the analysis layer, 4 the run was declared
``expect = "converge"`` but diverged.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, svgplot
from .config import ConfigError, ExperimentConfig, parse_config
from .core import HyperParams, OptimizerKind, RunStatus, Trajectory, run
from .io import (
    SchemaError,
    read_trajectory_csv,
    trajectory_from_columns,
    write_json,
    write_trajectory_csv,
)
from .losses import QuadraticLoss, SingleNeuronInit
from .presets import PRESETS, preset
from .sweep import read_sweep_csv, run_sweep, write_sweep_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_DIVERGED = 4

ANALYSES = ("phases", "trap", "descent", "bound", "travel", "scalar_fact", "gd_limit")

# which optimizer each analysis speaks about, used when none is given
_DEFAULT_KIND = {
    "phases": OptimizerKind.SAM,
    "trap": OptimizerKind.USAM,
    "descent": OptimizerKind.SAM,
    "bound": OptimizerKind.SAM,
    "travel": OptimizerKind.USAM,
    "scalar_fact": OptimizerKind.SAM,
    "gd_limit": OptimizerKind.GD,
}


def _need(params: dict, key: str) -> float:
    if key not in params:
        raise ConfigError(f"analysis parameter {key!r} is required")
    return float(params[key])


def _init_from(params: dict, traj: Trajectory, eta: float) -> SingleNeuronInit:
    x0 = float(params.get("x0", traj.iterates[0, 0]))
    y0 = float(params.get("y0", traj.iterates[0, 1]))
    return SingleNeuronInit(x0=x0, y0=y0, eta=eta)


def dispatch_analysis(name: str, traj: Trajectory, params: dict) -> dict:
    """Run one named analysis over a trajectory and return a JSON-ready dict.

    ``params`` supplies whatever the trajectory itself cannot carry: the
    smoothness profile, the scalar-loss constant c, tolerances."""
    hp = traj.hyper
    if name == "phases":
        init = _init_from(params, traj, hp.eta)
        report = analysis.detect_phases(traj, init, c=float(params.get("c", 1.0)))
        return report.to_dict()
    if name == "trap":
        init = _init_from(params, traj, hp.eta)
        return analysis.detect_trap(traj, hp, init).to_dict()
    if name == "descent":
        profile = _profile(params)
        residuals = analysis.sam_descent_residual(traj, profile, hp)
        max_residual = float(np.max(residuals))
        return {
            "max_residual": max_residual,
            "steps": int(len(residuals)),
            "passed": max_residual <= 1e-10,
        }
    if name == "bound":
        profile = _profile(params)
        loss_min = float(params.get("loss_min", 0.0))
        gaps = traj.losses - loss_min
        excess = [
            float(gap - analysis.sam_loss_bound(profile, hp, float(gaps[0]), t))
            for t, gap in enumerate(gaps)
        ]
        max_excess = max(excess)
        return {"max_excess": max_excess, "dominates": max_excess <= 1e-10}
    if name == "travel":
        profile = _profile(params)
        loss_min = float(params.get("loss_min", 0.0))
        gap0 = float(traj.losses[0] - loss_min)
        bound = analysis.travel_bound(profile, hp, gap0)
        steps = np.diff(traj.iterates, axis=0)
        measured = float(np.sum(np.linalg.norm(steps, axis=1)))
        out = bound.to_dict()
        out["measured_travel"] = measured
        out["within_rigorous"] = measured <= bound.rigorous + 1e-10
        return out
    if name == "scalar_fact":
        x0 = float(params.get("x0", traj.iterates[0, 0]))
        y0 = float(params.get("y0", traj.iterates[0, 1]))
        report = analysis.scalar_fact_verdicts(traj, hp, x0, y0)
        report["violations"] = [[int(t), clause] for t, clause in report["violations"]]
        return report
    if name == "gd_limit":
        init = _init_from(params, traj, hp.eta)
        grad_tol = float(params.get("grad_tol", 1e-10))
        y_inf_sq = analysis.gd_limit_measure(traj, init, grad_tol=grad_tol)
        return {
            "y_inf_sq": y_inf_sq,
            "bracket": analysis.gd_limit_bracket(init),
        }
    raise ConfigError(f"unknown analysis {name!r}; available: {', '.join(ANALYSES)}")


def _profile(params: dict):
    from .losses import SmoothnessProfile

    beta = _need(params, "beta")
    mu = float(params.get("mu", params.get("alpha", 0.0)))
    alpha = float(params.get("alpha", 0.0))
    return SmoothnessProfile(alpha=alpha, beta=beta, mu=mu)


def _analysis_params_for_run(cfg: ExperimentConfig, loss, w0) -> dict:
    params: dict = {}
    if isinstance(loss, QuadraticLoss):
        profile = loss.smoothness_profile()
        params.update(alpha=profile.alpha, mu=profile.mu, beta=profile.beta)
    if w0.shape == (2,):
        params.update(x0=float(w0[0]), y0=float(w0[1]))
    return params


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if cfg.is_sweep:
        raise ConfigError("config has a [sweep] section; use `samlab sweep`")
    if args.seed is not None:
        cfg.init_seed = args.seed
    loss = cfg.build_loss()
    w0 = cfg.build_init(loss)
    hp = HyperParams(eta=cfg.eta, rho=cfg.rho)
    params = _analysis_params_for_run(cfg, loss, w0)
    for name in cfg.analyses:
        if name not in ANALYSES:
            raise ConfigError(f"run.analyses: unknown analysis {name!r}")

    results = []
    for kind in cfg.optimizers:
        traj = run(loss, kind, w0, hp, budget=cfg.budget,
                   blowup_radius=cfg.blowup_radius, stride=cfg.stride)
        results.append((kind, traj))

    reports = {}
    for kind, traj in results:
        entry = {}
        for name in cfg.analyses:
            if _DEFAULT_KIND[name] is not kind:
                continue
            entry[name] = dispatch_analysis(name, traj, params)
        if entry:
            reports[kind.value] = entry

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary: dict = {"eta": cfg.eta, "rho": cfg.rho, "budget": cfg.budget, "runs": {}}
    for kind, traj in results:
        csv_path = out_dir / f"trajectory_{kind.value}.csv"
        write_trajectory_csv(csv_path, traj, loss=loss)
        steps_run = cfg.budget if traj.status is RunStatus.COMPLETED else traj.status_step
        summary["runs"][kind.value] = {
            "status": traj.status.value,
            "final_loss": float(traj.losses[-1]),
            "steps_run": int(steps_run),
            "csv": csv_path.name,
        }
    if reports:
        summary["analyses"] = reports
    write_json(out_dir / "summary.json", summary)
    print(f"wrote {len(results)} trajectory file(s) and summary.json to {out_dir}")

    if cfg.expect == "converge" and any(
        traj.status is RunStatus.DIVERGED for _, traj in results
    ):
        print("error: run declared expect=converge but diverged", file=sys.stderr)
        return EXIT_DIVERGED
    if cfg.expect == "diverge" and all(
        traj.status is not RunStatus.DIVERGED for _, traj in results
    ):
        print("error: run declared expect=diverge but no run diverged", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    if not cfg.is_sweep:
        raise ConfigError("config has no [sweep] section; use `samlab run`")
    if args.seed is not None:
        cfg.init_seed = args.seed
    rows = run_sweep(cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "sweep.csv"
    write_sweep_csv(path, rows)
    print(f"wrote {len(rows)} sweep rows to {path}")
    return EXIT_OK


def _parse_params(pairs) -> dict:
    params = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"--param expects key=value, got {pair!r}")
        key, _, raw = pair.partition("=")
        params[key.strip()] = raw.strip()
    return params


def _cmd_analyze(args) -> int:
    params = _parse_params(args.param)
    data = read_trajectory_csv(args.csv)
    kind_name = params.pop("kind", _DEFAULT_KIND[args.analysis].value
                           if args.analysis in _DEFAULT_KIND else "sam")
    try:
        kind = OptimizerKind(kind_name)
    except ValueError:
        raise ConfigError(f"unknown optimizer kind {kind_name!r}") from None
    hp = HyperParams(eta=_need(params, "eta"), rho=float(params.get("rho", 0.0)))
    traj = trajectory_from_columns(data, kind, hp)
    report = dispatch_analysis(args.analysis, traj, params)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"analysis_{args.analysis}.json"
        write_json(path, report)
        print(f"wrote {path}")
    else:
        print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_plot(args) -> int:
    if args.kind == "stability_heatmap":
        if len(args.csv) != 1:
            raise ConfigError("stability_heatmap takes exactly one sweep CSV")
        try:
            rows = read_sweep_csv(args.csv[0])
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        params = _parse_params(args.param)
        if "optimizer" in params:
            rows = [r for r in rows if r["optimizer"] == params["optimizer"]]
        svgplot.stability_heatmap(rows, args.out, title=args.title or "stability")
        print(f"wrote {args.out}")
        return EXIT_OK

    series = []
    for path in args.csv:
        data = read_trajectory_csv(path)
        label = Path(path).stem
        if args.kind == "loss_curves":
            series.append((label, data["t"], data["loss"]))
        else:  # xy_trajectory
            if "x" not in data or "y" not in data:
                raise SchemaError(f"{path}: xy_trajectory needs x,y columns")
            series.append((label, data["x"], data["y"]))
    if args.kind == "loss_curves":
        svgplot.loss_curves(series, args.out, log=args.log, title=args.title or "loss")
    else:
        svgplot.xy_trajectory(series, args.out, title=args.title or "trajectory")
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_preset(args) -> int:
    cfg = preset(args.name)
    text = cfg.to_toml()
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{args.name}.toml"
        path.write_text(text, encoding="utf-8")
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="samlab",
        description="GD/SAM/USAM trajectory lab: run, sweep, analyze, plot.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one config, write trajectory CSVs + summary")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=".")
    p_run.add_argument("--seed", type=int, default=None, help="override run.init_seed")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run an (eta, rho) grid, write sweep.csv")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default=".")
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_an = sub.add_parser("analyze", help="evaluate a named analysis over a trajectory CSV")
    p_an.add_argument("csv")
    p_an.add_argument("analysis", choices=ANALYSES)
    p_an.add_argument("--param", action="append", metavar="KEY=VALUE",
                      help="analysis parameter (eta is required; also rho, beta, c, ...)")
    p_an.add_argument("--out", default=None)
    p_an.set_defaults(func=_cmd_analyze)

    p_plot = sub.add_parser("plot", help="render CSVs to a deterministic SVG")
    p_plot.add_argument("csv", nargs="+")
    p_plot.add_argument("--kind", required=True,
                        choices=("loss_curves", "xy_trajectory", "stability_heatmap"))
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("--log", action="store_true", help="log-scale loss axis")
    p_plot.add_argument("--title", default=None)
    p_plot.add_argument("--param", action="append", metavar="KEY=VALUE")
    p_plot.set_defaults(func=_cmd_plot)

    p_preset = sub.add_parser("preset", help="emit a named preset config as TOML")
    p_preset.add_argument("name", choices=sorted(PRESETS))
    p_preset.add_argument("--out", default=None)
    p_preset.set_defaults(func=_cmd_preset)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SchemaError, svgplot.PlotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except analysis.HypothesisError as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS


if __name__ == "__main__":
    sys.exit(main())
