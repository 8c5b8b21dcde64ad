"""Hyper-parameter sweep execution over (optimizer, eta, rho) grids.

Cells run in a thread pool (capped by the SAMLAB_THREADS env var) with no
shared mutable state; results are ordered deterministically (optimizers as
listed, then row-major over eta, then rho) before writing.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor

from .analysis import usam_quadratic_verdict
from .config import ExperimentConfig
from .core import HyperParams, OptimizerKind, RunStatus, run
from .io import fmt
from .losses import QuadraticLoss


def _worker_count() -> int:
    raw = os.environ.get("SAMLAB_THREADS", "")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"SAMLAB_THREADS must be an integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"SAMLAB_THREADS must be >= 1, got {n}")
        return n
    return min(8, os.cpu_count() or 1)


def _run_cell(loss, kind, w0, hp, cfg):
    traj = run(loss, kind, w0, hp, budget=cfg.budget,
               blowup_radius=cfg.blowup_radius, stride=max(cfg.stride, 1))
    steps_run = cfg.budget if traj.status is RunStatus.COMPLETED else traj.status_step
    verdict = "diverged" if traj.status is RunStatus.DIVERGED else "completed"
    return {
        "optimizer": kind.value,
        "eta": hp.eta,
        "rho": hp.rho,
        "verdict": verdict,
        "final_loss": float(traj.losses[-1]),
        "steps_run": int(steps_run),
        "status": traj.status.value,
    }


def run_sweep(cfg: ExperimentConfig) -> list:
    """Run every (optimizer, eta, rho) cell and return ordered result rows.

    For quadratic losses each GD/USAM row also carries the closed-form
    stability verdict and its margin for agreement checking (the prediction
    does not cover SAM, whose normalized perturbation leaves the stability
    threshold at the GD value)."""
    if not cfg.is_sweep:
        raise ValueError("config has no [sweep] section")
    loss = cfg.build_loss()
    w0 = cfg.build_init(loss)
    quadratic = isinstance(loss, QuadraticLoss)
    lam_max = float(loss.eigenvalues[0]) if quadratic else None

    cells = [
        (kind, HyperParams(eta=eta, rho=rho))
        for kind in cfg.optimizers
        for eta in cfg.etas
        for rho in cfg.rhos
    ]
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        rows = list(pool.map(lambda c: _run_cell(loss, c[0], w0, c[1], cfg), cells))

    if quadratic:
        for row, (kind, hp) in zip(rows, cells):
            if kind is OptimizerKind.SAM:
                row["predicted"] = ""
                row["margin"] = ""
            else:
                eff = hp if kind is OptimizerKind.USAM else HyperParams(eta=hp.eta, rho=0.0)
                v = usam_quadratic_verdict(eff, lam_max)
                row["predicted"] = "diverged" if v.diverges else "completed"
                row["margin"] = v.margin
    return rows


SWEEP_COLUMNS = ("optimizer", "eta", "rho", "verdict", "final_loss", "steps_run", "status")


def write_sweep_csv(path, rows: list):
    if not rows:
        raise ValueError("no sweep rows to write")
    header = list(SWEEP_COLUMNS)
    if "predicted" in rows[0]:
        header += ["predicted", "margin"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            out = []
            for name in header:
                val = row[name]
                out.append(fmt(val) if isinstance(val, float) else str(val))
            writer.writerow(out)


def read_sweep_csv(path) -> list:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no sweep rows")
    for row in rows:
        for key in ("eta", "rho", "final_loss"):
            row[key] = float(row[key])
        row["steps_run"] = int(row["steps_run"])
        if row.get("margin"):
            row["margin"] = float(row["margin"])
    return rows
