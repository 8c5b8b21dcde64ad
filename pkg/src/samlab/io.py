"""Trajectory CSV and summary JSON emission.

CSV schema: header ``t,loss,grad_norm,status`` plus ``x,y`` for 2-D losses
and ``train_loss,test_error`` for sensing runs.  Floats are printed with 17
significant digits so that a written file reads back bit-for-bit.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .core import HyperParams, OptimizerKind, RunStatus, Trajectory


def fmt(x) -> str:
    """Float to text with 17 significant digits (lossless for float64)."""
    return format(float(x), ".17g")


class SchemaError(ValueError):
    """Trajectory CSV does not match the expected column layout."""


def write_trajectory_csv(path, traj: Trajectory, loss=None):
    """Write one trajectory.  ``loss`` is only consulted for sensing runs,
    where it supplies the per-iterate test error."""
    two_d = traj.iterates.shape[1] == 2
    sensing = loss is not None and hasattr(loss, "test_error")
    header = ["t", "loss", "grad_norm", "status"]
    if two_d:
        header += ["x", "y"]
    if sensing:
        header += ["train_loss", "test_error"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(traj)):
            row = [
                str(int(traj.step_indices[i])),
                fmt(traj.losses[i]),
                fmt(traj.grad_norms[i]),
                traj.status.value,
            ]
            if two_d:
                row += [fmt(traj.iterates[i, 0]), fmt(traj.iterates[i, 1])]
            if sensing:
                row += [fmt(traj.losses[i]), fmt(loss.test_error(traj.iterates[i]))]
            writer.writerow(row)


def read_trajectory_csv(path) -> dict:
    """Read a trajectory CSV into a dict of numpy columns plus ``status``."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = list(reader)
    required = ["t", "loss", "grad_norm", "status"]
    if header[: len(required)] != required:
        raise SchemaError(f"{path}: header must start with {required}, got {header}")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    cols = {name: [] for name in header}
    for row in rows:
        if len(row) != len(header):
            raise SchemaError(f"{path}: row width {len(row)} != header width {len(header)}")
        for name, cell in zip(header, row):
            cols[name].append(cell)
    out = {
        "t": np.array([int(v) for v in cols["t"]]),
        "loss": np.array([float(v) for v in cols["loss"]]),
        "grad_norm": np.array([float(v) for v in cols["grad_norm"]]),
        "status": cols["status"][-1],
    }
    for name in ("x", "y", "train_loss", "test_error"):
        if name in cols:
            out[name] = np.array([float(v) for v in cols[name]])
    return out


def trajectory_from_columns(data: dict, kind: OptimizerKind, hp: HyperParams) -> Trajectory:
    """Rebuild a Trajectory from CSV columns; requires x,y coordinates."""
    if "x" not in data or "y" not in data:
        raise SchemaError("trajectory CSV has no x,y columns; cannot rebuild iterates")
    steps = data["t"]
    diffs = np.diff(steps)
    stride = int(diffs[0]) if len(diffs) and np.all(diffs == diffs[0]) else 1
    status = RunStatus(data["status"])
    return Trajectory(
        iterates=np.column_stack([data["x"], data["y"]]),
        losses=data["loss"],
        grad_norms=data["grad_norm"],
        status=status,
        hyper=hp,
        kind=kind,
        status_step=int(steps[-1]) if status is not RunStatus.COMPLETED else None,
        stride=stride,
        step_indices=steps,
    )


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (RunStatus, OptimizerKind)):
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, payload: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
