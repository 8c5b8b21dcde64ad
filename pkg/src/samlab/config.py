"""Experiment configuration: TOML parsing, validation, and serialization.

A config file has up to four sections:

    [loss]       kind = "quadratic" | "scalar_fact" | "single_neuron" | "sensing"
                 plus kind-specific keys (eigenvalues, scalar, d/r_true/r_over/m/seed)
    [optimizer]  kind = "gd" (or kinds = ["gd", "sam"]), eta, rho
    [run]        init or init_scale/init_seed, budget, stride, blowup_radius,
                 expect, analyses
    [sweep]      etas = [...], rhos = [...]  (presence makes the config a sweep)

Unknown keys anywhere are hard errors so that a typo in eta/rho names cannot
silently fall back to a default.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import OptimizerKind
from .losses import (
    SCALAR_LOSSES,
    MatrixSensingLoss,
    QuadraticLoss,
    ScalarFactorizationLoss,
    SingleNeuronLoss,
    gen_matrix_sensing,
)


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration; message names the field."""


LOSS_KINDS = ("quadratic", "scalar_fact", "single_neuron", "sensing")
EXPECT_VALUES = ("any", "converge", "diverge")

_LOSS_KEYS = {
    "quadratic": {"kind", "eigenvalues"},
    "scalar_fact": {"kind"},
    "single_neuron": {"kind", "scalar"},
    "sensing": {"kind", "d", "r_true", "r_over", "m", "seed"},
}
_OPTIMIZER_KEYS = {"kind", "kinds", "eta", "rho"}
_RUN_KEYS = {
    "init", "init_scale", "init_seed", "budget", "stride",
    "blowup_radius", "expect", "analyses",
}
_SWEEP_KEYS = {"etas", "rhos"}


@dataclass
class ExperimentConfig:
    """Validated experiment description; see the module docstring for the
    TOML surface it mirrors."""

    loss_kind: str
    loss_params: dict
    optimizers: list
    eta: float | None = None
    rho: float | None = None
    etas: list | None = None
    rhos: list | None = None
    init: np.ndarray | None = None
    init_scale: float | None = None
    init_seed: int = 0
    budget: int = 1000
    stride: int = 1
    blowup_radius: float | None = None
    expect: str = "any"
    analyses: list = field(default_factory=list)

    @property
    def is_sweep(self) -> bool:
        return self.etas is not None

    def build_loss(self):
        kind, p = self.loss_kind, self.loss_params
        if kind == "quadratic":
            return QuadraticLoss(p["eigenvalues"])
        if kind == "scalar_fact":
            return ScalarFactorizationLoss()
        if kind == "single_neuron":
            return SingleNeuronLoss(SCALAR_LOSSES[p["scalar"]])
        if kind == "sensing":
            inst = gen_matrix_sensing(
                d=p["d"], r_true=p["r_true"], r_over=p["r_over"],
                m=p["m"], seed=p["seed"],
            )
            return MatrixSensingLoss(inst)
        raise ConfigError(f"loss.kind: unknown kind {kind!r}")

    def build_init(self, loss) -> np.ndarray:
        if self.init is not None:
            w0 = np.asarray(self.init, dtype=float)
            dim = getattr(loss, "dim", None)
            if dim is not None and w0.shape != (dim,):
                raise ConfigError(
                    f"run.init: expected {dim} entries for this loss, got {w0.size}"
                )
            return w0
        if self.init_scale is None:
            raise ConfigError("run.init or run.init_scale is required")
        rng = np.random.default_rng(self.init_seed)
        return self.init_scale * rng.standard_normal(loss.dim)

    def to_toml(self) -> str:
        """Serialize back to the TOML surface parse_config accepts."""
        lines = ["[loss]", f'kind = "{self.loss_kind}"']
        for key, val in self.loss_params.items():
            lines.append(f"{key} = {_toml_value(val)}")
        lines += ["", "[optimizer]"]
        if len(self.optimizers) == 1:
            lines.append(f'kind = "{self.optimizers[0].value}"')
        else:
            names = ", ".join(f'"{k.value}"' for k in self.optimizers)
            lines.append(f"kinds = [{names}]")
        if self.eta is not None:
            lines.append(f"eta = {_toml_value(self.eta)}")
        if self.rho is not None:
            lines.append(f"rho = {_toml_value(self.rho)}")
        lines += ["", "[run]"]
        if self.init is not None:
            lines.append(f"init = {_toml_value(list(self.init))}")
        if self.init_scale is not None:
            lines.append(f"init_scale = {_toml_value(self.init_scale)}")
            lines.append(f"init_seed = {self.init_seed}")
        lines.append(f"budget = {self.budget}")
        if self.stride != 1:
            lines.append(f"stride = {self.stride}")
        if self.blowup_radius is not None:
            lines.append(f"blowup_radius = {_toml_value(self.blowup_radius)}")
        if self.expect != "any":
            lines.append(f'expect = "{self.expect}"')
        if self.analyses:
            names = ", ".join(f'"{a}"' for a in self.analyses)
            lines.append(f"analyses = [{names}]")
        if self.is_sweep:
            lines += ["", "[sweep]"]
            lines.append(f"etas = {_toml_value(self.etas)}")
            lines.append(f"rhos = {_toml_value(self.rhos)}")
        return "\n".join(lines) + "\n"


def _toml_value(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, np.integer):
        val = int(val)
    elif isinstance(val, np.floating):
        val = float(val)
    if isinstance(val, int):
        return str(val)
    if isinstance(val, float):
        if not math.isfinite(val):
            raise ConfigError(f"non-finite float {val} cannot be serialized")
        text = repr(val)
        return text if ("." in text or "e" in text) else text + ".0"
    if isinstance(val, str):
        return f'"{val}"'
    if isinstance(val, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_toml_value(v) for v in val) + "]"
    raise ConfigError(f"cannot serialize {type(val).__name__} to TOML")


def _reject_unknown(section: str, table: dict, allowed: set):
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(
            f"[{section}]: unknown key(s) {', '.join(unknown)}; allowed: "
            + ", ".join(sorted(allowed))
        )


def _number(section: str, table: dict, key: str, default=None, positive=False):
    if key not in table:
        return default
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{section}.{key}: expected a number, got {val!r}")
    val = float(val)
    if positive and not val > 0:
        raise ConfigError(f"{section}.{key}: must be positive, got {val}")
    return val


def _integer(section: str, table: dict, key: str, default=None, minimum=None):
    if key not in table:
        return default
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{section}.{key}: expected an integer, got {val!r}")
    if minimum is not None and val < minimum:
        raise ConfigError(f"{section}.{key}: must be >= {minimum}, got {val}")
    return val


def _number_list(section: str, table: dict, key: str):
    if key not in table:
        return None
    val = table[key]
    if not isinstance(val, list) or not val:
        raise ConfigError(f"{section}.{key}: expected a nonempty list of numbers")
    out = []
    for item in val:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ConfigError(f"{section}.{key}: expected numbers, got {item!r}")
        out.append(float(item))
    return out


def _parse_loss(table: dict) -> tuple:
    kind = table.get("kind")
    if kind not in LOSS_KINDS:
        raise ConfigError(f"loss.kind: expected one of {LOSS_KINDS}, got {kind!r}")
    _reject_unknown("loss", table, _LOSS_KEYS[kind])
    params: dict = {}
    if kind == "quadratic":
        eig = _number_list("loss", table, "eigenvalues")
        if eig is None:
            raise ConfigError("loss.eigenvalues is required for quadratic")
        params["eigenvalues"] = eig
    elif kind == "single_neuron":
        scalar = table.get("scalar")
        if scalar not in SCALAR_LOSSES:
            raise ConfigError(
                f"loss.scalar: expected one of {sorted(SCALAR_LOSSES)}, got {scalar!r}"
            )
        params["scalar"] = scalar
    elif kind == "sensing":
        for key in ("d", "r_true", "r_over", "m", "seed"):
            val = _integer("loss", table, key, minimum=0 if key == "seed" else 1)
            if val is None:
                raise ConfigError(f"loss.{key} is required for sensing")
            params[key] = val
    return kind, params


def _parse_optimizers(table: dict) -> list:
    if "kind" in table and "kinds" in table:
        raise ConfigError("optimizer: give either kind or kinds, not both")
    if "kind" in table:
        names = [table["kind"]]
    elif "kinds" in table:
        names = table["kinds"]
        if not isinstance(names, list) or not names:
            raise ConfigError("optimizer.kinds: expected a nonempty list")
    else:
        raise ConfigError("optimizer.kind (or kinds) is required")
    kinds = []
    valid = {k.value: k for k in OptimizerKind}
    for name in names:
        if name not in valid:
            raise ConfigError(
                f"optimizer.kind: expected one of {sorted(valid)}, got {name!r}"
            )
        kinds.append(valid[name])
    return kinds


def parse_config_text(text: str) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc
    _reject_unknown("top level", doc, {"loss", "optimizer", "run", "sweep"})
    for section in ("loss", "optimizer", "run"):
        if section not in doc:
            raise ConfigError(f"missing required section [{section}]")
        if not isinstance(doc[section], dict):
            raise ConfigError(f"[{section}] must be a table")

    loss_kind, loss_params = _parse_loss(doc["loss"])
    opt = doc["optimizer"]
    _reject_unknown("optimizer", opt, _OPTIMIZER_KEYS)
    optimizers = _parse_optimizers(opt)
    eta = _number("optimizer", opt, "eta", positive=True)
    rho = _number("optimizer", opt, "rho")
    if rho is not None and rho < 0:
        raise ConfigError(f"optimizer.rho: must be non-negative, got {rho}")

    run = doc["run"]
    _reject_unknown("run", run, _RUN_KEYS)
    init = None
    if "init" in run:
        init = np.asarray(_number_list("run", run, "init"), dtype=float)
    init_scale = _number("run", run, "init_scale", positive=True)
    if init is not None and init_scale is not None:
        raise ConfigError("run: give either init or init_scale, not both")
    budget = _integer("run", run, "budget", minimum=1)
    if budget is None:
        raise ConfigError("run.budget is required")
    expect = run.get("expect", "any")
    if expect not in EXPECT_VALUES:
        raise ConfigError(f"run.expect: expected one of {EXPECT_VALUES}, got {expect!r}")
    analyses = run.get("analyses", [])
    if not isinstance(analyses, list) or not all(isinstance(a, str) for a in analyses):
        raise ConfigError("run.analyses: expected a list of analysis names")

    etas = rhos = None
    if "sweep" in doc:
        sweep = doc["sweep"]
        _reject_unknown("sweep", sweep, _SWEEP_KEYS)
        etas = _number_list("sweep", sweep, "etas")
        rhos = _number_list("sweep", sweep, "rhos")
        if etas is None or rhos is None:
            raise ConfigError("sweep.etas and sweep.rhos are both required")
        for e in etas:
            if not e > 0:
                raise ConfigError(f"sweep.etas: must be positive, got {e}")
        for r in rhos:
            if r < 0:
                raise ConfigError(f"sweep.rhos: must be non-negative, got {r}")
    elif eta is None:
        raise ConfigError("optimizer.eta is required without a [sweep] section")

    return ExperimentConfig(
        loss_kind=loss_kind,
        loss_params=loss_params,
        optimizers=optimizers,
        eta=eta,
        rho=0.0 if (rho is None and eta is not None) else rho,
        etas=etas,
        rhos=rhos,
        init=init,
        init_scale=init_scale,
        init_seed=_integer("run", run, "init_seed", default=0, minimum=0),
        budget=budget,
        stride=_integer("run", run, "stride", default=1, minimum=1),
        blowup_radius=_number("run", run, "blowup_radius", positive=True),
        expect=expect,
        analyses=list(analyses),
    )


def parse_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)
