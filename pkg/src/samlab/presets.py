"""Named experiment presets.

Each preset returns a fully populated ExperimentConfig.  The sensing problem
sizes and initial scales are desk-scale choices that reproduce the qualitative
orderings (stability under normalization, drift after interpolation), not any
particular published axis values; the README's preset reference documents each
one.
"""

from __future__ import annotations

import math

import numpy as np

from .config import ExperimentConfig
from .core import OptimizerKind

GD = OptimizerKind.GD
SAM = OptimizerKind.SAM
USAM = OptimizerKind.USAM


def _fig1_stability() -> ExperimentConfig:
    # eta = 0.05; USAM loses stability inside rho <= 0.1 while SAM never does
    return ExperimentConfig(
        loss_kind="sensing",
        loss_params={"d": 20, "r_true": 3, "r_over": 20, "m": 300, "seed": 7},
        optimizers=[SAM, USAM],
        etas=[0.05],
        rhos=[0.001, 0.005, 0.01, 0.05, 0.1],
        init_scale=0.3,
        init_seed=0,
        budget=500,
    )


def _fig2_drift() -> ExperimentConfig:
    # under-determined instance (m < d(d+1)/2): zero train loss does not pin
    # down the recovery, so post-fit drift is visible in the test error
    return ExperimentConfig(
        loss_kind="sensing",
        loss_params={"d": 20, "r_true": 3, "r_over": 20, "m": 120, "seed": 3},
        optimizers=[GD, SAM],
        eta=0.005,
        rho=0.2,
        init_scale=0.3,
        init_seed=0,
        budget=10000,
        stride=10,
    )


def _fig4_trajectories() -> ExperimentConfig:
    return ExperimentConfig(
        loss_kind="single_neuron",
        loss_params={"scalar": "sqrt"},
        optimizers=[GD, SAM, USAM],
        eta=0.4,
        rho=0.1,
        init=np.array([2.0, math.sqrt(40.0)]),
        budget=1000,
    )


def _table1_limits() -> ExperimentConfig:
    # init with eta * (y0^2 - x0^2) = 1 at eta = 0.01
    return ExperimentConfig(
        loss_kind="single_neuron",
        loss_params={"scalar": "sqrt"},
        optimizers=[GD, SAM, USAM],
        eta=0.01,
        rho=0.1,
        init=np.array([math.sqrt(40.0), math.sqrt(140.0)]),
        budget=1_000_000,
    )


def _thmD_scalarfact() -> ExperimentConfig:
    # eta = 1/(x0^2 + y0^2); rho grid spans the SAM containment cases and the
    # USAM blowup regime rho >= 15 eta
    return ExperimentConfig(
        loss_kind="scalar_fact",
        loss_params={},
        optimizers=[SAM, USAM],
        etas=[0.01],
        rhos=[0.01, 0.05, 0.1, 0.15, 0.3, 0.5],
        init=np.array([6.0, 8.0]),
        budget=1_000_000,
    )


PRESETS = {
    "fig1_stability": _fig1_stability,
    "fig2_drift": _fig2_drift,
    "fig4_trajectories": _fig4_trajectories,
    "table1_limits": _table1_limits,
    "thmD_scalarfact": _thmD_scalarfact,
}


def preset(name: str) -> ExperimentConfig:
    try:
        builder = PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None
    return builder()
