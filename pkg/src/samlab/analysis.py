"""Closed-form predictions checked against simulated trajectories.

Stability verdicts, convergence/descent bounds, the single-neuron phase
decomposition for SAM, the USAM trap detector, scalar-factorization
verdicts, and the USAM travel-distance bound.  Every operation that has
theorem hypotheses enforces them up front and raises HypothesisError
naming the violated one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import HyperParams, OptimizerKind, RunStatus, Trajectory
from .losses import SingleNeuronInit, SmoothnessProfile

ABS_SLACK = 1e-12  # numerical slack for per-step inequality checks


class HypothesisError(ValueError):
    """A theorem hypothesis required by the analysis is violated."""


def _require(cond: bool, hypothesis: str):
    if not cond:
        raise HypothesisError(f"hypothesis violated: {hypothesis}")


def _require_stride1(traj: Trajectory):
    if traj.stride != 1:
        raise ValueError("analysis requires a stride-1 trajectory")


# ---------------------------------------------------------------------------
# Quadratic stability


@dataclass(frozen=True)
class StabilityVerdict:
    """Convergence verdict for USAM on a quadratic with top eigenvalue lambda.

    margin is the signed distance of eta*lambda*(1+rho*lambda) from 2;
    positive margin means divergence.
    """

    diverges: bool
    margin: float

    def to_dict(self) -> dict:
        return {"verdict": "Diverges" if self.diverges else "Converges", "margin": self.margin}


def usam_quadratic_verdict(hp: HyperParams, lambda_max: float) -> StabilityVerdict:
    if not lambda_max > 0:
        raise ValueError("lambda_max must be positive")
    margin = hp.eta * lambda_max * (1.0 + hp.rho * lambda_max) - 2.0
    return StabilityVerdict(diverges=margin > 0, margin=margin)


# ---------------------------------------------------------------------------
# SAM on strongly convex and smooth losses


def sam_loss_bound(profile: SmoothnessProfile, hp: HyperParams, gap0: float, t: int) -> float:
    """Loss-gap upper bound for SAM after t steps: geometric contraction of the
    initial gap plus the rho^2 bias floor."""
    _require(hp.eta < 2.0 / profile.beta, "eta < 2/beta")
    _require(profile.alpha > 0, "alpha > 0 (strong convexity)")
    if gap0 < 0:
        raise ValueError("gap0 must be non-negative")
    eta, rho, alpha, beta = hp.eta, hp.rho, profile.alpha, profile.beta
    contraction = (1.0 - alpha * eta * (2.0 - eta * beta)) ** t
    bias = eta * beta ** 3 * rho ** 2 / (2.0 * alpha * (2.0 - eta * beta))
    return contraction * gap0 + bias


def sam_descent_residual(traj: Trajectory, profile: SmoothnessProfile, hp: HyperParams) -> np.ndarray:
    """Per-step residuals of the SAM descent inequality; all must be <= 0
    (up to numerical slack) on convex beta-smooth losses with eta < 2/beta."""
    _require_stride1(traj)
    _require(hp.eta < 2.0 / profile.beta, "eta < 2/beta")
    if len(traj) < 2:
        raise ValueError("trajectory too short for descent residuals")
    eta, rho, beta = hp.eta, hp.rho, profile.beta
    L = traj.losses
    g2 = traj.grad_norms ** 2
    rhs = L[:-1] - 0.5 * eta * (2.0 - eta * beta) * g2[:-1] + eta ** 2 * beta ** 3 * rho ** 2 / 2.0
    return L[1:] - rhs


# ---------------------------------------------------------------------------
# USAM on PL losses


def usam_pl_rate(profile: SmoothnessProfile, hp: HyperParams) -> float:
    """Per-step loss-gap contraction rate for USAM on mu-PL beta-smooth losses."""
    _require(hp.eta < 1.0 / profile.beta, "eta < 1/beta")
    _require(hp.rho < 1.0 / profile.beta, "rho < 1/beta")
    _require(profile.mu > 0, "mu > 0 (PL)")
    eta, rho, mu, beta = hp.eta, hp.rho, profile.mu, profile.beta
    return 1.0 - 2.0 * mu * eta * (1.0 - rho * beta) * (1.0 - (eta * beta / 2.0) * (1.0 - rho * beta))


def usam_pl_descent_check(
    traj: Trajectory, profile: SmoothnessProfile, hp: HyperParams, loss_min: float = 0.0
) -> np.ndarray:
    """Ratios (L(w_t)-L*) / (r^t (L(w_0)-L*)), one per recorded step.

    All ratios must be <= 1 for the rate r of usam_pl_rate to dominate the
    observed contraction.  Computed in log space to survive long runs.
    """
    _require_stride1(traj)
    r = usam_pl_rate(profile, hp)
    gaps = traj.losses - loss_min
    gap0 = gaps[0]
    ratios = np.zeros(len(gaps))
    if gap0 <= 0.0:
        return ratios
    log_r = math.log(r)
    for t, gap in enumerate(gaps):
        if gap <= 0.0:
            ratios[t] = 0.0
        else:
            ratios[t] = math.exp(math.log(gap) - math.log(gap0) - t * log_r)
    return ratios


@dataclass(frozen=True)
class TravelBound:
    """Travel-distance bound for USAM on PL losses.

    ``rigorous`` carries the contract: the geometric-sum step of the proof
    gives the factor 1/(1 - sqrt(r)).  ``as_printed`` is the displayed
    closed form, which is numerically falsified by a 1-D quadratic (see the
    repository notes) and is reported for reference only.
    """

    rigorous: float
    as_printed: float

    def to_dict(self) -> dict:
        return {"rigorous": self.rigorous, "as_printed": self.as_printed}


def travel_bound(profile: SmoothnessProfile, hp: HyperParams, gap0: float) -> TravelBound:
    if gap0 < 0:
        raise ValueError("gap0 must be non-negative")
    r = usam_pl_rate(profile, hp)
    eta, rho, mu, beta = hp.eta, hp.rho, profile.mu, profile.beta
    prefix = eta * (1.0 + beta * rho) * math.sqrt(2.0 * beta ** 2 / mu) * math.sqrt(gap0)
    rigorous = prefix / (1.0 - math.sqrt(r))
    printed_inner = 1.0 - 2.0 * mu * eta * (1.0 - rho * beta) * ((eta * beta / 2.0) * (1.0 - rho * beta))
    as_printed = prefix / math.sqrt(printed_inner)
    return TravelBound(rigorous=rigorous, as_printed=as_printed)


# ---------------------------------------------------------------------------
# USAM trap threshold


def usam_trap_threshold(hp: HyperParams) -> float:
    """The y^2 below which USAM's drift stops: solution of (1+rho y^2) y^2 = 2/eta.

    Evaluated in a cancellation-free form; continuous in rho with the GD
    limit 2/eta at rho = 0.
    """
    if hp.rho == 0.0:
        return 2.0 / hp.eta
    return 4.0 / (hp.eta * (math.sqrt(8.0 * hp.rho / hp.eta + 1.0) + 1.0))


# ---------------------------------------------------------------------------
# Single-neuron phase decomposition (SAM)


@dataclass
class PhaseReport:
    """Three-phase decomposition of a SAM single-neuron trajectory.

    t1 ends the initial approach to the y-axis, t2 ends the drift down the
    axis (first step with y < |x|), B is the final-phase box size.  Any step
    breaking a phase conclusion lands in ``violations`` as (step, clause).
    """

    t1: int
    t2: int | None
    B: float
    c: float
    violations: list = field(default_factory=list)
    partial: bool = False  # y never dipped below |x| within the budget
    final_in_box: bool = False

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "t1": self.t1,
            "t2": self.t2,
            "B": self.B,
            "c": self.c,
            "violations": [[int(t), clause] for t, clause in self.violations],
            "partial": self.partial,
            "final_in_box": self.final_in_box,
        }


def final_phase_box(init: SingleNeuronInit, hp: HyperParams, c: float) -> float:
    """Box size B = max{(2/c) sqrt(eta/(C gamma)), eta rho + sqrt(C eta gamma)}."""
    eta, rho = hp.eta, hp.rho
    g, C = init.gamma, init.C
    return max((2.0 / c) * math.sqrt(eta / (C * g)), eta * rho + math.sqrt(C * eta * g))


def detect_phases(traj: Trajectory, init: SingleNeuronInit, c: float) -> PhaseReport:
    """Locate the phase boundaries of a SAM run on the single-neuron loss and
    check each phase's per-step conclusions."""
    _require_stride1(traj)
    if traj.kind is not OptimizerKind.SAM:
        raise ValueError("detect_phases expects a SAM trajectory")
    _require(init.y0 >= init.x0 > 0, "y0 >= x0 > 0")
    hp = traj.hyper
    eta, rho = hp.eta, hp.rho
    g, C = init.gamma, init.C
    xs = traj.iterates[:, 0]
    ys = traj.iterates[:, 1]
    n = len(xs)
    B = final_phase_box(init, hp, c)
    x_floor = (c / 4.0) * math.sqrt(g * eta)
    y_floor = 0.5 * math.sqrt(g / eta)

    below = np.nonzero(xs <= x_floor)[0]
    t1 = int(below[0]) - 1 if below.size else n - 1

    crossed = np.nonzero(ys < np.abs(xs))[0]
    t2 = int(crossed[0]) if crossed.size else None

    violations: list = []
    # initial phase: y stays large, x drops by at least (c/4) sqrt(gamma eta)
    for t in range(0, t1 + 1):
        if ys[t] < y_floor - ABS_SLACK:
            violations.append((t, "initial_y_floor"))
        if t + 1 < n and xs[t + 1] > xs[t] - x_floor + ABS_SLACK:
            violations.append((t, "initial_x_drop"))
    # middle phase: x pinned near the axis, y decreases at the stated rate.
    # When y never dips below |x| within the budget the middle phase is open
    # ended; its per-step clauses still apply (y >= |x| holds throughout).
    t2_end = t2 if t2 is not None else n - 1
    for t in range(t1 + 1, t2_end + 1):
        if abs(xs[t]) > B + ABS_SLACK:
            violations.append((t, "middle_x_box"))
    for t in range(t1 + 1, t2_end):
        drop = min(0.5 * eta * rho ** 2 * ys[t], (c / (2.0 * math.sqrt(2.0))) * eta * rho)
        if ys[t + 1] > ys[t] - drop + ABS_SLACK:
            violations.append((t, "middle_y_decrease"))
    if t2 is not None:
        # final phase: permanent containment in the box
        for t in range(t2 + 1, n):
            if abs(xs[t]) > B + ABS_SLACK or abs(ys[t]) > B + ABS_SLACK:
                violations.append((t, "final_box"))
    final_in_box = bool(abs(xs[-1]) <= B + ABS_SLACK and abs(ys[-1]) <= B + ABS_SLACK)
    return PhaseReport(
        t1=t1, t2=t2, B=B, c=c, violations=violations, partial=t2 is None,
        final_in_box=final_in_box,
    )


# ---------------------------------------------------------------------------
# USAM trap detection


@dataclass
class TrapReport:
    """USAM trap diagnosis on a single-neuron trajectory.

    t_frak is the first step where (1+rho y^2) y^2 < 2/eta.  After it the
    trap contract requires |x_t| to decay by exp(-kappa) per step and the
    measured liminf of y^2 to stay above ``lower_bound``.
    """

    t_frak: int | None
    epsilon: float | None
    y_tilde_sq: float
    y_inf_sq: float
    lower_bound: float | None
    kappa: float | None
    violations: list = field(default_factory=list)
    trapped: bool = False  # t_frak found and contract held

    def to_dict(self) -> dict:
        return {
            "t_frak": self.t_frak,
            "epsilon": self.epsilon,
            "y_tilde_sq": self.y_tilde_sq,
            "y_inf_sq": self.y_inf_sq,
            "lower_bound": self.lower_bound,
            "kappa": self.kappa,
            "violations": [[int(t), clause] for t, clause in self.violations],
            "trapped": self.trapped,
        }


def detect_trap(traj: Trajectory, hp: HyperParams, init: SingleNeuronInit) -> TrapReport:
    _require_stride1(traj)
    eta, rho = hp.eta, hp.rho
    g, C = init.gamma, init.C
    xs = traj.iterates[:, 0]
    ys = traj.iterates[:, 1]
    n = len(xs)
    y_tilde_sq = usam_trap_threshold(hp)
    y_sq = ys ** 2
    tail = y_sq[-max(1, n // 10):]
    y_inf_sq = float(np.min(tail))

    hit = np.nonzero((1.0 + rho * y_sq) * y_sq < 2.0 / eta)[0]
    if hit.size == 0:
        return TrapReport(
            t_frak=None, epsilon=None, y_tilde_sq=y_tilde_sq, y_inf_sq=y_inf_sq,
            lower_bound=None, kappa=None,
            violations=[(n - 1, "no_trap_within_budget")], trapped=False,
        )
    t_frak = int(hit[0])
    eps = 2.0 - eta * (1.0 + rho * y_sq[t_frak]) * y_sq[t_frak]
    lower_bound = (1.0 - 4.0 * C * g * (eta + rho * C * g) ** 2 / eps) * y_sq[t_frak]
    kappa = min((1.0 + rho * C * g * eta) * eps, (2.0 - eps) / 8.0)

    violations: list = []
    decay = math.exp(-kappa)
    for t in range(t_frak, n - 1):
        if abs(xs[t + 1]) > abs(xs[t]) * decay + 1e-9:
            violations.append((t, "x_decay"))
    if y_inf_sq < lower_bound:
        violations.append((n - 1, "y_inf_below_lower_bound"))
    return TrapReport(
        t_frak=t_frak, epsilon=eps, y_tilde_sq=y_tilde_sq, y_inf_sq=y_inf_sq,
        lower_bound=lower_bound, kappa=kappa,
        violations=violations, trapped=not violations,
    )


# ---------------------------------------------------------------------------
# Scalar factorization verdicts


def scalar_fact_verdicts(traj: Trajectory, hp: HyperParams, x0: float, y0: float) -> dict:
    """Check the scalar-factorization predictions on a trajectory started at
    (x0, y0) with eta = 1/(x0^2 + y0^2).

    SAM: every step moves each coordinate monotonically toward its axis, and
    the iterates permanently enter the box |x|, |y| <= 5 rho.  USAM (needs
    rho >= 15 eta): |x_t| and |y_t| at least double every step from t = 1
    until blowup.
    """
    _require_stride1(traj)
    _require(x0 > 0 and 2.0 * x0 > y0 > x0, "2 x0 > y0 > x0 > 0")
    beta = x0 * x0 + y0 * y0
    _require(abs(hp.eta * beta - 1.0) <= 1e-9, "eta = 1/(x0^2 + y0^2)")
    xs = traj.iterates[:, 0]
    ys = traj.iterates[:, 1]
    n = len(xs)
    report: dict = {"kind": traj.kind.value, "status": traj.status.value, "violations": []}

    if traj.kind in (OptimizerKind.SAM, OptimizerKind.GD):
        for t in range(n - 1):
            for name, series in (("x", xs), ("y", ys)):
                if series[t] > 0 and series[t + 1] > series[t] + ABS_SLACK:
                    report["violations"].append((t, f"{name}_not_monotone_toward_axis"))
                elif series[t] < 0 and series[t + 1] < series[t] - ABS_SLACK:
                    report["violations"].append((t, f"{name}_not_monotone_toward_axis"))
        box = 5.0 * hp.rho
        inside = (np.abs(xs) <= box + ABS_SLACK) & (np.abs(ys) <= box + ABS_SLACK)
        entry = _first_permanent_entry(inside)
        report["box"] = box
        report["box_entry_step"] = entry
        report["contained"] = entry is not None
        if hp.rho > 0 and entry is None:
            report["violations"].append((n - 1, "never_permanently_in_box"))
    elif traj.kind is OptimizerKind.USAM:
        _require(hp.rho >= 15.0 * hp.eta, "rho >= 15 eta")
        for t in range(1, n - 1):
            if abs(xs[t + 1]) < 2.0 * abs(xs[t]) or abs(ys[t + 1]) < 2.0 * abs(ys[t]):
                report["violations"].append((t, "no_per_step_doubling"))
        report["diverged"] = traj.status is RunStatus.DIVERGED
        if not report["diverged"]:
            report["violations"].append((n - 1, "did_not_diverge"))
    report["passed"] = not report["violations"]
    return report


def _first_permanent_entry(inside: np.ndarray) -> int | None:
    """Index after which every entry of ``inside`` is True, or None."""
    if not inside[-1]:
        return None
    outside = np.nonzero(~inside)[0]
    entry = int(outside[-1]) + 1 if outside.size else 0
    return entry if entry < len(inside) else None


# ---------------------------------------------------------------------------
# GD limiting point on the single-neuron loss


def gd_limit_measure(traj: Trajectory, init: SingleNeuronInit, grad_tol: float = 1e-10) -> float:
    """y_infinity^2 of a converged GD run on the single-neuron loss."""
    _require_stride1(traj)
    if traj.kind is not OptimizerKind.GD:
        raise ValueError("gd_limit_measure expects a GD trajectory")
    if traj.grad_norms[-1] >= grad_tol:
        raise ValueError(
            f"run not converged: final gradient norm {traj.grad_norms[-1]:.3e} >= {grad_tol:.0e}"
        )
    return float(traj.iterates[-1, 1] ** 2)


def gd_limit_bracket(init: SingleNeuronInit) -> float:
    """The GD limiting value min{gamma/eta, 2/eta} the measurement is compared to."""
    return min(init.gamma / init.eta, 2.0 / init.eta)
