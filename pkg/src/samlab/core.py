"""Optimizer step rules, the trajectory runner, and gradient checking.

Parameter points are plain 1-D float64 numpy arrays.  The three update
rules implemented here are

    GD:    w <- w - eta * g(w)
    SAM:   w <- w - eta * g(w + rho * g(w) / ||g(w)||)
    USAM:  w <- w - eta * g(w + rho * g(w))

where g is the loss gradient.  Divergence is never stored as NaN/Inf in a
trajectory; it is signalled through the trajectory status instead.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_EPS_GRAD = 1e-12


class DegenerateGradientError(ValueError):
    """Gradient is (numerically) zero or non-finite where a rule needs it."""


class OptimizerKind(enum.Enum):
    GD = "gd"
    SAM = "sam"
    USAM = "usam"


class RunStatus(enum.Enum):
    COMPLETED = "completed"
    DIVERGED = "diverged"
    DEGENERATE_GRADIENT = "degenerate_gradient"


@dataclass(frozen=True)
class HyperParams:
    """Learning rate and perturbation radius shared by all update rules."""

    eta: float
    rho: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.eta) and self.eta > 0):
            raise ValueError(f"eta must be finite and positive, got {self.eta}")
        if not (math.isfinite(self.rho) and self.rho >= 0):
            raise ValueError(f"rho must be finite and non-negative, got {self.rho}")


@dataclass
class Trajectory:
    """Ordered record of iterates plus per-iterate loss and gradient norm.

    All three lists share length.  If ``status`` is DIVERGED or
    DEGENERATE_GRADIENT, ``status_step`` is the index of the last recorded
    iterate (the lists stop there).
    """

    iterates: np.ndarray  # shape (n, d)
    losses: np.ndarray  # shape (n,)
    grad_norms: np.ndarray  # shape (n,)
    status: RunStatus
    hyper: HyperParams
    kind: OptimizerKind
    status_step: int | None = None
    stride: int = 1
    step_indices: np.ndarray = field(default=None)  # actual step number per row

    def __post_init__(self):
        n = len(self.iterates)
        if not (len(self.losses) == len(self.grad_norms) == n):
            raise ValueError("iterates, losses, grad_norms must share length")
        if self.step_indices is None:
            self.step_indices = np.arange(n) * self.stride

    def __len__(self) -> int:
        return len(self.iterates)

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]


def _as_param(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim == 0:
        w = w.reshape(1)
    if w.ndim != 1:
        raise ValueError(f"parameter point must be a vector, got shape {w.shape}")
    return w


def gd_step(loss, w, hp: HyperParams) -> np.ndarray:
    """One gradient-descent step; rho is ignored."""
    w = _as_param(w)
    _, g = loss.value_grad(w)
    if not np.all(np.isfinite(g)):
        raise DegenerateGradientError("non-finite gradient in gd_step")
    return w - hp.eta * g


def sam_step(loss, w, hp: HyperParams, eps_grad: float = DEFAULT_EPS_GRAD) -> np.ndarray:
    """One SAM step: gradient taken at the radius-rho normalized ascent point.

    Raises DegenerateGradientError when ||grad|| <= eps_grad; the rule is
    ill-defined at (near-)zero gradient and callers treat such a run as
    converged at a minimum.
    """
    w = _as_param(w)
    _, g = loss.value_grad(w)
    if not np.all(np.isfinite(g)):
        raise DegenerateGradientError("non-finite gradient in sam_step")
    gnorm = float(np.linalg.norm(g))
    if gnorm <= eps_grad:
        raise DegenerateGradientError(
            f"gradient norm {gnorm:.3e} <= eps_grad {eps_grad:.3e} in sam_step"
        )
    if hp.rho == 0.0:
        return w - hp.eta * g
    _, g_pert = loss.value_grad(w + (hp.rho / gnorm) * g)
    return w - hp.eta * g_pert


def usam_step(loss, w, hp: HyperParams) -> np.ndarray:
    """One un-normalized SAM step; well-defined even at zero gradient."""
    w = _as_param(w)
    _, g = loss.value_grad(w)
    if not np.all(np.isfinite(g)):
        raise DegenerateGradientError("non-finite gradient in usam_step")
    if hp.rho == 0.0:
        return w - hp.eta * g
    w_pert = w + hp.rho * g
    _, g_pert = loss.value_grad(w_pert)
    return w - hp.eta * g_pert


def default_blowup_radius(w0) -> float:
    return 1e8 * (1.0 + float(np.linalg.norm(_as_param(w0))))


def run(
    loss,
    kind: OptimizerKind,
    w0,
    hp: HyperParams,
    budget: int,
    blowup_radius: float | None = None,
    eps_grad: float = DEFAULT_EPS_GRAD,
    stride: int = 1,
) -> Trajectory:
    """Iterate the chosen update rule for up to ``budget`` steps.

    Stops early when the gradient degenerates (SAM only) or when the iterate
    norm exceeds ``blowup_radius`` (status DIVERGED).  Deterministic given
    inputs.  With ``stride`` > 1 only every stride-th iterate is recorded
    (the first and last recorded rows always correspond to real iterates);
    analysis operations require stride 1.
    """
    w0 = _as_param(w0)
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if blowup_radius is None:
        blowup_radius = default_blowup_radius(w0)
    if not blowup_radius > float(np.linalg.norm(w0)):
        raise ValueError("blowup_radius must exceed ||w0||")

    d = w0.shape[0]
    if d == 2 and hasattr(loss, "xy_value_grad"):
        rec = _run_fast_2d(loss, kind, w0, hp, budget, blowup_radius, eps_grad, stride)
    elif d == 1 and hasattr(loss, "scalar_value_grad"):
        rec = _run_fast_1d(loss, kind, w0, hp, budget, blowup_radius, eps_grad, stride)
    else:
        rec = _run_generic(loss, kind, w0, hp, budget, blowup_radius, eps_grad, stride)
    iterates, losses, gnorms, steps, status, status_step = rec
    return Trajectory(
        iterates=iterates,
        losses=losses,
        grad_norms=gnorms,
        status=status,
        hyper=hp,
        kind=kind,
        status_step=status_step,
        stride=stride,
        step_indices=steps,
    )


def _run_generic(loss, kind, w0, hp, budget, blowup_radius, eps_grad, stride):
    eta, rho = hp.eta, hp.rho
    ws, ls, gs, steps = [], [], [], []
    status = RunStatus.COMPLETED
    status_step = None
    w = w0
    v, g = loss.value_grad(w)
    gnorm = float(np.linalg.norm(g))

    def record(t):
        ws.append(w.copy())
        ls.append(v)
        gs.append(gnorm)
        steps.append(t)

    record(0)
    t = 0
    while t < budget:
        t += 1
        if not np.all(np.isfinite(g)):
            status, status_step = RunStatus.DIVERGED, t - 1
            break
        if kind is OptimizerKind.GD:
            w_next = w - eta * g
        elif kind is OptimizerKind.SAM:
            if gnorm <= eps_grad:
                status, status_step = RunStatus.DEGENERATE_GRADIENT, t - 1
                break
            if rho == 0.0:
                w_next = w - eta * g
            else:
                _, gp = loss.value_grad(w + (rho / gnorm) * g)
                w_next = w - eta * gp
        else:  # USAM
            if rho == 0.0:
                w_next = w - eta * g
            else:
                wp = w + rho * g
                if not np.all(np.isfinite(wp)):
                    status, status_step = RunStatus.DIVERGED, t - 1
                    break
                _, gp = loss.value_grad(wp)
                w_next = w - eta * gp
        if not np.all(np.isfinite(w_next)):
            status, status_step = RunStatus.DIVERGED, t - 1
            break
        w = w_next
        v, g = loss.value_grad(w)
        gnorm = float(np.linalg.norm(g))
        if float(np.linalg.norm(w)) > blowup_radius:
            record(t)
            status, status_step = RunStatus.DIVERGED, t
            break
        if t % stride == 0 or t == budget:
            record(t)
    n = len(ws)
    return (
        np.array(ws).reshape(n, -1),
        np.array(ls),
        np.array(gs),
        np.array(steps),
        status,
        status_step,
    )


def _run_fast_2d(loss, kind, w0, hp, budget, blowup_radius, eps_grad, stride):
    # Scalar hot loop for 2-D losses; semantics identical to _run_generic.
    eta, rho = hp.eta, hp.rho
    vg = loss.xy_value_grad
    cap = budget // stride + 2
    ws = np.empty((cap, 2))
    ls = np.empty(cap)
    gs = np.empty(cap)
    steps = np.empty(cap, dtype=int)
    status = RunStatus.COMPLETED
    status_step = None
    is_gd = kind is OptimizerKind.GD or rho == 0.0
    is_sam = kind is OptimizerKind.SAM
    blowup_sq = blowup_radius * blowup_radius

    x, y = float(w0[0]), float(w0[1])
    v, gx, gy = vg(x, y)
    gnorm_sq = gx * gx + gy * gy

    n = 0

    def record(t, x, y, v, gn):
        nonlocal n
        ws[n, 0] = x
        ws[n, 1] = y
        ls[n] = v
        gs[n] = gn
        steps[n] = t
        n += 1

    record(0, x, y, v, math.sqrt(gnorm_sq))
    t = 0
    while t < budget:
        t += 1
        if not (math.isfinite(gx) and math.isfinite(gy)):
            status, status_step = RunStatus.DIVERGED, t - 1
            break
        if is_gd:
            if is_sam and gnorm_sq <= eps_grad * eps_grad:
                status, status_step = RunStatus.DEGENERATE_GRADIENT, t - 1
                break
            xn = x - eta * gx
            yn = y - eta * gy
        elif is_sam:
            if gnorm_sq <= eps_grad * eps_grad:
                status, status_step = RunStatus.DEGENERATE_GRADIENT, t - 1
                break
            s = rho / math.sqrt(gnorm_sq)
            _, px, py = vg(x + s * gx, y + s * gy)
            xn = x - eta * px
            yn = y - eta * py
        else:
            wx = x + rho * gx
            wy = y + rho * gy
            if not (math.isfinite(wx) and math.isfinite(wy)):
                status, status_step = RunStatus.DIVERGED, t - 1
                break
            _, px, py = vg(wx, wy)
            xn = x - eta * px
            yn = y - eta * py
        if not (math.isfinite(xn) and math.isfinite(yn)):
            status, status_step = RunStatus.DIVERGED, t - 1
            break
        x, y = xn, yn
        v, gx, gy = vg(x, y)
        gnorm_sq = gx * gx + gy * gy
        if x * x + y * y > blowup_sq:
            record(t, x, y, v, math.sqrt(gnorm_sq))
            status, status_step = RunStatus.DIVERGED, t
            break
        if t % stride == 0 or t == budget:
            record(t, x, y, v, math.sqrt(gnorm_sq))
    return ws[:n].copy(), ls[:n].copy(), gs[:n].copy(), steps[:n].copy(), status, status_step


def _run_fast_1d(loss, kind, w0, hp, budget, blowup_radius, eps_grad, stride):
    eta, rho = hp.eta, hp.rho
    vg = loss.scalar_value_grad
    cap = budget // stride + 2
    ws = np.empty((cap, 1))
    ls = np.empty(cap)
    gs = np.empty(cap)
    steps = np.empty(cap, dtype=int)
    status = RunStatus.COMPLETED
    status_step = None
    is_gd = kind is OptimizerKind.GD or rho == 0.0
    is_sam = kind is OptimizerKind.SAM

    x = float(w0[0])
    v, g = vg(x)

    n = 0

    def record(t, x, v, g):
        nonlocal n
        ws[n, 0] = x
        ls[n] = v
        gs[n] = abs(g)
        steps[n] = t
        n += 1

    record(0, x, v, g)
    t = 0
    while t < budget:
        t += 1
        if not math.isfinite(g):
            status, status_step = RunStatus.DIVERGED, t - 1
            break
        if is_gd:
            if is_sam and abs(g) <= eps_grad:
                status, status_step = RunStatus.DEGENERATE_GRADIENT, t - 1
                break
            xn = x - eta * g
        elif is_sam:
            if abs(g) <= eps_grad:
                status, status_step = RunStatus.DEGENERATE_GRADIENT, t - 1
                break
            _, gp = vg(x + rho * (1.0 if g > 0 else -1.0))
            xn = x - eta * gp
        else:
            xp = x + rho * g
            if not math.isfinite(xp):
                status, status_step = RunStatus.DIVERGED, t - 1
                break
            _, gp = vg(xp)
            xn = x - eta * gp
        if not math.isfinite(xn):
            status, status_step = RunStatus.DIVERGED, t - 1
            break
        x = xn
        v, g = vg(x)
        if abs(x) > blowup_radius:
            record(t, x, v, g)
            status, status_step = RunStatus.DIVERGED, t
            break
        if t % stride == 0 or t == budget:
            record(t, x, v, g)
    return ws[:n].copy(), ls[:n].copy(), gs[:n].copy(), steps[:n].copy(), status, status_step


def finite_diff_grad(loss, w, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient, componentwise (L(w+h e_i) - L(w-h e_i)) / 2h."""
    w = _as_param(w)
    if not h > 0:
        raise ValueError("h must be positive")
    g = np.empty_like(w)
    for i in range(w.shape[0]):
        wp = w.copy()
        wm = w.copy()
        wp[i] += h
        wm[i] -= h
        vp = loss.value(wp)
        vm = loss.value(wm)
        if not (math.isfinite(vp) and math.isfinite(vm)):
            raise ValueError(f"non-finite loss evaluation near component {i}")
        g[i] = (vp - vm) / (2.0 * h)
    return g


@dataclass
class GradientCheckReport:
    errors: list  # per-point relative error
    rel_tol: float

    @property
    def passed(self) -> bool:
        return all(e <= self.rel_tol for e in self.errors)

    @property
    def max_error(self) -> float:
        return max(self.errors)


def check_gradient(loss, points, h: float = 1e-6, rel_tol: float = 1e-6) -> GradientCheckReport:
    """Compare analytic gradients against finite differences at given points.

    A (near-)zero analytic gradient is compared with absolute tolerance h
    instead of a relative one.
    """
    points = list(points)
    if not points:
        raise ValueError("points must be nonempty")
    errors = []
    for w in points:
        w = _as_param(w)
        _, g = loss.value_grad(w)
        g_fd = finite_diff_grad(loss, w, h)
        denom = max(float(np.linalg.norm(g)), h)
        errors.append(float(np.linalg.norm(g - g_fd)) / denom)
    return GradientCheckReport(errors=errors, rel_tol=rel_tol)
