"""The loss-model zoo.

Every loss exposes ``value(w)`` and ``value_grad(w)`` over 1-D float64
parameter vectors.  Two-dimensional losses additionally expose
``xy_value_grad(x, y)`` (plain-float fast path used by the runner) and
one-dimensional ones ``scalar_value_grad(x)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import finite_diff_grad


@dataclass(frozen=True)
class SmoothnessProfile:
    """Strong-convexity modulus alpha, smoothness beta, PL constant mu.

    Strong convexity implies PL, so alpha <= mu <= beta must hold whenever
    all three are set.
    """

    alpha: float
    beta: float
    mu: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.alpha < 0 or self.mu < 0:
            raise ValueError("alpha and mu must be non-negative")
        if not (self.alpha <= self.mu <= self.beta):
            raise ValueError(f"need alpha <= mu <= beta, got {self}")


# ---------------------------------------------------------------------------
# Diagonal quadratics


class QuadraticLoss:
    """L(w) = 1/2 sum_j lambda_j w_j^2 with lambda_1 >= ... >= lambda_d > 0."""

    def __init__(self, eigenvalues):
        lam = np.asarray(eigenvalues, dtype=float)
        if lam.ndim != 1 or lam.size < 1:
            raise ValueError("eigenvalues must be a nonempty vector")
        if not np.all(lam > 0):
            raise ValueError("eigenvalues must be strictly positive")
        if not np.all(lam[:-1] >= lam[1:]):
            raise ValueError("eigenvalues must be sorted descending")
        self.eigenvalues = lam
        self.dim = lam.size

    def value(self, w):
        w = np.asarray(w, dtype=float)
        self._check_dim(w)
        return 0.5 * float(np.dot(self.eigenvalues, w * w))

    def value_grad(self, w):
        w = np.asarray(w, dtype=float)
        self._check_dim(w)
        g = self.eigenvalues * w
        return 0.5 * float(np.dot(g, w)), g

    def scalar_value_grad(self, x):
        lam = self.eigenvalues[0]
        return 0.5 * lam * x * x, lam * x

    def _check_dim(self, w):
        if w.shape != (self.dim,):
            raise ValueError(f"expected dimension {self.dim}, got shape {w.shape}")

    def smoothness_profile(self) -> SmoothnessProfile:
        lam = self.eigenvalues
        return SmoothnessProfile(alpha=float(lam[-1]), beta=float(lam[0]), mu=float(lam[-1]))


# ---------------------------------------------------------------------------
# Scalar factorization L(x, y) = 1/2 (xy)^2


class ScalarFactorizationLoss:
    """L(x, y) = 1/2 (xy)^2; both axes are global minima."""

    dim = 2

    def value(self, w):
        x, y = float(w[0]), float(w[1])
        return 0.5 * (x * y) ** 2

    def value_grad(self, w):
        x, y = float(w[0]), float(w[1])
        v, gx, gy = self.xy_value_grad(x, y)
        return v, np.array([gx, gy])

    def xy_value_grad(self, x, y):
        s = x * y
        return 0.5 * s * s, s * y, s * x

    def smoothness_at_init(self, x0: float, y0: float) -> float:
        """Smoothness constant x0^2 + y0^2 valid on the disk x^2+y^2 <= beta."""
        return x0 * x0 + y0 * y0


# ---------------------------------------------------------------------------
# Scalar losses for the single-neuron model


@dataclass(frozen=True)
class ScalarLossSpec:
    """An even convex 1-Lipschitz scalar loss with curvature 1 at the origin.

    ``c`` is the constant in the near-origin / linear-tail conditions:
    |l'(s)| <= |s| and |l'(s)| >= |s|/2 for |s| <= c, and |l'(s)| >= c/2
    for |s| >= c.  Checked numerically by verify_scalar_assumptions.
    """

    name: str
    value_fn: Callable[[float], float]
    deriv_fn: Callable[[float], float]
    c: float = 1.0


def sqrt_loss(s: float):
    """Square-root loss: value sqrt(1+s^2), derivative s/sqrt(1+s^2)."""
    r = math.sqrt(1.0 + s * s)
    return r, s / r


def symmetrized_logistic(s: float):
    """Symmetrized logistic loss 1/2 log(1+e^(-2s)) + 1/2 log(1+e^(2s)).

    Computed as |s| + log1p(e^(-2|s|)), which never overflows.  The
    derivative is tanh(s).
    """
    a = abs(s)
    return a + math.log1p(math.exp(-2.0 * a)), math.tanh(s)


SQRT_LOSS = ScalarLossSpec(
    name="sqrt",
    value_fn=lambda s: sqrt_loss(s)[0],
    deriv_fn=lambda s: sqrt_loss(s)[1],
    c=1.0,
)

SYMMETRIZED_LOGISTIC = ScalarLossSpec(
    name="symmetrized_logistic",
    value_fn=lambda s: symmetrized_logistic(s)[0],
    deriv_fn=lambda s: symmetrized_logistic(s)[1],
    c=1.0,
)

SCALAR_LOSSES = {spec.name: spec for spec in (SQRT_LOSS, SYMMETRIZED_LOGISTIC)}


class SingleNeuronLoss:
    """L(x, y) = l(x * y) for an even convex 1-Lipschitz scalar loss l."""

    dim = 2

    def __init__(self, spec: ScalarLossSpec):
        self.spec = spec

    def value(self, w):
        return self.spec.value_fn(float(w[0]) * float(w[1]))

    def value_grad(self, w):
        x, y = float(w[0]), float(w[1])
        v, gx, gy = self.xy_value_grad(x, y)
        return v, np.array([gx, gy])

    def xy_value_grad(self, x, y):
        s = x * y
        lp = self.spec.deriv_fn(s)
        return self.spec.value_fn(s), lp * y, lp * x


@dataclass(frozen=True)
class SingleNeuronInit:
    """Initialization (x0, y0) with y0 >= x0 > 0 and derived scale constants.

    gamma = eta * (y0^2 - x0^2) and C = eta * y0^2 / gamma.
    """

    x0: float
    y0: float
    eta: float

    def __post_init__(self):
        if not (self.y0 >= self.x0 > 0):
            raise ValueError(f"need y0 >= x0 > 0, got x0={self.x0}, y0={self.y0}")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.gamma > 0:
            raise ValueError("y0 must exceed x0 (gamma must be positive)")

    @property
    def gamma(self) -> float:
        return self.eta * (self.y0 ** 2 - self.x0 ** 2)

    @property
    def C(self) -> float:
        return self.eta * self.y0 ** 2 / self.gamma

    @property
    def w0(self) -> np.ndarray:
        return np.array([self.x0, self.y0])

    @classmethod
    def from_gamma(cls, gamma: float, C: float, eta: float) -> "SingleNeuronInit":
        """Build the init with y0^2 - x0^2 = gamma/eta and y0^2 = C*gamma/eta."""
        if C < 1:
            raise ValueError("C must be >= 1")
        y0 = math.sqrt(C * gamma / eta)
        x0 = math.sqrt((C - 1.0) * gamma / eta)
        if x0 == 0.0:
            raise ValueError("C must be > 1 so that x0 > 0")
        return cls(x0=x0, y0=y0, eta=eta)


def verify_scalar_assumptions(
    spec: ScalarLossSpec,
    grid_max: float | None = None,
    grid_step: float = 0.01,
    fd_step: float = 1e-4,
) -> dict:
    """Numerically check evenness, 1-Lipschitzness, convexity, l''(0)=1, and
    the near-origin / linear-tail derivative envelopes on a sign-symmetric grid.

    The grid covers [-grid_max, grid_max]; grid_max defaults to 10*c.
    Returns a dict of clause name -> bool plus an overall ``passed`` flag.
    """
    c = spec.c
    if grid_max is None:
        grid_max = 10.0 * c
    if grid_max < 10.0 * c:
        raise ValueError("grid must cover at least [-10c, 10c]")
    half = np.arange(grid_step, grid_max + grid_step / 2, grid_step)
    s = np.concatenate([-half[::-1], [0.0], half])  # exactly sign-symmetric
    vals = np.array([spec.value_fn(float(t)) for t in s])
    ders = np.array([spec.deriv_fn(float(t)) for t in s])

    even = bool(np.allclose(vals, vals[::-1], rtol=0, atol=1e-10))
    lipschitz = bool(np.all(np.abs(ders) <= 1.0 + 1e-12))
    convex = bool(np.all(np.diff(ders) >= -1e-12))
    curv0 = (spec.deriv_fn(fd_step) - spec.deriv_fn(-fd_step)) / (2.0 * fd_step)
    curvature_one = bool(abs(curv0 - 1.0) <= 1e-4)

    near = np.abs(s) <= c
    far = ~near
    a2 = bool(np.all(np.abs(ders[near]) <= np.abs(s[near]) + 1e-12))
    a3_near = bool(np.all(np.abs(ders[near]) >= np.abs(s[near]) / 2.0 - 1e-12))
    a3_far = bool(np.all(np.abs(ders[far]) >= c / 2.0 - 1e-12))

    report = {
        "even": even,
        "one_lipschitz": lipschitz,
        "convex": convex,
        "unit_curvature_at_zero": curvature_one,
        "deriv_below_identity_near_origin": a2,
        "deriv_above_half_identity_near_origin": a3_near,
        "deriv_above_half_c_in_tail": a3_far,
    }
    report["passed"] = all(report.values())
    return report


# ---------------------------------------------------------------------------
# Over-parameterized matrix sensing


@dataclass
class MatrixSensingInstance:
    """Ground truth U*, sensing matrices A_i, and observations b_i = <A_i, U*U*^T>.

    Columns of U* have unit norm.  Regenerable deterministically from
    (d, r_true, r_over, m, seed).
    """

    d: int
    r_true: int
    r_over: int
    m: int
    seed: int
    u_star: np.ndarray  # (d, r_true)
    sensors: np.ndarray  # (m, d, d)
    observations: np.ndarray  # (m,)

    @property
    def x_star(self) -> np.ndarray:
        return self.u_star @ self.u_star.T

    def to_json(self) -> str:
        """Flat JSON recipe; matrices are regenerated from the seed on load."""
        return json.dumps(
            {
                "d": self.d,
                "r_true": self.r_true,
                "r_over": self.r_over,
                "m": self.m,
                "seed": self.seed,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "MatrixSensingInstance":
        doc = json.loads(text)
        return gen_matrix_sensing(
            d=doc["d"],
            r_true=doc["r_true"],
            r_over=doc["r_over"],
            m=doc["m"],
            seed=doc["seed"],
        )


def gen_matrix_sensing(d: int, r_true: int, r_over: int, m: int, seed: int) -> MatrixSensingInstance:
    """Sample a sensing instance: Gaussian U* with unit-norm columns, Gaussian
    sensors A_i, exact observations b_i = <A_i, U* U*^T>."""
    if not (1 <= r_true <= r_over <= d):
        raise ValueError(f"need 1 <= r_true <= r_over <= d, got {(r_true, r_over, d)}")
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(seed)
    u_star = rng.standard_normal((d, r_true))
    u_star /= np.linalg.norm(u_star, axis=0, keepdims=True)
    sensors = rng.standard_normal((m, d, d))
    x_star = u_star @ u_star.T
    observations = np.einsum("ijk,jk->i", sensors, x_star)
    return MatrixSensingInstance(
        d=d, r_true=r_true, r_over=r_over, m=m, seed=seed,
        u_star=u_star, sensors=sensors, observations=observations,
    )


class MatrixSensingLoss:
    """Least-squares sensing loss over factor matrices U (d x r_over).

    value(U) = 1/(2m) sum_i (<A_i, U U^T> - b_i)^2
    grad(U)  = 1/m    sum_i (<A_i, U U^T> - b_i) (A_i + A_i^T) U

    The runner-facing interface flattens U row-major into a vector.
    """

    def __init__(self, instance: MatrixSensingInstance):
        self.instance = instance
        self.dim = instance.d * instance.r_over
        # precomputed symmetrized sensors, (m, d, d)
        self._a_sym = instance.sensors + np.transpose(instance.sensors, (0, 2, 1))

    def _as_matrix(self, w) -> np.ndarray:
        inst = self.instance
        w = np.asarray(w, dtype=float)
        if w.shape == (inst.d, inst.r_over):
            return w
        if w.shape == (self.dim,):
            return w.reshape(inst.d, inst.r_over)
        raise ValueError(f"expected shape {(inst.d, inst.r_over)} or ({self.dim},), got {w.shape}")

    def residuals(self, U: np.ndarray) -> np.ndarray:
        inst = self.instance
        X = U @ U.T
        return np.einsum("ijk,jk->i", inst.sensors, X) - inst.observations

    def value(self, w) -> float:
        U = self._as_matrix(w)
        r = self.residuals(U)
        return 0.5 * float(np.dot(r, r)) / self.instance.m

    def value_grad(self, w):
        flat = np.asarray(w, dtype=float).ndim == 1
        U = self._as_matrix(w)
        r = self.residuals(U)
        m = self.instance.m
        grad = np.einsum("i,ijk->jk", r, self._a_sym) @ U / m
        value = 0.5 * float(np.dot(r, r)) / m
        return value, grad.ravel() if flat else grad

    def matrix_value_grad(self, U: np.ndarray):
        v, g = self.value_grad(np.asarray(U, dtype=float))
        return v, g

    def test_error(self, w) -> float:
        """Relative Frobenius recovery error ||U U^T - X*||_F / ||X*||_F."""
        U = self._as_matrix(w)
        x_star = self.instance.x_star
        return float(np.linalg.norm(U @ U.T - x_star) / np.linalg.norm(x_star))


def sensing_value_grad(instance: MatrixSensingInstance, U: np.ndarray):
    return MatrixSensingLoss(instance).matrix_value_grad(U)


def sensing_test_error(instance: MatrixSensingInstance, U: np.ndarray) -> float:
    return MatrixSensingLoss(instance).test_error(np.asarray(U, dtype=float))


# ---------------------------------------------------------------------------
# Convenience evaluators mirroring the operation-level interface


def quadratic_value_grad(eigenvalues, w):
    return QuadraticLoss(eigenvalues).value_grad(np.asarray(w, dtype=float))


def scalar_fact_value_grad(w):
    return ScalarFactorizationLoss().value_grad(np.asarray(w, dtype=float))


def single_neuron_value_grad(spec: ScalarLossSpec, w):
    return SingleNeuronLoss(spec).value_grad(np.asarray(w, dtype=float))


def sampled_hessian_spectral_norm(loss, points) -> float:
    """Max spectral norm of the finite-difference Hessian over sample points."""
    worst = 0.0
    for w in points:
        w = np.asarray(w, dtype=float)
        d = w.shape[0]
        h = 1e-5
        H = np.empty((d, d))
        for i in range(d):
            wp = w.copy()
            wm = w.copy()
            wp[i] += h
            wm[i] -= h
            _, gp = loss.value_grad(wp)
            _, gm = loss.value_grad(wm)
            H[i] = (gp - gm) / (2 * h)
        worst = max(worst, float(np.linalg.norm((H + H.T) / 2, ord=2)))
    return worst


__all__ = [
    "SmoothnessProfile",
    "QuadraticLoss",
    "ScalarFactorizationLoss",
    "ScalarLossSpec",
    "sqrt_loss",
    "symmetrized_logistic",
    "SQRT_LOSS",
    "SYMMETRIZED_LOGISTIC",
    "SCALAR_LOSSES",
    "SingleNeuronLoss",
    "SingleNeuronInit",
    "verify_scalar_assumptions",
    "MatrixSensingInstance",
    "gen_matrix_sensing",
    "MatrixSensingLoss",
    "sensing_value_grad",
    "sensing_test_error",
    "quadratic_value_grad",
    "scalar_fact_value_grad",
    "single_neuron_value_grad",
    "sampled_hessian_spectral_norm",
    "finite_diff_grad",
]
