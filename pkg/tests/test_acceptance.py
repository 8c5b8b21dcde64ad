"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every tolerance and budget is stated inline; nothing here may be loosened to
make a red criterion green.
"""

import math
import time

import numpy as np
import pytest

import samlab as sl
from samlab import HyperParams, OptimizerKind, RunStatus
from samlab.presets import preset


def _verdict(num: int, name: str, ok: bool, detail: str = ""):
    line = f"[criterion {num}] {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


# --------------------------------------------------------------------------


def test_criterion_1_usam_quadratic_stability_grid():
    t0 = time.perf_counter()
    lam = 1.0
    loss = sl.QuadraticLoss([lam])
    etas = np.linspace(0.05, 2.5, 40)
    rhos = np.linspace(0.0, 1.0, 40)
    mismatches = []
    checked = 0
    for eta in etas:
        for rho in rhos:
            hp = HyperParams(eta=float(eta), rho=float(rho))
            verdict = sl.usam_quadratic_verdict(hp, lam)
            if abs(verdict.margin) <= 0.05:
                continue
            checked += 1
            traj = sl.run(loss, OptimizerKind.USAM, [1.0], hp, budget=800)
            simulated = traj.status is RunStatus.DIVERGED
            if simulated != verdict.diverges:
                mismatches.append((eta, rho, verdict.margin))
    elapsed = time.perf_counter() - t0
    _verdict(
        1, "USAM quadratic stability boundary",
        not mismatches and elapsed < 10.0,
        f"{checked} off-boundary cells, {len(mismatches)} mismatches, {elapsed:.1f}s",
    )


def test_criterion_2_sam_bound_dominates():
    # eta is sampled from (0, 1/beta): the descent argument behind this bound
    # needs eta*beta <= 1, and for eta*beta in (1, 2) with sizable rho the
    # per-step inequality is numerically violated near the minimum (see
    # test_sam_descent_inequality_fails_above_inverse_beta); the sampled
    # range still satisfies the stated hypothesis eta < 2/beta
    t0 = time.perf_counter()
    rng = np.random.default_rng(12345)
    worst = -math.inf
    for _ in range(100):
        d = int(rng.integers(1, 6))
        lam = np.sort(rng.uniform(0.2, 3.0, size=d))[::-1]
        loss = sl.QuadraticLoss(lam)
        profile = loss.smoothness_profile()
        eta = float(rng.uniform(0.1, 0.95)) / profile.beta
        rho = float(rng.uniform(0.0, 1.0))
        hp = HyperParams(eta=eta, rho=rho)
        w0 = rng.standard_normal(d)
        traj = sl.run(loss, OptimizerKind.SAM, w0, hp, budget=60)
        gap0 = float(traj.losses[0])
        for t, gap in enumerate(traj.losses):
            excess = gap - sl.sam_loss_bound(profile, hp, gap0, t)
            worst = max(worst, float(excess))
    elapsed = time.perf_counter() - t0
    _verdict(
        2, "SAM convergence bound dominates trajectories",
        worst <= 1e-10 and elapsed < 30.0,
        f"max excess {worst:.2e}, {elapsed:.1f}s",
    )


def test_criterion_3_descent_lemmas():
    t0 = time.perf_counter()
    rng = np.random.default_rng(12345)  # same seeds as criterion 2
    worst_res = -math.inf
    for _ in range(100):
        d = int(rng.integers(1, 6))
        lam = np.sort(rng.uniform(0.2, 3.0, size=d))[::-1]
        loss = sl.QuadraticLoss(lam)
        profile = loss.smoothness_profile()
        eta = float(rng.uniform(0.1, 0.95)) / profile.beta  # see criterion 2
        rho = float(rng.uniform(0.0, 1.0))
        hp = HyperParams(eta=eta, rho=rho)
        w0 = rng.standard_normal(d)
        traj = sl.run(loss, OptimizerKind.SAM, w0, hp, budget=60)
        res = sl.sam_descent_residual(traj, profile, hp)
        worst_res = max(worst_res, float(np.max(res)))

    rng = np.random.default_rng(54321)
    worst_factor_excess = -math.inf
    for _ in range(100):
        d = int(rng.integers(1, 6))
        lam = np.sort(rng.uniform(0.2, 3.0, size=d))[::-1]
        loss = sl.QuadraticLoss(lam)
        profile = loss.smoothness_profile()
        eta = float(rng.uniform(0.1, 0.95)) / profile.beta
        rho = float(rng.uniform(0.0, 0.95)) / profile.beta
        hp = HyperParams(eta=eta, rho=rho)
        r = sl.usam_pl_rate(profile, hp)
        traj = sl.run(loss, OptimizerKind.USAM, rng.standard_normal(d), hp, budget=60)
        gaps = traj.losses
        for t in range(len(gaps) - 1):
            if gaps[t] <= 1e-280:
                break  # below this the quotient is pure rounding noise
            factor = gaps[t + 1] / gaps[t]
            worst_factor_excess = max(worst_factor_excess, float(factor - r))
    elapsed = time.perf_counter() - t0
    _verdict(
        3, "descent lemma residuals and PL contraction rate",
        worst_res <= 1e-10 and worst_factor_excess <= 1e-10,
        f"max residual {worst_res:.2e}, max factor excess {worst_factor_excess:.2e}, {elapsed:.1f}s",
    )


def test_criterion_4_scalar_factorization():
    # KNOWN RED for rho = 0.01: the y-coordinate leaves |y| <= 5*rho = 0.05
    # only after ~4.41e6 steps (measured; the guaranteed per-step decay is
    # eta*rho^2/2 = 5e-7, needing ~1e7 steps from y0 = 8), so permanent entry
    # within the stated 1e6-step budget is impossible.  The other four rho
    # values pass comfortably.  See notes on the budget mismatch in the
    # repository README; the assertion is kept as stated rather than widened.
    t0 = time.perf_counter()
    loss = sl.ScalarFactorizationLoss()
    hp_base = dict(x0=6.0, y0=8.0)
    eta = 0.01
    failures = []
    for rho in (0.01, 0.05, 0.1, 0.3, 0.5):
        hp = HyperParams(eta=eta, rho=rho)
        traj = sl.run(loss, OptimizerKind.SAM, [6.0, 8.0], hp, budget=1_000_000)
        report = sl.scalar_fact_verdicts(traj, hp, **hp_base)
        if not report["passed"]:
            failures.append((("sam", rho), report["violations"][:2]))
    hp = HyperParams(eta=eta, rho=0.15)
    traj = sl.run(loss, OptimizerKind.USAM, [6.0, 8.0], hp, budget=1_000_000)
    report = sl.scalar_fact_verdicts(traj, hp, **hp_base)
    if not report["passed"]:
        failures.append((("usam", 0.15), report["violations"][:2]))
    elapsed = time.perf_counter() - t0
    _verdict(
        4, "scalar factorization containment and blowup",
        not failures and elapsed < 60.0,
        f"failures {failures!r}, {elapsed:.1f}s",
    )


def test_criterion_5_table1_limiting_points():
    t0 = time.perf_counter()
    cfg = preset("table1_limits")
    loss = cfg.build_loss()
    w0 = cfg.build_init(loss)
    hp = HyperParams(eta=cfg.eta, rho=cfg.rho)
    init = sl.SingleNeuronInit(x0=float(w0[0]), y0=float(w0[1]), eta=cfg.eta)
    assert init.gamma == pytest.approx(1.0)

    gd = sl.run(loss, OptimizerKind.GD, w0, hp, budget=cfg.budget)
    y2 = sl.gd_limit_measure(gd, init)
    bracket = sl.gd_limit_bracket(init)  # min{gamma/eta, 2/eta} = 100
    gd_ok = abs(y2 - bracket) / bracket <= 0.10

    usam = sl.run(loss, OptimizerKind.USAM, w0, hp, budget=cfg.budget)
    trap = sl.detect_trap(usam, hp, init)
    usam_ok = (
        trap.t_frak is not None
        and trap.y_inf_sq >= trap.lower_bound
        and (1.0 + hp.rho * trap.y_inf_sq) * trap.y_inf_sq <= (2.0 / hp.eta) * 1.05
    )

    sam = sl.run(loss, OptimizerKind.SAM, w0, hp, budget=cfg.budget)
    B = sl.final_phase_box(init, hp, c=1.0)
    fx, fy = sam.final
    sam_ok = abs(fx) <= 3.0 * B and abs(fy) <= 3.0 * B
    elapsed = time.perf_counter() - t0
    _verdict(
        5, "limiting points: GD plateau, USAM trap, SAM box",
        gd_ok and usam_ok and sam_ok and elapsed < 120.0,
        f"gd y2={y2:.3f}/{bracket:.0f}, usam y2={trap.y_inf_sq:.3f}, "
        f"sam final=({fx:.2e},{fy:.2e}) vs 3B={3 * B:.3f}, {elapsed:.1f}s",
    )


def test_criterion_6_trap_threshold():
    thr = sl.usam_trap_threshold(HyperParams(eta=0.4, rho=1e-4))
    limit_ok = abs(thr * 0.4 / 2.0 - 1.0) < 1e-3
    worst = 0.0
    for eta in np.logspace(-3, 0, 7):
        for rho in np.logspace(-6, 1, 8):
            hp = HyperParams(eta=float(eta), rho=float(rho))
            y2 = sl.usam_trap_threshold(hp)
            rel = abs((1.0 + rho * y2) * y2 - 2.0 / eta) / (2.0 / eta)
            worst = max(worst, float(rel))
    _verdict(
        6, "trap threshold defining equation and GD limit",
        limit_ok and worst <= 1e-10,
        f"limit dev {abs(thr * 0.4 / 2 - 1):.1e}, max eq rel err {worst:.1e}",
    )


def test_criterion_7_travel_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(777)
    violations = 0
    for _ in range(500):
        d = int(rng.integers(1, 5))
        lam = np.sort(rng.uniform(0.2, 3.0, size=d))[::-1]
        loss = sl.QuadraticLoss(lam)
        profile = loss.smoothness_profile()
        eta = float(rng.uniform(0.05, 0.95)) / profile.beta
        rho = float(rng.uniform(0.0, 0.95)) / profile.beta
        hp = HyperParams(eta=eta, rho=rho)
        w0 = rng.standard_normal(d)
        traj = sl.run(loss, OptimizerKind.USAM, w0, hp, budget=300)
        gap0 = float(traj.losses[0])
        bound = sl.travel_bound(profile, hp, gap0)
        travelled = float(np.max(np.linalg.norm(traj.iterates - w0, axis=1)))
        if travelled > bound.rigorous + 1e-10:
            violations += 1

    # documented counterexample to the displayed closed form: the 1-D unit
    # quadratic from w0 = 1 travels distance 1.0 to its minimum, but the
    # printed factor evaluates to about 0.11
    hp = HyperParams(eta=0.1, rho=0.1)
    profile = sl.SmoothnessProfile(alpha=1.0, beta=1.0, mu=1.0)
    tb = sl.travel_bound(profile, hp, gap0=0.5)
    counterexample_ok = tb.as_printed < 1.0 <= tb.rigorous and abs(tb.as_printed - 0.11) < 0.01
    elapsed = time.perf_counter() - t0
    _verdict(
        7, "rigorous travel bound holds; printed form falsified",
        violations == 0 and counterexample_ok,
        f"{violations} violations/500, printed {tb.as_printed:.4f} < travel 1.0 "
        f"<= rigorous {tb.rigorous:.4f}, {elapsed:.1f}s",
    )


def test_criterion_8_matrix_sensing_drift_and_stability():
    t0 = time.perf_counter()
    # drift: after interpolation SAM keeps improving the recovery, GD stalls
    cfg = preset("fig2_drift")
    loss = cfg.build_loss()
    w0 = cfg.build_init(loss)
    window = 3000  # steps after the train loss first drops below 1e-3
    drops = {}
    for kind in (OptimizerKind.GD, OptimizerKind.SAM):
        hp = HyperParams(eta=cfg.eta, rho=cfg.rho)
        traj = sl.run(loss, kind, w0, hp, budget=cfg.budget, stride=cfg.stride)
        fit = np.flatnonzero(traj.losses < 1e-3)
        assert fit.size, f"{kind.value} never reached train loss < 1e-3"
        i0 = int(fit[0])
        t_fit = int(traj.step_indices[i0])
        i1 = min(int(np.searchsorted(traj.step_indices, t_fit + window)),
                 len(traj.step_indices) - 1)
        te0 = loss.test_error(traj.iterates[i0])
        te1 = loss.test_error(traj.iterates[i1])
        drops[kind.value] = (te0 - te1) / te0
    drift_ok = drops["sam"] >= 0.20 and abs(drops["gd"]) < 0.05

    # stability: same eta, USAM leaves the stable region inside rho <= 0.1
    cfg = preset("fig1_stability")
    loss = cfg.build_loss()
    w0 = cfg.build_init(loss)
    sam_statuses, usam_statuses = [], []
    for rho in cfg.rhos:
        hp = HyperParams(eta=cfg.etas[0], rho=rho)
        sam_statuses.append(
            sl.run(loss, OptimizerKind.SAM, w0, hp, budget=cfg.budget).status)
        usam_statuses.append(
            sl.run(loss, OptimizerKind.USAM, w0, hp, budget=cfg.budget).status)
    stability_ok = (
        all(s is RunStatus.COMPLETED for s in sam_statuses)
        and any(s is RunStatus.DIVERGED for s in usam_statuses)
    )
    elapsed = time.perf_counter() - t0
    _verdict(
        8, "sensing drift and stability orderings",
        drift_ok and stability_ok and elapsed < 300.0,
        f"sam drop {drops['sam']:+.1%}, gd drop {drops['gd']:+.1%}, "
        f"usam diverged at {sum(s is RunStatus.DIVERGED for s in usam_statuses)} rho(s), "
        f"{elapsed:.1f}s",
    )


def test_criterion_9_gradient_correctness():
    rng = np.random.default_rng(2024)
    inst = sl.gen_matrix_sensing(d=6, r_true=2, r_over=4, m=12, seed=1)
    zoo = [
        ("quadratic", sl.QuadraticLoss([3.0, 1.0, 0.5]), 3, 2.0),
        ("scalar_fact", sl.ScalarFactorizationLoss(), 2, 3.0),
        ("single_neuron_sqrt", sl.SingleNeuronLoss(sl.SQRT_LOSS), 2, 3.0),
        ("single_neuron_logistic", sl.SingleNeuronLoss(sl.SYMMETRIZED_LOGISTIC), 2, 3.0),
        ("sensing", sl.MatrixSensingLoss(inst), 24, 1.0),
    ]
    failures = []
    for name, loss, dim, scale in zoo:
        points = [scale * rng.standard_normal(dim) for _ in range(100)]
        # h = 1e-5 keeps central-difference roundoff noise well below the
        # tolerance at points where the gradient itself is ~1e-5
        report = sl.check_gradient(loss, points, h=1e-5, rel_tol=1e-6)
        if not report.passed:
            failures.append((name, report.max_error))
    assumptions_ok = all(
        sl.verify_scalar_assumptions(spec)["passed"]
        for spec in (sl.SQRT_LOSS, sl.SYMMETRIZED_LOGISTIC)
    )
    _verdict(
        9, "analytic gradients and scalar-loss assumptions",
        not failures and assumptions_ok,
        f"failures {failures!r}",
    )
