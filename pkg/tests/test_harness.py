import json
import math

import numpy as np
import pytest

from samlab import (
    ConfigError,
    HyperParams,
    OptimizerKind,
    QuadraticLoss,
    ScalarFactorizationLoss,
    parse_config_text,
    preset,
    run,
)
from samlab.cli import dispatch_analysis, main
from samlab.io import (
    SchemaError,
    read_trajectory_csv,
    trajectory_from_columns,
    write_trajectory_csv,
)
from samlab.presets import PRESETS
from samlab.sweep import read_sweep_csv, run_sweep, write_sweep_csv
from samlab import svgplot

BASIC = """
[loss]
kind = "quadratic"
eigenvalues = [2.0, 1.0]

[optimizer]
kind = "sam"
eta = 0.5
rho = 0.2

[run]
init = [1.0, -2.0]
budget = 50
"""


# --------------------------------------------------------------------------
# config


def test_parse_basic_config():
    cfg = parse_config_text(BASIC)
    assert cfg.loss_kind == "quadratic"
    assert cfg.optimizers == [OptimizerKind.SAM]
    assert cfg.eta == 0.5 and cfg.rho == 0.2
    assert cfg.budget == 50
    assert not cfg.is_sweep
    loss = cfg.build_loss()
    assert isinstance(loss, QuadraticLoss)
    assert np.array_equal(cfg.build_init(loss), [1.0, -2.0])


def test_unknown_keys_are_hard_errors():
    with pytest.raises(ConfigError, match="rhoo"):
        parse_config_text(BASIC.replace("rho =", "rhoo ="))
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text(BASIC + "\n[sweep]\netas = [0.1]\nrhos = [0.0]\nstep = 2\n")
    with pytest.raises(ConfigError):
        parse_config_text(BASIC + "\n[extra]\nx = 1\n")


def test_missing_required_fields():
    with pytest.raises(ConfigError, match="budget"):
        parse_config_text(BASIC.replace("budget = 50", ""))
    with pytest.raises(ConfigError, match="eta"):
        parse_config_text(BASIC.replace("eta = 0.5", ""))
    with pytest.raises(ConfigError, match="kind"):
        parse_config_text(BASIC.replace('kind = "sam"', ""))


def test_invalid_values_rejected():
    with pytest.raises(ConfigError):
        parse_config_text(BASIC.replace("eta = 0.5", "eta = -1.0"))
    with pytest.raises(ConfigError):
        parse_config_text(BASIC.replace("rho = 0.2", "rho = -0.2"))
    with pytest.raises(ConfigError):
        parse_config_text(BASIC.replace("budget = 50", "budget = 0"))
    with pytest.raises(ConfigError):
        parse_config_text(BASIC.replace('kind = "sam"', 'kind = "adam"'))


def test_empty_sweep_grid_rejected():
    with pytest.raises(ConfigError):
        parse_config_text(BASIC + "\n[sweep]\netas = []\nrhos = [0.1]\n")


def test_init_and_scale_mutually_exclusive():
    text = BASIC.replace("init = [1.0, -2.0]", "init = [1.0, -2.0]\ninit_scale = 0.3")
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_toml_roundtrip_preserves_config():
    for name in PRESETS:
        cfg = preset(name)
        clone = parse_config_text(cfg.to_toml())
        assert clone.loss_kind == cfg.loss_kind
        assert clone.loss_params == cfg.loss_params
        assert clone.optimizers == cfg.optimizers
        assert clone.budget == cfg.budget
        assert clone.etas == cfg.etas and clone.rhos == cfg.rhos
        if cfg.init is not None:
            assert np.array_equal(clone.init, cfg.init)


# --------------------------------------------------------------------------
# trajectory CSV round trip


def test_trajectory_csv_roundtrip_exact(tmp_path):
    hp = HyperParams(eta=0.01, rho=0.1)
    traj = run(ScalarFactorizationLoss(), OptimizerKind.SAM, [6.0, 8.0], hp, budget=200)
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, traj)
    data = read_trajectory_csv(path)
    assert np.array_equal(data["loss"], traj.losses)  # 17 sig digits: bit-exact
    assert np.array_equal(data["grad_norm"], traj.grad_norms)
    assert np.array_equal(data["x"], traj.iterates[:, 0])
    assert np.array_equal(data["y"], traj.iterates[:, 1])
    assert data["status"] == "completed"
    rebuilt = trajectory_from_columns(data, OptimizerKind.SAM, hp)
    assert np.array_equal(rebuilt.iterates, traj.iterates)
    assert rebuilt.status is traj.status


def test_trajectory_csv_schema_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError):
        read_trajectory_csv(path)
    path.write_text("t,loss,grad_norm,status\n")
    with pytest.raises(SchemaError):
        read_trajectory_csv(path)


def test_trajectory_from_columns_requires_coordinates():
    data = {"t": np.array([0]), "loss": np.array([1.0]),
            "grad_norm": np.array([1.0]), "status": "completed"}
    with pytest.raises(SchemaError):
        trajectory_from_columns(data, OptimizerKind.GD, HyperParams(eta=0.1))


# --------------------------------------------------------------------------
# sweep


SWEEP_CFG = """
[loss]
kind = "quadratic"
eigenvalues = [1.0]

[optimizer]
kinds = ["gd", "usam"]

[run]
init = [1.0]
budget = 300

[sweep]
etas = [0.5, 1.0, 1.5]
rhos = [0.0, 0.5, 1.0]
"""


def test_sweep_rows_ordered_and_predicted(tmp_path):
    cfg = parse_config_text(SWEEP_CFG)
    rows = run_sweep(cfg)
    assert len(rows) == 18
    # deterministic ordering: optimizers as listed, then eta-major, then rho
    key = [(r["optimizer"], r["eta"], r["rho"]) for r in rows]
    gd = [k for k in key if k[0] == "gd"]
    assert gd == sorted(gd)
    assert key[:9] == gd
    # closed-form agreement away from the boundary
    for row in rows:
        if abs(row["margin"]) > 0.05:
            assert row["verdict"] == row["predicted"], row
    path = tmp_path / "sweep.csv"
    write_sweep_csv(path, rows)
    back = read_sweep_csv(path)
    assert [(r["optimizer"], r["eta"], r["rho"]) for r in back] == key
    assert back[0]["final_loss"] == rows[0]["final_loss"]


def test_sweep_thread_cap(tmp_path, monkeypatch):
    monkeypatch.setenv("SAMLAB_THREADS", "1")
    cfg = parse_config_text(SWEEP_CFG)
    rows_serial = run_sweep(cfg)
    monkeypatch.setenv("SAMLAB_THREADS", "4")
    rows_parallel = run_sweep(cfg)
    assert rows_serial == rows_parallel
    monkeypatch.setenv("SAMLAB_THREADS", "zero")
    with pytest.raises(ValueError):
        run_sweep(cfg)


# --------------------------------------------------------------------------
# svg plots


def _csv_series():
    return [("a", [0, 1, 2], [1.0, 0.5, 0.25]), ("b", [0, 1, 2], [2.0, 1.0, 0.5])]


def test_loss_curves_deterministic(tmp_path):
    p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
    svgplot.loss_curves(_csv_series(), p1, log=True)
    svgplot.loss_curves(_csv_series(), p2, log=True)
    assert p1.read_bytes() == p2.read_bytes()
    text = p1.read_text()
    assert text.startswith("<svg")
    assert 'width="800" height="600"' in text
    assert text.count("<polyline") == 2


def test_xy_trajectory_marks_init(tmp_path):
    path = tmp_path / "xy.svg"
    svgplot.xy_trajectory([("run", [2.0, 1.0, 0.5], [6.0, 5.0, 4.0])], path)
    text = path.read_text()
    assert '<circle' in text and 'fill="black"' in text


def test_plot_errors_leave_no_file(tmp_path):
    path = tmp_path / "out.svg"
    with pytest.raises(svgplot.PlotError):
        svgplot.loss_curves([], path)
    with pytest.raises(svgplot.PlotError):
        svgplot.loss_curves([("a", [], [])], path)
    with pytest.raises(svgplot.PlotError):
        svgplot.loss_curves([("a", [0, 1], [0.0, -1.0])], path, log=True)
    assert not path.exists()


def test_heatmap_distinguishes_diverged(tmp_path):
    rows = [
        {"optimizer": "usam", "eta": 0.5, "rho": 0.0, "status": "completed"},
        {"optimizer": "usam", "eta": 0.5, "rho": 1.0, "status": "completed"},
        {"optimizer": "usam", "eta": 1.5, "rho": 0.0, "status": "completed"},
        {"optimizer": "usam", "eta": 1.5, "rho": 1.0, "status": "diverged"},
    ]
    path = tmp_path / "heat.svg"
    svgplot.stability_heatmap(rows, path)
    text = path.read_text()
    assert svgplot.COMPLETED_FILL in text
    assert svgplot.DIVERGED_FILL in text
    with pytest.raises(svgplot.PlotError):
        svgplot.stability_heatmap(rows + [{**rows[0], "optimizer": "sam"}], path)


# --------------------------------------------------------------------------
# presets


def test_all_presets_build():
    assert set(PRESETS) == {
        "fig1_stability", "fig2_drift", "fig4_trajectories",
        "table1_limits", "thmD_scalarfact",
    }
    for name in PRESETS:
        cfg = preset(name)
        loss = cfg.build_loss()
        w0 = cfg.build_init(loss)
        assert w0.shape == (loss.dim,)
    with pytest.raises(KeyError):
        preset("nope")


def test_preset_hyperparameters_match_targets():
    assert preset("fig1_stability").etas == [0.05]
    assert preset("fig2_drift").eta == 0.005
    fig4 = preset("fig4_trajectories")
    assert fig4.eta == 0.4 and fig4.rho == 0.1
    assert np.allclose(fig4.init, [2.0, math.sqrt(40.0)])
    assert 0.15 in preset("thmD_scalarfact").rhos


def test_presets_satisfy_theorem_hypotheses():
    # thmD: 2 x0 > y0 > x0 > 0 and eta = 1/(x0^2 + y0^2)
    cfg = preset("thmD_scalarfact")
    x0, y0 = cfg.init
    assert 2 * x0 > y0 > x0 > 0
    assert cfg.etas == [1.0 / (x0 ** 2 + y0 ** 2)]
    # table1: gamma = eta (y0^2 - x0^2) = 1, y0 > x0 > 0
    cfg = preset("table1_limits")
    x0, y0 = cfg.init
    assert cfg.eta * (y0 ** 2 - x0 ** 2) == pytest.approx(1.0)
    assert y0 > x0 > 0
    # fig4: y0 > x0 > 0 for the phase/trap analyses
    cfg = preset("fig4_trajectories")
    assert cfg.init[1] > cfg.init[0] > 0


# --------------------------------------------------------------------------
# CLI end to end


def test_cli_run_outputs_and_determinism(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(BASIC)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["run", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(out2)]) == 0
    csv1 = (out1 / "trajectory_sam.csv").read_bytes()
    assert csv1 == (out2 / "trajectory_sam.csv").read_bytes()
    summary = json.loads((out1 / "summary.json").read_text())
    assert summary["runs"]["sam"]["status"] == "completed"
    assert summary["runs"]["sam"]["steps_run"] == 50


def test_cli_run_config_error_no_partial_files(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(BASIC.replace("rho =", "rhoo ="))
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 2
    assert not out.exists()
    assert "rhoo" in capsys.readouterr().err


def test_cli_run_expect_converge_diverged(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(
        '[loss]\nkind = "quadratic"\neigenvalues = [3.0]\n'
        '[optimizer]\nkind = "usam"\neta = 1.5\nrho = 1.0\n'
        '[run]\ninit = [1.0]\nbudget = 100\nexpect = "converge"\n'
    )
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 4
    summary = json.loads((out / "summary.json").read_text())
    assert summary["runs"]["usam"]["status"] == "diverged"


def test_cli_run_hypothesis_violation_exit_code(tmp_path, capsys):
    # scalar_fact analysis requires eta = 1/(x0^2+y0^2); 0.5 is not
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(
        '[loss]\nkind = "scalar_fact"\n'
        '[optimizer]\nkind = "sam"\neta = 0.5\nrho = 0.1\n'
        '[run]\ninit = [6.0, 8.0]\nbudget = 20\nanalyses = ["scalar_fact"]\n'
    )
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "hypothesis violation" in capsys.readouterr().err


def test_cli_sweep_and_heatmap(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(SWEEP_CFG)
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    svg = tmp_path / "heat.svg"
    assert main(["plot", str(out / "sweep.csv"), "--kind", "stability_heatmap",
                 "--param", "optimizer=usam", "--out", str(svg)]) == 0
    assert svg.exists()


def test_cli_analyze_matches_in_memory_result(tmp_path, capsys):
    hp = HyperParams(eta=0.01, rho=0.1)
    traj = run(ScalarFactorizationLoss(), OptimizerKind.SAM, [6.0, 8.0], hp,
               budget=30000)
    expected = dispatch_analysis("scalar_fact", traj, {"x0": 6.0, "y0": 8.0})
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, traj)
    assert main(["analyze", str(path), "scalar_fact",
                 "--param", "eta=0.01", "--param", "rho=0.1",
                 "--param", "kind=sam"]) == 0
    got = json.loads(capsys.readouterr().out)
    assert got == json.loads(json.dumps(expected))  # exact, incl. every float


def test_cli_analyze_missing_eta(tmp_path, capsys):
    hp = HyperParams(eta=0.4, rho=0.1)
    from samlab import SQRT_LOSS, SingleNeuronLoss

    traj = run(SingleNeuronLoss(SQRT_LOSS), OptimizerKind.SAM,
               [2.0, math.sqrt(40.0)], hp, budget=50)
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, traj)
    assert main(["analyze", str(path), "phases"]) == 2
    assert "eta" in capsys.readouterr().err


def test_cli_plot_trajectories(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(BASIC)
    out = tmp_path / "o"
    main(["run", "--config", str(cfg), "--out", str(out)])
    svg = tmp_path / "curves.svg"
    assert main(["plot", str(out / "trajectory_sam.csv"), "--kind", "loss_curves",
                 "--log", "--out", str(svg)]) == 0
    assert svg.exists()
    svg2 = tmp_path / "xy.svg"
    assert main(["plot", str(out / "trajectory_sam.csv"), "--kind", "xy_trajectory",
                 "--out", str(svg2)]) == 0


def test_cli_preset_emits_parseable_toml(tmp_path, capsys):
    assert main(["preset", "fig2_drift"]) == 0
    text = capsys.readouterr().out
    cfg = parse_config_text(text)
    assert cfg.eta == 0.005
    assert main(["preset", "fig1_stability", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "fig1_stability.toml").exists()
