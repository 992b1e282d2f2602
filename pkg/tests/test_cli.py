import math

import pandas as pd
import pytest
import fastcore.test as ft
from omegaconf import OmegaConf

from robeam.cli import EXIT_CONFIG, EXIT_OK, parse_vary, run

SMALL = ["--config", "small", "--instances", "1", "--workers", "0"]


def _argv(command, *args, overrides=()):
    "hydra overrides go last, after every flag"
    # single-antenna Eves leave the nonrobust program a null space to transmit in
    return [command, *SMALL, *args, "scenario.eve_antennas=1", *overrides]


def test_parse_vary_range():
    name, keys, points = parse_vary("R=1:2:0.5")
    ft.test_eq(name, "R")
    ft.test_eq(keys, ("rate_target",))
    ft.test_eq([p["R"] for p in points], [1.0, 1.5, 2.0])


def test_parse_vary_db_list():
    name, keys, points = parse_vary("Pt=10,20dB")
    ft.test_eq(keys, ("power_budget",))
    ft.test_close([p["Pt"] for p in points], [10.0, 100.0], eps=1e-9)
    ft.test_eq([p["Pt_dB"] for p in points], [10.0, 20.0])


def test_parse_vary_defaults_and_aliases():
    name, keys, points = parse_vary("rho")
    ft.test_eq(keys, ("p_secrecy", "q_eh"))
    ft.test_eq([p["rho"] for p in points], [0.05, 0.1])
    name, _, points = parse_vary("n_eve=1:3:1")
    ft.test_eq(name, "L")
    ft.test_eq([p["L"] for p in points], [1, 2, 3])
    assert all(isinstance(p["L"], int) for p in points)


@pytest.mark.parametrize(
    "spec, msg",
    [
        ("foo=1:2:1", "unknown parameter"),
        ("R=1:2", "start:stop:step"),
        ("R=2:1:1", "does not lead"),
        ("L=1:2:0.5", "integers"),
        ("Pt=10dB,20dBm", "mixed units"),
        ("p", "a grid is required"),
    ],
)
def test_parse_vary_rejects(spec, msg):
    ft.test_fail(lambda: parse_vary(spec), contains=msg)


def test_bad_config_exits_2(tmp_path):
    ft.test_eq(run(["solve-power", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]), EXIT_CONFIG)
    ft.test_eq(run(_argv("solve-power", "--out", str(tmp_path), overrides=["scenario.n_tx=0"])), EXIT_CONFIG)
    ft.test_eq(run(_argv("solve-power", "--out", str(tmp_path), "--method", "nosuch")), EXIT_CONFIG)


def test_unknown_flag_exits_2(tmp_path):
    ft.test_eq(run(["solve-power", "--no-such-flag", "--out", str(tmp_path)]), 2)
    ft.test_eq(run(["no-such-command"]), 2)


def test_sweep_needs_grid(tmp_path):
    ft.test_eq(run(_argv("sweep", "--method", "nonrobust", "--out", str(tmp_path))), EXIT_CONFIG)


def test_solve_power_outputs(tmp_path):
    code = run(_argv("solve-power", "--method", "nonrobust,mrt", "--seed", "3", "--out", str(tmp_path)))
    ft.test_eq(code, EXIT_OK)
    df = pd.read_csv(tmp_path / "solve_power.csv")
    ft.test_eq(list(df["method"]), ["nonrobust", "mrt"])
    for col in ("seed", "R", "eta", "p", "q", "status", "power", "rank_ratio", "iters", "wall_ms"):
        assert col in df.columns, col
    ft.test_eq(df["seed"].tolist(), [3, 3])
    row = df.iloc[0]
    ft.test_eq(row["status"], "Optimal")
    assert row["power"] > 0 and not math.isnan(row["power"])

    manifest = OmegaConf.load(tmp_path / "manifest.yaml")
    ft.test_eq(manifest.run.command, "solve_power")
    ft.test_eq(manifest.experiment.seed, 3)
    ft.test_eq(list(manifest.experiment.methods), ["nonrobust", "mrt"])
    ft.test_eq(manifest.scenario.n_tx, 4)
    ft.test_eq(list(manifest.scenario.eve_antennas), [1, 1])
    ft.test_close(manifest.scenario.power_budget, 10.0, eps=1e-12)
    assert (tmp_path / "log.txt").exists()


def test_manifest_reproduces_run(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    ft.test_eq(run(_argv("solve-power", "--method", "nonrobust", "--out", str(first))), EXIT_OK)
    ft.test_eq(run(["solve-power", "--config", str(first / "manifest.yaml"), "--out", str(second)]), EXIT_OK)
    a, b = pd.read_csv(first / "solve_power.csv"), pd.read_csv(second / "solve_power.csv")
    ft.test_eq(a["seed"].tolist(), b["seed"].tolist())
    ft.test_eq(a["status"].tolist(), b["status"].tolist())
    ft.test_close(a["power"].to_numpy(), b["power"].to_numpy(), eps=1e-9)


def test_sweep_rows(tmp_path):
    code = run(_argv("sweep", "--method", "nonrobust", "--vary", "R=0.5:1:0.5", "--out", str(tmp_path)))
    ft.test_eq(code, EXIT_OK)
    df = pd.read_csv(tmp_path / "sweep.csv")
    ft.test_eq(len(df), 2)
    ft.test_eq(df["R"].tolist(), [0.5, 1.0])
    assert df["power"].iloc[0] <= df["power"].iloc[1] * (1 + 1e-6)


def test_feasibility_rows(tmp_path):
    code = run(_argv("feasibility", "--method", "nonrobust", "--instances", "2", "--out", str(tmp_path)))
    ft.test_eq(code, EXIT_OK)
    df = pd.read_csv(tmp_path / "feasibility.csv")
    ft.test_eq(df.columns.tolist(), ["method", "instances", "feasibility_rate"])
    ft.test_eq(df["instances"].tolist(), [2])
    assert 0.0 <= df["feasibility_rate"].iloc[0] <= 1.0


def test_failure_budget_exits_3(tmp_path):
    code = run(_argv("solve-power", "--method", "nonrobust", "--max-failures", "0", "--out", str(tmp_path),
                      overrides=["solver.max_iter=1"]))
    ft.test_eq(code, 3)


def test_sweep_plot(tmp_path):
    code = run(_argv("sweep", "--method", "nonrobust", "--vary", "R=0.5,1", "--plot", "--out", str(tmp_path)))
    ft.test_eq(code, EXIT_OK)
    assert (tmp_path / "sweep.png").exists()
