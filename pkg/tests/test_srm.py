import dataclasses
import math

import numpy as np
import pytest
import fastcore.test as ft

from robeam.design import secrecy_rate_exact
from robeam.scenario import ChannelSet, sample_channels
from robeam.solver import SolverSettings
from robeam.srm import RATE_TOL, rate_upper_bound, srm_solve
from robeam.task import solve_power_min

from .conftest import small_config


def open_config(**kwargs):
    "no Eves, no ERs"
    return small_config(n_er=0, n_eve=0, eh_targets=[], **kwargs)


def test_rate_upper_bound(rng):
    cfg = open_config(power_budget="10dB")
    cs = sample_channels(cfg, rng)
    ft.test_close(rate_upper_bound(cs, cfg), math.log2(1 + 10 * np.vdot(cs.h, cs.h).real), eps=1e-12)


@pytest.mark.parametrize("method", ["bti", "sproc", "ldi", "nonrobust"])
def test_without_receivers_reaches_the_bound(method, rng):
    cfg = open_config()
    cs = sample_channels(cfg, rng)
    result = srm_solve(cs, cfg, method)
    bound = rate_upper_bound(cs, cfg)
    assert bound - RATE_TOL <= result.rate <= bound
    lo, hi = result.bracket
    assert hi - lo <= RATE_TOL
    ft.test_eq(lo, result.rate)
    assert result.design.feasible
    assert result.design.power <= cfg.power_budget * (1 + 1e-9)
    ft.test_eq(result.failures, 0)
    assert all(set(p) == {"rate", "status", "power", "feasible"} for p in result.evaluations)


def test_unpacks_to_rate_and_design(rng):
    cfg = open_config()
    cs = sample_channels(cfg, rng)
    rate, design = srm_solve(cs, cfg, "nonrobust", tol_rate=1e-2)
    assert rate > 0
    assert design.feasible


def test_mrt_rate(rng):
    cfg = small_config()
    cs = sample_channels(cfg, rng)
    result = srm_solve(cs, cfg, "mrt")
    ft.test_close(result.rate, secrecy_rate_exact(result.design.Q, cs.h, cs.H_hat, 1.0, 1.0), eps=1e-12)
    ft.test_close(result.design.power, cfg.power_budget, eps=1e-9)
    ft.test_eq(result.evaluations, [])
    open_cfg = open_config()
    cs = sample_channels(open_cfg, rng)
    ft.test_close(srm_solve(cs, open_cfg, "mrt").rate, rate_upper_bound(cs, open_cfg), eps=1e-10)


def test_infeasible_everywhere(rng):
    "an Eve on the IR channel leaves no positive secrecy rate"
    h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    cs = ChannelSet(h, np.zeros((0, 3)), [h[:, None]], np.zeros((0, 3, 3)), [np.zeros((3, 3))])
    cfg = small_config(n_tx=3, n_er=0, n_eve=1, eve_antennas=1, eh_targets=[])
    result = srm_solve(cs, cfg, "nonrobust", tol_rate=1e-2)
    ft.test_eq(result.rate, 0.0)
    ft.test_eq(result.design.status, "Infeasible")
    ft.test_eq(result.design.power, 0.0)
    assert not any(p["feasible"] for p in result.evaluations)


def test_failed_evaluations_are_counted(rng):
    cfg = open_config()
    cs = sample_channels(cfg, rng)
    result = srm_solve(cs, cfg, "nonrobust", settings=SolverSettings(max_iter=1), tol_rate=0.1)
    ft.test_eq(result.failures, len(result.evaluations))
    ft.test_eq(result.rate, 0.0)


def test_rejects_bad_tolerance(rng):
    cfg = open_config()
    cs = sample_channels(cfg, rng)
    ft.test_fail(lambda: srm_solve(cs, cfg, "bti", tol_rate=0.0), contains="tol_rate")


def test_more_power_more_rate():
    cfg = small_config(eve_antennas=1)
    cs = sample_channels(cfg, np.random.default_rng(31))
    low = srm_solve(cs, cfg, "nonrobust").rate
    high = srm_solve(cs, dataclasses.replace(cfg, power_budget=2 * cfg.power_budget), "nonrobust").rate
    assert high >= low - RATE_TOL


@pytest.mark.slow
@pytest.mark.parametrize("method", ["bti", "sproc", "ldi"])
def test_consistency_loop(method):
    cfg = small_config(eve_antennas=1)
    cs = sample_channels(cfg, np.random.default_rng(32))
    rate, design = srm_solve(cs, cfg, method)
    assert rate > 0
    at_rate = solve_power_min(cs, dataclasses.replace(cfg, rate_target=rate), method)
    assert at_rate.power <= cfg.power_budget * (1 + 1e-6)
    again = srm_solve(cs, dataclasses.replace(cfg, power_budget=at_rate.power * (1 + 1e-9)), method)
    assert again.rate >= rate - 2 * RATE_TOL


@pytest.mark.slow
def test_stricter_outage_lowers_rate():
    cfg = small_config(eve_antennas=1)
    cs = sample_channels(cfg, np.random.default_rng(33))
    loose = srm_solve(cs, cfg, "bti").rate
    strict = srm_solve(cs, dataclasses.replace(cfg, p_secrecy=0.05, q_eh=0.05), "bti").rate
    assert strict <= loose + RATE_TOL


@pytest.mark.slow
def test_appended_eves_lower_rate():
    cfg = small_config(n_eve=3, eve_antennas=1)
    for i in range(30):
        cs = sample_channels(cfg, np.random.default_rng([11, i]))
        rates = [
            srm_solve(cs.subset(n_eve=l), cfg.with_updates(n_eve=l), "bti", tol_rate=1e-2).rate for l in (1, 2, 3)
        ]
        assert rates[1] <= rates[0] + 1e-2, (i, rates)
        assert rates[2] <= rates[1] + 1e-2, (i, rates)
