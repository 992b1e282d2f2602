__all__ = ["RATE_TOL", "rate_upper_bound", "SRMResult", "srm_solve"]

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from fastcore.all import ifnone
from fvcore.common.timer import Timer

from .design import BeamformingDesign, MethodTag, null_design, secrecy_rate_exact
from .restrictions import mrt_design
from .scenario import ChannelSet, ScenarioConfig
from .solver import SolverSettings
from .task import solve_power_min

_logger = logging.getLogger(__name__)

RATE_TOL = 1e-3

# solver statuses that say nothing about feasibility
_FAILURES = ("MaxIter", "Numerical")


def rate_upper_bound(cs: ChannelSet, cfg: ScenarioConfig) -> float:
    "`log2(1 + P_T ||h||^2 / sigma_d^2)`, the IR rate at full power without Eves"
    gain = float(np.vdot(cs.h, cs.h).real)
    return math.log2(1.0 + cfg.power_budget * gain / cfg.sigma_d_sq)


@dataclass
class SRMResult:
    """
    Outcome of a secrecy-rate maximization.

    Arguments:
    1. `rate`: the largest rate found feasible within the power budget (0 if none).
    2. `design`: the design achieving `rate`, a null design if none.
    3. `bracket`: final `(R_lo, R_hi)`, `R_lo` feasible (or 0) and `R_hi` infeasible or the upper bound.
    4. `evaluations`: one record per bisection step with its rate, status, power and verdict.
    5. `failures`: evaluations that ended `MaxIter` or `Numerical`.

    Unpacks as `(rate, design)`.
    """

    rate: float
    design: BeamformingDesign
    bracket: Tuple[float, float]
    evaluations: List[Dict[str, Any]] = field(default_factory=list)
    failures: int = 0
    wall_time: float = 0.0

    def __iter__(self):
        return iter((self.rate, self.design))


def srm_solve(
    cs: ChannelSet,
    cfg: ScenarioConfig,
    method,
    settings: Optional[SolverSettings] = None,
    tol_rate: Optional[float] = None,
) -> SRMResult:
    """
    Maximizes the secrecy rate under the power budget `cfg.power_budget`
    in two stages: bisection over the rate target, where each candidate `R`
    solves the power minimization of `method` at `R` and is feasible when
    it is `Optimal` with power within the budget.

    `MRT` transmits at full power along `h`, its rate is the exact secrecy
    rate of that design on the estimated channels.
    """
    method = MethodTag.parse(method)
    tol_rate = ifnone(tol_rate, RATE_TOL)
    if not tol_rate > 0:
        raise ValueError(f"tol_rate must be > 0, got {tol_rate}")
    timer = Timer()

    if method is MethodTag.MRT:
        design = mrt_design(cs, cfg)
        rate = float(secrecy_rate_exact(design.Q, cs.h, cs.H_hat, cfg.sigma_d_sq, cfg.sigma_e_sq))
        return SRMResult(rate, design, (rate, rate), wall_time=timer.seconds())

    lo, hi = 0.0, rate_upper_bound(cs, cfg)
    best, evaluations, failures = None, [], 0
    while hi - lo > tol_rate:
        mid = 0.5 * (lo + hi)
        design = solve_power_min(cs, dataclasses.replace(cfg, rate_target=mid), method, settings)
        feasible = design.feasible and design.power <= cfg.power_budget * (1 + 1e-9)
        failures += design.status in _FAILURES
        evaluations.append(dict(rate=mid, status=design.status, power=design.power, feasible=feasible))
        _logger.debug(f"{method} bisection R={mid:.6f}: {design.status}, power {design.power:.6g}")
        if feasible:
            lo, best = mid, design
        else:
            hi = mid

    if failures:
        _logger.warning(f"{method}: {failures} of {len(evaluations)} bisection steps ended without a verdict")
    if best is None:
        _logger.warning(f"{method}: no feasible rate within the power budget {cfg.power_budget:.6g}")
        best = null_design(cs.n_tx, method, "Infeasible")
    return SRMResult(lo, best, (lo, hi), evaluations, failures, timer.seconds())
