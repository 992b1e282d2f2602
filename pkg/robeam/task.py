__all__ = ["solve_power_min"]

import logging
from typing import Optional

from fastcore.all import ifnone
from fvcore.common.timer import Timer

from .conic import SolveStatus, extract_q
from .design import BeamformingDesign, MethodTag, make_design, null_design
from .restrictions import build_power_min, mrt_design
from .scenario import ChannelSet, ScenarioConfig
from .solver import SolverSettings, solve

_logger = logging.getLogger(__name__)


def solve_power_min(
    cs: ChannelSet,
    cfg: ScenarioConfig,
    method,
    settings: Optional[SolverSettings] = None,
) -> BeamformingDesign:
    """
    Builds and solves the power-minimization program of `method` on one
    channel set and wraps the optimum into a `BeamformingDesign`.

    Arguments:
    1. `cs`: the estimated channels and error covariances.
    2. `cfg`: the scenario, `rate_target` and `eh_targets` are the QoS targets.
    3. `method`: a `MethodTag` or its name. `MRT` returns the full-power MRT design.
    4. `settings`: solver settings, defaults to `SolverSettings()`.

    An instance without an `Optimal` solution gives a `null_design` whose
    `status` carries the solver status.
    """
    method = MethodTag.parse(method)
    if method is MethodTag.MRT:
        return mrt_design(cs, cfg)

    settings = ifnone(settings, SolverSettings())
    timer = Timer()
    prog = build_power_min(method, cs, cfg)
    build_time = timer.seconds()
    sol = solve(prog, settings)
    info = dict(prog.summary(), build_time=build_time, **sol.info)

    if sol.status != SolveStatus.OPTIMAL:
        _logger.debug(f"{method} power minimization ended with {sol.status} after {sol.iterations} iterations")
        return null_design(
            cs.n_tx, method, str(sol.status), iterations=sol.iterations, wall_time=timer.seconds(), info=info
        )

    Q = extract_q(prog, sol)
    design = make_design(
        Q,
        method,
        status=str(sol.status),
        iterations=sol.iterations,
        wall_time=timer.seconds(),
        objective=sol.primal_objective,
        info=info,
    )
    if not design.is_rank_one:
        _logger.debug(f"{method} returned a covariance with rank ratio {design.rank_ratio:.2e}")
    return design
