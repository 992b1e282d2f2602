__all__ = ["build_power_min_nonrobust", "mrt_design"]

import logging

import numpy as np

from ..conic import ConicProgram, Nonneg, add_constraint
from ..design import BeamformingDesign, MethodTag, make_design
from ..scenario import ChannelSet, ScenarioConfig
from ..utils.structures import RESTRICTION_REGISTRY
from .common import ErTerms, EveTerms, QTerms, add_rate_floor, check_inputs

_logger = logging.getLogger(__name__)


@RESTRICTION_REGISTRY.register()
def build_power_min_nonrobust(cs: ChannelSet, cfg: ScenarioConfig) -> ConicProgram:
    """
    Power minimization that trusts the estimated channels: the trace
    relaxation of the Eve rate constraint and the nominal harvested power,

        tr(H^H Q H) <= sigma_e^2 / 2^R (1 + h^H Q h / sigma_d^2) - sigma_e^2
        xi g^H Q g >= eta

    with `Q >= 0`. Error covariances are ignored. Without Eves the IR rate
    floor `h^H Q h >= sigma_d^2 (2^R - 1)` takes the place of the Eve rows.
    """
    check_inputs(cs, cfg)
    prog = ConicProgram("nonrobust")
    prog.add_hermitian("Q", cs.n_tx, trace_cost=1.0)
    qt = QTerms(prog)
    qt.add_psd()
    add_rate_floor(prog, qt, cs, cfg)
    for i in range(cs.n_eve):
        eve = EveTerms.build(qt, cs, cfg, i)
        add_constraint(prog, eve.tau.real(), Nonneg(1), f"eve_{i}/linear")
    for k in range(cs.n_er):
        er = ErTerms.build(qt, cs, cfg, k)
        add_constraint(prog, (cfg.eh_efficiency[k] * er.theta).real(), Nonneg(1), f"er_{k}/linear")
    return prog


def mrt_design(cs: ChannelSet, cfg: ScenarioConfig) -> BeamformingDesign:
    "Maximal ratio transmission at full power, `Q = P_T h h^H / ||h||^2`"
    h = np.asarray(cs.h, dtype=complex)
    norm_sq = float(np.vdot(h, h).real)
    if norm_sq == 0:
        raise ValueError("MRT needs a nonzero IR channel")
    Q = cfg.power_budget / norm_sq * np.outer(h, h.conj())
    design = make_design(Q, MethodTag.MRT, objective=cfg.power_budget)
    # exact by construction, eigh leaves round-off in lambda_2
    design.rank_ratio = 0.0
    return design
