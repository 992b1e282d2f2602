__all__ = ["build_power_min_sproc"]

from ..conic import AffineExpr, ConicProgram, Nonneg, Psd, add_constraint
from ..scenario import ChannelSet, ScenarioConfig
from ..utils.structures import RESTRICTION_REGISTRY
from .common import ComplexAffine, ErTerms, EveTerms, QTerms, add_rate_floor, check_inputs, hermitian_block
from .params import RestrictionParams


@RESTRICTION_REGISTRY.register()
def build_power_min_sproc(cs: ChannelSet, cfg: ScenarioConfig) -> ConicProgram:
    """
    Power minimization with the S-procedure restriction: the quadratic
    constraints must hold on the ball `||v||^2 <= gamma^2` of standardized
    errors, whose probability is `1 - p` (resp. `1 - q`). Per Eve

        [[mu I - M, -r], [-r^H, tau - mu gamma^2]] >= 0,   mu >= 0

    and per ER `[[mu I + M_g, r_g], [r_g^H, theta - mu gamma^2]] >= 0`.
    """
    check_inputs(cs, cfg)
    params = RestrictionParams.from_scenario(cfg)
    L, K = cs.n_eve, cs.n_er

    prog = ConicProgram("sproc")
    prog.add_hermitian("Q", cs.n_tx, trace_cost=1.0)
    if L:
        prog.add_variable("mu_eve", L)
    if K:
        prog.add_variable("mu_er", K)

    qt = QTerms(prog)
    qt.add_psd()
    add_rate_floor(prog, qt, cs, cfg)

    for i in range(L):
        eve = EveTerms.build(qt, cs, cfg, i)
        mu = ComplexAffine.scalar_var(prog, "mu_eve", i)
        m = eve.M.shape[0]
        theta = hermitian_block(mu.times_identity(m) - eve.M, -eve.r, eve.tau - params.gamma_eve[i] ** 2 * mu)
        add_constraint(prog, theta.svec_embedded(), Psd(2 * (m + 1)), f"eve_{i}/lmi")

    for k in range(K):
        er = ErTerms.build(qt, cs, cfg, k)
        mu = ComplexAffine.scalar_var(prog, "mu_er", k)
        upsilon = hermitian_block(
            mu.times_identity(cs.n_tx) + er.M, er.r, er.theta - params.gamma_er ** 2 * mu
        )
        add_constraint(prog, upsilon.svec_embedded(), Psd(2 * (cs.n_tx + 1)), f"er_{k}/lmi")

    if L or K:
        bounds = AffineExpr.stack([AffineExpr.variable(prog, name) for name in prog.variables if name != "Q"])
        add_constraint(prog, bounds, Nonneg(bounds.size), "slacks")
    return prog
