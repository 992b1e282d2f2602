__all__ = ["build_power_min_ldi"]

from ..conic import AffineExpr, ConicProgram, Nonneg, SecondOrder, add_constraint
from ..scenario import ChannelSet, ScenarioConfig
from ..utils.structures import RESTRICTION_REGISTRY
from .common import SQRT2, ComplexAffine, ErTerms, EveTerms, QTerms, add_rate_floor, check_inputs
from .params import RestrictionParams


@RESTRICTION_REGISTRY.register()
def build_power_min_ldi(cs: ChannelSet, cfg: ScenarioConfig) -> ConicProgram:
    """
    Power minimization with the large-deviation restriction, which only
    needs second-order cones besides `Q >= 0`:

        tr(A) + theta >= 2 sqrt(-ln rho) (psi + omega)
        ||r|| / sqrt(2) <= psi,   v ||A||_F <= omega

    with `v` from `solve_v(rho)`.
    """
    check_inputs(cs, cfg)
    params = RestrictionParams.from_scenario(cfg)
    L, K = cs.n_eve, cs.n_er

    prog = ConicProgram("ldi")
    prog.add_hermitian("Q", cs.n_tx, trace_cost=1.0)
    if L:
        prog.add_variable("psi_bar", L)
        prog.add_variable("omega_bar", L)
    if K:
        prog.add_variable("nu_bar", K)
        prog.add_variable("phi_bar", K)

    qt = QTerms(prog)
    qt.add_psd()
    add_rate_floor(prog, qt, cs, cfg)

    for i in range(L):
        eve = EveTerms.build(qt, cs, cfg, i)
        psi = ComplexAffine.scalar_var(prog, "psi_bar", i)
        omega = ComplexAffine.scalar_var(prog, "omega_bar", i)
        linear = -eve.M.trace() + eve.tau - 2 * params.sqrt_mln_p * (psi + omega)
        add_constraint(prog, linear.real(), Nonneg(1), f"eve_{i}/linear")
        soc = AffineExpr.stack([psi.real(), (eve.r * (1 / SQRT2)).stacked()])
        add_constraint(prog, soc, SecondOrder(soc.size), f"eve_{i}/soc_r")
        soc = AffineExpr.stack([omega.real(), params.v_p * eve.M.hvec()])
        add_constraint(prog, soc, SecondOrder(soc.size), f"eve_{i}/soc_a")

    for k in range(K):
        er = ErTerms.build(qt, cs, cfg, k)
        nu = ComplexAffine.scalar_var(prog, "nu_bar", k)
        phi = ComplexAffine.scalar_var(prog, "phi_bar", k)
        linear = er.M.trace() + er.theta - 2 * params.sqrt_mln_q * (nu + phi)
        add_constraint(prog, linear.real(), Nonneg(1), f"er_{k}/linear")
        soc = AffineExpr.stack([nu.real(), (er.r * (1 / SQRT2)).stacked()])
        add_constraint(prog, soc, SecondOrder(soc.size), f"er_{k}/soc_r")
        soc = AffineExpr.stack([phi.real(), params.v_q * er.M.hvec()])
        add_constraint(prog, soc, SecondOrder(soc.size), f"er_{k}/soc_a")

    if L or K:
        bounds = AffineExpr.stack([AffineExpr.variable(prog, name) for name in prog.variables if name != "Q"])
        add_constraint(prog, bounds, Nonneg(bounds.size), "slacks")
    return prog
