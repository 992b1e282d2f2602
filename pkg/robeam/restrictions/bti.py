__all__ = ["build_power_min_bti"]

from ..conic import AffineExpr, ConicProgram, Nonneg, Psd, SecondOrder, add_constraint
from ..scenario import ChannelSet, ScenarioConfig
from ..utils.structures import RESTRICTION_REGISTRY
from .common import SQRT2, ComplexAffine, ErTerms, EveTerms, QTerms, add_rate_floor, check_inputs
from .params import RestrictionParams


@RESTRICTION_REGISTRY.register()
def build_power_min_bti(cs: ChannelSet, cfg: ScenarioConfig) -> ConicProgram:
    """
    Power minimization with the Bernstein-type inequality restriction of
    both outage constraints. For a Gaussian quadratic form with matrix `A`,
    vector `r` and offset `theta`, the outage bound `rho` holds whenever

        tr(A) - sqrt(-2 ln rho) psi + ln(rho) omega + theta >= 0
        ||[vec(A); sqrt(2) r]|| <= psi
        omega I + A >= 0,   psi, omega >= 0

    Eves enter with `A = -M`, `r = -r_e`, `theta = tau` and ERs with
    `A = M_g`, `r = r_g`, `theta = g^H Q g - eta / xi`.
    """
    check_inputs(cs, cfg)
    params = RestrictionParams.from_scenario(cfg, need_quantiles=False)
    L, K = cs.n_eve, cs.n_er

    prog = ConicProgram("bti")
    prog.add_hermitian("Q", cs.n_tx, trace_cost=1.0)
    if L:
        prog.add_variable("psi", L)
        prog.add_variable("omega", L)
    if K:
        prog.add_variable("nu", K)
        prog.add_variable("phi", K)

    qt = QTerms(prog)
    qt.add_psd()
    add_rate_floor(prog, qt, cs, cfg)

    for i in range(L):
        eve = EveTerms.build(qt, cs, cfg, i)
        psi = ComplexAffine.scalar_var(prog, "psi", i)
        omega = ComplexAffine.scalar_var(prog, "omega", i)
        linear = -eve.M.trace() - params.sqrt_m2ln_p * psi + params.ln_p * omega + eve.tau
        add_constraint(prog, linear.real(), Nonneg(1), f"eve_{i}/linear")
        soc = AffineExpr.stack([psi.real(), eve.M.hvec(), (SQRT2 * eve.r).stacked()])
        add_constraint(prog, soc, SecondOrder(soc.size), f"eve_{i}/soc")
        lmi = omega.times_identity(eve.M.shape[0]) - eve.M
        add_constraint(prog, lmi.svec_embedded(), Psd(2 * eve.M.shape[0]), f"eve_{i}/lmi")

    for k in range(K):
        er = ErTerms.build(qt, cs, cfg, k)
        nu = ComplexAffine.scalar_var(prog, "nu", k)
        phi = ComplexAffine.scalar_var(prog, "phi", k)
        linear = er.M.trace() - params.sqrt_m2ln_q * nu + params.ln_q * phi + er.theta
        add_constraint(prog, linear.real(), Nonneg(1), f"er_{k}/linear")
        soc = AffineExpr.stack([nu.real(), er.M.hvec(), (SQRT2 * er.r).stacked()])
        add_constraint(prog, soc, SecondOrder(soc.size), f"er_{k}/soc")
        lmi = phi.times_identity(cs.n_tx) + er.M
        add_constraint(prog, lmi.svec_embedded(), Psd(2 * cs.n_tx), f"er_{k}/lmi")

    if L or K:
        bounds = AffineExpr.stack([AffineExpr.variable(prog, name) for name in prog.variables if name != "Q"])
        add_constraint(prog, bounds, Nonneg(bounds.size), "slacks")
    return prog
