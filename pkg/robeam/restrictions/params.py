__all__ = ["chi2_inv_cdf", "solve_v", "RestrictionParams"]

import math
from dataclasses import dataclass
from typing import Tuple

from scipy.optimize import brentq
from scipy.special import gammainc

from ..scenario import ScenarioConfig


def chi2_inv_cdf(prob: float, dof: int) -> float:
    """
    Quantile of the chi-square distribution with `dof` degrees of freedom,
    i.e. the `x` with `P(dof/2, x/2) = prob` for the regularized lower
    incomplete gamma function `P`. The root is bracketed by doubling and
    refined with Brent's method.
    """
    if not 0 < prob < 1:
        raise ValueError(f"prob must be in (0, 1), got {prob}")
    if int(dof) != dof or dof < 1:
        raise ValueError(f"dof must be a positive integer, got {dof}")

    a = dof / 2.0
    f = lambda x: gammainc(a, x / 2.0) - prob
    hi = float(dof)
    while f(hi) < 0:
        hi *= 2.0
    return brentq(f, 0.0, hi, xtol=1e-14, rtol=1e-15, maxiter=500)


def solve_v(p: float) -> float:
    """
    Positive root of `(1 - 1/(2 v^2)) v = sqrt(-ln p)`, i.e.
    `v = (c + sqrt(c^2 + 2)) / 2` with `c = sqrt(-ln p)`.
    """
    if not 0 < p < 1:
        raise ValueError(f"p must be in (0, 1), got {p}")
    c = math.sqrt(-math.log(p))
    return (c + math.sqrt(c * c + 2.0)) / 2.0


@dataclass(frozen=True)
class RestrictionParams:
    """
    Scalars shared by the restriction builders.

    Arguments:
    1. `gamma_eve`: ball radius per Eve, `sqrt(chi2_inv_cdf(1 - p, 2 N_T N_e,i) / 2)`.
    2. `gamma_er`: ball radius of the ERs, `sqrt(chi2_inv_cdf(1 - q, 2 N_T) / 2)`.
    3. `v_p`, `v_q`: large-deviation parameters from `solve_v`.
    4. `sqrt_m2ln_p`, `ln_p`, `sqrt_m2ln_q`, `ln_q`, `sqrt_mln_p`, `sqrt_mln_q`: cached logs.
    """

    gamma_eve: Tuple[float, ...]
    gamma_er: float
    v_p: float
    v_q: float
    sqrt_m2ln_p: float
    ln_p: float
    sqrt_m2ln_q: float
    ln_q: float
    sqrt_mln_p: float
    sqrt_mln_q: float

    @classmethod
    def from_scenario(cls, cfg: ScenarioConfig, need_quantiles: bool = True) -> "RestrictionParams":
        p, q = cfg.p_secrecy, cfg.q_eh
        if need_quantiles:
            gamma_eve = tuple(math.sqrt(chi2_inv_cdf(1 - p, 2 * cfg.n_tx * ne) / 2) for ne in cfg.eve_antennas)
            gamma_er = math.sqrt(chi2_inv_cdf(1 - q, 2 * cfg.n_tx) / 2)
            v_p, v_q = solve_v(p), solve_v(q)
        else:
            gamma_eve, gamma_er, v_p, v_q = (), float("nan"), float("nan"), float("nan")
        return cls(
            gamma_eve=gamma_eve,
            gamma_er=gamma_er,
            v_p=v_p,
            v_q=v_q,
            sqrt_m2ln_p=math.sqrt(-2 * math.log(p)),
            ln_p=math.log(p),
            sqrt_m2ln_q=math.sqrt(-2 * math.log(q)),
            ln_q=math.log(q),
            sqrt_mln_p=math.sqrt(-math.log(p)),
            sqrt_mln_q=math.sqrt(-math.log(q)),
        )
