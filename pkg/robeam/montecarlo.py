__all__ = [
    "CHUNK_TRIALS",
    "OutageReport",
    "binomial_half_width",
    "validate_design",
    "feasibility_rate",
]

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Dict, Optional

import numpy as np
from fastcore.all import ifnone, parallel

from .config import num_workers
from .design import BeamformingDesign, eve_rates, harvested_power, ir_rate
from .scenario import ChannelSet, ScenarioConfig, sample_channels, sample_errors
from .solver import SolverSettings
from .task import solve_power_min

_logger = logging.getLogger(__name__)

CHUNK_TRIALS = 1000


def binomial_half_width(rate, trials: int):
    "Half-width of the normal-approximation 95% interval of a binomial proportion"
    rate = np.asarray(rate, dtype=float)
    return 1.96 * np.sqrt(rate * (1.0 - rate) / trials)


@dataclass
class OutageReport:
    """
    Monte-Carlo estimate of the outage probabilities of a design.

    Arguments:
    1. `trials`: number of error realizations.
    2. `secrecy_outage_rate`: fraction of trials whose secrecy rate is below `R`.
    3. `secrecy_ci`: 95% half-width of `secrecy_outage_rate`.
    4. `eh_outage_rate`: per ER, fraction of trials harvesting less than `eta_k`.
    5. `eh_ci`: 95% half-widths of `eh_outage_rate`.
    6. `worst_eve_counts`: per Eve, the number of trials in which it has the largest mutual information.
    """

    trials: int
    secrecy_outage_rate: float
    secrecy_ci: float
    eh_outage_rate: np.ndarray
    eh_ci: np.ndarray
    worst_eve_counts: np.ndarray

    def within(self, p: float, q: float, sigmas: float = 3.0) -> bool:
        "Whether every outage rate is below its tolerance up to `sigmas` binomial standard deviations"
        sd = lambda rho: sigmas * math.sqrt(rho * (1 - rho) / self.trials)
        return bool(self.secrecy_outage_rate <= p + sd(p) and np.all(self.eh_outage_rate <= q + sd(q)))

    def to_record(self) -> Dict[str, float]:
        "Flat columns for the csv outputs"
        out = dict(
            trials=self.trials,
            secrecy_outage=self.secrecy_outage_rate,
            secrecy_ci=self.secrecy_ci,
            eh_outage_max=float(np.max(self.eh_outage_rate, initial=0.0)),
        )
        for k, (rate, ci) in enumerate(zip(self.eh_outage_rate, self.eh_ci)):
            out[f"eh_outage_{k}"], out[f"eh_ci_{k}"] = float(rate), float(ci)
        for i, count in enumerate(self.worst_eve_counts):
            out[f"worst_eve_{i}"] = int(count)
        return out


def _count_chunk(j, base, Q, cs, cfg, trials):
    "Violation counts of chunk `j`, seeded from `(base, j)`"
    rng = np.random.default_rng([base, j])
    real = sample_errors(cs, rng, trials)
    c_ir = ir_rate(Q, cs.h, cfg.sigma_d_sq)
    worst = np.zeros(cs.n_eve, dtype=np.int64)
    if cs.n_eve:
        rates = eve_rates(Q, real.H, cfg.sigma_e_sq)
        secrecy = np.maximum(c_ir - rates.max(axis=-1), 0.0)
        worst += np.bincount(rates.argmax(axis=-1), minlength=cs.n_eve)
    else:
        secrecy = np.full(trials, c_ir)
    sec = int(np.sum(secrecy < cfg.rate_target))
    eta = np.asarray(cfg.eh_targets, dtype=float)
    xi = np.asarray(cfg.eh_efficiency, dtype=float)
    harvested = harvested_power(Q, real.g, 1.0) * xi
    eh = np.sum(harvested < eta, axis=0).reshape(cs.n_er)
    return sec, eh, worst


def validate_design(
    design: BeamformingDesign,
    cs: ChannelSet,
    cfg: ScenarioConfig,
    trials: int = 10000,
    rng: Optional[np.random.Generator] = None,
    n_workers: Optional[int] = None,
) -> OutageReport:
    """
    Estimates the secrecy and energy outage of `design` against the exact
    model: every trial realizes the actual channels with `sample_errors`,
    then evaluates the log-det secrecy rate against `cfg.rate_target` and
    the harvested power of every ER against its target.

    Trials run in chunks of `CHUNK_TRIALS` with seeds derived from one draw
    of `rng`, so the report does not depend on `n_workers`.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = ifnone(rng, np.random.default_rng())
    base = int(rng.integers(0, 2 ** 63 - 1))
    sizes = [CHUNK_TRIALS] * (trials // CHUNK_TRIALS)
    if trials % CHUNK_TRIALS:
        sizes.append(trials % CHUNK_TRIALS)

    Q = np.asarray(design.Q, dtype=complex)
    n_workers = ifnone(n_workers, num_workers())
    results = parallel(
        _chunk_task, list(enumerate(sizes)), base=base, Q=Q, cs=cs, cfg=cfg, n_workers=n_workers, progress=False
    )

    sec = sum(r[0] for r in results)
    eh = np.sum([r[1] for r in results], axis=0).reshape(cs.n_er)
    worst = np.sum([r[2] for r in results], axis=0).reshape(cs.n_eve)
    sec_rate, eh_rate = sec / trials, eh / trials
    return OutageReport(
        trials,
        float(sec_rate),
        float(binomial_half_width(sec_rate, trials)),
        eh_rate,
        binomial_half_width(eh_rate, trials),
        worst,
    )


def _chunk_task(item, base, Q, cs, cfg):
    j, size = item
    return _count_chunk(j, base, Q, cs, cfg, size)


def _feasible_instance(i, base, cfg, method, settings):
    cs = sample_channels(cfg, np.random.default_rng([base, i]))
    return solve_power_min(cs, cfg, method, settings).feasible


def feasibility_rate(
    cfg: ScenarioConfig,
    method,
    n_instances: int,
    rng: Optional[np.random.Generator] = None,
    settings: Optional[SolverSettings] = None,
    n_workers: Optional[int] = None,
) -> float:
    """
    Fraction of `n_instances` random channel sets for which the power
    minimization of `method` is solved `Optimal`. Instance `i` draws its
    channels from `(base, i)` with `base` taken from `rng`.
    """
    if n_instances < 1:
        raise ValueError(f"n_instances must be >= 1, got {n_instances}")
    rng = ifnone(rng, np.random.default_rng())
    base = int(rng.integers(0, 2 ** 63 - 1))
    # `method` is also a keyword of `parallel` itself, so it is bound here
    task = partial(_feasible_instance, base=base, cfg=cfg, method=method, settings=settings)
    flags = parallel(
        task,
        range(n_instances),
        n_workers=ifnone(n_workers, num_workers()),
        progress=False,
    )
    rate = float(np.mean(list(flags)))
    _logger.debug(f"{method}: feasibility rate {rate:.3f} over {n_instances} instances")
    return rate
