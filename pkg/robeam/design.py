__all__ = [
    "RANK_ONE_TOL",
    "MethodTag",
    "BeamformingDesign",
    "extract_beamformer",
    "make_design",
    "null_design",
    "ir_rate",
    "eve_rates",
    "secrecy_rate_exact",
    "secrecy_rate_relaxed",
    "harvested_power",
]

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Sequence, Tuple, Union

import numpy as np

from .linalg import check_hermitian

_logger = logging.getLogger(__name__)

RANK_ONE_TOL = 1e-5


class MethodTag(str, Enum):
    "Design methods; the value is the name used on the command line"
    BTI = "bti"
    SPROCEDURE = "sproc"
    LDI = "ldi"
    NONROBUST = "nonrobust"
    MRT = "mrt"

    def __str__(self):
        return self.value

    @property
    def is_robust(self) -> bool:
        return self in (MethodTag.BTI, MethodTag.SPROCEDURE, MethodTag.LDI)

    @property
    def builder_name(self) -> str:
        "Name of the power-minimization builder in `RESTRICTION_REGISTRY`"
        if self is MethodTag.MRT:
            raise ValueError("MRT is a closed-form design without a power-minimization program")
        return f"build_power_min_{self.value}"

    @classmethod
    def parse(cls, value: Union[str, "MethodTag"]) -> "MethodTag":
        "Accepts tags, their values and the usual spellings (`SProcedure`, `s-procedure`, `NonRobust`...)"
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {"sprocedure": "sproc", "sproc": "sproc", "nonrobust": "nonrobust", "nominal": "nonrobust"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError as e:
            raise ValueError(f"unknown method {value!r}, expected one of {[m.value for m in cls]}") from e


@dataclass
class BeamformingDesign:
    """
    A transmit covariance `Q` with its dominant beamformer `b`, the
    transmit power `tr(Q)`, the eigenvalue ratio `lambda_2 / lambda_1`
    and the diagnostics of the solve that produced it.
    """

    Q: np.ndarray
    b: np.ndarray
    power: float
    rank_ratio: float
    method: MethodTag
    status: str = "Optimal"
    iterations: int = 0
    wall_time: float = 0.0
    objective: float = float("nan")
    info: Dict[str, Any] = field(default_factory=dict)

    @property
    def is_rank_one(self) -> bool:
        return self.rank_ratio <= RANK_ONE_TOL

    @property
    def feasible(self) -> bool:
        return self.status == "Optimal"


def extract_beamformer(Q) -> Tuple[np.ndarray, float]:
    """
    Dominant eigenpair extraction `b = sqrt(lambda_1) u_1`, with the phase
    fixed so that the largest entry of `b` is real and positive.
    Returns `(b, lambda_2 / lambda_1)`; a (numerically) zero `Q` gives a
    zero beamformer and ratio 0.
    """
    Q = check_hermitian(Q, tol=1e-8 * max(1.0, float(np.max(np.abs(Q), initial=0.0))), name="Q")
    w, V = np.linalg.eigh((Q + Q.conj().T) / 2)
    lam1 = w[-1]
    if lam1 < 1e-12:
        _logger.warning("Q is numerically zero, the design transfers no information")
        return np.zeros(Q.shape[0], dtype=complex), 0.0
    u = V[:, -1]
    top = np.argmax(np.abs(u))
    u = u * np.exp(-1j * np.angle(u[top]))
    lam2 = max(w[-2], 0.0) if w.shape[0] > 1 else 0.0
    return np.sqrt(lam1) * u, float(lam2 / max(lam1, 1e-300))


def make_design(Q, method, **kwargs) -> BeamformingDesign:
    "Wraps a solved covariance into a `BeamformingDesign`"
    Q = np.asarray(Q, dtype=complex)
    Q = (Q + Q.conj().T) / 2
    b, ratio = extract_beamformer(Q)
    return BeamformingDesign(Q, b, float(np.trace(Q).real), ratio, MethodTag.parse(method), **kwargs)


def null_design(n_tx: int, method, status: str, **kwargs) -> BeamformingDesign:
    "The all-zero design reported when no feasible covariance exists"
    Q = np.zeros((n_tx, n_tx), dtype=complex)
    return BeamformingDesign(
        Q, np.zeros(n_tx, dtype=complex), 0.0, 0.0, MethodTag.parse(method), status=str(status), **kwargs
    )


def ir_rate(Q, h, sigma_d_sq: float) -> np.ndarray:
    "`log2(1 + h^H Q h / sigma_d^2)`; `h` may carry leading batch axes"
    h = np.asarray(h, dtype=complex)
    gain = np.einsum("...a,ab,...b->...", h.conj(), Q, h).real
    return np.log2(1.0 + np.maximum(gain, 0.0) / sigma_d_sq)


def eve_rates(Q, H_list: Sequence[np.ndarray], sigma_e_sq: float) -> np.ndarray:
    """
    Mutual information of every Eve, `log2 det(I + H^H Q H / sigma_e^2)`,
    stacked along the last axis. Each `H` is `(..., N_T, N_e)`.
    """
    rates = []
    for H in H_list:
        H = np.asarray(H, dtype=complex)
        M = np.conj(np.swapaxes(H, -1, -2)) @ Q @ H / sigma_e_sq
        M = (M + np.conj(np.swapaxes(M, -1, -2))) / 2
        sign, logdet = np.linalg.slogdet(np.eye(H.shape[-1]) + M)
        rates.append(logdet / np.log(2.0))
    if not rates:
        return np.zeros(())
    return np.stack(rates, axis=-1)


def secrecy_rate_exact(Q, h, H_list: Sequence[np.ndarray], sigma_d_sq: float, sigma_e_sq: float):
    """
    Secrecy rate in bits/s/Hz: `min_i {C_I - C_e,i}^+` with the log-det
    mutual information of every Eve. Without Eves it is `C_I`.
    """
    c_ir = ir_rate(Q, h, sigma_d_sq)
    if len(H_list) == 0:
        return np.maximum(c_ir, 0.0)
    worst = eve_rates(Q, H_list, sigma_e_sq).max(axis=-1)
    return np.maximum(c_ir - worst, 0.0)


def secrecy_rate_relaxed(Q, h, H_list: Sequence[np.ndarray], sigma_d_sq: float, sigma_e_sq: float):
    "As `secrecy_rate_exact` with `log2(1 + tr(H^H Q H) / sigma_e^2)` for the Eves"
    c_ir = ir_rate(Q, h, sigma_d_sq)
    if len(H_list) == 0:
        return np.maximum(c_ir, 0.0)
    traces = np.stack(
        [np.einsum("...ai,ab,...bi->...", np.conj(H), Q, H).real for H in map(np.asarray, H_list)], axis=-1
    )
    return np.maximum(c_ir - np.log2(1.0 + traces.max(axis=-1) / sigma_e_sq), 0.0)


def harvested_power(Q, g, xi: float):
    "`xi * g^H Q g`; `g` may carry leading batch axes"
    g = np.asarray(g, dtype=complex)
    return xi * np.maximum(np.einsum("...a,ab,...b->...", g.conj(), Q, g).real, 0.0)
