__all__ = ["ComplexAffine", "QTerms", "EveTerms", "ErTerms", "hermitian_block", "add_rate_floor", "check_inputs"]

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..conic import AffineExpr, ConicProgram, Nonneg, Psd, add_constraint
from ..linalg import embed, hermitian_basis, hvec, kron_identity_left, svec
from ..scenario import ChannelSet, ScenarioConfig


@dataclass
class ComplexAffine:
    """
    Complex array-valued affine function of the program variables,
    `coef @ x + const` with `coef` of shape `const.shape + (num_vars,)`.
    Scalars, vectors and Hermitian matrices of `Q` all live here before
    they are turned into real conic rows.
    """

    coef: np.ndarray
    const: np.ndarray

    # numpy scalars on the left defer to __rmul__
    __array_ufunc__ = None

    @property
    def shape(self):
        return self.const.shape

    @classmethod
    def constant(cls, value, num_vars: int) -> "ComplexAffine":
        value = np.asarray(value, dtype=complex)
        return cls(np.zeros(value.shape + (num_vars,), dtype=complex), value)

    @classmethod
    def scalar_var(cls, prog: ConicProgram, name: str, i: int = 0) -> "ComplexAffine":
        coef = np.zeros(prog.num_vars, dtype=complex)
        coef[prog.variable(name).start + i] = 1.0
        return cls(coef, np.zeros((), dtype=complex))

    def __add__(self, other):
        if isinstance(other, ComplexAffine):
            return ComplexAffine(self.coef + other.coef, self.const + other.const)
        return ComplexAffine(self.coef, self.const + other)

    __radd__ = __add__

    def __neg__(self):
        return ComplexAffine(-self.coef, -self.const)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        return ComplexAffine(self.coef * scalar, self.const * scalar)

    __rmul__ = __mul__

    def trace(self) -> "ComplexAffine":
        return ComplexAffine(np.trace(self.coef, axis1=0, axis2=1), np.trace(self.const))

    def times_identity(self, m: int) -> "ComplexAffine":
        "A scalar times `I_m`"
        assert self.shape == ()
        eye = np.eye(m)
        return ComplexAffine(eye[:, :, None] * self.coef, eye * self.const)

    def real(self) -> AffineExpr:
        "Real part, flattened"
        return AffineExpr(
            self.coef.real.reshape(-1, self.coef.shape[-1]), np.atleast_1d(self.const.real).reshape(-1)
        )

    def stacked(self) -> AffineExpr:
        "`[Re v; Im v]` of a vector (norm preserving)"
        assert len(self.shape) == 1
        return AffineExpr(
            np.concatenate([self.coef.real, self.coef.imag]), np.concatenate([self.const.real, self.const.imag])
        )

    def hvec(self) -> AffineExpr:
        "`hvec` of a Hermitian matrix, whose norm is the Frobenius norm"
        coef = np.moveaxis(self.coef, -1, 0)
        return AffineExpr(hvec(coef).T, hvec(self.const))

    def svec_embedded(self) -> AffineExpr:
        "`svec(embed(.))` of a Hermitian matrix, the rows of its PSD block"
        coef = np.moveaxis(self.coef, -1, 0)
        coef = svec(embed(coef, check=False), check=False).T
        return AffineExpr(coef, svec(embed(self.const, check=False), check=False))


def hermitian_block(top_left: ComplexAffine, top_right: ComplexAffine, corner: ComplexAffine) -> ComplexAffine:
    "`[[top_left, top_right], [top_right^H, corner]]`"
    m = top_left.shape[0]
    nv = top_left.coef.shape[-1]
    coef = np.zeros((m + 1, m + 1, nv), dtype=complex)
    const = np.zeros((m + 1, m + 1), dtype=complex)
    coef[:m, :m], const[:m, :m] = top_left.coef, top_left.const
    coef[:m, m], const[:m, m] = top_right.coef, top_right.const
    coef[m, :m], const[m, :m] = np.conj(top_right.coef), np.conj(top_right.const)
    coef[m, m], const[m, m] = corner.coef, corner.const
    return ComplexAffine(coef, const)


class QTerms:
    """
    Linear functions of the Hermitian variable `Q` of a program, obtained by
    evaluating a map on the orthonormal basis of the Hermitian matrices
    (`Q = sum_k x_k B_k`). Maps receive the basis stack `(N_T^2, N_T, N_T)`
    and must act on the trailing axes.
    """

    def __init__(self, prog: ConicProgram, name: str = "Q"):
        self.prog, self.name = prog, name
        self.idx = prog.variable(name)
        self.n = prog.hermitian[name]
        self.basis = hermitian_basis(self.n)

    def map(self, fn) -> ComplexAffine:
        vals = np.asarray(fn(self.basis), dtype=complex)
        coef = np.zeros(vals.shape[1:] + (self.prog.num_vars,), dtype=complex)
        coef[..., self.idx] = np.moveaxis(vals, 0, -1)
        return ComplexAffine(coef, np.zeros(vals.shape[1:], dtype=complex))

    def q(self) -> ComplexAffine:
        return self.map(lambda B: B)

    def quad(self, u) -> ComplexAffine:
        "`u^H Q u`"
        u = np.asarray(u, dtype=complex)
        return self.map(lambda B: np.einsum("a,kab,b->k", u.conj(), B, u))

    def add_psd(self) -> int:
        "Adds `Q >= 0`"
        return add_constraint(self.prog, self.q().svec_embedded(), Psd(2 * self.n), f"{self.name}/psd")


class EveTerms(NamedTuple):
    """
    `M = R^{1/2} (I ⊗ Q) R^{1/2}`, `r = R^{1/2} (I ⊗ Q) vec(H_hat)`,
    `quad = vec(H_hat)^H (I ⊗ Q) vec(H_hat) = tr(H_hat^H Q H_hat)` and the
    rate margin `tau = sigma_e^2 / 2^R (1 + h^H Q h / sigma_d^2) - sigma_e^2 - quad`.
    """

    M: ComplexAffine
    r: ComplexAffine
    quad: ComplexAffine
    tau: ComplexAffine

    @classmethod
    def build(cls, qt: QTerms, cs: ChannelSet, cfg: ScenarioConfig, i: int) -> "EveTerms":
        H, root = cs.H_hat[i], cs.sqrt_R_H[i]
        ne = H.shape[1]
        vec_h = H.reshape(-1, order="F")
        kron = lambda B: kron_identity_left(ne, B)
        M = qt.map(lambda B: root @ kron(B) @ root)
        r = qt.map(lambda B: (kron(B) @ vec_h) @ root.T)
        quad = qt.map(lambda B: np.einsum("a,kab,b->k", vec_h.conj(), kron(B), vec_h))
        scale = cfg.sigma_e_sq / 2.0 ** cfg.rate_target
        tau = scale * (1.0 + qt.quad(cs.h) * (1.0 / cfg.sigma_d_sq)) - cfg.sigma_e_sq - quad
        return cls(M, r, quad, tau)


class ErTerms(NamedTuple):
    """
    `M = R_g^{1/2} Q R_g^{1/2}`, `r = R_g^{1/2} Q g_hat`, and the energy margin
    `theta = g_hat^H Q g_hat - eta / xi`.
    """

    M: ComplexAffine
    r: ComplexAffine
    theta: ComplexAffine

    @classmethod
    def build(cls, qt: QTerms, cs: ChannelSet, cfg: ScenarioConfig, k: int) -> "ErTerms":
        g, root = cs.g_hat[k], cs.sqrt_R_g[k]
        M = qt.map(lambda B: root @ B @ root)
        r = qt.map(lambda B: (B @ g) @ root.T)
        theta = qt.quad(g) - cfg.eh_targets[k] / cfg.eh_efficiency[k]
        return cls(M, r, theta)


def add_rate_floor(prog: ConicProgram, qt: QTerms, cs: ChannelSet, cfg: ScenarioConfig):
    """
    Without Eves nothing else bounds the IR rate, so the builders add
    `h^H Q h / sigma_d^2 >= 2^R - 1` directly. With Eves it is implied by
    every Eve constraint.
    """
    if cs.n_eve:
        return None
    margin = qt.quad(cs.h) * (1.0 / cfg.sigma_d_sq) - (2.0 ** cfg.rate_target - 1.0)
    return add_constraint(prog, margin.real(), Nonneg(1), "ir/rate")


def check_inputs(cs: ChannelSet, cfg: ScenarioConfig):
    "Shared preconditions of the power-minimization builders"
    if not cfg.rate_target > 0:
        raise ValueError(f"power minimization needs a rate target R > 0, got {cfg.rate_target}")
    if cs.n_tx != cfg.n_tx or cs.n_er != cfg.n_er or cs.n_eve != cfg.n_eve:
        raise ValueError(
            f"channel set ({cs.n_tx} tx, {cs.n_er} ER, {cs.n_eve} Eve) does not match the scenario "
            f"({cfg.n_tx} tx, {cfg.n_er} ER, {cfg.n_eve} Eve)"
        )
    for i, (H, ne) in enumerate(zip(cs.H_hat, cfg.eve_antennas)):
        if H.shape[1] != ne:
            raise ValueError(f"Eve {i} has {H.shape[1]} antennas, the scenario says {ne}")


SQRT2 = math.sqrt(2.0)
