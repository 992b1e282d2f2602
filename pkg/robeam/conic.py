__all__ = [
    "ConeTag",
    "Zero",
    "Nonneg",
    "SecondOrder",
    "Psd",
    "Block",
    "ConicProgram",
    "SolveStatus",
    "ConeSolution",
    "AffineExpr",
    "add_block",
    "add_constraint",
    "extract_q",
    "encode_q",
]

import io
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from fastcore.all import L, ifnone

from .linalg import hmat, hvec, check_hermitian, svec_dim

_logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConeTag:
    "Base class of the cone tags; `dim` is the number of rows the cone occupies"
    dim: int

    kind = "cone"

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError(f"{type(self).__name__} dimension must be >= 1, got {self.dim}")

    @property
    def rows(self) -> int:
        return self.dim

    @property
    def degree(self) -> int:
        "Barrier degree of the cone"
        return self.dim

    def __str__(self):
        return f"{self.kind}({self.dim})"


@dataclass(frozen=True)
class Zero(ConeTag):
    kind = "zero"

    @property
    def degree(self) -> int:
        return 0


@dataclass(frozen=True)
class Nonneg(ConeTag):
    kind = "nonneg"


@dataclass(frozen=True)
class SecondOrder(ConeTag):
    "`{(t, u): ||u|| <= t}`, with `t` the first row"
    kind = "soc"

    @property
    def degree(self) -> int:
        return 1


@dataclass(frozen=True)
class Psd(ConeTag):
    "Real symmetric PSD matrices of side `dim`, stored in `svec` coordinates"
    kind = "psd"

    @property
    def side(self) -> int:
        return self.dim

    @property
    def rows(self) -> int:
        return svec_dim(self.dim)


_CONES = {c.kind: c for c in (Zero, Nonneg, SecondOrder, Psd)}


@dataclass
class Block:
    "`b - A @ x` lies in `cone`"
    A: np.ndarray
    b: np.ndarray
    cone: ConeTag
    name: str = ""


class ConicProgram:
    """
    Canonical real conic program

        minimize    c @ x
        subject to  b_j - A_j @ x in K_j    for every block j

    Variables are declared by name before any block is added. Hermitian
    matrix variables are stored through their `hvec` coordinates and
    remembered in `hermitian` so that they can be decoded after a solve.
    """

    def __init__(self, name: str = ""):
        self.name = name
        self.c = np.zeros(0)
        self.blocks: List[Block] = []
        self.variables: Dict[str, slice] = {}
        self.hermitian: Dict[str, int] = {}

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    def add_variable(self, name: str, size: int, cost: Union[float, np.ndarray] = 0.0) -> slice:
        "Declares `size` new scalar variables under `name` with objective coefficients `cost`"
        if self.blocks:
            raise ValueError("variables must be declared before adding blocks")
        if name in self.variables:
            raise ValueError(f"variable '{name}' already declared")
        if size < 1:
            raise ValueError(f"variable '{name}' needs a positive size, got {size}")
        start = self.num_vars
        idx = slice(start, start + size)
        self.c = np.concatenate([self.c, np.broadcast_to(np.asarray(cost, dtype=float), (size,))])
        self.variables[name] = idx
        return idx

    def add_hermitian(self, name: str, side: int, trace_cost: float = 0.0) -> slice:
        "Declares a Hermitian `side x side` matrix variable; `trace_cost` weights its trace"
        cost = trace_cost * hvec(np.eye(side))
        idx = self.add_variable(name, side * side, cost)
        self.hermitian[name] = side
        return idx

    def variable(self, name: str) -> slice:
        try:
            return self.variables[name]
        except KeyError as e:
            raise KeyError(
                f"Variable '{name}' is not declared! Available variables are: {', '.join(self.variables)}"
            ) from e

    def add_block(self, A, b, cone: ConeTag, name: Optional[str] = None) -> int:
        "Appends the block `b - A @ x in cone` and returns its id"
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if not isinstance(cone, ConeTag):
            raise ValueError(f"cone must be a ConeTag, got {cone!r}")
        if A.shape != (cone.rows, self.num_vars):
            raise ValueError(
                f"block {name or len(self.blocks)}: {cone} expects A of shape "
                f"{(cone.rows, self.num_vars)}, got {A.shape}"
            )
        if b.shape != (cone.rows,):
            raise ValueError(f"block {name or len(self.blocks)}: b must have {cone.rows} rows, got {b.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError(f"block {name or len(self.blocks)} has non-finite coefficients")
        self.blocks.append(Block(A, b, cone, ifnone(name, f"block_{len(self.blocks)}")))
        return len(self.blocks) - 1

    def blocks_of(self, kind: str) -> L:
        "All blocks whose cone is of `kind` (`zero`, `nonneg`, `soc` or `psd`)"
        return L(b for b in self.blocks if b.cone.kind == kind)

    def summary(self) -> Dict[str, int]:
        "Program size: variables, blocks and rows per cone kind"
        out = {"num_vars": self.num_vars, "num_blocks": len(self.blocks)}
        for kind in _CONES:
            blocks = self.blocks_of(kind)
            out[f"{kind}_blocks"] = len(blocks)
            out[f"{kind}_rows"] = int(sum(b.cone.rows for b in blocks))
        return out

    def __repr__(self):
        s = self.summary()
        return (
            f"ConicProgram(name={self.name!r}, num_vars={s['num_vars']}, blocks={s['num_blocks']}, "
            f"psd={s['psd_blocks']}, soc={s['soc_blocks']}, nonneg={s['nonneg_blocks']}, zero={s['zero_blocks']})"
        )

    def dump(self, path=None) -> str:
        """
        Text dump of the program (objective, variables, blocks and cones) for
        diffing and for feeding other solvers. Written to `path` when given.
        """
        fmt = lambda a: " ".join(f"{v:.17g}" for v in np.ravel(a))
        out = io.StringIO()
        out.write(f"program {self.name or '-'}\n")
        out.write(f"vars {self.num_vars}\n")
        for name, idx in self.variables.items():
            side = self.hermitian.get(name, 0)
            out.write(f"var {name} {idx.start} {idx.stop} {side}\n")
        out.write(f"objective {fmt(self.c)}\n")
        for blk in self.blocks:
            out.write(f"block {blk.name} {blk.cone.kind} {blk.cone.dim}\n")
            out.write(f"b {fmt(blk.b)}\n")
            for row in blk.A:
                out.write(f"A {fmt(row)}\n")
        out.write("end\n")
        text = out.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as f:
                f.write(text)
        return text

    @classmethod
    def loads(cls, text: str) -> "ConicProgram":
        "Parses the output of `dump`"
        prog, pending = None, None
        variables, hermitian = {}, {}

        def _flush():
            if pending is not None:
                name, cone, b, rows = pending
                prog.add_block(np.array(rows).reshape(cone.rows, prog.num_vars), b, cone, name)

        for line in text.splitlines():
            head, _, rest = line.partition(" ")
            if head == "program":
                prog = cls("" if rest == "-" else rest)
            elif head == "vars":
                num_vars = int(rest)
            elif head == "var":
                name, start, stop, side = rest.split()
                variables[name] = slice(int(start), int(stop))
                if int(side):
                    hermitian[name] = int(side)
            elif head == "objective":
                prog.c = np.array([float(v) for v in rest.split()], dtype=float)
                if prog.c.shape[0] != num_vars:
                    raise ValueError("objective length does not match the declared variable count")
                prog.variables, prog.hermitian = variables, hermitian
            elif head == "block":
                _flush()
                name, kind, dim = rest.split()
                pending = (name, _CONES[kind](int(dim)), None, [])
            elif head == "b":
                pending = pending[:2] + (np.array([float(v) for v in rest.split()]), pending[3])
            elif head == "A":
                pending[3].extend(float(v) for v in rest.split())
            elif head == "end":
                _flush()
                pending = None
        if prog is None:
            raise ValueError("not a conic program dump")
        return prog


def add_block(prog: ConicProgram, A, b, cone: ConeTag, name: Optional[str] = None) -> int:
    "Functional alias of `ConicProgram.add_block`"
    return prog.add_block(A, b, cone, name)


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    MAX_ITER = "MaxIter"
    NUMERICAL = "Numerical"

    def __str__(self):
        return self.value


@dataclass
class ConeSolution:
    """
    Result of a solve. `duals` holds one multiplier vector per program block
    (equality multipliers for `Zero` blocks). For `PrimalInfeasible` the
    duals form the Farkas ray and `info["certificate_margin"]` its residual.
    """

    status: SolveStatus
    x: np.ndarray
    duals: List[np.ndarray] = field(default_factory=list)
    primal_objective: float = float("nan")
    dual_objective: float = float("nan")
    gap: float = float("nan")
    iterations: int = 0
    info: Dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == SolveStatus.OPTIMAL


@dataclass
class AffineExpr:
    """
    Real affine map `x -> coef @ x + const` with `m` outputs over the
    variables of a program. Builders assemble constraints from these and
    hand them to `add_constraint`.
    """

    coef: np.ndarray
    const: np.ndarray

    __array_ufunc__ = None

    def __post_init__(self):
        self.coef = np.atleast_2d(np.asarray(self.coef, dtype=float))
        self.const = np.atleast_1d(np.asarray(self.const, dtype=float))
        assert self.coef.shape[0] == self.const.shape[0]

    @property
    def size(self) -> int:
        return self.const.shape[0]

    @classmethod
    def constant(cls, values, num_vars: int) -> "AffineExpr":
        values = np.atleast_1d(np.asarray(values, dtype=float))
        return cls(np.zeros((values.shape[0], num_vars)), values)

    @classmethod
    def variable(cls, prog: ConicProgram, name: str) -> "AffineExpr":
        "The variables declared under `name`, one output each"
        idx = prog.variable(name)
        coef = np.zeros((idx.stop - idx.start, prog.num_vars))
        coef[:, idx] = np.eye(idx.stop - idx.start)
        return cls(coef, np.zeros(idx.stop - idx.start))

    @classmethod
    def stack(cls, exprs: Sequence["AffineExpr"]) -> "AffineExpr":
        return cls(np.vstack([e.coef for e in exprs]), np.concatenate([e.const for e in exprs]))

    def __getitem__(self, item) -> "AffineExpr":
        if isinstance(item, int):
            item = slice(item, item + 1 if item != -1 else None)
        return AffineExpr(self.coef[item], self.const[item])

    def __add__(self, other):
        if isinstance(other, AffineExpr):
            return AffineExpr(self.coef + other.coef, self.const + other.const)
        return AffineExpr(self.coef, self.const + other)

    __radd__ = __add__

    def __neg__(self):
        return AffineExpr(-self.coef, -self.const)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        return AffineExpr(self.coef * scalar, self.const * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)


def add_constraint(prog: ConicProgram, expr: AffineExpr, cone: ConeTag, name: Optional[str] = None) -> int:
    "Adds `expr(x) in cone`, i.e. the block with `A = -coef` and `b = const`"
    return prog.add_block(-expr.coef, expr.const, cone, name)


def extract_q(prog: ConicProgram, sol: ConeSolution, name: str = "Q") -> np.ndarray:
    "Decodes the Hermitian matrix variable `name` from a solution"
    if name not in prog.hermitian:
        raise KeyError(f"program {prog.name!r} has no Hermitian variable '{name}'")
    if sol.status not in (SolveStatus.OPTIMAL, SolveStatus.MAX_ITER):
        raise ValueError(f"cannot extract '{name}' from a solution with status {sol.status}")
    Q = hmat(np.asarray(sol.x)[prog.variable(name)])
    return (Q + Q.conj().T) / 2


def encode_q(prog: ConicProgram, Q, name: str = "Q", x=None) -> np.ndarray:
    "Writes `Q` into the coordinates of the variable `name` of a (new) solution vector"
    side = prog.hermitian.get(name)
    if side is None:
        raise KeyError(f"program {prog.name!r} has no Hermitian variable '{name}'")
    Q = check_hermitian(Q, tol=1e-10, name=name)
    if Q.shape != (side, side):
        raise ValueError(f"'{name}' has side {side}, got {Q.shape}")
    x = np.zeros(prog.num_vars) if x is None else np.array(x, dtype=float)
    x[prog.variable(name)] = hvec(Q)
    return x
