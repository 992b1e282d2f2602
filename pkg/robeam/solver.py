__all__ = ["SolverSettings", "solve"]

import logging
import math
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np
import pandas as pd
import scipy.linalg
from fastcore.all import ifnone
from fvcore.common.timer import Timer
from omegaconf import DictConfig, OmegaConf

from .config import ConfigError, Configurable
from .conic import ConeSolution, ConicProgram, SolveStatus
from .linalg import smat, svec

_logger = logging.getLogger(__name__)


@dataclass
class SolverSettings(Configurable):
    """
    Settings of the interior-point solver.

    Arguments:
    1. `tol_gap`: relative complementarity gap, `s'z <= tol_gap * (1 + |c'x|)`.
    2. `tol_feas`: scaled primal and dual residuals.
    3. `max_iter`: iteration limit, `MaxIter` is reported beyond it.
    4. `step_fraction`: fraction of the step to the cone boundary.
    5. `tol_infeas`: residual of an infeasibility certificate.
    6. `tau_kappa_ratio`: `tau / kappa` below which a looser certificate is accepted.
    7. `regularization`: static regularization of the reduced KKT matrix, relative to its diagonal.
    8. `refine_steps`: iterative refinement steps per KKT solve.
    9. `check_duality`: assert weak duality at every (nearly) feasible iterate.
    10. `log_path`: write the iteration table to this csv file.
    """

    tol_gap: float = 1e-7
    tol_feas: float = 1e-7
    max_iter: int = 200
    step_fraction: float = 0.99
    tol_infeas: float = 1e-7
    tau_kappa_ratio: float = 1e-6
    regularization: float = 1e-9
    refine_steps: int = 2
    check_duality: bool = False
    log_path: Optional[str] = None

    def __post_init__(self):
        for name in ("tol_gap", "tol_feas", "tol_infeas", "tau_kappa_ratio", "regularization"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"SolverSettings.{name} must be > 0, got {getattr(self, name)}")
        if not 0 < self.step_fraction < 1:
            raise ConfigError(f"SolverSettings.step_fraction must be in (0, 1), got {self.step_fraction}")
        if self.max_iter < 1:
            raise ConfigError(f"SolverSettings.max_iter must be >= 1, got {self.max_iter}")

    def to_config_dict(self) -> DictConfig:
        return OmegaConf.create(asdict(self))


class _NumericalError(RuntimeError):
    pass


# Scalings. Each holds the Nesterov-Todd scaling `W` of one cone at (s, z),
# i.e. `W z = W^{-T} s = lam`, and knows how to apply the pieces the Newton
# system needs.


class _NonnegScaling:
    def __init__(self, s, z):
        self.d = np.sqrt(s / z)
        self.lam = np.sqrt(s * z)

    def w(self, u):
        return self.d * u

    wt = w

    def winvt(self, u):
        return u / self.d

    def h(self, U):
        "`(W^T W)^{-1} U`"
        d2 = self.d ** 2
        return U / (d2 if U.ndim == 1 else d2[:, None])

    def lam_div(self, v):
        "`lam \\ v`, the inverse of the Jordan product with `lam`"
        return v / self.lam

    @staticmethod
    def product(u, v):
        return u * v

    @staticmethod
    def unit(dim):
        return np.ones(dim)


def _soc_det(x):
    "`x0^2 - |x1|^2`, factored so that points near the boundary keep their digits"
    nrm = float(np.linalg.norm(x[1:]))
    return (x[0] - nrm) * (x[0] + nrm)


class _SocScaling:
    def __init__(self, s, z):
        s_det, z_det = _soc_det(s), _soc_det(z)
        if not (s_det > 0 and z_det > 0 and s[0] > 0 and z[0] > 0):
            raise _NumericalError("iterate left the second-order cone")
        sn, zn = math.sqrt(s_det), math.sqrt(z_det)
        sbar, zbar = s / sn, z / zn
        gamma = math.sqrt((1.0 + zbar @ sbar) / 2.0)
        wbar = sbar.copy()
        wbar[0] += zbar[0]
        wbar[1:] -= zbar[1:]
        wbar /= 2.0 * gamma
        eta = math.sqrt(sn / zn)

        m = s.shape[0]
        w0, w1 = wbar[0], wbar[1:]
        Wbar = np.empty((m, m))
        Wbar[0, 0] = w0
        Wbar[0, 1:] = w1
        Wbar[1:, 0] = w1
        Wbar[1:, 1:] = np.eye(m - 1) + np.outer(w1, w1) / (1.0 + w0)
        Winv = Wbar.copy()
        Winv[0, 1:] *= -1
        Winv[1:, 0] *= -1

        self.W = eta * Wbar
        self.Winv = Winv / eta
        self.H = self.Winv @ self.Winv
        # closed form of W z, exact even when W is badly conditioned
        lam = np.empty(m)
        lam[0] = gamma
        lam[1:] = ((gamma + zbar[0]) * sbar[1:] + (gamma + sbar[0]) * zbar[1:]) / (sbar[0] + zbar[0] + 2.0 * gamma)
        self.lam = math.sqrt(sn * zn) * lam

    def w(self, u):
        return self.W @ u

    wt = w

    def winvt(self, u):
        return self.Winv @ u

    def h(self, U):
        return self.H @ U

    def lam_div(self, v):
        lam = self.lam
        w0 = (lam[0] * v[0] - lam[1:] @ v[1:]) / _soc_det(lam)
        return np.concatenate([[w0], (v[1:] - w0 * lam[1:]) / lam[0]])

    @staticmethod
    def product(u, v):
        return np.concatenate([[u @ v], u[0] * v[1:] + v[0] * u[1:]])

    @staticmethod
    def unit(dim):
        e = np.zeros(dim)
        e[0] = 1.0
        return e


def _sym(X):
    return (X + np.swapaxes(X, -1, -2)) / 2


class _PsdScaling:
    def __init__(self, s, z):
        try:
            L1 = scipy.linalg.cholesky(smat(s), lower=True)
            L2 = scipy.linalg.cholesky(smat(z), lower=True)
        except np.linalg.LinAlgError as e:
            raise _NumericalError("iterate left the PSD cone") from e
        _, lam, Vt = scipy.linalg.svd(L2.T @ L1)
        if lam.min() <= 0:
            raise _NumericalError("singular PSD scaling")
        n = lam.shape[0]
        L1inv = scipy.linalg.solve_triangular(L1, np.eye(n), lower=True)
        self.R = (L1 @ Vt.T) / np.sqrt(lam)
        self.Rinv = np.sqrt(lam)[:, None] * (Vt @ L1inv)
        self.N = self.Rinv.T @ self.Rinv
        self.eig = lam
        self.lam = svec(np.diag(lam), check=False)

    def w(self, u):
        return svec(_sym(self.R.T @ smat(u) @ self.R), check=False)

    def wt(self, u):
        return svec(_sym(self.R @ smat(u) @ self.R.T), check=False)

    def winvt(self, u):
        return svec(_sym(self.Rinv @ smat(u) @ self.Rinv.T), check=False)

    def h(self, U):
        if U.ndim == 1:
            return svec(_sym(self.N @ smat(U) @ self.N), check=False)
        F = smat(U.T)
        return svec(_sym(self.N @ F @ self.N), check=False).T

    def lam_div(self, v):
        l = self.eig
        return svec(2.0 * smat(v) / (l[:, None] + l[None, :]), check=False)

    @staticmethod
    def product(u, v):
        U, V = smat(u), smat(v)
        return svec(_sym(U @ V), check=False)

    @staticmethod
    def unit(dim):
        return svec(np.eye(dim))


_SCALINGS = {"nonneg": _NonnegScaling, "soc": _SocScaling, "psd": _PsdScaling}


def _step_to_boundary(kind: str, x, d) -> float:
    "Largest `a` with `x + a d` in the closed cone, for `x` in its interior"
    if kind == "nonneg":
        neg = d < 0
        return float(np.min(-x[neg] / d[neg])) if np.any(neg) else math.inf
    if kind == "soc":
        # smallest positive root of det(x + a d) = a2 a^2 + 2 a1 a + a0
        a2, a1, a0 = _soc_det(d), x[0] * d[0] - x[1:] @ d[1:], _soc_det(x)
        if abs(a2) <= 1e-300:
            return -a0 / (2 * a1) if a1 < 0 else math.inf
        disc = a1 * a1 - a2 * a0
        if disc < 0:
            return math.inf
        q = -(a1 + math.copysign(math.sqrt(disc), a1))
        roots = [r for r in (q / a2, a0 / q if q != 0 else math.inf) if r > 0]
        return min(roots) if roots else math.inf
    try:
        L = scipy.linalg.cholesky(smat(x), lower=True)
    except np.linalg.LinAlgError as e:
        raise _NumericalError("iterate left the PSD cone") from e
    M = scipy.linalg.solve_triangular(L, smat(d), lower=True)
    M = scipy.linalg.solve_triangular(L, M.T, lower=True)
    evmin = scipy.linalg.eigvalsh(_sym(M))[0]
    return math.inf if evmin >= 0 else -1.0 / evmin


def _interior(kind: str, x) -> bool:
    if kind == "nonneg":
        return bool(np.all(x > 0))
    if kind == "soc":
        return bool(x[0] > 0 and _soc_det(x) > 0)
    try:
        scipy.linalg.cholesky(smat(x), lower=True)
    except np.linalg.LinAlgError:
        return False
    return True


class _ProblemData:
    "Splits a `ConicProgram` into equalities `A x = b` and cone rows `h - G x in K`"

    def __init__(self, prog: ConicProgram):
        if not prog.blocks:
            raise ValueError("cannot solve a program without blocks")
        n = prog.num_vars
        eq_A, eq_b, G, h = [], [], [], []
        self.cones = []  # (scaling class, slice, cone)
        self.block_map = []  # ("eq" | "cone", slice)
        p = m = 0
        for blk in prog.blocks:
            k = blk.cone.rows
            if blk.cone.kind == "zero":
                eq_A.append(blk.A), eq_b.append(blk.b)
                self.block_map.append(("eq", slice(p, p + k)))
                p += k
            else:
                G.append(blk.A), h.append(blk.b)
                self.cones.append((_SCALINGS[blk.cone.kind], slice(m, m + k), blk.cone))
                self.block_map.append(("cone", slice(m, m + k)))
                m += k
        self.c = prog.c.copy()
        self.A = np.vstack(eq_A) if eq_A else np.zeros((0, n))
        self.b = np.concatenate(eq_b) if eq_b else np.zeros(0)
        self.G = np.vstack(G) if G else np.zeros((0, n))
        self.h = np.concatenate(h) if h else np.zeros(0)
        self.degree = sum(cone.degree for _, _, cone in self.cones)

    def unit(self):
        e = np.zeros(self.G.shape[0])
        for cls, idx, cone in self.cones:
            e[idx] = cls.unit(cone.dim)
        return e

    def interior(self, v) -> bool:
        return all(_interior(cone.kind, v[idx]) for _, idx, cone in self.cones)

    def step_to_boundary(self, v, dv) -> float:
        alpha = math.inf
        for _, idx, cone in self.cones:
            alpha = min(alpha, _step_to_boundary(cone.kind, v[idx], dv[idx]))
        return alpha

    def split_duals(self, y, z) -> List[np.ndarray]:
        return [y[idx].copy() if kind == "eq" else z[idx].copy() for kind, idx in self.block_map]


class _LDLFactor:
    "Dense symmetric indefinite factorization `K = P' L D L' P` (Bunch-Kaufman)"

    def __init__(self, K):
        lu, d, perm = scipy.linalg.ldl(K, lower=True, hermitian=True)
        self.perm = perm
        self.L = lu[perm]
        n = d.shape[0]
        ab = np.zeros((3, n))
        ab[0, 1:] = np.diag(d, 1)
        ab[1, :] = np.diag(d)
        ab[2, :-1] = np.diag(d, -1)
        if not np.all(np.isfinite(ab)):
            raise _NumericalError("KKT factorization produced non-finite pivots")
        self.ab = ab

    def solve(self, r):
        y = scipy.linalg.solve_triangular(self.L, r[self.perm], lower=True, unit_diagonal=True)
        try:
            w = scipy.linalg.solve_banded((1, 1), self.ab, y)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise _NumericalError("singular KKT pivot") from e
        x = np.empty_like(r)
        x[self.perm] = scipy.linalg.solve_triangular(self.L.T, w, lower=False, unit_diagonal=True)
        return x


class _KKTSystem:
    """
    Solves the scaled Newton system

        A' dy + G' dz         = r1
        A dx                  = r2
        G dx - W'W dz         = r3

    by eliminating `dz` and factoring the reduced quasi-definite matrix
    `[[G' H G, A'], [A, 0]]` with `H = (W'W)^{-1}`. Every solve is refined
    against the unreduced system while its residual keeps shrinking.
    """

    def __init__(self, data: _ProblemData, scalings, settings: SolverSettings):
        self.data, self.scalings = data, scalings
        n, p = data.G.shape[1], data.A.shape[0]
        GHG = np.zeros((n, n))
        for sc, (_, idx, _) in zip(scalings, data.cones):
            Gj = data.G[idx]
            GHG += Gj.T @ sc.h(Gj)
        GHG = _sym(GHG)
        K = np.zeros((n + p, n + p))
        K[:n, :n] = GHG
        K[:n, n:] = data.A.T
        K[n:, :n] = data.A
        delta = settings.regularization * max(1.0, float(np.max(np.abs(np.diag(GHG)), initial=0.0)))
        K[:n, :n] += delta * np.eye(n)
        K[n:, n:] -= delta * np.eye(p)
        self.factor = _LDLFactor(K)
        self.refine_steps = settings.refine_steps
        self.n = n

    def _blocks(self, fn, v):
        out = np.empty_like(v)
        for sc, (_, idx, _) in zip(self.scalings, self.data.cones):
            out[idx] = fn(sc, v[idx])
        return out

    def _reduced(self, r1, r2, r3):
        G = self.data.G
        sol = self.factor.solve(np.concatenate([r1 + G.T @ self._blocks(_h, r3), r2]))
        dx, dy = sol[: self.n], sol[self.n :]
        return dx, dy, self._blocks(_h, G @ dx - r3)

    def _residual(self, r, d):
        A, G = self.data.A, self.data.G
        dx, dy, dz = d
        return (
            r[0] - A.T @ dy - G.T @ dz,
            r[1] - A @ dx,
            r[2] - G @ dx + self._blocks(_wtw, dz),
        )

    def solve(self, r1, r2, r3):
        r = (r1, r2, r3)
        d = self._reduced(*r)
        res = self._residual(r, d)
        err = _norm(res)
        for _ in range(self.refine_steps):
            if err == 0:
                break
            cand = tuple(u + v for u, v in zip(d, self._reduced(*res)))
            cand_res = self._residual(r, cand)
            cand_err = _norm(cand_res)
            if not cand_err < err:
                break
            d, res, err = cand, cand_res, cand_err
        if not all(np.all(np.isfinite(u)) for u in d):
            raise _NumericalError("KKT solve produced non-finite values")
        return d


def _h(sc, v):
    return sc.h(v)


def _wtw(sc, v):
    return sc.wt(sc.w(v))


def _norm(parts) -> float:
    return max((float(np.linalg.norm(p)) for p in parts), default=0.0)


def _blockwise(scalings, cones, fn, *vectors):
    out = np.empty_like(vectors[0])
    for sc, (_, idx, _) in zip(scalings, cones):
        out[idx] = fn(sc, *(v[idx] for v in vectors))
    return out


def solve(prog: ConicProgram, settings: Optional[SolverSettings] = None) -> ConeSolution:
    """
    Solves `prog` with a primal-dual interior-point method on the homogeneous
    self-dual embedding

        A'y + G'z + c tau = 0,   A x = b tau,   s + G x = h tau,
        kappa = -c'x - b'y - h'z,   s, z in K,   tau, kappa >= 0

    using Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
    Never raises on solver trouble, the outcome is in `ConeSolution.status`.

    The iterate with the smallest residuals and gap relative to their
    tolerances is kept. When progress stops, that iterate is returned and
    reported `Optimal` if it is within ten times the tolerances.
    """
    settings = ifnone(settings, SolverSettings())
    timer = Timer()
    data = _ProblemData(prog)
    c, A, b, G, h = data.c, data.A, data.b, data.G, data.h
    cones = data.cones

    x, y = np.zeros(c.shape[0]), np.zeros(b.shape[0])
    s, z = data.unit(), data.unit()
    tau, kappa = 1.0, 1.0
    e = data.unit()

    resx0 = max(1.0, float(np.linalg.norm(c)))
    resy0 = max(1.0, float(np.linalg.norm(b)))
    resz0 = max(1.0, float(np.linalg.norm(h)))

    history = []
    status, stats, step = None, {}, float("nan")
    best = None  # (merit, iterate, stats)

    for it in range(settings.max_iter + 1):
        rx = A.T @ y + G.T @ z + c * tau
        ry = A @ x - b * tau
        rz = s + G @ x - h * tau
        cx, by, hz = float(c @ x), float(b @ y), float(h @ z)
        rt = kappa + cx + by + hz

        gap = float(s @ z)
        pcost, dcost = cx / tau, -(by + hz) / tau
        pres = max(np.linalg.norm(ry) / resy0, np.linalg.norm(rz) / resz0) / tau
        dres = np.linalg.norm(rx) / resx0 / tau
        rel_gap = gap / tau ** 2 / (1.0 + abs(pcost))
        pinf = np.linalg.norm(A.T @ y + G.T @ z) / resx0 / -(hz + by) if hz + by < 0 else math.inf
        dinf = (
            max(np.linalg.norm(A @ x) / resy0, np.linalg.norm(G @ x + s) / resz0) / -cx
            if cx < 0
            else math.inf
        )

        stats = dict(
            iter=it, pcost=pcost, dcost=dcost, gap=gap / tau ** 2, pres=pres, dres=dres,
            tau=tau, kappa=kappa, step=step,
        )
        history.append(stats)
        _logger.debug(
            f"it {it:3d} pcost {pcost: .8e} dcost {dcost: .8e} gap {gap / tau ** 2:.2e} "
            f"pres {pres:.2e} dres {dres:.2e} tau {tau:.2e} kappa {kappa:.2e}"
        )

        merit = max(pres / settings.tol_feas, dres / settings.tol_feas, rel_gap / settings.tol_gap)
        if best is None or merit < best[0]:
            best = (merit, (x.copy(), y.copy(), z.copy(), s.copy(), tau, kappa), stats)

        if settings.check_duality and pres <= 10 * settings.tol_feas and dres <= 10 * settings.tol_feas:
            assert pcost - dcost >= -1e-6 * (1.0 + abs(pcost)), f"weak duality violated at iteration {it}"

        if merit <= 1.0:
            status = SolveStatus.OPTIMAL
            break
        if pinf <= settings.tol_infeas or (
            tau < settings.tau_kappa_ratio * kappa and pinf <= math.sqrt(settings.tol_infeas)
        ):
            status = SolveStatus.PRIMAL_INFEASIBLE
            break
        if dinf <= settings.tol_infeas or (
            tau < settings.tau_kappa_ratio * kappa and dinf <= math.sqrt(settings.tol_infeas)
        ):
            status = SolveStatus.DUAL_INFEASIBLE
            break
        if it == settings.max_iter:
            status = SolveStatus.MAX_ITER
            break

        try:
            scalings = [cls(s[idx], z[idx]) for cls, idx, _ in cones]
            kkt = _KKTSystem(data, scalings, settings)
            lam = np.concatenate([sc.lam for sc in scalings]) if scalings else np.zeros(0)
            mu = (gap + tau * kappa) / (data.degree + 1)

            vx, vy, vz = kkt.solve(-c, b, h)
            # c'vx + b'vy + h'vz = -|W vz|^2 for the exact solution
            wvz = _blockwise(scalings, cones, lambda sc, v: sc.w(v), vz)
            denom = -kappa / tau - float(wvz @ wvz)

            def direction(gamma, ds_target, dtau_target):
                lam_ds = _blockwise(scalings, cones, lambda sc, v: sc.lam_div(v), ds_target)
                wt_lam_ds = _blockwise(scalings, cones, lambda sc, v: sc.wt(v), lam_ds)
                ux, uy, uz = kkt.solve(-(1 - gamma) * rx, -(1 - gamma) * ry, -(1 - gamma) * rz - wt_lam_ds)
                dtau = (-(1 - gamma) * rt - dtau_target / tau - (c @ ux + b @ uy + h @ uz)) / denom
                dx, dy, dz = ux + dtau * vx, uy + dtau * vy, uz + dtau * vz
                # the linear equations fix ds and dkappa, so residuals shrink by exactly (1 - a (1 - gamma))
                ds = -(1 - gamma) * rz - G @ dx + h * dtau
                dkappa = -(1 - gamma) * rt - (c @ dx + b @ dy + h @ dz)
                return dx, dy, dz, ds, dtau, dkappa

            def max_step(dz, ds, dtau, dkappa):
                alpha = min(data.step_to_boundary(s, ds), data.step_to_boundary(z, dz))
                if dtau < 0:
                    alpha = min(alpha, -tau / dtau)
                if dkappa < 0:
                    alpha = min(alpha, -kappa / dkappa)
                return alpha

            # predictor
            lam_sq = _blockwise(scalings, cones, lambda sc, u: sc.product(u, u), lam)
            aff = direction(0.0, -lam_sq, -tau * kappa)
            alpha_aff = max_step(*aff[2:])
            sigma = (1.0 - min(1.0, alpha_aff)) ** 3

            # corrector
            wds_aff = _blockwise(scalings, cones, lambda sc, v: sc.winvt(v), aff[3])
            wdz_aff = _blockwise(scalings, cones, lambda sc, v: sc.w(v), aff[2])
            corr = _blockwise(scalings, cones, lambda sc, u, v: sc.product(u, v), wds_aff, wdz_aff)
            dx, dy, dz, ds, dtau, dkappa = direction(
                sigma,
                -lam_sq - corr + sigma * mu * e,
                -tau * kappa - aff[4] * aff[5] + sigma * mu,
            )
            step = min(1.0, settings.step_fraction * max_step(dz, ds, dtau, dkappa))
            while step >= 1e-12 and not (data.interior(s + step * ds) and data.interior(z + step * dz)):
                step *= 0.5
        except (_NumericalError, np.linalg.LinAlgError, ValueError) as err:
            _logger.debug(f"numerical trouble at iteration {it}: {err}")
            status = SolveStatus.NUMERICAL
            break

        if step < 1e-12:
            _logger.debug(f"no progress at iteration {it}")
            status = SolveStatus.NUMERICAL
            break
        x, y, z, s = x + step * dx, y + step * dy, z + step * dz, s + step * ds
        tau, kappa = tau + step * dtau, kappa + step * dkappa

    if settings.log_path is not None:
        pd.DataFrame(history).to_csv(settings.log_path, index=False)

    if status in (SolveStatus.NUMERICAL, SolveStatus.MAX_ITER):
        merit, (x, y, z, s, tau, kappa), stats = best
        if status == SolveStatus.NUMERICAL:
            status = _stalled(merit)

    info = dict(pres=stats["pres"], dres=stats["dres"], tau=tau, kappa=kappa, wall_time=timer.seconds())
    if status == SolveStatus.PRIMAL_INFEASIBLE:
        scale = -(h @ z + b @ y)
        info["certificate_margin"] = float(np.linalg.norm(A.T @ y + G.T @ z) / scale)
        return ConeSolution(
            status, x, data.split_duals(y / scale, z / scale), iterations=it, info=info
        )
    if status == SolveStatus.DUAL_INFEASIBLE:
        scale = -(c @ x)
        info["certificate_margin"] = float(np.linalg.norm(G @ x + s) / scale)
        return ConeSolution(status, x / scale, [], iterations=it, info=info)

    return ConeSolution(
        status,
        x / tau,
        data.split_duals(y / tau, z / tau),
        primal_objective=float(c @ x) / tau,
        dual_objective=-float(b @ y + h @ z) / tau,
        gap=float(s @ z) / tau ** 2,
        iterations=it,
        info=info,
    )


def _stalled(merit: float) -> SolveStatus:
    "Status when no further progress is possible: accept near-optimal iterates"
    return SolveStatus.OPTIMAL if merit <= 10.0 else SolveStatus.NUMERICAL
