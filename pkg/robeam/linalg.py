__all__ = [
    "is_hermitian",
    "check_hermitian",
    "check_psd",
    "embed",
    "kron_identity_left",
    "svec",
    "smat",
    "svec_dim",
    "hvec",
    "hmat",
    "hermitian_basis",
    "real_stack",
    "sqrtm_psd",
    "numerical_rank",
    "logdet_lb_check",
]

import math
from functools import lru_cache
from typing import Tuple

import numpy as np


def _herm_defect(S: np.ndarray) -> float:
    if S.size == 0:
        return 0.0
    return float(np.max(np.abs(S - np.conj(np.swapaxes(S, -1, -2)))))


def _check_square(S: np.ndarray, name: str = "matrix"):
    if S.ndim < 2 or S.shape[-1] != S.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {S.shape}")


def is_hermitian(S, tol: float = 1e-12) -> bool:
    "Returns True if `S` is square and conjugate-symmetric within `tol`"
    S = np.asarray(S)
    if S.ndim < 2 or S.shape[-1] != S.shape[-2]:
        return False
    return _herm_defect(S) <= tol


def check_hermitian(S, tol: float = 1e-12, name: str = "matrix") -> np.ndarray:
    "Validates `S` as Hermitian and returns it as a complex array"
    S = np.asarray(S, dtype=complex)
    _check_square(S, name)
    defect = _herm_defect(S)
    if defect > tol:
        raise ValueError(f"{name} is not Hermitian (asymmetry {defect:.3e} > {tol:.1e})")
    return S


def check_psd(S, tol: float = 1e-10, name: str = "matrix") -> np.ndarray:
    """
    Validates `S` as Hermitian positive semidefinite: asymmetry and the most
    negative eigenvalue are both allowed to be off by `tol`.
    """
    S = check_hermitian(S, tol=tol, name=name)
    if S.shape[-1] == 0:
        return S
    min_eig = float(np.min(np.linalg.eigvalsh((S + np.conj(np.swapaxes(S, -1, -2))) / 2)))
    if min_eig < -tol:
        raise ValueError(f"{name} is not PSD (min eigenvalue {min_eig:.3e})")
    return S


def embed(S, check: bool = True) -> np.ndarray:
    """
    Real symmetric embedding `[[Re S, -Im S], [Im S, Re S]]` of a Hermitian
    matrix. Works on stacks of matrices along the leading axes.

    The embedding is PSD exactly when `S` is; every eigenvalue of `S`
    appears twice and the trace doubles.
    """
    S = np.asarray(S, dtype=complex)
    _check_square(S, "embed input")
    if check and _herm_defect(S) > 1e-12 * max(1.0, float(np.max(np.abs(S), initial=0.0))):
        raise ValueError("embed expects a Hermitian matrix")
    re, im = S.real, S.imag
    top = np.concatenate([re, -im], axis=-1)
    bottom = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def kron_identity_left(m: int, Q) -> np.ndarray:
    "`I_m ⊗ Q`, block diagonal with `m` copies of `Q` (stacks allowed)"
    Q = np.asarray(Q)
    _check_square(Q, "Q")
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    n = Q.shape[-1]
    out = np.zeros(Q.shape[:-2] + (m * n, m * n), dtype=np.result_type(Q, float))
    for i in range(m):
        out[..., i * n : (i + 1) * n, i * n : (i + 1) * n] = Q
    return out


def svec_dim(n: int) -> int:
    "Length of `svec` for a side-`n` symmetric matrix"
    return n * (n + 1) // 2


@lru_cache(maxsize=None)
def _svec_index(n: int):
    iu, ju = np.triu_indices(n)
    scale = np.where(iu == ju, 1.0, math.sqrt(2.0))
    return iu, ju, scale


def svec(S, tol: float = 1e-10, check: bool = True) -> np.ndarray:
    """
    Symmetric vectorization of a real symmetric matrix: the upper triangle
    row by row with off-diagonal entries scaled by √2, so that
    `svec(A) @ svec(B) == trace(A @ B)`. Stacks are vectorized along the
    trailing two axes.
    """
    S = np.asarray(S, dtype=float)
    _check_square(S, "svec input")
    if check:
        defect = _herm_defect(S)
        if defect > tol * max(1.0, float(np.max(np.abs(S), initial=0.0))):
            raise ValueError(f"svec expects a symmetric matrix (asymmetry {defect:.3e})")
    iu, ju, scale = _svec_index(S.shape[-1])
    return S[..., iu, ju] * scale


def smat(v) -> np.ndarray:
    "Inverse of `svec`"
    v = np.asarray(v, dtype=float)
    k = v.shape[-1]
    n = int(round((math.sqrt(8 * k + 1) - 1) / 2))
    if svec_dim(n) != k:
        raise ValueError(f"{k} is not a valid svec length")
    iu, ju, scale = _svec_index(n)
    S = np.zeros(v.shape[:-1] + (n, n))
    vals = v / scale
    S[..., iu, ju] = vals
    S[..., ju, iu] = vals
    return S


@lru_cache(maxsize=None)
def _hvec_index(n: int):
    # (row, col, part) per coordinate; part 0 = real, 1 = imaginary
    rows, cols, parts = [], [], []
    for i in range(n):
        for j in range(i, n):
            if i == j:
                rows.append(i), cols.append(j), parts.append(0)
            else:
                rows.extend([i, i]), cols.extend([j, j]), parts.extend([0, 1])
    return np.array(rows), np.array(cols), np.array(parts)


def hvec(S) -> np.ndarray:
    """
    Real coordinates of a Hermitian matrix: for each upper-triangle entry
    (row by row) the real diagonal, or `√2·Re` followed by `√2·Im` off the
    diagonal. `hvec(A) @ hvec(B) == Re trace(A @ B)` and the Euclidean norm
    equals the Frobenius norm. Hermitian symmetry is not checked.
    """
    S = np.asarray(S, dtype=complex)
    _check_square(S, "hvec input")
    rows, cols, parts = _hvec_index(S.shape[-1])
    vals = S[..., rows, cols]
    out = np.where(parts == 0, vals.real, vals.imag)
    return out * np.where(rows == cols, 1.0, math.sqrt(2.0))


def hmat(v) -> np.ndarray:
    "Inverse of `hvec`"
    v = np.asarray(v, dtype=float)
    n = int(round(math.sqrt(v.shape[-1])))
    if n * n != v.shape[-1]:
        raise ValueError(f"{v.shape[-1]} is not a valid hvec length")
    rows, cols, parts = _hvec_index(n)
    vals = v / np.where(rows == cols, 1.0, math.sqrt(2.0))
    S = np.zeros(v.shape[:-1] + (n, n), dtype=complex)
    re = parts == 0
    S[..., rows[re], cols[re]] += vals[..., re]
    S[..., rows[~re], cols[~re]] += 1j * vals[..., ~re]
    lower = rows != cols
    S[..., cols[lower], rows[lower]] = np.conj(S[..., rows[lower], cols[lower]])
    return S


@lru_cache(maxsize=None)
def _basis(n: int) -> np.ndarray:
    basis = hmat(np.eye(n * n))
    basis.setflags(write=False)
    return basis


def hermitian_basis(n: int) -> np.ndarray:
    """
    Orthonormal basis `B_k` (shape `(n*n, n, n)`) of the Hermitian matrices
    with `S = sum_k hvec(S)[k] * B_k`.
    """
    return _basis(n)


def real_stack(v) -> np.ndarray:
    "Stacks `Re v` over `Im v` along the last axis (norm preserving)"
    v = np.asarray(v, dtype=complex)
    return np.concatenate([v.real, v.imag], axis=-1)


def sqrtm_psd(R, tol: float = 1e-8, rel_cutoff: float = 1e-12) -> np.ndarray:
    """
    Hermitian square root of a PSD matrix through its eigendecomposition.
    Eigenvalues in `[-tol, 0)` are clamped to zero, anything more negative is rejected.
    Eigenvalues below `rel_cutoff` times the largest one are treated as round-off
    and zeroed, so a low-rank `R` yields a root with exactly the same range.
    """
    R = check_hermitian(R, tol=max(tol, 1e-10), name="covariance")
    if R.shape[-1] == 0:
        return R.copy()
    w, V = np.linalg.eigh((R + R.conj().T) / 2)
    if w.min() < -tol:
        raise ValueError(f"covariance has a negative eigenvalue {w.min():.3e}")
    w = np.where(w > rel_cutoff * max(w.max(), 0.0), w, 0.0)
    return (V * np.sqrt(w)) @ V.conj().T


def numerical_rank(A, rel_tol: float = 1e-9) -> int:
    "Number of eigenvalues above `rel_tol` times the largest one"
    w = np.linalg.eigvalsh(check_hermitian(A, tol=1e-10))
    top = w.max(initial=0.0)
    if top <= 0:
        return 0
    return int(np.sum(w > rel_tol * top))


def logdet_lb_check(A) -> Tuple[float, float]:
    """
    Both sides of `det(I + A) >= 1 + trace(A)` for a PSD `A`; the two agree
    exactly when `rank(A) <= 1`.

    Returns `(det(I + A), 1 + trace(A))`.
    """
    A = check_hermitian(A, tol=1e-10, name="A")
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    w = np.linalg.eigvalsh((A + A.conj().T) / 2)
    if w.size and w.min() < -1e-10 * scale:
        raise ValueError(f"A must be PSD (min eigenvalue {w.min():.3e})")
    sign, logdet = np.linalg.slogdet(np.eye(A.shape[0]) + A)
    assert sign > 0
    return float(np.exp(logdet)), float(1.0 + np.trace(A).real)
