# app/core/numerics.py - 复数稠密线性代数
import logging
from typing import Tuple

import numpy as np
import scipy.linalg as sla

from app.exceptions import (
    ContractViolationError,
    NotPositiveSemidefiniteError,
    PerronEigenpairError,
    SingularSystemError,
)

logger = logging.getLogger(__name__)

HERMITIAN_RTOL = 1e-12
RANK_RTOL = 1e-10
MAX_CONDITION = 1e12


def herm(a: np.ndarray) -> np.ndarray:
    return np.conjugate(a.T)


def symmetrize(a: np.ndarray) -> np.ndarray:
    """消除舍入造成的非厄米部分"""
    return 0.5 * (a + herm(a))


def _as_square(a: np.ndarray, name: str = "A") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolationError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractViolationError(f"{name} has non-finite entries")
    return a


def check_hermitian(a: np.ndarray, name: str = "A") -> np.ndarray:
    """校验厄米性，返回复数矩阵"""
    a = _as_square(a, name)
    scale = np.linalg.norm(a)
    if scale > 0 and np.linalg.norm(a - herm(a)) > HERMITIAN_RTOL * scale:
        raise ContractViolationError(f"{name} is not Hermitian within {HERMITIAN_RTOL:g} relative")
    return a


def hermitian_eig(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """厄米矩阵特征分解，特征值降序"""
    a = check_hermitian(a)
    vals, vecs = sla.eigh(symmetrize(a))
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def max_eigenpair(a: np.ndarray) -> Tuple[float, np.ndarray]:
    """最大特征值及其特征向量"""
    a = check_hermitian(a)
    n = a.shape[0]
    vals, vecs = sla.eigh(symmetrize(a), subset_by_index=[n - 1, n - 1])
    return float(vals[0]), vecs[:, 0]


def min_eigenvalue(a: np.ndarray) -> float:
    a = check_hermitian(a)
    return float(sla.eigh(symmetrize(a), eigvals_only=True, subset_by_index=[0, 0])[0])


def assert_psd(a: np.ndarray, rtol: float = 1e-10, name: str = "A") -> None:
    """半正定校验: λ_min ≥ −rtol·trace"""
    if a.shape[0] == 0:
        return
    lam_min = min_eigenvalue(a)
    trace = float(np.real(np.trace(a)))
    if lam_min < -rtol * max(abs(trace), np.finfo(float).tiny):
        raise NotPositiveSemidefiniteError(
            f"{name} is not positive semidefinite: min eigenvalue {lam_min:.3e}, trace {trace:.3e}"
        )


def numeric_rank(a: np.ndarray, rtol: float = RANK_RTOL) -> int:
    a = np.asarray(a)
    if a.size == 0:
        return 0
    s = sla.svdvals(a)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def null_space_basis(a: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """A†B = 0 的正交基，列数 = 行数 − rank(A)"""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise ContractViolationError(f"expected a matrix, got shape {a.shape}")
    rows, cols = a.shape
    if cols == 0:
        return np.eye(rows, dtype=complex)
    if not np.all(np.isfinite(a)):
        raise ContractViolationError("matrix has non-finite entries")
    u, s, _ = sla.svd(a, full_matrices=True)
    rank = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    return u[:, rank:].copy()


def linear_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """求解 Ax = b，条件数过大视为奇异"""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolationError(f"A must be square, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise ContractViolationError(f"right-hand side length {b.shape[0]} does not match order {a.shape[0]}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ContractViolationError("linear system has non-finite entries")
    cond = np.linalg.cond(a) if a.size else 1.0
    logger.debug(f"linear_solve: order={a.shape[0]} condition={cond:.3e}")
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularSystemError(
            f"system is singular or ill-conditioned (condition {cond:.3e})",
            context={"condition": float(cond)},
        )
    return sla.solve(a, b)


def hadamard(a: np.ndarray, b: np.ndarray, check_psd: bool = True) -> np.ndarray:
    """逐元素乘积 (Schur积)，缺省校验结果半正定；内层循环中可传check_psd=False关闭"""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ContractViolationError(f"order mismatch: {a.shape} vs {b.shape}")
    out = a * b
    if check_psd:
        assert_psd(out, name="hadamard product")
    return out


def perron_eigenpair(
        a: np.ndarray,
        tol: float = 1e-12,
        max_iter: int = 100_000,
) -> Tuple[float, np.ndarray]:
    """非负矩阵的Perron特征对 (平移幂迭代)

    返回的特征向量非负且各元素之和为1。
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolationError(f"matrix must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise PerronEigenpairError("matrix has non-finite entries")
    if np.any(a < 0):
        raise ContractViolationError("Perron iteration requires a nonnegative matrix")

    n = a.shape[0]
    x = np.full(n, 1.0 / n)
    if not np.any(a):
        return 0.0, x

    # 平移使Perron根在模意义下严格占优 (处理周期矩阵)
    shift = 0.5 * float(np.max(a.sum(axis=1)))
    lam = 0.0
    for it in range(max_iter):
        y = a @ x + shift * x
        total = y.sum()
        if total <= 0:
            raise PerronEigenpairError("power iteration collapsed to zero")
        y /= total
        lam = total - shift
        if np.abs(y - x).sum() <= tol:
            x = y
            break
        x = y
    else:
        raise PerronEigenpairError(
            f"power iteration did not converge in {max_iter} iterations",
            context={"eigenvalue": lam},
        )

    # 残差校验
    residual = np.linalg.norm(a @ x - lam * x)
    if residual > 1e-8 * (abs(lam) + shift) * np.linalg.norm(x):
        raise PerronEigenpairError(f"dominant eigenpair residual {residual:.3e} exceeds tolerance")
    return float(lam), x


def spectral_radius(a: np.ndarray) -> float:
    """非负矩阵谱半径"""
    try:
        return perron_eigenpair(a)[0]
    except PerronEigenpairError as e:
        # 可约矩阵(如幂零块)幂迭代收敛过慢，退回稠密特征值
        logger.debug(f"spectral_radius: falling back to dense eigenvalues ({e.detail})")
        return float(np.max(np.abs(np.linalg.eigvals(np.asarray(a, dtype=float)))))
