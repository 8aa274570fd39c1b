# app/schemas/power.py - 功率分配数据模式
from typing import List, Optional, Sequence

import numpy as np
from pydantic import Field, field_validator, model_validator

from app.exceptions import ContractViolationError, UnserviceableUserError
from app.schemas.common import ArrayModel, as_real_vector

MIN_GAIN = 1e-15


class PowerAllocation(ArrayModel):
    """每个用户对的 (p_{m,1}, p_{m,2})，单位瓦特"""
    p1: np.ndarray
    p2: np.ndarray

    @field_validator("p1", "p2", mode="before")
    @classmethod
    def coerce_powers(cls, v):
        return as_real_vector(v)

    @model_validator(mode="after")
    def validate_powers(self):
        if self.p1.shape != self.p2.shape:
            raise ValueError("p1 and p2 must have the same length")
        if np.any(self.p1 < 0) or np.any(self.p2 < 0):
            raise ValueError("powers must be nonnegative")
        return self

    @classmethod
    def zeros(cls, num_pairs: int) -> "PowerAllocation":
        return cls(p1=np.zeros(num_pairs), p2=np.zeros(num_pairs))

    @property
    def per_pair(self) -> np.ndarray:
        return self.p1 + self.p2

    @property
    def total(self) -> float:
        return float(np.sum(self.p1) + np.sum(self.p2))

    def noma_order_violations(self) -> List[int]:
        """违反 p2 ≥ p1 的用户对"""
        return [int(m) for m in np.flatnonzero(self.p2 < self.p1)]


class BalanceProblem(ArrayModel):
    """弱用户SINR均衡问题"""
    t: np.ndarray
    gamma_th: float = Field(gt=0)
    zeta: np.ndarray
    # 仅SINR均衡需要
    p_tot2: Optional[float] = Field(None, gt=0)

    @classmethod
    def from_interference(
            cls,
            t: np.ndarray,
            p1: np.ndarray,
            gamma_th: float,
            noise_var: float,
            c2_weak: Sequence[float],
            p_tot2: Optional[float] = None,
    ) -> "BalanceProblem":
        """由T与强用户功率构造; ζ_m = Σ_k p_{k,1}T_{m,k} + σ²/c²_{m,2} (含本对强用户干扰)"""
        t = np.asarray(t, dtype=float)
        p1 = np.asarray(p1, dtype=float)
        weak = [int(m) for m in np.flatnonzero(np.diag(t) <= MIN_GAIN)]
        if weak:
            raise UnserviceableUserError(
                f"weak users {weak} receive no IRS-assisted signal power",
                context={"pairs": weak},
            )
        zeta = t @ p1 + noise_var / np.asarray(c2_weak, dtype=float)
        return cls(t=t, gamma_th=gamma_th, zeta=zeta, p_tot2=p_tot2)

    @field_validator("t", mode="before")
    @classmethod
    def coerce_t(cls, v):
        arr = np.array(v, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("T must be a square matrix")
        return arr

    @field_validator("zeta", mode="before")
    @classmethod
    def coerce_zeta(cls, v):
        return as_real_vector(v)

    @model_validator(mode="after")
    def validate_entries(self):
        if self.zeta.shape[0] != self.t.shape[0]:
            raise ValueError("zeta length must equal the order of T")
        if np.any(self.t < 0):
            raise ValueError("T entries must be nonnegative")
        if np.any(self.zeta <= 0):
            raise ValueError("zeta entries must be positive")
        return self

    @property
    def num_pairs(self) -> int:
        return self.t.shape[0]

    @property
    def t_off(self) -> np.ndarray:
        """T°: 对角置零"""
        out = self.t.copy()
        np.fill_diagonal(out, 0.0)
        return out

    @property
    def lam(self) -> np.ndarray:
        """Λ的对角元 γ_th/T_{m,m}"""
        return self.gamma_th / np.diag(self.t)

    def upsilon(self) -> np.ndarray:
        """(M+1)×(M+1) 扩展耦合矩阵Υ"""
        if self.p_tot2 is None:
            raise ContractViolationError("SINR balancing requires a weak-user power budget")
        m = self.num_pairs
        lt = self.lam[:, None] * self.t_off
        lz = self.lam * self.zeta
        out = np.zeros((m + 1, m + 1))
        out[:m, :m] = lt
        out[:m, m] = lz
        out[m, :m] = lt.sum(axis=0) / self.p_tot2
        out[m, m] = lz.sum() / self.p_tot2
        return out
