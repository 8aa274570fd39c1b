# app/schemas/irs.py - IRS相位优化数据模式
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from app.config import get_settings
from app.schemas.common import ArrayModel, as_complex_matrix, as_complex_vector

settings = get_settings()

MODULUS_ATOL = 1e-9


class IrsPhaseVector(ArrayModel):
    """恒模IRS反射系数向量，|θ_n| = 1/√N"""
    theta: np.ndarray

    @field_validator("theta", mode="before")
    @classmethod
    def coerce_theta(cls, v):
        return as_complex_vector(v)

    @model_validator(mode="after")
    def validate_modulus(self):
        n = self.theta.shape[0]
        if n == 0:
            raise ValueError("theta must have at least one element")
        if np.max(np.abs(np.abs(self.theta) - 1.0 / np.sqrt(n))) > MODULUS_ATOL:
            raise ValueError("theta violates the constant-modulus constraint")
        return self

    @property
    def size(self) -> int:
        return self.theta.shape[0]

    @classmethod
    def from_phases(cls, phases: np.ndarray) -> "IrsPhaseVector":
        phases = np.asarray(phases, dtype=float).reshape(-1)
        return cls(theta=np.exp(1j * phases) / np.sqrt(phases.shape[0]))

    @classmethod
    def project(cls, vec: np.ndarray, prior: Optional[np.ndarray] = None) -> "IrsPhaseVector":
        """逐元素投影到半径1/√N的圆上，零元素保留先前相位"""
        return cls(theta=project_constant_modulus(vec, prior))


def project_constant_modulus(vec: np.ndarray, prior: Optional[np.ndarray] = None) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex).reshape(-1)
    n = vec.shape[0]
    mag = np.abs(vec)
    if prior is None:
        fallback = np.ones(n, dtype=complex)
    else:
        fallback = np.exp(1j * np.angle(np.asarray(prior, dtype=complex).reshape(-1)))
    unit = np.where(mag > 0, vec / np.where(mag > 0, mag, 1.0), fallback)
    return unit / np.sqrt(n)


class FractionalProblem(ArrayModel):
    """弱用户SINR分式二次问题: θ†Pθ / (θ†(rP+Q)θ + noise)"""
    p: np.ndarray
    q: np.ndarray
    power_ratio: float = Field(ge=0)
    noise_term: float = Field(gt=0)

    @field_validator("p", "q", mode="before")
    @classmethod
    def coerce_matrix(cls, v):
        return as_complex_matrix(v)

    @model_validator(mode="after")
    def validate_psd(self):
        if self.p.shape != self.q.shape or self.p.shape[0] != self.p.shape[1]:
            raise ValueError("P and Q must be square matrices of the same order")
        for name, mat in (("P", self.p), ("Q", self.q)):
            trace = float(np.real(np.trace(mat)))
            lam_min = float(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0])
            if lam_min < -1e-10 * max(abs(trace), np.finfo(float).tiny):
                raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {lam_min:.3e})")
        return self

    @property
    def size(self) -> int:
        return self.p.shape[0]

    def denominator_matrix(self) -> np.ndarray:
        """rP + Q + noise·I"""
        return self.power_ratio * self.p + self.q + self.noise_term * np.eye(self.size)

    def numerator(self, theta: np.ndarray) -> float:
        """f(θ)"""
        return float(np.real(np.vdot(theta, self.p @ theta)))

    def denominator(self, theta: np.ndarray) -> float:
        """g(θ)"""
        return float(np.real(np.vdot(theta, self.denominator_matrix() @ theta)))


class AdmmParams(BaseModel):
    tolerance: float = Field(default_factory=lambda: settings.ADMM_TOLERANCE, gt=0)
    max_iterations: int = Field(default_factory=lambda: settings.ADMM_MAX_ITERATIONS, ge=1)
    # 缺省 ρ = trace(S)/N
    rho: Optional[float] = Field(None, gt=0)


class DinkelbachTrace(BaseModel):
    """Dinkelbach迭代轨迹"""
    etas: List[float] = Field(default_factory=list)
    f_values: List[float] = Field(default_factory=list)
    objectives: List[float] = Field(default_factory=list)
    iterations: int = 0
    # "tolerance" | "stalled"，未收敛为None
    stop_reason: Optional[str] = None

    def record(self, eta: float, f_value: float, objective: float) -> None:
        self.etas.append(eta)
        self.f_values.append(f_value)
        self.objectives.append(objective)
        self.iterations += 1

    def eta_non_decreasing(self, atol: float = 1e-12) -> bool:
        return all(b >= a - atol * max(1.0, abs(a)) for a, b in zip(self.etas, self.etas[1:]))
