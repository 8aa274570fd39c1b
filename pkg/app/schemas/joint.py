# app/schemas/joint.py - 联合优化数据模式
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator

from app.config import get_settings
from app.schemas.common import ArrayModel, as_real_vector
from app.schemas.irs import DinkelbachTrace, IrsPhaseVector
from app.schemas.power import PowerAllocation

settings = get_settings()


class SolverConfig(BaseModel):
    """联合优化求解配置"""
    eps_gamma: float = Field(default_factory=lambda: settings.EPS_GAMMA, gt=0, lt=1)
    eps_dinkelbach: float = Field(default_factory=lambda: settings.DINKELBACH_EPSILON, gt=0, lt=1)
    # 缺省 100·M·σ²
    pmax: Optional[float] = Field(None, gt=0)
    pmax_growth: float = Field(default_factory=lambda: settings.PMAX_GROWTH, gt=1)
    max_pmax_escalations: int = Field(default_factory=lambda: settings.MAX_PMAX_ESCALATIONS, ge=0)
    max_outer_iterations: int = Field(default_factory=lambda: settings.MAX_OUTER_ITERATIONS, ge=2)
    dinkelbach_max_iterations: int = Field(default_factory=lambda: settings.DINKELBACH_MAX_ITERATIONS, ge=1)

    def initial_pmax(self, num_pairs: int, noise_var: float) -> float:
        return self.pmax if self.pmax is not None else 100.0 * num_pairs * noise_var


class IterationRecord(BaseModel):
    """联合迭代单步记录"""
    iteration: int
    branch: str
    c: float
    total_power: float
    ratio_gap: Optional[float] = None
    pmax: float


class JointSolution(ArrayModel):
    """联合优化结果"""
    thetas: List[IrsPhaseVector]
    powers: PowerAllocation
    sinr_strong: np.ndarray
    sinr_weak: np.ndarray
    total_power: float
    trace: List[IterationRecord] = Field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    pmax: float = 0.0
    power_increases: int = 0
    # 每个用户对最近一次Dinkelbach轨迹，未更新过为空轨迹
    dinkelbach_traces: List[DinkelbachTrace] = Field(default_factory=list)

    @field_validator("sinr_strong", "sinr_weak", mode="before")
    @classmethod
    def coerce_sinr(cls, v):
        return as_real_vector(v)

    @property
    def achieved_sinr(self) -> np.ndarray:
        """(M, 2): 每对的强、弱用户SINR"""
        return np.column_stack([self.sinr_strong, self.sinr_weak])

    @property
    def min_rate(self) -> float:
        return float(np.log2(1.0 + np.min(self.achieved_sinr)))
