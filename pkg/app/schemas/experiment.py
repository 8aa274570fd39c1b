# app/schemas/experiment.py - 实验数据模式
from enum import Enum
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from app.config import get_settings
from app.schemas.joint import SolverConfig
from app.schemas.scenario import ScenarioConfig

settings = get_settings()

# 蒙特卡洛平均误差需低于近似误差
MIN_VALIDATE_SAMPLES = 10_000


class ExperimentKind(str, Enum):
    SWEEP_N = "sweep_N"
    SWEEP_RANK = "sweep_rankG"
    SWEEP_SNR = "sweep_snr"
    VALIDATE = "validate_approx"
    SINGLE_RUN = "single_run"


class ExperimentSpec(BaseModel):
    """实验描述"""
    kind: ExperimentKind = ExperimentKind.SINGLE_RUN
    base: ScenarioConfig = Field(default_factory=ScenarioConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    sweep_values: List[Union[int, float]] = Field(default_factory=list)
    # 负载曲线 (如 M = 20, 40)，缺省只用base.num_pairs
    pair_counts: Optional[List[int]] = None
    trials: int = Field(default_factory=lambda: settings.DEFAULT_TRIALS, ge=1)
    samples: int = Field(default_factory=lambda: settings.MONTE_CARLO_SAMPLES, ge=1)
    per_beam_snr_db: float = Field(default_factory=lambda: settings.PER_BEAM_SNR_DB)
    weak_power_fraction: float = Field(default_factory=lambda: settings.WEAK_POWER_FRACTION, gt=0, lt=1)
    output: Optional[str] = None

    @field_validator("pair_counts")
    @classmethod
    def validate_pair_counts(cls, v):
        if v is not None and (not v or any(m < 1 for m in v)):
            raise ValueError("pair_counts must be a non-empty list of positive counts")
        return v

    @model_validator(mode="after")
    def validate_sweep(self):
        values = self.sweep_values
        if self.kind in (ExperimentKind.SWEEP_N, ExperimentKind.SWEEP_RANK, ExperimentKind.SWEEP_SNR) and not values:
            raise ValueError(f"{self.kind.value} requires sweep_values")
        if self.kind == ExperimentKind.SWEEP_N and any(int(v) != v or v < 1 for v in values):
            raise ValueError("IRS element counts must be positive integers")
        if self.kind == ExperimentKind.SWEEP_RANK:
            full = self.base.full_rank_g
            if any(int(v) != v or not 1 <= v <= full for v in values):
                raise ValueError(f"rank values must be integers in [1, {full}]")
        if self.kind == ExperimentKind.SWEEP_SNR and any(v <= 0 for v in values):
            raise ValueError("target rates must be positive")
        if self.kind == ExperimentKind.VALIDATE and self.samples < MIN_VALIDATE_SAMPLES:
            raise ValueError(f"validate_approx needs at least {MIN_VALIDATE_SAMPLES} samples, got {self.samples}")
        return self

    def with_updates(self, **changes) -> "ExperimentSpec":
        """复制并重新校验"""
        return ExperimentSpec.model_validate({**self.model_dump(), **changes})

    @property
    def loads(self) -> List[int]:
        return list(self.pair_counts) if self.pair_counts else [self.base.num_pairs]


class TrialRecord(BaseModel):
    """单次试验原始结果"""
    num_pairs: int
    sweep_value: float
    trial: int
    seed: int
    ok: bool = True
    category: Optional[str] = None
    values: Dict[str, float] = Field(default_factory=dict)

    def flat(self) -> dict:
        return {"num_pairs": self.num_pairs, "sweep_value": self.sweep_value, "trial": self.trial,
                "seed": self.seed, "ok": self.ok, "category": self.category or "", **self.values}


class ResultRow(BaseModel):
    """扫描结果行 (均值与标准误)"""
    num_pairs: int
    sweep_value: float
    trials: int
    failures: int = 0
    values: Dict[str, float] = Field(default_factory=dict)
    records: List[TrialRecord] = Field(default_factory=list, exclude=True)

    def flat(self) -> dict:
        return {"num_pairs": self.num_pairs, "sweep_value": self.sweep_value,
                "trials": self.trials, "failures": self.failures, **self.values}
