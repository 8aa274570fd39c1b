# app/schemas/scenario.py - 场景与信道数据模式
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import AliasChoices, BaseModel, Field, field_validator, model_validator

from app.schemas.common import ArrayModel, as_complex_matrix


class ScenarioConfig(BaseModel):
    """单小区场景配置"""
    num_tx: int = Field(64, ge=1, validation_alias=AliasChoices("num_tx", "Nt"))
    num_elements: int = Field(128, ge=1, validation_alias=AliasChoices("num_elements", "N"))
    num_pairs: int = Field(10, ge=1, validation_alias=AliasChoices("num_pairs", "M"))
    paths_strong: Union[int, List[int]] = Field(1, validation_alias=AliasChoices("paths_strong", "L"))
    # 弱用户R_g的路径数，缺省与强用户一致
    paths_weak: Optional[Union[int, List[int]]] = Field(
        None, validation_alias=AliasChoices("paths_weak", "L_weak")
    )
    # G的秩，缺省为满秩 min(Nt, N)
    rank_g: Optional[int] = Field(None, validation_alias=AliasChoices("rank_g", "rankG"))
    noise_var: float = Field(1.0, gt=0, validation_alias=AliasChoices("noise_var", "sigma2_n"))
    c2_strong: Union[float, List[float]] = Field(1.0, validation_alias=AliasChoices("c2_strong", "c2_1"))
    c2_weak: Union[float, List[float]] = Field(1.0, validation_alias=AliasChoices("c2_weak", "c2_2"))
    gamma_th: float = Field(1.0, gt=0)
    seed: int = 0

    @field_validator("paths_strong", "paths_weak")
    @classmethod
    def validate_paths(cls, v):
        if v is None:
            return v
        values = v if isinstance(v, list) else [v]
        if any(l < 1 for l in values):
            raise ValueError("path counts must be at least 1")
        return v

    @field_validator("c2_strong", "c2_weak")
    @classmethod
    def validate_gains(cls, v):
        values = v if isinstance(v, list) else [v]
        if any(c <= 0 for c in values):
            raise ValueError("path-loss gains must be positive")
        return v

    @model_validator(mode="after")
    def validate_dimensions(self):
        for name in ("paths_strong", "paths_weak", "c2_strong", "c2_weak"):
            value = getattr(self, name)
            if isinstance(value, list) and len(value) != self.num_pairs:
                raise ValueError(f"{name} has {len(value)} entries, expected {self.num_pairs}")
        if any(l > self.num_tx for l in self.strong_paths):
            raise ValueError("strong-user path count cannot exceed num_tx")
        if any(l > self.num_elements for l in self.weak_paths):
            raise ValueError("weak-user path count cannot exceed num_elements")
        if self.rank_g is not None and not 1 <= self.rank_g <= self.full_rank_g:
            raise ValueError(f"rank_g must lie in [1, {self.full_rank_g}]")
        return self

    @property
    def strong_paths(self) -> List[int]:
        v = self.paths_strong
        return list(v) if isinstance(v, list) else [v] * self.num_pairs

    @property
    def weak_paths(self) -> List[int]:
        v = self.paths_weak
        if v is None:
            return self.strong_paths
        return list(v) if isinstance(v, list) else [v] * self.num_pairs

    @property
    def c2_strong_list(self) -> List[float]:
        v = self.c2_strong
        return list(v) if isinstance(v, list) else [v] * self.num_pairs

    @property
    def c2_weak_list(self) -> List[float]:
        v = self.c2_weak
        return list(v) if isinstance(v, list) else [v] * self.num_pairs

    @property
    def full_rank_g(self) -> int:
        return min(self.num_tx, self.num_elements)

    @property
    def effective_rank_g(self) -> int:
        return self.rank_g if self.rank_g is not None else self.full_rank_g

    def with_updates(self, **changes) -> "ScenarioConfig":
        """复制并重新校验"""
        return ScenarioConfig.model_validate({**self.model_dump(), **changes})


class UserPairChannels(ArrayModel):
    """单个用户对的统计信道"""
    r_h: np.ndarray
    r_g: np.ndarray
    g: np.ndarray
    c2_strong: float = Field(gt=0)
    c2_weak: float = Field(gt=0)
    aod_strong: List[float]
    aod_weak: List[float] = Field(default_factory=list)
    aod_bs_irs: List[Tuple[float, float]] = Field(default_factory=list)

    @field_validator("r_h", "r_g", "g", mode="before")
    @classmethod
    def coerce_matrix(cls, v):
        return as_complex_matrix(v)

    @model_validator(mode="after")
    def validate_shapes(self):
        nt, n = self.g.shape
        if self.r_h.shape != (nt, nt):
            raise ValueError(f"r_h must be {nt}x{nt}, got {self.r_h.shape}")
        if self.r_g.shape != (n, n):
            raise ValueError(f"r_g must be {n}x{n}, got {self.r_g.shape}")
        return self

    @property
    def num_tx(self) -> int:
        return self.g.shape[0]

    @property
    def num_elements(self) -> int:
        return self.g.shape[1]

    @property
    def strong_paths(self) -> int:
        return len(self.aod_strong)
