# app/schemas/beams.py - 迫零波束数据模式
from typing import List

import numpy as np
from pydantic import Field, field_validator, model_validator

from app.schemas.common import ArrayModel, as_complex_matrix, as_real_vector


class BeamSet(ArrayModel):
    """迫零发射波束，beams第m列为w_m"""
    beams: np.ndarray
    signal_gain: np.ndarray
    eigenspaces: List[np.ndarray] = Field(default_factory=list)

    @field_validator("beams", mode="before")
    @classmethod
    def coerce_beams(cls, v):
        return as_complex_matrix(v)

    @field_validator("signal_gain", mode="before")
    @classmethod
    def coerce_gain(cls, v):
        return as_real_vector(v)

    @model_validator(mode="after")
    def validate_beams(self):
        if self.signal_gain.shape[0] != self.beams.shape[1]:
            raise ValueError("signal_gain length must equal the number of beams")
        if np.any(self.signal_gain < 0):
            raise ValueError("signal gains must be nonnegative")
        norms = np.linalg.norm(self.beams, axis=0)
        if not np.allclose(norms, 1.0, atol=1e-9):
            raise ValueError("beams must have unit norm")
        return self

    @property
    def num_beams(self) -> int:
        return self.beams.shape[1]

    def beam(self, m: int) -> np.ndarray:
        return self.beams[:, m]
