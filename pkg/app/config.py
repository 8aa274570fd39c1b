import json
from functools import lru_cache
from pathlib import Path
from typing import Type, TypeVar, Union

from pydantic import BaseModel, ValidationError, field_validator
from pydantic_settings import BaseSettings

from app.exceptions import ConfigError

ModelType = TypeVar("ModelType", bound=BaseModel)


class Settings(BaseSettings):
    # 基础配置
    PROJECT_NAME: str = "IRS-NOMA联合优化仿真"
    VERSION: str = "1.0.0"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    # 实验配置
    WORKERS: int = 4
    DEFAULT_TRIALS: int = 20
    MONTE_CARLO_SAMPLES: int = 100_000
    OUTPUT_DIR: str = "results"

    # 数值配置
    RANK_RTOL: float = 1e-10

    # ADMM配置
    ADMM_TOLERANCE: float = 1e-8
    ADMM_MAX_ITERATIONS: int = 2000

    # Dinkelbach配置
    DINKELBACH_EPSILON: float = 1e-6
    DINKELBACH_MAX_ITERATIONS: int = 100

    # 联合优化配置
    EPS_GAMMA: float = 1e-3
    MAX_OUTER_ITERATIONS: int = 50
    PMAX_GROWTH: float = 10.0
    MAX_PMAX_ESCALATIONS: int = 10

    # 扫描实验配置
    PER_BEAM_SNR_DB: float = 20.0
    WEAK_POWER_FRACTION: float = 0.9
    REFERENCE_PATH_GAIN: float = 1.0

    @field_validator(
        "ADMM_TOLERANCE", "DINKELBACH_EPSILON", "EPS_GAMMA", "RANK_RTOL", "WEAK_POWER_FRACTION"
    )
    @classmethod
    def validate_unit_interval(cls, v):
        if not 0 < v < 1:
            raise ValueError("tolerances and fractions must lie in (0, 1)")
        return v

    @field_validator("PMAX_GROWTH")
    @classmethod
    def validate_growth(cls, v):
        if v <= 1:
            raise ValueError("PMAX_GROWTH must be greater than 1")
        return v

    @field_validator("WORKERS", "DEFAULT_TRIALS", "MONTE_CARLO_SAMPLES")
    @classmethod
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError("counts must be at least 1")
        return v

    class Config:
        env_file = ".env"
        case_sensitive = True


@lru_cache()
def get_settings() -> Settings:
    return Settings()


def load_json_model(path: Union[str, Path], model: Type[ModelType]) -> ModelType:
    """读取JSON配置文件并校验"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")

    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"Malformed JSON in {path} at line {e.lineno}, column {e.colno}: {e.msg}",
            context={"path": str(path), "line": e.lineno, "column": e.colno},
        )

    try:
        return model.model_validate(raw)
    except ValidationError as e:
        errors = [
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}"
            for err in e.errors()
        ]
        raise ConfigError(
            f"Invalid {model.__name__} in {path}: " + "; ".join(errors),
            context={"path": str(path), "errors": errors},
        )
