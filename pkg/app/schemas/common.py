# app/schemas/common.py - 通用数据模式
from typing import Any, Generic, Optional, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict

T = TypeVar('T')


class BaseResponse(BaseModel, Generic[T]):
    """统一输出格式 (CLI打印)"""
    success: bool = True
    code: int = 0
    message: str = "Success"
    data: Optional[T] = None
    trace_id: Optional[str] = None


class ArrayModel(BaseModel):
    """含numpy数组字段的模型基类"""
    model_config = ConfigDict(arbitrary_types_allowed=True)


def as_complex_matrix(v: Any) -> np.ndarray:
    arr = np.array(v, dtype=complex)
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got {arr.ndim} dimensions")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite")
    return arr


def as_complex_vector(v: Any) -> np.ndarray:
    arr = np.array(v, dtype=complex).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector entries must be finite")
    return arr


def as_real_vector(v: Any) -> np.ndarray:
    arr = np.array(v, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector entries must be finite")
    return arr
