# app/exceptions.py - 异常处理
import logging
from typing import Any, Dict, Optional, Tuple

logger = logging.getLogger(__name__)


class SimulationError(Exception):
    """仿真异常基类"""

    category = "internal"
    exit_code = 1

    def __init__(self, detail: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(detail)
        self.detail = detail
        self.context: Dict[str, Any] = dict(context or {})

    def with_context(self, **context: Any) -> "SimulationError":
        """附加迭代上下文"""
        self.context.update(context)
        return self

    def __str__(self) -> str:
        if not self.context:
            return self.detail
        ctx = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.detail} [{ctx}]"


class ConfigError(SimulationError):
    """配置异常"""

    category = "config"
    exit_code = 2


class InfeasibleError(SimulationError):
    """不可行异常"""

    category = "infeasible"
    exit_code = 3


class NumericError(SimulationError):
    """数值异常"""

    category = "numeric"
    exit_code = 4


# 不可行
class InfeasibleScenarioError(InfeasibleError):
    pass


class EmptyNullSpaceError(InfeasibleError):
    pass


class UnserviceableUserError(InfeasibleError):
    pass


class InfeasibleThresholdError(InfeasibleError):
    pass


class PowerBudgetExhaustedError(InfeasibleError):
    pass


# 数值
class ContractViolationError(NumericError):
    pass


class InvalidPowerError(ContractViolationError):
    pass


class SingularSystemError(NumericError):
    pass


class RankMismatchError(NumericError):
    pass


class NotPositiveSemidefiniteError(NumericError):
    pass


class PerronEigenpairError(NumericError):
    pass


class MaxIterationsError(NumericError):
    """迭代超限，携带迭代轨迹与最优可行点"""

    def __init__(self, detail: str, trace: Any = None, best: Any = None, context: Optional[Dict[str, Any]] = None):
        super().__init__(detail, context)
        self.trace = trace
        self.best = best


def handle_exception(exc: BaseException, trace_id: str = "unknown") -> Tuple[int, Dict[str, Any]]:
    """统一异常处理，返回退出码和机器可读的错误内容"""
    if isinstance(exc, SimulationError):
        logger.warning(
            f"{type(exc).__name__}: {exc} "
            f"- Trace: {trace_id}"
        )
        return exc.exit_code, {
            "success": False,
            "code": exc.exit_code,
            "category": exc.category,
            "error": type(exc).__name__,
            "message": exc.detail,
            "data": {k: _jsonable(v) for k, v in exc.context.items()} or None,
            "trace_id": trace_id,
        }

    logger.error(
        f"Unhandled Exception: {str(exc)} "
        f"- Trace: {trace_id}",
        exc_info=exc,
    )
    return 1, {
        "success": False,
        "code": 1,
        "category": "internal",
        "error": type(exc).__name__,
        "message": str(exc),
        "data": None,
        "trace_id": trace_id,
    }


def _jsonable(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    try:
        return float(value)
    except (TypeError, ValueError):
        return str(value)
