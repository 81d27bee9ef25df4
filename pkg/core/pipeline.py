# -*- coding: utf-8 -*-
"""
Pipeline架构核心

定义错误层级、处理阶段基类与Pipeline管理器。
评估流程: 读取 → 留出切分 → 基线 → 条件标注 → 损失 → 聚合 → 排名 → 输出。
"""

import abc
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, TypeVar

from core.state_manager import RunStage, RunStateManager
from utils.logger import get_logger

T = TypeVar("T")
R = TypeVar("R")


class EvaluationError(Exception):
    """评估错误基类"""

    exit_code = 3

    def __init__(self,
                 message: str,
                 error_type: str = "EvaluationError",
                 stage: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.error_type = error_type
        self.stage = stage

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error_type": self.error_type,
            "stage": self.stage,
            "message": self.message,
        }


class ConfigValidationError(EvaluationError):
    """运行配置不合法"""

    exit_code = 2

    def __init__(self, message: str):
        super().__init__(message, "ConfigValidation", stage="config")


class StageError(EvaluationError):
    """阶段内未预期的异常，携带阶段上下文"""

    def __init__(self, message: str, stage: str):
        super().__init__(message, "StageFailure", stage=stage)


# ---- 数据读取与校验 ----

class DataValidationError(EvaluationError):
    """输入数据不满足约定"""

    def __init__(self, message: str, error_type: str, path: Optional[str] = None):
        super().__init__(message, error_type)
        self.path = path


class MissingColumnError(DataValidationError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message, "MissingColumn", path)


class UnparseableTimestampError(DataValidationError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message, "UnparseableTimestamp", path)


class UnparseableValueError(DataValidationError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message, "UnparseableValue", path)


class MissingValueError(DataValidationError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message, "MissingValue", path)


class DuplicateTimestampError(DataValidationError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message, "DuplicateTimestamp", path)


class SeriesTooShortError(DataValidationError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message, "SeriesTooShort", path)


class IrregularSpacingError(DataValidationError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message, "IrregularSpacing", path)


class EmptyInputError(DataValidationError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message, "EmptyInput", path)


class DuplicateSeriesError(DataValidationError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message, "DuplicateSeries", path)


class UnknownSeriesError(DataValidationError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message, "UnknownSeries", path)


class TimestampOutsideHoldoutError(DataValidationError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message, "TimestampOutsideHoldout", path)


class IncompleteHorizonError(DataValidationError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message, "IncompleteHorizon", path)


class DuplicateForecastError(DataValidationError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message, "DuplicateForecast", path)


class NoOverlapError(DataValidationError):
    def __init__(self, message: str):
        super().__init__(message, "NoOverlap")


# ---- 计算 ----

class ComputationError(EvaluationError):
    """指标或聚合计算的前置条件不满足"""

    def __init__(self, message: str, error_type: str):
        super().__init__(message, error_type)


class LengthMismatchError(ComputationError):
    def __init__(self, message: str):
        super().__init__(message, "LengthMismatch")


class InsampleTooShortError(ComputationError):
    def __init__(self, message: str):
        super().__init__(message, "InsampleTooShort")


class ZeroDenominatorError(ComputationError):
    def __init__(self, message: str):
        super().__init__(message, "ZeroDenominator")


class DegenerateSigmaError(ComputationError):
    def __init__(self, message: str):
        super().__init__(message, "DegenerateSigma")


class UnsupportedSignificanceError(ComputationError):
    def __init__(self, message: str):
        super().__init__(message, "UnsupportedSignificance")


class AlphaTooSmallError(ComputationError):
    def __init__(self, message: str):
        super().__init__(message, "AlphaTooSmall")


class SeriesSetMismatchError(ComputationError):
    def __init__(self, message: str):
        super().__init__(message, "SeriesSetMismatch")


class EmptyConditionError(ComputationError):
    def __init__(self, message: str):
        super().__init__(message, "EmptyCondition")


class IncompleteScoresError(ComputationError):
    def __init__(self, message: str):
        super().__init__(message, "IncompleteScores")


class TooFewAxesError(ComputationError):
    def __init__(self, message: str):
        super().__init__(message, "TooFewAxes")


class ReportIoError(EvaluationError):
    """输出目录或文件无法写入"""

    def __init__(self, message: str, path: str):
        super().__init__(message, "IoError", stage="report")
        self.path = path


@dataclass
class RunContext:
    """在各阶段之间传递的运行上下文"""
    config: Any
    artifacts: Dict[str, Any] = field(default_factory=dict)

    def get(self, key: str) -> Any:
        if key not in self.artifacts:
            raise KeyError(f"运行上下文缺少产物: {key}")
        return self.artifacts[key]

    def put(self, key: str, value: Any) -> None:
        self.artifacts[key] = value

    def has(self, key: str) -> bool:
        return key in self.artifacts


class BaseStage(abc.ABC):
    """处理阶段基类"""

    # 阶段执行前必须存在的产物
    requires: Sequence[str] = ()

    def __init__(self, name: str, run_stage: RunStage, state_manager: RunStateManager):
        """
        初始化处理阶段

        Args:
            name: 阶段名称
            run_stage: 对应的运行状态
            state_manager: 运行状态管理器
        """
        self.name = name
        self.run_stage = run_stage
        self.state_manager = state_manager
        self.logger = get_logger(f"pipeline.{name}")
        self.manager: Optional["PipelineManager"] = None

    def can_process(self, context: RunContext) -> bool:
        """
        检查上下文中是否具备本阶段所需的产物

        Args:
            context: 运行上下文

        Returns:
            bool: 是否可以处理
        """
        missing = [key for key in self.requires if not context.has(key)]
        if missing:
            self.logger.error(f"阶段 {self.name} 缺少前置产物: {missing}")
            return False
        return True

    @abc.abstractmethod
    def process(self, context: RunContext) -> None:
        """
        执行阶段逻辑，把产物写回上下文

        Args:
            context: 运行上下文
        """

    def map_series(self, func: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """逐序列执行，若已注册到管理器则使用其线程池"""
        if self.manager is not None:
            return self.manager.map_series(func, items)
        return [func(item) for item in items]

    def execute(self, context: RunContext) -> None:
        """
        执行处理逻辑，包含状态管理与错误包装

        Args:
            context: 运行上下文
        """
        start_time = time.perf_counter()
        self.state_manager.transition(self.run_stage, f"开始{self.name}阶段")

        if not self.can_process(context):
            raise StageError(f"{self.name}阶段前置条件不满足", stage=self.name)

        try:
            self.process(context)
        except EvaluationError as e:
            if e.stage is None:
                e.stage = self.name
            self.logger.error(f"{self.name}阶段失败: {e.error_type} - {e.message}")
            raise
        except Exception as e:
            import traceback
            self.logger.error(f"{self.name}阶段异常: {type(e).__name__}: {e}")
            self.logger.debug(f"异常堆栈: {traceback.format_exc()}")
            raise StageError(f"{type(e).__name__}: {e}", stage=self.name) from e

        elapsed = time.perf_counter() - start_time
        self.logger.info(f"{self.name}阶段完成, 耗时: {elapsed:.2f}秒")


class PipelineManager:
    """Pipeline管理器：按注册顺序执行各阶段，并提供逐序列并行"""

    def __init__(self, state_manager: RunStateManager, max_workers: int = 1):
        """
        初始化Pipeline管理器

        Args:
            state_manager: 运行状态管理器
            max_workers: 逐序列计算的最大线程数
        """
        self.state_manager = state_manager
        self.max_workers = max(1, int(max_workers))
        self.logger = get_logger("pipeline_manager")
        self.stages: Dict[str, BaseStage] = {}

    def register_stage(self, stage: BaseStage) -> None:
        """
        注册处理阶段

        Args:
            stage: 处理阶段实例
        """
        stage.manager = self
        self.stages[stage.name] = stage
        self.logger.debug(f"注册处理阶段: {stage.name}")

    def map_series(self, func: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """
        对每个元素执行 func，结果顺序与输入一致，与线程数无关

        Args:
            func: 单元素计算函数
            items: 输入元素

        Returns:
            List: 计算结果
        """
        items = list(items)
        if self.max_workers == 1 or len(items) <= 1:
            return [func(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            return list(executor.map(func, items))

    def run(self, context: RunContext, stage_names: Optional[Sequence[str]] = None) -> RunContext:
        """
        依次执行各阶段

        Args:
            context: 运行上下文
            stage_names: 只执行这些阶段（保持注册顺序），为空时执行全部

        Returns:
            RunContext: 执行后的上下文
        """
        selected = [stage for name, stage in self.stages.items()
                    if stage_names is None or name in stage_names]
        self.logger.info(f"Pipeline开始, 阶段: {[s.name for s in selected]}, 线程数: {self.max_workers}")

        try:
            for stage in selected:
                stage.execute(context)
        except EvaluationError as e:
            self.state_manager.fail(e.stage or "pipeline", e.message)
            raise

        self.state_manager.transition(RunStage.COMPLETED, "全部阶段完成")
        return context

    def get_status(self) -> Dict[str, Any]:
        """
        获取Pipeline状态

        Returns:
            Dict[str, Any]: 状态信息
        """
        return {
            'max_workers': self.max_workers,
            'registered_stages': list(self.stages.keys()),
            'run': self.state_manager.get_status(),
        }
