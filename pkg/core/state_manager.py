# -*- coding: utf-8 -*-
"""
状态管理器

统一管理一次评估运行的阶段状态转换，并收集运行期间的警告与排除记录，
供运行清单（manifest）使用。
"""

import enum
import logging
import threading
from typing import Any, Dict, List, Optional, Set, Tuple

from utils.logger import ROOT_LOGGER_NAME, get_logger


class RunStage(enum.Enum):
    """运行阶段枚举"""
    PENDING = "pending"       # 尚未开始
    INGEST = "ingest"         # 读取实际值与预测值
    SPLIT = "split"           # 留出切分与对齐
    BASELINE = "baseline"     # 季节朴素基线
    ANNOTATE = "annotate"     # 条件标注
    LOSSES = "losses"         # 损失计算
    AGGREGATE = "aggregate"   # 维度聚合与胜负统计
    RANK = "rank"             # 排名
    REPORT = "report"         # 输出
    COMPLETED = "completed"   # 成功完成
    FAILED = "failed"         # 失败


_ORDER = [s for s in RunStage if s is not RunStage.FAILED]


class RunStateManager:
    """运行状态管理器"""

    # 允许的状态转换：只能向后推进（annotate/validate 命令会跳过部分阶段）
    VALID_TRANSITIONS: Dict[RunStage, Set[RunStage]] = {
        stage: set(_ORDER[index + 1:]) | {RunStage.FAILED}
        for index, stage in enumerate(_ORDER)
    }
    VALID_TRANSITIONS[RunStage.COMPLETED] = set()
    VALID_TRANSITIONS[RunStage.FAILED] = set()

    def __init__(self):
        self.logger = get_logger("state_manager")
        self.current_stage = RunStage.PENDING
        self.history: List[Tuple[str, str]] = []
        self.failure: Optional[Dict[str, str]] = None
        self._warnings: Dict[str, Tuple[int, str, str]] = {}
        self._exclusions: List[Dict[str, str]] = []
        self._totals: Dict[str, Any] = {}
        self._lock = threading.RLock()
        self._handler: Optional[logging.Handler] = None

    # ---- 状态转换 ----

    def is_valid_transition(self, from_stage: RunStage, to_stage: RunStage) -> bool:
        return to_stage in self.VALID_TRANSITIONS.get(from_stage, set())

    def transition(self, to_stage: RunStage, reason: str = "") -> None:
        """
        转换运行状态

        Args:
            to_stage: 目标状态
            reason: 转换原因

        Raises:
            ValueError: 非法的状态转换
        """
        with self._lock:
            if not self.is_valid_transition(self.current_stage, to_stage):
                raise ValueError(
                    f"非法的状态转换: {self.current_stage.value} -> {to_stage.value}")
            self.logger.debug(f"状态转换: {self.current_stage.value} -> {to_stage.value} ({reason})")
            self.history.append((self.current_stage.value, to_stage.value))
            self.current_stage = to_stage

    def fail(self, stage: str, message: str) -> None:
        """记录失败并转换为 FAILED 状态"""
        with self._lock:
            self.failure = {"stage": stage, "message": message}
            if self.current_stage is not RunStage.FAILED:
                self.history.append((self.current_stage.value, RunStage.FAILED.value))
                self.current_stage = RunStage.FAILED

    # ---- 警告收集 ----

    def record_warning(self, message: str, source: str = "") -> None:
        """
        记录一条警告；相同内容只记录一次

        Args:
            message: 警告内容
            source: 产生警告的日志记录器名称
        """
        with self._lock:
            if message in self._warnings:
                return
            order = _ORDER.index(self.current_stage) if self.current_stage in _ORDER else len(_ORDER)
            self._warnings[message] = (order, self.current_stage.value, source)

    def attach(self) -> None:
        """把警告收集器挂到根日志记录器上，收集所有 WARNING 级别的日志"""
        if self._handler is not None:
            return
        self._handler = _WarningCollector(self)
        logging.getLogger(ROOT_LOGGER_NAME).addHandler(self._handler)

    def detach(self) -> None:
        if self._handler is None:
            return
        logging.getLogger(ROOT_LOGGER_NAME).removeHandler(self._handler)
        self._handler = None

    @property
    def warnings(self) -> List[Dict[str, str]]:
        """按阶段顺序、再按内容排序的警告列表，与线程调度无关"""
        with self._lock:
            items = sorted(self._warnings.items(), key=lambda kv: (kv[1][0], kv[0]))
        return [{"stage": stage, "source": source, "message": message}
                for message, (_, stage, source) in items]

    # ---- 排除记录与统计 ----

    def record_exclusions(self, exclusions) -> None:
        with self._lock:
            self._exclusions.extend(dict(e) for e in exclusions)

    @property
    def exclusions(self) -> List[Dict[str, str]]:
        with self._lock:
            return sorted(self._exclusions,
                          key=lambda e: tuple(str(e.get(k, "")) for k in ("condition", "unique_id", "model")))

    def record_totals(self, name: str, totals: Any) -> None:
        with self._lock:
            self._totals[name] = totals

    @property
    def totals(self) -> Dict[str, Any]:
        with self._lock:
            return dict(self._totals)

    def get_status(self) -> Dict[str, Any]:
        return {
            "current_stage": self.current_stage.value,
            "warnings": len(self._warnings),
            "exclusions": len(self._exclusions),
            "failure": self.failure,
        }


class _WarningCollector(logging.Handler):
    """把 WARNING 级别的日志转交给状态管理器"""

    def __init__(self, state_manager: RunStateManager):
        super().__init__(level=logging.WARNING)
        self.state_manager = state_manager

    def emit(self, record: logging.LogRecord) -> None:
        if record.levelno != logging.WARNING:
            return
        try:
            self.state_manager.record_warning(record.getMessage(), record.name)
        except Exception:
            self.handleError(record)
