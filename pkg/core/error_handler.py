# -*- coding: utf-8 -*-
"""
错误处理

把运行中止时的异常分类为退出码，清理部分输出，并写出机器可读的错误报告。
"""

import json
import shutil
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional

from core.pipeline import (ConfigValidationError, DataValidationError,
                           EvaluationError)
from utils.logger import get_logger, log_exception

ERROR_REPORT_FILE = "error_report.json"
STAGING_PREFIX = ".radar-eval-staging-"


class ExitCode(int, Enum):
    """命令退出码"""
    SUCCESS = 0             # 成功
    VALIDATION_FAILED = 2   # 配置或输入校验失败
    RUNTIME_FAILED = 3      # 运行期失败


class ErrorSeverity(Enum):
    """错误严重级别"""
    INPUT = "input"          # 输入或配置问题，修正后可重跑
    COMPUTATION = "computation"  # 计算前置条件不满足
    INTERNAL = "internal"    # 未预期的异常


@dataclass
class ErrorInfo:
    """错误信息"""
    error_type: str
    stage: Optional[str]
    message: str
    exit_code: int
    severity: str

    def to_report(self) -> Dict[str, Any]:
        report = {"status": "failed"}
        report.update(asdict(self))
        return report


class ErrorClassifier:
    """错误分类器"""

    @classmethod
    def classify_error(cls, error: BaseException, command: str = "run") -> ErrorInfo:
        """
        分类错误

        validate 命令把数据校验错误视为校验失败（退出码 2），
        run/annotate 中数据错误属于运行期失败（退出码 3）。

        Args:
            error: 异常对象
            command: 子命令

        Returns:
            ErrorInfo: 错误信息
        """
        if isinstance(error, ConfigValidationError):
            return ErrorInfo(error.error_type, error.stage, error.message,
                             ExitCode.VALIDATION_FAILED.value, ErrorSeverity.INPUT.value)
        if isinstance(error, DataValidationError):
            code = ExitCode.VALIDATION_FAILED if command == "validate" else ExitCode.RUNTIME_FAILED
            return ErrorInfo(error.error_type, error.stage, error.message,
                             code.value, ErrorSeverity.INPUT.value)
        if isinstance(error, EvaluationError):
            cause = error.__cause__
            if isinstance(cause, EvaluationError):
                return cls.classify_error(cause, command)
            severity = ErrorSeverity.INTERNAL if error.error_type == "StageFailure" else ErrorSeverity.COMPUTATION
            return ErrorInfo(error.error_type, error.stage, error.message,
                             ExitCode.RUNTIME_FAILED.value, severity.value)
        return ErrorInfo(type(error).__name__, None, str(error),
                         ExitCode.RUNTIME_FAILED.value, ErrorSeverity.INTERNAL.value)


class ErrorHandler:
    """错误处理器"""

    def __init__(self, output_dir: Optional[Path] = None):
        """
        初始化错误处理器

        Args:
            output_dir: 输出目录；为空时（例如配置无法加载）不写错误报告
        """
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.logger = get_logger("error_handler")

    def handle_error(self, error: BaseException, command: str = "run") -> ErrorInfo:
        """
        处理中止运行的错误

        Args:
            error: 异常对象
            command: 子命令

        Returns:
            ErrorInfo: 分类后的错误信息
        """
        info = ErrorClassifier.classify_error(error, command)
        log_exception(self.logger, error, f"{command} 失败 [{info.error_type}] 阶段={info.stage}")

        if self.output_dir is not None and command != "validate":
            self.remove_partial_outputs()
            self.write_error_report(info)
        return info

    def remove_partial_outputs(self) -> None:
        """删除残留的暂存目录"""
        if not self.output_dir.exists():
            return
        for staging in self.output_dir.glob(f"{STAGING_PREFIX}*"):
            shutil.rmtree(staging, ignore_errors=True)
            self.logger.debug(f"已删除部分输出: {staging}")

    def write_error_report(self, info: ErrorInfo) -> Optional[Path]:
        path = self.output_dir / ERROR_REPORT_FILE
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(info.to_report(), indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                            encoding="utf-8")
        except OSError as e:
            self.logger.error(f"无法写入错误报告 {path}: {e}")
            return None
        return path
