#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
radar-eval 预测评估引擎

按评估条件（平稳性、季节性、异常、预测步、难度、频率）切片计算预测精度，
输出得分表、排名表、胜/平/负表与排名雷达图。
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from config.config_manager import ConfigManager
from core.__version__ import __description__, get_version
from core.error_handler import ErrorHandler, ExitCode
from core.pipeline import (BaseStage, ConfigValidationError, PipelineManager,
                           RunContext)
from core.state_manager import RunStateManager
from models.results import ReportBundle
from services.demo_service import generate_demo
from stages.aggregate_stage import AggregateStage
from stages.annotate_stage import AnnotateStage
from stages.baseline_stage import BaselineStage
from stages.ingest_stage import IngestStage
from stages.loss_stage import LossStage
from stages.rank_stage import RankStage
from stages.report_stage import ReportStage
from stages.split_stage import SplitStage
from utils.logger import get_logger, setup_logger

COMMANDS = ("run", "annotate", "validate")


class RadarEvaluator:
    """评估引擎主类"""

    def __init__(self,
                 config_path: str,
                 command: str = "run",
                 overrides: Optional[Dict[str, Any]] = None,
                 debug_mode: bool = False,
                 configure_logging: bool = True):
        """
        初始化评估引擎

        Args:
            config_path: 配置文件路径
            command: 子命令 run / annotate / validate
            overrides: 命令行覆盖项
            debug_mode: 调试模式，单线程执行并输出 DEBUG 日志
            configure_logging: 是否按配置设置日志

        Raises:
            ConfigValidationError: 配置不合法
        """
        if command not in COMMANDS:
            raise ValueError(f"未知的命令: {command}")
        overrides = dict(overrides or {})
        if debug_mode:
            overrides["workers"] = 1
            overrides["log_level"] = "DEBUG"

        self.command = command
        self.config_manager = ConfigManager(config_path, overrides,
                                            require_forecasts=command != "annotate")
        self.config = self.config_manager.run_config
        self.debug_mode = debug_mode

        if configure_logging:
            self._setup_logging()
        self.logger = get_logger("main")
        self.logger.info(f"radar-eval v{get_version()} {command}: {config_path}")

        self.state_manager = RunStateManager()
        self.pipeline = PipelineManager(self.state_manager, self.config.max_workers)
        for stage in self._build_stages():
            self.pipeline.register_stage(stage)

    def _setup_logging(self):
        """设置日志"""
        level = getattr(logging, self.config.log_level, logging.INFO)
        setup_logger(level, self.config.log_file, console=self.config.log_console)

    def _build_stages(self) -> List[BaseStage]:
        """按命令组装处理阶段"""
        state = self.state_manager
        if self.command == "validate":
            return [IngestStage(state), SplitStage(state)]
        if self.command == "annotate":
            return [IngestStage(state, with_forecasts=False),
                    SplitStage(state, with_alignment=False),
                    BaselineStage(state),
                    AnnotateStage(state),
                    ReportStage(state, annotations_only=True)]
        return [IngestStage(state),
                SplitStage(state),
                BaselineStage(state),
                AnnotateStage(state),
                LossStage(state),
                AggregateStage(state),
                RankStage(state),
                ReportStage(state)]

    def execute(self) -> RunContext:
        """
        执行命令

        Returns:
            RunContext: 执行后的上下文

        Raises:
            EvaluationError: 任一阶段失败
        """
        context = RunContext(config=self.config)
        context.put("command", self.command)
        context.put("inputs", self.config_manager.get_input_paths())

        self.state_manager.attach()
        try:
            self.pipeline.run(context)
        finally:
            self.state_manager.detach()
        return context

    def run(self) -> int:
        """
        执行命令并处理错误

        Returns:
            int: 退出码
        """
        try:
            context = self.execute()
        except Exception as e:
            info = ErrorHandler(self.config.output_dir).handle_error(e, self.command)
            self.logger.debug(f"运行状态: {self.pipeline.get_status()}")
            return info.exit_code

        status = self.pipeline.get_status()
        if self.command == "validate":
            self.logger.info("配置与输入校验通过")
        else:
            bundle: ReportBundle = context.get("bundle")
            warnings = status["run"]["warnings"]
            self.logger.info(f"完成: {len(bundle.files)} 个文件写入 {bundle.output_dir}, 警告 {warnings} 条")
        return ExitCode.SUCCESS.value


def _add_config_arguments(parser: argparse.ArgumentParser, with_overrides: bool) -> None:
    parser.add_argument("--config", "-c", required=True, help="运行配置文件路径（YAML 或 JSON）")
    parser.add_argument("--out", help="覆盖输出目录")
    parser.add_argument("--workers", type=int, help="覆盖逐序列计算线程数")
    if with_overrides:
        parser.add_argument("--alpha", type=float, help="覆盖期望损失尾部比例")
        parser.add_argument("--rope", type=float, help="覆盖实际等价区间（百分比）")
        parser.add_argument("--metric", choices=["smape", "mase"], help="覆盖评估指标")
        parser.add_argument("--reference-model", dest="reference_model", help="覆盖胜/平/负的参考模型")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radar-eval",
                                     description=__description__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {get_version()}")
    parser.add_argument("--debug", action="store_true", help="调试模式：单线程执行并输出 DEBUG 日志")
    parser.add_argument("--log-level", dest="log_level",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"], help="覆盖日志级别")

    subparsers = parser.add_subparsers(dest="command", required=True)
    _add_config_arguments(subparsers.add_parser("run", help="执行完整评估"), with_overrides=True)
    _add_config_arguments(subparsers.add_parser("annotate", help="只输出条件标注与基线"), with_overrides=False)
    _add_config_arguments(subparsers.add_parser("validate", help="只校验配置与输入"), with_overrides=True)

    demo = subparsers.add_parser("demo", help="生成内置演示数据与配置")
    demo.add_argument("--out", required=True, help="演示数据目录")
    demo.add_argument("--seed", type=int, default=42, help="随机种子")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """命令行入口"""
    args = build_parser().parse_args(argv)

    if args.command == "demo":
        setup_logger(logging.DEBUG if args.debug else logging.INFO)
        written = generate_demo(args.out, args.seed)
        print(written["config.yaml"])
        return ExitCode.SUCCESS.value

    overrides = {key: getattr(args, key, None)
                 for key in ("alpha", "rope", "metric", "reference_model", "out", "workers", "log_level")}
    try:
        app = RadarEvaluator(args.config, args.command, overrides, debug_mode=args.debug)
    except ConfigValidationError as e:
        setup_logger(logging.INFO)
        return ErrorHandler(args.out).handle_error(e, args.command).exit_code
    return app.run()


if __name__ == "__main__":
    sys.exit(main())
