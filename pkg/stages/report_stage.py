# -*- coding: utf-8 -*-
"""
输出阶段

把评估产物写入暂存目录，生成运行清单，成功后一次性移动到输出目录。
"""

from typing import Dict

from core.__version__ import __version__
from core.pipeline import BaseStage, RunContext
from core.state_manager import RunStage, RunStateManager
from models.results import ReportBundle
from services import report_service
from services.report_service import StagedOutput


class ReportStage(BaseStage):
    """输出阶段"""

    requires = ("annotations", "profiles", "test")

    def __init__(self, state_manager: RunStateManager, annotations_only: bool = False):
        """
        初始化输出阶段

        Args:
            state_manager: 运行状态管理器
            annotations_only: 只输出标注与基线（annotate 命令）
        """
        super().__init__("report", RunStage.REPORT, state_manager)
        self.annotations_only = annotations_only

    def process(self, context: RunContext) -> None:
        config = context.config
        output = StagedOutput(config.output_dir)
        try:
            files, omitted = self._emit(context, output)
            manifest = report_service.build_manifest(
                command=context.get("command"),
                version=__version__,
                config=config.echo(),
                inputs=context.get("inputs"),
                warnings=self.state_manager.warnings,
                exclusions=self.state_manager.exclusions,
                totals=self.state_manager.totals,
                files=files,
                omitted=omitted)
            report_service.write_json(manifest, output.path(report_service.MANIFEST_FILE))
            committed = output.commit()
        except BaseException:
            output.discard()
            raise

        bundle = ReportBundle(output_dir=str(config.output_dir),
                              files={name: str(path) for name, path in committed.items()},
                              omitted=omitted,
                              manifest=manifest)
        context.put("bundle", bundle)
        self.logger.info(f"输出完成: {config.output_dir}, 文件 {len(committed)} 个, 省略 {len(omitted)} 个")

    def _emit(self, context: RunContext, output: StagedOutput):
        config = context.config
        files: Dict[str, object] = {}
        omitted: Dict[str, str] = {}

        files.update(report_service.export_annotations(context.get("annotations"), output))
        if config.export_baseline:
            files.update(report_service.export_baseline(context.get("profiles"), context.get("test"),
                                                         context.get("annotations"), output))
        else:
            omitted[report_service.BASELINE_FORECASTS_FILE] = "export_baseline 已关闭"
            omitted[report_service.BASELINE_SCORES_FILE] = "export_baseline 已关闭"

        if self.annotations_only:
            return files, omitted

        summary = context.get("summary")
        written, skipped = report_service.emit_tables(context.get("scores"),
                                                      summary,
                                                      context.get("wdl"),
                                                      output,
                                                      metric=config.metric,
                                                      display_scale=config.smape_display_scale,
                                                      top=context.get("top_models"))
        files.update(written)
        omitted.update(skipped)

        files[report_service.RADAR_FILE] = report_service.emit_radar_svg(
            summary, output.path(report_service.RADAR_FILE))
        files[report_service.HORIZON_FILE] = report_service.export_horizon_profile(
            context.get("horizon_profile"), output)

        if config.export_losses:
            files[report_service.LOSSES_FILE] = report_service.export_losses(
                context.get("loss_table"), output.path(report_service.LOSSES_FILE))
        else:
            omitted[report_service.LOSSES_FILE] = "export_losses 已关闭"
        return files, omitted
