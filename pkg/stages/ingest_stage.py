# -*- coding: utf-8 -*-
"""
读取阶段

读取实际值与预测值文件，完成文件级与序列级校验。
"""

from core.pipeline import BaseStage, RunContext
from core.state_manager import RunStage, RunStateManager
from services.data_service import load_actuals_many, load_forecasts


class IngestStage(BaseStage):
    """读取处理阶段"""

    def __init__(self, state_manager: RunStateManager, with_forecasts: bool = True):
        """
        初始化读取阶段

        Args:
            state_manager: 运行状态管理器
            with_forecasts: 是否读取预测值（annotate 命令只需要实际值）
        """
        super().__init__("ingest", RunStage.INGEST, state_manager)
        self.with_forecasts = with_forecasts

    def process(self, context: RunContext) -> None:
        config = context.config
        entries = [{"path": a.path, "frequency": a.frequency, "dataset": a.dataset}
                   for a in config.actuals]
        collection = load_actuals_many(entries, strict=config.strict_ingestion)
        context.put("collection", collection)

        if collection.rejected:
            self.state_manager.record_exclusions(
                {"condition": "ingestion", "unique_id": uid, "model": "*", "reason": reason}
                for uid, reason in collection.rejected.items())

        if self.with_forecasts:
            context.put("forecasts", load_forecasts(list(config.forecasts), collection))
