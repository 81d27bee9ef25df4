# -*- coding: utf-8 -*-
"""
损失阶段

计算每个 (模型, 序列) 的序列级与逐点损失。
"""

from core.pipeline import BaseStage, RunContext
from core.state_manager import RunStage, RunStateManager
from services.metrics_service import build_loss_table


class LossStage(BaseStage):
    """损失计算阶段"""

    requires = ("eval_frame",)

    def __init__(self, state_manager: RunStateManager):
        super().__init__("losses", RunStage.LOSSES, state_manager)

    def process(self, context: RunContext) -> None:
        table = build_loss_table(context.get("eval_frame"), context.config.metric, mapper=self.map_series)
        context.put("loss_table", table)
        self.state_manager.record_exclusions(table.exclusions)
