# -*- coding: utf-8 -*-
"""
聚合阶段

计算各维度得分、参考模型的胜/平/负，以及逐预测步损失曲线。
"""

from core.pipeline import BaseStage, RunContext
from core.state_manager import RunStage, RunStateManager
from services.aggregation_service import (build_dimension_scores,
                                          horizon_profile,
                                          pairwise_win_draw_loss)


class AggregateStage(BaseStage):
    """维度聚合阶段"""

    requires = ("loss_table", "annotations")

    def __init__(self, state_manager: RunStateManager):
        super().__init__("aggregate", RunStage.AGGREGATE, state_manager)

    def process(self, context: RunContext) -> None:
        config = context.config
        table = context.get("loss_table")
        scores = build_dimension_scores(table, context.get("annotations"), config.dimensions, config.alpha)
        context.put("scores", scores)
        context.put("horizon_profile", horizon_profile(table))

        wdl = []
        if config.reference_model:
            wdl = pairwise_win_draw_loss(table, config.reference_model, config.ropes)
            self.logger.info(f"胜/平/负: 参考模型 {config.reference_model}, {len(wdl)} 组比较")
        context.put("wdl", wdl)
