# -*- coding: utf-8 -*-
"""
排名阶段
"""

from core.pipeline import BaseStage, RunContext
from core.state_manager import RunStage, RunStateManager
from services.aggregation_service import rank_models, top_models


class RankStage(BaseStage):
    """跨维度排名阶段"""

    requires = ("scores",)

    def __init__(self, state_manager: RunStateManager):
        super().__init__("rank", RunStage.RANK, state_manager)

    def process(self, context: RunContext) -> None:
        config = context.config
        summary = rank_models(context.get("scores"), config.radar_axes)
        context.put("summary", summary)
        top = top_models(summary, config.top_k)
        context.put("top_models", top)
        self.logger.info(f"排名完成: {summary}, 领先模型: {top}")
