# -*- coding: utf-8 -*-
"""
切分阶段

留出每条序列的最后 H 个观测，并把预测值与测试集对齐。
"""

from core.pipeline import BaseStage, RunContext
from core.state_manager import RunStage, RunStateManager
from services.data_service import align, split_holdout


class SplitStage(BaseStage):
    """留出切分与对齐阶段"""

    requires = ("collection",)

    def __init__(self, state_manager: RunStateManager, with_alignment: bool = True):
        super().__init__("split", RunStage.SPLIT, state_manager)
        self.with_alignment = with_alignment

    def process(self, context: RunContext) -> None:
        train, test = split_holdout(context.get("collection"))
        context.put("train", train)
        context.put("test", test)

        if self.with_alignment:
            frame = align(test, context.get("forecasts"), train)
            context.put("eval_frame", frame)
            self.logger.info(f"评估表: {frame}")
