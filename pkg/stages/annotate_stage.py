# -*- coding: utf-8 -*-
"""
标注阶段

为序列与留出观测标注评估条件。
"""

from core.pipeline import BaseStage, RunContext
from core.state_manager import RunStage, RunStateManager
from services.aspects_service import annotate


class AnnotateStage(BaseStage):
    """条件标注阶段"""

    requires = ("train", "test", "profiles")

    def __init__(self, state_manager: RunStateManager):
        super().__init__("annotate", RunStage.ANNOTATE, state_manager)

    def process(self, context: RunContext) -> None:
        config = context.config
        annotations = annotate(context.get("train"),
                               context.get("test"),
                               context.get("profiles"),
                               seasonality_threshold=config.seasonality_threshold,
                               kpss_significance=config.kpss_significance,
                               hardness_percentile=config.hardness_percentile,
                               mapper=self.map_series)
        context.put("annotations", annotations)
        self.state_manager.record_exclusions(annotations.exclusions)
        self.state_manager.record_totals("annotations", annotations.totals())
