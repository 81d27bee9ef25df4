# -*- coding: utf-8 -*-
"""
基线阶段

为每条序列拟合季节朴素基线与预测区间；按配置把基线作为一个模型加入评估。
"""

from core.pipeline import BaseStage, RunContext
from core.state_manager import RunStage, RunStateManager
from services.baseline_service import (baseline_forecast_rows, build_profiles,
                                       check_baseline_name)
from services.data_service import align


class BaselineStage(BaseStage):
    """季节朴素基线阶段"""

    requires = ("train", "test")

    def __init__(self, state_manager: RunStateManager):
        super().__init__("baseline", RunStage.BASELINE, state_manager)

    def process(self, context: RunContext) -> None:
        config = context.config
        train = context.get("train")
        test = context.get("test")
        with_baseline = config.include_baseline_model and context.has("eval_frame")
        if with_baseline:
            check_baseline_name(context.get("forecasts").models)

        profiles = build_profiles(train, test, config.anomaly_level, mapper=self.map_series,
                                  strict=config.strict_ingestion)
        context.put("profiles", profiles)

        if with_baseline:
            frame = context.get("eval_frame")
            covered = set(frame.series_ids)
            forecasts = context.get("forecasts")
            rows = baseline_forecast_rows({uid: p for uid, p in profiles.items() if uid in covered},
                                          test, forecasts.models)
            forecasts = forecasts.with_rows(rows)
            context.put("forecasts", forecasts)
            context.put("eval_frame", align(test, forecasts, train))
            self.logger.info(f"已加入基线模型, 评估模型: {forecasts.models}")
