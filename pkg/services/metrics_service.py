# -*- coding: utf-8 -*-
"""
指标服务

计算逐点与逐序列的 SMAPE、MASE，并把评估表汇总为损失表。
"""

from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.pipeline import (ComputationError, EmptyInputError,
                           InsampleTooShortError, LengthMismatchError,
                           ZeroDenominatorError)
from models.results import LossTable, Metric
from models.series import EvalFrame
from utils.logger import get_logger

logger = get_logger("metrics_service")

Mapper = Callable[[Callable, Iterable], List]


def _as_pair(actuals: Sequence[float], forecasts: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    y = np.asarray(actuals, dtype=float)
    y_hat = np.asarray(forecasts, dtype=float)
    if y.shape != y_hat.shape:
        raise LengthMismatchError(f"实际值与预测值长度不一致: {y.shape} != {y_hat.shape}")
    if y.size == 0:
        raise EmptyInputError("实际值与预测值为空")
    return y, y_hat


def smape_points(actuals: Sequence[float], forecasts: Sequence[float]) -> np.ndarray:
    """
    逐点 SMAPE（0-200 百分比刻度）

    实际值与预测值同为 0 时该点误差记为 0。

    Args:
        actuals: 实际值
        forecasts: 预测值

    Returns:
        np.ndarray: 每个点的百分比误差
    """
    y, y_hat = _as_pair(actuals, forecasts)
    numerator = np.abs(y_hat - y)
    denominator = (np.abs(y_hat) + np.abs(y)) / 2.0
    points = np.zeros_like(y)
    defined = denominator > 0
    points[defined] = 100.0 * numerator[defined] / denominator[defined]
    return points


def smape(actuals: Sequence[float], forecasts: Sequence[float]) -> float:
    """逐点 SMAPE 的均值"""
    return float(np.mean(smape_points(actuals, forecasts)))


def mase_scale(insample: Sequence[float], season_length: int) -> float:
    """
    MASE 分母：样本内季节朴素一步误差的平均绝对值

    Raises:
        InsampleTooShortError: 样本内长度不超过 m
        ZeroDenominatorError: 样本内序列按季节恒定
    """
    y = np.asarray(insample, dtype=float)
    if season_length < 1:
        raise ComputationError(f"季节周期必须为正整数: {season_length}", "InvalidSeasonLength")
    if y.size <= season_length:
        raise InsampleTooShortError(f"样本内长度 {y.size} 不超过季节周期 {season_length}")
    scale = float(np.mean(np.abs(y[season_length:] - y[:-season_length])))
    if scale == 0.0:
        raise ZeroDenominatorError("样本内季节差分全为 0，MASE 无定义")
    return scale


def mase(test_actuals: Sequence[float],
         forecasts: Sequence[float],
         insample: Sequence[float],
         season_length: int) -> float:
    """
    平均绝对缩放误差

    Args:
        test_actuals: 测试窗口实际值
        forecasts: 预测值
        insample: 样本内序列
        season_length: 季节周期 m

    Returns:
        float: 测试 MAE / 样本内季节朴素 MAE
    """
    y, y_hat = _as_pair(test_actuals, forecasts)
    scale = mase_scale(insample, season_length)
    return float(np.mean(np.abs(y - y_hat)) / scale)


def build_loss_table(frame: EvalFrame,
                     metric: Metric = Metric.SMAPE,
                     mapper: Optional[Mapper] = None) -> LossTable:
    """
    计算每个 (模型, 序列) 的序列级损失与逐点损失

    MASE 的逐点损失为绝对误差除以该序列固定的缩放分母，使观测级条件均值
    仍处于 MASE 刻度。无定义的序列被记录为排除项，不中断运行。

    Args:
        frame: 评估表
        metric: 指标
        mapper: 逐序列执行器（例如 PipelineManager.map_series），默认顺序执行

    Returns:
        LossTable: 损失表
    """
    if len(frame) == 0:
        raise EmptyInputError("评估表为空")
    metric = Metric.parse(metric)
    mapper = mapper or (lambda func, items: [func(item) for item in items])

    scales: Dict[str, float] = {}
    undefined: Dict[str, str] = {}
    if metric is Metric.MASE:
        if not frame.train:
            raise ComputationError("MASE 需要训练集，评估表缺少训练部分引用", "MissingTrain")

        def scale_of(unique_id: str):
            ts = frame.train[unique_id]
            try:
                return unique_id, mase_scale(ts.values, ts.season_length), None
            except ComputationError as e:
                return unique_id, None, f"{e.error_type}: {e.message}"

        for unique_id, scale, reason in mapper(scale_of, frame.series_ids):
            if reason is None:
                scales[unique_id] = scale
            else:
                undefined[unique_id] = reason

    groups = list(frame.groups())

    def score(item):
        (model, unique_id), group = item
        if unique_id in undefined:
            return None
        y = group["actual"].to_numpy()
        y_hat = group["forecast"].to_numpy()
        if metric is Metric.SMAPE:
            points = smape_points(y, y_hat)
        else:
            points = np.abs(y - y_hat) / scales[unique_id]
        return model, unique_id, group["horizon"].to_numpy(), points

    series_rows = []
    point_frames = []
    for result in mapper(score, groups):
        if result is None:
            continue
        model, unique_id, horizons, points = result
        series_rows.append((model, unique_id, float(np.mean(points))))
        point_frames.append(pd.DataFrame({"model": model, "unique_id": unique_id,
                                          "horizon": horizons.astype(int), "loss": points}))

    # 缩放分母只取决于样本内数据，一条序列的排除对所有模型生效
    exclusions = tuple(
        {"condition": "metric", "unique_id": uid, "model": "*", "reason": undefined[uid]}
        for uid in frame.series_ids if uid in undefined
    )
    if undefined:
        logger.warning(f"{metric.value} 在 {len(undefined)} 条序列上无定义，已从所有聚合中排除: "
                       f"{', '.join(sorted(undefined)[:5])}")

    series_losses = pd.DataFrame(series_rows, columns=["model", "unique_id", "loss"])
    series_losses = series_losses.sort_values(["model", "unique_id"], kind="mergesort").reset_index(drop=True)
    if point_frames:
        point_losses = pd.concat(point_frames, ignore_index=True)
    else:
        point_losses = pd.DataFrame(columns=["model", "unique_id", "horizon", "loss"])
    point_losses = point_losses.sort_values(["model", "unique_id", "horizon"], kind="mergesort").reset_index(drop=True)

    table = LossTable(metric=metric, series_losses=series_losses,
                      point_losses=point_losses, exclusions=exclusions)
    logger.info(f"损失表: {table}")
    return table
