# -*- coding: utf-8 -*-
"""
基线服务

季节朴素预测及其基于残差的预测区间。基线定义了两个评估条件：
落在区间之外的异常观测，以及基线误差最高的困难序列。
"""

import math
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from core.pipeline import (ComputationError, DegenerateSigmaError,
                           DuplicateForecastError, EmptyInputError,
                           InsampleTooShortError, LengthMismatchError)
from models.results import BaselineProfile
from models.series import FORECAST_COLUMNS, SeriesCollection, TimeSeries
from services.metrics_service import smape
from utils.logger import get_logger

BASELINE_MODEL_NAME = "SeasonalNaive"

logger = get_logger("baseline_service")

Mapper = Callable[[Callable, Iterable], List]


def seasonal_naive_forecast(insample: Sequence[float], season_length: int, horizon: int) -> np.ndarray:
    """
    季节朴素预测：第 h 步取上一个季节同位置的值

    Args:
        insample: 样本内序列
        season_length: 季节周期 m
        horizon: 预测步长 H

    Returns:
        np.ndarray: 长度为 H 的预测
    """
    y = np.asarray(insample, dtype=float)
    if y.size < season_length:
        raise InsampleTooShortError(f"样本内长度 {y.size} 小于季节周期 {season_length}")
    last_season = y[y.size - season_length:]
    steps = np.arange(horizon)
    return last_season[steps % season_length]


def seasonal_naive_residual_sigma(insample: Sequence[float], season_length: int) -> float:
    """
    样本内季节朴素残差 y_i - y_{i-m} 的标准差（样本标准差）

    Raises:
        InsampleTooShortError: 样本内长度小于 2m
    """
    y = np.asarray(insample, dtype=float)
    if y.size < 2 * season_length:
        raise InsampleTooShortError(f"样本内长度 {y.size} 小于 2m={2 * season_length}")
    residuals = pd.Series(y[season_length:] - y[:-season_length])
    if len(residuals) < 2:
        return 0.0
    sigma = float(residuals.std())
    # 浮点噪声下的近零标准差视为 0
    return 0.0 if sigma <= 1e-12 * max(1.0, float(np.abs(y).max())) else sigma


def z_score(level: float) -> float:
    """双侧正态分位数，例如 0.99 -> 2.575829"""
    if not 0.0 < level < 1.0:
        raise ComputationError(f"置信水平必须在 (0, 1) 内: {level}", "InvalidLevel")
    return float(stats.norm.ppf(0.5 + level / 2.0))


def prediction_half_widths(sigma: float, season_length: int, horizon: int, level: float) -> np.ndarray:
    """
    多步半宽 z·σ·sqrt(k+1)，k = floor((h-1)/m)，跨越季节周期时加宽

    Args:
        sigma: 残差标准差
        season_length: 季节周期 m
        horizon: 预测步长 H
        level: 置信水平

    Returns:
        np.ndarray: 每一步的半宽
    """
    steps = np.arange(1, horizon + 1)
    k = np.floor((steps - 1) / season_length)
    return z_score(level) * sigma * np.sqrt(k + 1)


def seasonal_naive_interval(insample: Sequence[float],
                            season_length: int,
                            horizon: int,
                            level: float = 0.99,
                            strict: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """
    季节朴素预测区间

    Args:
        insample: 样本内序列（长度至少 2m）
        season_length: 季节周期 m
        horizon: 预测步长 H
        level: 置信水平
        strict: 为 True 时 σ=0 直接报错，否则返回零宽区间

    Returns:
        Tuple[np.ndarray, np.ndarray]: (lower, upper)
    """
    forecast = seasonal_naive_forecast(insample, season_length, horizon)
    sigma = seasonal_naive_residual_sigma(insample, season_length)
    if sigma == 0.0 and strict:
        raise DegenerateSigmaError("样本内季节朴素残差标准差为 0，区间宽度为 0")
    half = prediction_half_widths(sigma, season_length, horizon, level)
    return forecast - half, forecast + half


def flag_anomalies(test_actuals: Sequence[float],
                   lower: Sequence[float],
                   upper: Sequence[float]) -> np.ndarray:
    """
    严格落在区间之外的观测标记为异常，恰在边界上不算

    Returns:
        np.ndarray: 布尔数组
    """
    y = np.asarray(test_actuals, dtype=float)
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    if not (y.shape == lo.shape == hi.shape):
        raise LengthMismatchError(f"实际值与区间长度不一致: {y.shape}, {lo.shape}, {hi.shape}")
    return (y < lo) | (y > hi)


def build_profile(train: TimeSeries,
                  test: TimeSeries,
                  level: float = 0.99,
                  strict: bool = False) -> BaselineProfile:
    """
    为一条序列构建基线画像，区间只用训练窗口拟合

    Args:
        train: 训练部分
        test: 留出部分
        level: 预测区间置信水平
        strict: 为 True 时 σ=0 抛出 DegenerateSigmaError

    Returns:
        BaselineProfile: 基线画像
    """
    season_length = train.season_length
    horizon = len(test)
    forecast = seasonal_naive_forecast(train.values, season_length, horizon)
    sigma = seasonal_naive_residual_sigma(train.values, season_length)
    lower, upper = seasonal_naive_interval(train.values, season_length, horizon, level, strict=strict)
    return BaselineProfile(unique_id=train.unique_id,
                           forecast=forecast,
                           lower=lower,
                           upper=upper,
                           sigma=sigma,
                           level=level,
                           smape=smape(test.values, forecast),
                           is_anomaly=flag_anomalies(test.values, lower, upper))


def build_profiles(train: SeriesCollection,
                   test: SeriesCollection,
                   level: float = 0.99,
                   mapper: Optional[Mapper] = None,
                   strict: bool = False) -> Dict[str, BaselineProfile]:
    """
    为集合中的每条序列构建基线画像，结果按序列顺序排列

    Args:
        train: 训练集
        test: 测试集
        level: 预测区间置信水平
        mapper: 逐序列执行器
        strict: 为 True 时任一序列 σ=0 即失败

    Returns:
        Dict[str, BaselineProfile]: unique_id -> 画像
    """
    mapper = mapper or (lambda func, items: [func(item) for item in items])
    profiles = mapper(lambda uid: build_profile(train[uid], test[uid], level, strict), train.ids)
    result = {p.unique_id: p for p in profiles}

    degenerate = [p.unique_id for p in profiles if p.degenerate]
    if degenerate:
        logger.warning(f"{len(degenerate)} 条序列的季节朴素残差标准差为 0，区间宽度为 0: "
                       f"{', '.join(degenerate[:5])}")
    anomalies = sum(int(p.is_anomaly.sum()) for p in profiles)
    logger.info(f"基线画像: {len(result)} 条序列, 异常观测 {anomalies} 个, 置信水平 {level}")
    return result


def nearest_rank_percentile(scores: Sequence[float], percentile: float) -> float:
    """最近秩百分位：排序后第 ceil(p·N) 个值"""
    ordered = np.sort(np.asarray(scores, dtype=float))
    # 容忍 p·N 的浮点误差，例如 0.9*10
    rank = max(1, math.ceil(percentile * len(ordered) - 1e-9))
    return float(ordered[min(rank, len(ordered)) - 1])


def hardness_scores(profiles: Mapping[str, BaselineProfile],
                    percentile: float = 0.90) -> Dict[str, Dict[str, object]]:
    """
    基线 SMAPE 严格超过最近秩 P90 的序列为困难序列

    Args:
        profiles: 基线画像
        percentile: 百分位（0-1）

    Returns:
        Dict[str, Dict]: unique_id -> {score, is_hard}
    """
    if not 0.0 < percentile <= 1.0:
        raise ComputationError(f"百分位必须在 (0, 1] 内: {percentile}", "InvalidPercentile")
    defined = {uid: p.smape for uid, p in profiles.items()
               if p.smape is not None and np.isfinite(p.smape)}
    if not defined:
        raise EmptyInputError("没有可用于计算困难度的基线 SMAPE")

    threshold = nearest_rank_percentile(list(defined.values()), percentile)
    result: Dict[str, Dict[str, object]] = {}
    for uid, profile in profiles.items():
        score = defined.get(uid)
        result[uid] = {"score": score, "is_hard": bool(score is not None and score > threshold)}

    hard = sum(1 for v in result.values() if v["is_hard"])
    logger.info(f"困难序列阈值 P{percentile * 100:g} = {threshold:.6g}, 困难序列 {hard}/{len(result)} 条")
    return result


def check_baseline_name(existing_models: Iterable[str]) -> None:
    """用户预测中已有 SeasonalNaive 模型时无法再加入基线模型"""
    if BASELINE_MODEL_NAME in set(existing_models):
        raise DuplicateForecastError(f"预测文件中已有名为 {BASELINE_MODEL_NAME} 的模型，无法再加入基线模型")


def baseline_forecast_rows(profiles: Mapping[str, BaselineProfile],
                           test: SeriesCollection,
                           existing_models: Iterable[str] = ()) -> pd.DataFrame:
    """
    把基线预测转换为预测集合的行，模型名为 SeasonalNaive

    Raises:
        DuplicateForecastError: 用户预测中已有同名模型
    """
    check_baseline_name(existing_models)
    frames = [pd.DataFrame({"unique_id": uid,
                            "ds": test[uid].timestamps,
                            "model": BASELINE_MODEL_NAME,
                            "y_hat": profile.forecast})
              for uid, profile in profiles.items()]
    return pd.concat(frames, ignore_index=True)[FORECAST_COLUMNS]
