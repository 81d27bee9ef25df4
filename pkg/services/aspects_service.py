# -*- coding: utf-8 -*-
"""
条件标注服务

为每条序列标注平稳性（KPSS）、季节性（季节强度）、频率与困难度，
为每个留出观测标注异常与预测步区段。所有序列级检验只使用训练窗口。
"""

import math
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from statsmodels.tsa.seasonal import seasonal_decompose

from core.pipeline import (ComputationError, EvaluationError,
                           SeriesTooShortError, UnsupportedSignificanceError)
from models.results import BaselineProfile, ConditionAnnotations, HorizonClass
from models.series import SeriesCollection, TimeSeries
from services.baseline_service import hardness_scores
from utils.logger import get_logger

# 水平平稳 KPSS 检验的临界值（显著性水平 -> 临界值）
KPSS_CRITICAL_VALUES: Dict[float, float] = {
    0.10: 0.347,
    0.05: 0.463,
    0.025: 0.574,
    0.01: 0.739,
}

KPSS_MIN_LENGTH = 8

SERIES_COLUMNS = ["unique_id", "is_stationary", "kpss_stat", "seasonal_strength",
                  "is_seasonal", "frequency", "is_hard", "dataset"]
OBSERVATION_COLUMNS = ["unique_id", "horizon", "is_anomaly", "horizon_class"]

logger = get_logger("aspects_service")

Mapper = Callable[[Callable, Iterable], List]


def kpss_lags(n: int) -> int:
    """Bartlett 核的截断滞后 floor(4·(n/100)^0.25)"""
    return int(math.floor(4.0 * (n / 100.0) ** 0.25))


def kpss_statistic(values: Sequence[float]) -> float:
    """
    水平平稳 KPSS 统计量

    Args:
        values: 序列数值（长度至少 8）

    Returns:
        float: 统计量；常数序列定义为 0

    Raises:
        SeriesTooShortError: 长度不足
    """
    y = np.asarray(values, dtype=float)
    n = y.size
    if n < KPSS_MIN_LENGTH:
        raise SeriesTooShortError(f"KPSS 检验需要至少 {KPSS_MIN_LENGTH} 个观测，实际 {n}")

    resid = y - y.mean()
    if np.allclose(resid, 0.0, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(y).max()))):
        return 0.0

    eta = float(np.sum(np.cumsum(resid) ** 2)) / (n ** 2)
    lags = min(kpss_lags(n), n - 1)
    long_run = float(np.dot(resid, resid))
    for k in range(1, lags + 1):
        weight = 1.0 - k / (lags + 1.0)
        long_run += 2.0 * weight * float(np.dot(resid[k:], resid[:-k]))
    long_run /= n
    return eta / long_run


def kpss_is_stationary(values: Sequence[float], significance: float = 0.05) -> bool:
    """
    统计量不超过对应临界值时判定为水平平稳

    Raises:
        UnsupportedSignificanceError: 显著性水平不在临界值表中
    """
    critical = critical_value(significance)
    return kpss_statistic(values) <= critical


def critical_value(significance: float) -> float:
    for level, value in KPSS_CRITICAL_VALUES.items():
        if math.isclose(level, float(significance)):
            return value
    raise UnsupportedSignificanceError(
        f"不支持的 KPSS 显著性水平: {significance}，可选值: {sorted(KPSS_CRITICAL_VALUES)}")


def seasonal_strength(values: Sequence[float], season_length: int) -> float:
    """
    基于经典加法分解的季节强度 max(0, 1 - Var(R)/Var(S+R))

    趋势为中心化移动平均（偶数周期使用 2×m 平均），只在趋势有定义的位置计算方差。

    Args:
        values: 序列数值（长度至少 2m）
        season_length: 季节周期 m（至少 2）

    Returns:
        float: [0, 1] 内的季节强度；S+R 方差为 0 时定义为 0
    """
    y = np.asarray(values, dtype=float)
    if season_length < 2:
        raise ComputationError(f"季节周期必须至少为 2: {season_length}", "InvalidSeasonLength")
    if y.size < 2 * season_length:
        raise SeriesTooShortError(f"季节强度需要至少 2m={2 * season_length} 个观测，实际 {y.size}")

    decomposition = seasonal_decompose(y, model="additive", period=season_length)
    trend = np.asarray(decomposition.trend, dtype=float)
    defined = ~np.isnan(trend)
    seasonal = np.asarray(decomposition.seasonal, dtype=float)[defined]
    remainder = np.asarray(decomposition.resid, dtype=float)[defined]

    detrended_var = float(np.var(seasonal + remainder))
    scale = max(1.0, float(np.mean(y ** 2)))
    if detrended_var <= 1e-24 * scale:
        return 0.0
    strength = 1.0 - float(np.var(remainder)) / detrended_var
    return float(min(1.0, max(0.0, strength)))


def is_seasonal(strength: float, threshold: float = 0.6) -> bool:
    """季节强度不低于阈值即为季节性序列（含边界）"""
    return strength >= threshold


def _annotate_series(train: TimeSeries,
                     seasonality_threshold: float,
                     kpss_significance: float) -> Tuple[Dict[str, object], List[Dict[str, str]]]:
    """单条序列的序列级标注；单项失败只影响该项"""
    record: Dict[str, object] = {
        "unique_id": train.unique_id,
        "is_stationary": pd.NA,
        "kpss_stat": np.nan,
        "seasonal_strength": np.nan,
        "is_seasonal": pd.NA,
        "frequency": train.frequency.label,
        "dataset": train.dataset or "",
    }
    failures: List[Dict[str, str]] = []

    try:
        stat = kpss_statistic(train.values)
        record["kpss_stat"] = stat
        record["is_stationary"] = bool(stat <= critical_value(kpss_significance))
    except EvaluationError as e:
        failures.append({"condition": "stationarity", "unique_id": train.unique_id,
                         "model": "*", "reason": f"{e.error_type}: {e.message}"})

    try:
        strength = seasonal_strength(train.values, train.season_length)
        record["seasonal_strength"] = strength
        record["is_seasonal"] = is_seasonal(strength, seasonality_threshold)
    except EvaluationError as e:
        failures.append({"condition": "seasonality", "unique_id": train.unique_id,
                         "model": "*", "reason": f"{e.error_type}: {e.message}"})

    return record, failures


def _annotate_observations(test: TimeSeries, profile: BaselineProfile) -> pd.DataFrame:
    horizon = len(test)
    steps = np.arange(1, horizon + 1)
    return pd.DataFrame({
        "unique_id": test.unique_id,
        "horizon": steps,
        "is_anomaly": np.asarray(profile.is_anomaly, dtype=bool),
        "horizon_class": [HorizonClass.of(int(step), horizon).value for step in steps],
    })


def annotate(train: SeriesCollection,
             test: SeriesCollection,
             profiles: Mapping[str, BaselineProfile],
             seasonality_threshold: float = 0.6,
             kpss_significance: float = 0.05,
             hardness_percentile: float = 0.90,
             mapper: Optional[Mapper] = None) -> ConditionAnnotations:
    """
    标注所有序列与留出观测

    单条序列上某个检验失败时，该序列在对应条件上为未定义，并记录为排除项，
    其余条件照常标注，运行不中断。

    Args:
        train: 训练集
        test: 测试集（留出窗口）
        profiles: 基线画像
        seasonality_threshold: 季节强度阈值
        kpss_significance: KPSS 显著性水平
        hardness_percentile: 困难序列百分位
        mapper: 逐序列执行器

    Returns:
        ConditionAnnotations: 条件标注
    """
    critical_value(kpss_significance)
    mapper = mapper or (lambda func, items: [func(item) for item in items])
    missing = [uid for uid in train.ids if uid not in profiles]
    if missing:
        raise ComputationError(f"以下序列缺少基线画像: {missing[:5]}", "MissingProfile")

    results = mapper(lambda uid: _annotate_series(train[uid], seasonality_threshold, kpss_significance),
                     train.ids)
    records = [record for record, _ in results]
    exclusions: List[Dict[str, str]] = [f for _, failures in results for f in failures]

    try:
        hardness = hardness_scores(profiles, hardness_percentile)
    except EvaluationError as e:
        logger.warning(f"困难度无法计算，所有序列的困难标志为未定义: {e.message}")
        hardness = {}
    for record in records:
        entry = hardness.get(record["unique_id"])
        record["is_hard"] = entry["is_hard"] if entry is not None else pd.NA

    series = pd.DataFrame(records, columns=SERIES_COLUMNS)
    for column in ("is_stationary", "is_seasonal", "is_hard"):
        series[column] = series[column].astype("boolean")

    observations = pd.concat(
        [_annotate_observations(test[uid], profiles[uid]) for uid in train.ids],
        ignore_index=True)[OBSERVATION_COLUMNS]

    for condition in ("stationarity", "seasonality"):
        failed = [e["unique_id"] for e in exclusions if e["condition"] == condition]
        if failed:
            logger.warning(f"{len(failed)} 条序列的{condition}标注失败，仅从该条件中排除: "
                           f"{', '.join(failed[:5])}")

    annotations = ConditionAnnotations(series=series, observations=observations,
                                       exclusions=tuple(exclusions))
    totals = annotations.totals()
    logger.info(f"条件标注: {totals['series']} 条序列, {totals['observations']} 个观测, "
                f"平稳 {totals['stationary']}, 季节性 {totals['seasonal']}, "
                f"困难 {totals['hard']}, 异常观测 {totals['anomalies']}")
    return annotations
