# -*- coding: utf-8 -*-
"""
聚合服务

实现三种聚合方式（均值、期望损失、带实际等价区间的胜/平/负），
条件损失，以及跨维度的模型排名。所有函数都是输入不可变的纯函数。
"""

import math
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from core.pipeline import (AlphaTooSmallError, ComputationError,
                           EmptyConditionError, EmptyInputError,
                           IncompleteScoresError, SeriesSetMismatchError)
from models.results import (ConditionAnnotations, Dimension, DimensionScore,
                            HorizonClass, LossTable, RadarSummary, WinDrawLoss)
from models.series import Frequency
from utils.logger import get_logger

logger = get_logger("aggregation_service")

LossesLike = Union[pd.Series, Mapping[str, float], Sequence[float]]

# 序列级条件维度 -> (标注列, 取值)
SERIES_CONDITIONS: Dict[str, Tuple[str, bool]] = {
    Dimension.STATIONARY.value: ("is_stationary", True),
    Dimension.NON_STATIONARY.value: ("is_stationary", False),
    Dimension.SEASONAL.value: ("is_seasonal", True),
    Dimension.NON_SEASONAL.value: ("is_seasonal", False),
    Dimension.HARD.value: ("is_hard", True),
}

# 观测级条件维度 -> (标注列, 取值)
OBSERVATION_CONDITIONS: Dict[str, Tuple[str, object]] = {
    Dimension.ANOMALIES.value: ("is_anomaly", True),
    Dimension.NON_ANOMALIES.value: ("is_anomaly", False),
    Dimension.HORIZON_FIRST.value: ("horizon_class", HorizonClass.FIRST.value),
    Dimension.HORIZON_LAST.value: ("horizon_class", HorizonClass.LAST.value),
}

SCORE_COLUMNS = ["model", "dimension", "value", "n"]
WDL_COLUMNS = ["model_a", "model_b", "win", "draw", "loss", "rope"]
FREQUENCY_LABELS = frozenset(f.label for f in Frequency)


def _defined(losses: LossesLike) -> np.ndarray:
    values = np.asarray(pd.Series(losses, dtype=float).to_numpy(), dtype=float)
    return values[np.isfinite(values)]


def mean_loss(losses: LossesLike) -> Tuple[float, int]:
    """
    已定义损失的算术平均

    Args:
        losses: 序列级损失，未定义的值为 NaN/None

    Returns:
        Tuple[float, int]: (均值, 参与计算的序列数)

    Raises:
        EmptyInputError: 没有已定义的损失
    """
    values = _defined(losses)
    if values.size == 0:
        raise EmptyInputError("没有已定义的损失值")
    return float(np.mean(values)), int(values.size)


def tail_count(alpha: float, n: int) -> int:
    """floor(α·n)，容忍 α·n 的浮点误差"""
    return int(math.floor(alpha * n + 1e-9))


def expected_shortfall(losses: LossesLike, alpha: float = 0.10) -> Tuple[float, int]:
    """
    期望损失：最大的 floor(α·n) 个损失的均值

    Args:
        losses: 序列级损失
        alpha: 尾部比例 (0, 1]

    Returns:
        Tuple[float, int]: (尾部均值, 尾部序列数)

    Raises:
        AlphaTooSmallError: floor(α·n) = 0
    """
    if not 0.0 < alpha <= 1.0:
        raise AlphaTooSmallError(f"alpha 必须在 (0, 1] 内: {alpha}")
    values = _defined(losses)
    if values.size == 0:
        raise EmptyInputError("没有已定义的损失值")
    k = tail_count(alpha, values.size)
    if k < 1:
        raise AlphaTooSmallError(f"floor(alpha·n) = floor({alpha}·{values.size}) = 0")
    tail = np.sort(values)[::-1][:k]
    return float(np.mean(tail)), k


def symmetric_difference(loss_a: float, loss_b: float) -> float:
    """对称百分比差 200·|a−b|/(a+b)，两者同为 0 时为 0"""
    total = loss_a + loss_b
    if total == 0:
        return 0.0
    return 200.0 * abs(loss_a - loss_b) / total


def win_draw_loss(losses_a: Mapping[str, float],
                  losses_b: Mapping[str, float],
                  rope: float = 10.0,
                  model_a: str = "A",
                  model_b: str = "B") -> WinDrawLoss:
    """
    逐序列比较两个模型

    对称百分比差不超过 rope 记为平局（精确相等在 rope=0 时也是平局），
    否则损失较低的一方获胜。

    Args:
        losses_a: 模型 A 的序列级损失（unique_id -> 损失）
        losses_b: 模型 B 的序列级损失
        rope: 实际等价区间（百分比）
        model_a: 模型 A 名称
        model_b: 模型 B 名称

    Returns:
        WinDrawLoss: 从 A 的角度统计的胜/平/负比例，三者之和恰为 1
    """
    if rope < 0:
        raise ComputationError(f"rope 不能为负: {rope}", "InvalidRope")
    a = pd.Series(losses_a, dtype=float)
    b = pd.Series(losses_b, dtype=float)
    if set(a.index) != set(b.index):
        only_a = sorted(set(a.index) - set(b.index))
        only_b = sorted(set(b.index) - set(a.index))
        raise SeriesSetMismatchError(
            f"{model_a} 与 {model_b} 的序列集合不一致: 仅 A {only_a[:5]}, 仅 B {only_b[:5]}")
    if a.empty:
        raise EmptyInputError(f"{model_a} 与 {model_b} 没有可比较的序列")

    b = b.reindex(a.index)
    wins = draws = losses = 0
    for la, lb in zip(a.to_numpy(), b.to_numpy()):
        if symmetric_difference(la, lb) <= rope:
            draws += 1
        elif la < lb:
            wins += 1
        else:
            losses += 1

    n = wins + draws + losses
    win = wins / n
    if losses == 0:
        draw = 1.0 - win
        loss = 0.0
    else:
        draw = draws / n
        loss = 1.0 - (win + draw)
    return WinDrawLoss(model_a=model_a, model_b=model_b, win=win, draw=draw,
                       loss=loss, rope=float(rope), n=n)


def conditional_mean_series(series_losses: Mapping[str, float],
                            mask: Iterable[str]) -> Tuple[float, int]:
    """
    满足序列级条件的序列上的平均损失

    Args:
        series_losses: unique_id -> 损失
        mask: 满足条件的 unique_id

    Returns:
        Tuple[float, int]: (均值, 序列数)

    Raises:
        EmptyConditionError: 条件子集内没有已定义的损失
    """
    losses = pd.Series(series_losses, dtype=float)
    selected = losses[losses.index.isin(list(mask))]
    values = _defined(selected)
    if values.size == 0:
        raise EmptyConditionError("条件子集内没有已定义损失的序列")
    return float(np.mean(values)), int(values.size)


def conditional_mean_obs(point_losses: pd.DataFrame, mask: pd.Series) -> Tuple[float, int]:
    """
    满足观测级条件的观测上的合并平均损失（跨序列合并，不先按序列平均）

    Args:
        point_losses: 含 loss 列的逐点损失
        mask: 与 point_losses 对齐的布尔序列

    Returns:
        Tuple[float, int]: (均值, 观测数)
    """
    mask = pd.Series(mask, index=point_losses.index).fillna(False).astype(bool)
    values = _defined(point_losses.loc[mask, "loss"])
    if values.size == 0:
        raise EmptyConditionError("条件子集内没有观测")
    return float(np.mean(values)), int(values.size)


def _observation_mask(point_losses: pd.DataFrame,
                      observations: pd.DataFrame,
                      column: str,
                      value: object) -> pd.Series:
    """把观测级标注按 (unique_id, horizon) 对齐到逐点损失"""
    flags = observations.set_index(["unique_id", "horizon"])[column]
    keys = pd.MultiIndex.from_arrays([point_losses["unique_id"], point_losses["horizon"].astype(int)])
    aligned = flags.reindex(keys).to_numpy()
    return pd.Series(aligned == value, index=point_losses.index)


def _score_dimension(dimension: str,
                     model: str,
                     loss_table: LossTable,
                     annotations: ConditionAnnotations,
                     alpha: float) -> Tuple[float, int]:
    series_losses = loss_table.series_losses_for(model)
    if dimension == Dimension.OVERALL.value:
        return mean_loss(series_losses)
    if dimension == Dimension.EXPECTED_SHORTFALL.value:
        return expected_shortfall(series_losses, alpha)
    if dimension == Dimension.HARD_EXPECTED_SHORTFALL.value:
        hard = annotations.series_mask("is_hard", True)
        subset = series_losses[series_losses.index.isin(hard)]
        if subset.empty:
            raise EmptyConditionError("没有困难序列")
        return expected_shortfall(subset, alpha)
    if dimension in SERIES_CONDITIONS:
        column, value = SERIES_CONDITIONS[dimension]
        return conditional_mean_series(series_losses, annotations.series_mask(column, value))
    if dimension in OBSERVATION_CONDITIONS:
        column, value = OBSERVATION_CONDITIONS[dimension]
        points = loss_table.point_losses_for(model)
        return conditional_mean_obs(points, _observation_mask(points, annotations.observations, column, value))
    if dimension in FREQUENCY_LABELS:
        series = annotations.series
        ids = series.loc[series["frequency"] == dimension, "unique_id"].tolist()
        if not ids:
            raise EmptyConditionError(f"数据中没有 {dimension} 序列")
        return conditional_mean_series(series_losses, ids)
    raise ComputationError(f"未知的评估维度: {dimension}", "UnknownDimension")


def build_dimension_scores(loss_table: LossTable,
                           annotations: ConditionAnnotations,
                           dimensions: Sequence[str],
                           alpha: float = 0.10) -> List[DimensionScore]:
    """
    计算每个模型在每个维度上的得分

    频率维度（Monthly/Quarterly）按数据中出现的频率自动追加。某维度对任一模型
    为空或无法计算时，该维度整体丢弃并记录警告。

    Args:
        loss_table: 损失表
        annotations: 条件标注
        dimensions: 需要计分的维度名称
        alpha: 期望损失的尾部比例

    Returns:
        List[DimensionScore]: 按 (dimension, model) 排序的得分
    """
    annotated = set(annotations.series["unique_id"])
    scored = set(loss_table.series_losses["unique_id"])
    if not scored <= annotated:
        raise ComputationError(f"以下序列有损失但没有标注: {sorted(scored - annotated)[:5]}",
                               "MissingAnnotation")

    frequencies = sorted(annotations.series["frequency"].unique().tolist())
    requested = list(dict.fromkeys(list(dimensions) + frequencies))

    scores: List[DimensionScore] = []
    for dimension in requested:
        try:
            values = [(model, _score_dimension(dimension, model, loss_table, annotations, alpha))
                      for model in loss_table.models]
        except (EmptyConditionError, AlphaTooSmallError) as e:
            logger.warning(f"维度 {dimension} 已丢弃: {e.error_type} - {e.message}")
            continue
        scores.extend(DimensionScore(dimension=dimension, model=model, value=value, n=n)
                      for model, (value, n) in values)

    scores.sort(key=lambda s: (s.dimension, s.model))
    logger.info(f"维度得分: {len({s.dimension for s in scores})} 个维度 × {len(loss_table.models)} 个模型")
    return scores


def scores_frame(scores: Sequence[DimensionScore]) -> pd.DataFrame:
    frame = pd.DataFrame([(s.model, s.dimension, s.value, s.n) for s in scores], columns=SCORE_COLUMNS)
    return frame.sort_values(["dimension", "model"], kind="mergesort").reset_index(drop=True)


def rank_models(scores: Sequence[DimensionScore],
                axes: Optional[Sequence[str]] = None) -> RadarSummary:
    """
    在每个维度内按损失升序排名（1 为最好），并列取平均名次

    Args:
        scores: 维度得分
        axes: 雷达轴；不在得分中的轴会被跳过并记录警告

    Returns:
        RadarSummary: 排名矩阵

    Raises:
        IncompleteScoresError: 某模型缺少某维度的得分
    """
    if not scores:
        raise IncompleteScoresError("没有任何维度得分")
    frame = scores_frame(scores)
    matrix = frame.pivot(index="model", columns="dimension", values="value")
    missing = matrix.isna()
    if missing.to_numpy().any():
        pairs = [key for key, absent in missing.stack().items() if absent]
        raise IncompleteScoresError(f"以下 (模型, 维度) 缺少得分: {pairs[:5]}")

    ranks = matrix.rank(axis=0, method="average", ascending=True)
    ranks = ranks.sort_index().sort_index(axis=1)

    axes = list(axes) if axes is not None else list(ranks.columns)
    skipped = [a for a in axes if a not in ranks.columns]
    if skipped:
        logger.warning(f"以下雷达轴没有得分，已从雷达图中移除: {skipped}")
    kept = tuple(a for a in axes if a in ranks.columns)
    return RadarSummary(ranks=ranks, axes=kept, tie_policy="average")


def horizon_profile(loss_table: LossTable) -> pd.DataFrame:
    """每个模型在每个预测步上的合并平均损失 model,horizon,value,n"""
    points = loss_table.point_losses
    grouped = points.groupby(["model", "horizon"], sort=True)["loss"]
    profile = pd.DataFrame({"value": grouped.mean(), "n": grouped.count()}).reset_index()
    profile["horizon"] = profile["horizon"].astype(int)
    return profile[["model", "horizon", "value", "n"]]


def pairwise_win_draw_loss(loss_table: LossTable,
                           reference: str,
                           ropes: Iterable[float]) -> List[WinDrawLoss]:
    """
    参考模型与其他每个模型在每个 rope 下的胜/平/负

    Args:
        loss_table: 损失表
        reference: 参考模型
        ropes: rope 取值

    Returns:
        List[WinDrawLoss]: 按 (对手模型, rope) 排序
    """
    models = loss_table.models
    if reference not in models:
        raise ComputationError(f"参考模型 {reference} 不在评估模型中: {models}", "UnknownModel")
    ropes = sorted({float(r) for r in ropes})
    base = loss_table.series_losses_for(reference)
    results = []
    for other in models:
        if other == reference:
            continue
        losses = loss_table.series_losses_for(other)
        for rope in ropes:
            results.append(win_draw_loss(base, losses, rope, reference, other))
    return results


def wdl_frame(results: Sequence[WinDrawLoss]) -> pd.DataFrame:
    return pd.DataFrame([(r.model_a, r.model_b, r.win, r.draw, r.loss, r.rope) for r in results],
                        columns=WDL_COLUMNS)


def top_models(summary: RadarSummary, k: int = 3) -> List[str]:
    """在至少一个维度上排名前 k 的模型，按平均名次与名称排序"""
    ranks = summary.ranks
    selected = ranks.index[(ranks <= k).any(axis=1)]
    mean_rank = ranks.loc[selected].mean(axis=1)
    return sorted(selected, key=lambda model: (mean_rank[model], model))
