# -*- coding: utf-8 -*-
"""
评估结果数据模型

定义损失表、基线画像、条件标注、维度得分、雷达汇总等结构。
"""

import enum
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd


class Metric(enum.Enum):
    """评估指标"""
    SMAPE = "smape"    # 0-200 百分比刻度
    MASE = "mase"

    @classmethod
    def parse(cls, value: "str | Metric") -> "Metric":
        if isinstance(value, Metric):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"不支持的指标: {value}，可选值: {[m.value for m in cls]}") from None


class HorizonClass(enum.Enum):
    """预测步所属的区段"""
    FIRST = "First"
    MIDDLE = "Middle"
    LAST = "Last"

    @classmethod
    def of(cls, step: int, horizon: int) -> "HorizonClass":
        if step == 1:
            return cls.FIRST
        if step == horizon:
            return cls.LAST
        return cls.MIDDLE


class Dimension(str, enum.Enum):
    """内置评估维度；频率维度以频率标签（Monthly/Quarterly）命名"""
    OVERALL = "Overall"
    EXPECTED_SHORTFALL = "ExpectedShortfall"
    STATIONARY = "Stationary"
    NON_STATIONARY = "NonStationary"
    SEASONAL = "Seasonal"
    NON_SEASONAL = "NonSeasonal"
    ANOMALIES = "Anomalies"
    NON_ANOMALIES = "NonAnomalies"
    HARD = "Hard"
    HARD_EXPECTED_SHORTFALL = "HardExpectedShortfall"
    HORIZON_FIRST = "HorizonFirst"
    HORIZON_LAST = "HorizonLast"


# 默认计分维度（频率维度总是追加）
DEFAULT_DIMENSIONS: List[str] = [
    d.value for d in Dimension if d is not Dimension.HARD_EXPECTED_SHORTFALL
]

# 默认雷达轴：总体、期望损失、平稳性、季节性、异常、难度、预测步
DEFAULT_RADAR_AXES: List[str] = [
    Dimension.OVERALL.value,
    Dimension.EXPECTED_SHORTFALL.value,
    Dimension.STATIONARY.value,
    Dimension.SEASONAL.value,
    Dimension.ANOMALIES.value,
    Dimension.HARD.value,
    Dimension.HORIZON_LAST.value,
]

LOSS_COLUMNS = ["model", "unique_id", "horizon", "loss"]


@dataclass(frozen=True, eq=False)
class LossTable:
    """每个模型的序列级与观测级损失"""
    metric: Metric
    series_losses: pd.DataFrame     # model, unique_id, loss
    point_losses: pd.DataFrame      # model, unique_id, horizon, loss
    # 被排除的序列（未定义的指标值），每项 {unique_id, model, reason}
    exclusions: Tuple[Dict[str, str], ...] = ()

    def __repr__(self):
        return (f"<LossTable(metric='{self.metric.value}', "
                f"series_rows={len(self.series_losses)}, "
                f"point_rows={len(self.point_losses)}, "
                f"exclusions={len(self.exclusions)})>")

    @property
    def models(self) -> List[str]:
        return sorted(self.series_losses["model"].unique().tolist())

    def series_losses_for(self, model: str) -> pd.Series:
        """某模型的序列级损失，以 unique_id 为索引"""
        rows = self.series_losses[self.series_losses["model"] == model]
        return rows.set_index("unique_id")["loss"]

    def point_losses_for(self, model: str) -> pd.DataFrame:
        return self.point_losses[self.point_losses["model"] == model]

    def scaled(self, factor: float) -> "LossTable":
        """所有损失乘以同一正数，用于检验排名不变性"""
        series = self.series_losses.assign(loss=self.series_losses["loss"] * factor)
        points = self.point_losses.assign(loss=self.point_losses["loss"] * factor)
        return LossTable(metric=self.metric, series_losses=series,
                         point_losses=points, exclusions=self.exclusions)

    def to_frame(self) -> pd.DataFrame:
        """导出格式 model,unique_id,horizon,loss（序列级行的 horizon 为空）"""
        series = self.series_losses.assign(horizon=pd.NA)[LOSS_COLUMNS]
        points = self.point_losses[LOSS_COLUMNS]
        frame = pd.concat([series, points], ignore_index=True)
        frame["horizon"] = frame["horizon"].astype("Int64")
        return frame.sort_values(["model", "unique_id", "horizon"],
                                 na_position="first", kind="mergesort").reset_index(drop=True)


@dataclass(frozen=True, eq=False)
class BaselineProfile:
    """单条序列的季节朴素基线画像"""
    unique_id: str
    forecast: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sigma: float
    level: float
    smape: Optional[float]
    is_anomaly: np.ndarray

    def __repr__(self):
        return (f"<BaselineProfile(unique_id='{self.unique_id}', sigma={self.sigma:.4g}, "
                f"smape={self.smape}, anomalies={int(self.is_anomaly.sum())})>")

    @property
    def degenerate(self) -> bool:
        """残差标准差为 0 时区间宽度为 0"""
        return self.sigma == 0.0

    @property
    def horizon(self) -> int:
        return len(self.forecast)


@dataclass(frozen=True, eq=False)
class ConditionAnnotations:
    """序列级与观测级条件标注"""
    series: pd.DataFrame
    observations: pd.DataFrame
    # 单项标注失败的记录，每项 {unique_id, condition, reason}
    exclusions: Tuple[Dict[str, str], ...] = ()

    def __repr__(self):
        return (f"<ConditionAnnotations(series={len(self.series)}, "
                f"observations={len(self.observations)})>")

    def series_mask(self, column: str, value: bool = True) -> List[str]:
        """满足某个序列级标志的 unique_id 列表；未定义的值不属于任何一侧"""
        flags = self.series[column]
        selected = flags.notna() & (flags.astype("boolean") == value)
        return self.series.loc[selected.fillna(False).to_numpy(bool), "unique_id"].tolist()

    def totals(self) -> Dict[str, int]:
        """各标志的计数汇总"""
        series = self.series
        obs = self.observations
        horizon_counts = obs["horizon_class"].value_counts()
        return {
            "series": int(len(series)),
            "observations": int(len(obs)),
            "stationary": int((series["is_stationary"] == True).sum()),  # noqa: E712
            "non_stationary": int((series["is_stationary"] == False).sum()),  # noqa: E712
            "stationarity_undefined": int(series["is_stationary"].isna().sum()),
            "seasonal": int((series["is_seasonal"] == True).sum()),  # noqa: E712
            "hard": int(series["is_hard"].sum()),
            "anomalies": int(obs["is_anomaly"].sum()),
            "horizon_first": int(horizon_counts.get(HorizonClass.FIRST.value, 0)),
            "horizon_middle": int(horizon_counts.get(HorizonClass.MIDDLE.value, 0)),
            "horizon_last": int(horizon_counts.get(HorizonClass.LAST.value, 0)),
        }


@dataclass(frozen=True)
class DimensionScore:
    """某模型在某维度上的聚合得分"""
    dimension: str
    model: str
    value: float
    n: int


@dataclass(frozen=True)
class WinDrawLoss:
    """两个模型逐序列比较的胜/平/负比例"""
    model_a: str
    model_b: str
    win: float
    draw: float
    loss: float
    rope: float
    n: int


@dataclass(frozen=True, eq=False)
class RadarSummary:
    """模型 × 维度的排名矩阵（1 为最好）"""
    ranks: pd.DataFrame          # index: model, columns: dimension
    axes: Tuple[str, ...]
    tie_policy: str = "average"

    def __repr__(self):
        return (f"<RadarSummary(models={list(self.ranks.index)}, "
                f"dimensions={list(self.ranks.columns)}, axes={list(self.axes)})>")

    @property
    def models(self) -> List[str]:
        return list(self.ranks.index)

    def axis_ranks(self) -> pd.DataFrame:
        """仅雷达轴上的排名，按轴顺序"""
        return self.ranks[list(self.axes)]

    def to_frame(self) -> pd.DataFrame:
        """长表 model,dimension,rank，按 (dimension, model) 排序"""
        frame = (self.ranks.rename_axis(index="model", columns="dimension")
                 .stack().rename("rank").reset_index())
        return frame.sort_values(["dimension", "model"], kind="mergesort").reset_index(drop=True)


@dataclass
class ReportBundle:
    """一次运行的产出清单"""
    output_dir: str
    files: Dict[str, str] = field(default_factory=dict)
    omitted: Dict[str, str] = field(default_factory=dict)
    manifest: Dict[str, Any] = field(default_factory=dict)
