# -*- coding: utf-8 -*-
"""
时间序列数据模型

定义输入侧的数据结构：单条序列、序列集合、预测集合以及评估用的对齐表。
所有结构在构建完成后只读，可在线程间共享。
"""

import enum
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd


class Frequency(enum.Enum):
    """采样频率枚举，携带季节周期 m 与预测步长 H"""
    MONTHLY = "monthly"        # 月度: m=12, H=12
    QUARTERLY = "quarterly"    # 季度: m=4, H=4

    @property
    def season_length(self) -> int:
        return 12 if self is Frequency.MONTHLY else 4

    @property
    def horizon(self) -> int:
        return 12 if self is Frequency.MONTHLY else 4

    @property
    def months_step(self) -> int:
        """相邻观测之间的日历月数"""
        return 1 if self is Frequency.MONTHLY else 3

    @property
    def label(self) -> str:
        return self.value.capitalize()

    @property
    def min_length(self) -> int:
        """一个分解周期加一个留出窗口所需的最短长度 2m + H"""
        return 2 * self.season_length + self.horizon

    @classmethod
    def parse(cls, value: "str | Frequency") -> "Frequency":
        """从配置字符串解析频率，大小写不敏感"""
        if isinstance(value, Frequency):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            valid = [f.value for f in cls]
            raise ValueError(f"不支持的频率: {value}，可选值: {valid}") from None


def _readonly(values: np.ndarray) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """单条单变量时间序列"""
    unique_id: str
    timestamps: pd.DatetimeIndex
    values: np.ndarray
    frequency: Frequency
    source: Optional[str] = None
    dataset: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        object.__setattr__(self, "timestamps", pd.DatetimeIndex(self.timestamps))
        if len(self.timestamps) != len(self.values):
            raise ValueError(
                f"序列 {self.unique_id} 的时间戳与数值长度不一致: "
                f"{len(self.timestamps)} != {len(self.values)}")

    def __len__(self) -> int:
        return len(self.values)

    def __repr__(self):
        return (f"<TimeSeries(unique_id='{self.unique_id}', length={len(self)}, "
                f"frequency='{self.frequency.value}')>")

    @property
    def season_length(self) -> int:
        return self.frequency.season_length

    @property
    def horizon(self) -> int:
        return self.frequency.horizon

    def slice(self, start: Optional[int] = None, stop: Optional[int] = None) -> "TimeSeries":
        """按位置截取，保留元数据"""
        return TimeSeries(unique_id=self.unique_id,
                          timestamps=self.timestamps[start:stop],
                          values=self.values[start:stop],
                          frequency=self.frequency,
                          source=self.source,
                          dataset=self.dataset)

    def equals(self, other: "TimeSeries") -> bool:
        """逐位比较时间戳、数值与频率"""
        return (self.unique_id == other.unique_id
                and self.frequency is other.frequency
                and self.timestamps.equals(other.timestamps)
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True, eq=False)
class SeriesCollection:
    """序列集合，保持输入文件中的首次出现顺序"""
    series: Dict[str, TimeSeries]
    provenance: Tuple[str, ...] = ()
    # 被拒绝的序列及原因（unique_id -> 诊断信息）
    rejected: Dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.series)

    def __iter__(self) -> Iterator[TimeSeries]:
        return iter(self.series.values())

    def __getitem__(self, unique_id: str) -> TimeSeries:
        return self.series[unique_id]

    def __contains__(self, unique_id: str) -> bool:
        return unique_id in self.series

    def __repr__(self):
        return f"<SeriesCollection(n={len(self)}, provenance={list(self.provenance)})>"

    @property
    def ids(self) -> List[str]:
        return list(self.series.keys())

    @property
    def frequencies(self) -> List[Frequency]:
        """集合中出现的频率，按枚举顺序"""
        present = {ts.frequency for ts in self}
        return [f for f in Frequency if f in present]

    def map(self, func) -> "SeriesCollection":
        """对每条序列应用变换，返回新集合"""
        return SeriesCollection(series={uid: func(ts) for uid, ts in self.series.items()},
                                provenance=self.provenance,
                                rejected=dict(self.rejected))

    def equals(self, other: "SeriesCollection") -> bool:
        if self.ids != other.ids:
            return False
        return all(ts.equals(other[uid]) for uid, ts in self.series.items())

    @classmethod
    def merge(cls, collections: List["SeriesCollection"]) -> "SeriesCollection":
        """合并多个集合，调用方负责保证 id 唯一"""
        series: Dict[str, TimeSeries] = {}
        provenance: List[str] = []
        rejected: Dict[str, str] = {}
        for collection in collections:
            series.update(collection.series)
            provenance.extend(collection.provenance)
            rejected.update(collection.rejected)
        return cls(series=series, provenance=tuple(provenance), rejected=rejected)


FORECAST_COLUMNS = ["unique_id", "ds", "model", "y_hat"]
EVAL_COLUMNS = ["unique_id", "ds", "horizon", "actual", "model", "forecast"]


@dataclass(frozen=True, eq=False)
class ForecastSet:
    """长表格式的预测结果 (unique_id, ds, model, y_hat)"""
    frame: pd.DataFrame
    provenance: Tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.frame)

    def __repr__(self):
        return f"<ForecastSet(rows={len(self)}, models={self.models})>"

    @property
    def models(self) -> List[str]:
        return sorted(self.frame["model"].unique().tolist())

    def with_rows(self, extra: pd.DataFrame) -> "ForecastSet":
        """追加预测行（例如内置基线模型），返回新集合"""
        frame = pd.concat([self.frame, extra[FORECAST_COLUMNS]], ignore_index=True)
        return ForecastSet(frame=frame, provenance=self.provenance)


@dataclass(frozen=True, eq=False)
class EvalFrame:
    """实际值与预测值对齐后的评估表"""
    frame: pd.DataFrame
    train: Dict[str, TimeSeries]
    # 因覆盖不完整被剔除的 (unique_id, model) 对
    dropped_pairs: Tuple[Tuple[str, str], ...] = ()

    def __len__(self) -> int:
        return len(self.frame)

    def __repr__(self):
        return (f"<EvalFrame(rows={len(self)}, series={len(self.series_ids)}, "
                f"models={self.models})>")

    @property
    def models(self) -> List[str]:
        return sorted(self.frame["model"].unique().tolist())

    @property
    def series_ids(self) -> List[str]:
        return list(dict.fromkeys(self.frame["unique_id"].tolist()))

    def groups(self) -> Iterator[Tuple[Tuple[str, str], pd.DataFrame]]:
        """按 (model, unique_id) 分组迭代，每组按 horizon 升序"""
        ordered = self.frame.sort_values(["model", "unique_id", "horizon"], kind="mergesort")
        for key, group in ordered.groupby(["model", "unique_id"], sort=True):
            yield key, group
