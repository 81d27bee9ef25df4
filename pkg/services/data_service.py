# -*- coding: utf-8 -*-
"""
数据服务

负责读取长表格式的实际值与预测值 CSV、留出切分，以及把实际值与预测值
对齐为评估表。
"""

from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from core.pipeline import (DataValidationError, DuplicateForecastError,
                           DuplicateSeriesError, DuplicateTimestampError,
                           EmptyInputError, IncompleteHorizonError,
                           IrregularSpacingError, MissingColumnError,
                           MissingValueError, NoOverlapError,
                           SeriesTooShortError, TimestampOutsideHoldoutError,
                           UnknownSeriesError, UnparseableTimestampError,
                           UnparseableValueError)
from models.series import (EVAL_COLUMNS, FORECAST_COLUMNS, EvalFrame,
                           ForecastSet, Frequency, SeriesCollection,
                           TimeSeries)
from utils.logger import get_logger

ACTUALS_COLUMNS = ["unique_id", "ds", "y"]

# 视为缺失值的单元格内容
MISSING_MARKERS = {"", "na", "nan", "null", "none", "n/a"}

# 错误信息中最多列出的条目数
_PREVIEW = 5

logger = get_logger("data_service")

PathLike = Union[str, Path]


def _preview(items: Sequence) -> str:
    shown = ", ".join(str(i) for i in list(items)[:_PREVIEW])
    if len(items) > _PREVIEW:
        shown += f" ... (共 {len(items)} 项)"
    return shown


def _read_csv(path: PathLike, required: List[str]) -> pd.DataFrame:
    """以字符串读取 CSV 并检查必需列"""
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"输入文件不存在: {path}", "MissingInput", str(path))
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise EmptyInputError(f"输入文件为空: {path}", str(path)) from None

    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise MissingColumnError(
            f"{path} 缺少必需列 {missing}，实际列: {list(frame.columns)}", str(path))
    extra = [c for c in frame.columns if c not in required]
    if extra:
        logger.debug(f"{path} 忽略多余列: {extra}")

    frame = frame[required].apply(lambda col: col.str.strip())
    if frame.empty:
        raise EmptyInputError(f"输入文件只有表头，没有数据行: {path}", str(path))
    return frame


def _parse_timestamps(raw: pd.Series, path: PathLike) -> pd.Series:
    """按 ISO-8601 解析时间戳"""
    parsed = pd.to_datetime(raw, format="ISO8601", errors="coerce")
    bad = parsed.isna()
    if bad.any():
        rows = [f"第{i + 2}行 '{raw.iloc[i]}'" for i in np.flatnonzero(bad.to_numpy())]
        raise UnparseableTimestampError(f"{path} 存在无法解析的时间戳: {_preview(rows)}", str(path))
    return parsed


def _parse_values(raw: pd.Series, column: str, path: PathLike) -> pd.Series:
    """解析数值列；缺失值与非数值分别报错"""
    missing = raw.str.lower().isin(MISSING_MARKERS)
    if missing.any():
        rows = [f"第{i + 2}行" for i in np.flatnonzero(missing.to_numpy())]
        raise MissingValueError(f"{path} 的 {column} 列存在缺失值: {_preview(rows)}", str(path))

    parsed = pd.to_numeric(raw, errors="coerce")
    bad = parsed.isna() | ~np.isfinite(parsed.fillna(0.0))
    if bad.any():
        rows = [f"第{i + 2}行 '{raw.iloc[i]}'" for i in np.flatnonzero(bad.to_numpy())]
        raise UnparseableValueError(f"{path} 的 {column} 列存在无法解析的数值: {_preview(rows)}", str(path))
    return parsed.astype(float)


def _month_index(timestamps: pd.DatetimeIndex) -> np.ndarray:
    return timestamps.year.to_numpy() * 12 + timestamps.month.to_numpy()


def _spacing_problem(timestamps: pd.DatetimeIndex, frequency: Frequency) -> Optional[str]:
    """按日历月检查等间隔，返回问题描述；合规时返回 None"""
    if len(timestamps) < 2:
        return None
    gaps = np.diff(_month_index(timestamps))
    irregular = np.flatnonzero(gaps != frequency.months_step)
    if len(irregular) > 0:
        first = irregular[0]
        return (f"{timestamps[first].date()} 与 {timestamps[first + 1].date()} 相隔 {gaps[first]} 个月，"
                f"{frequency.value} 频率要求 {frequency.months_step} 个月")

    # 日期须固定在同一天，或全部为月末
    days = np.asarray(timestamps.day)
    if (days == days[0]).all() or timestamps.is_month_end.all():
        return None
    first = int(np.flatnonzero(days != days[0])[0])
    return (f"{timestamps[first].date()} 与 {timestamps[0].date()} 不在每月同一天，"
            f"{frequency.value} 频率要求固定的月内日期")


def load_actuals(path: PathLike,
                 frequency: Union[str, Frequency],
                 dataset: Optional[str] = None,
                 strict: bool = False) -> SeriesCollection:
    """
    读取实际值 CSV（unique_id,ds,y）

    Args:
        path: 文件路径
        frequency: 该文件的采样频率
        dataset: 可选的数据集标签
        strict: 为 True 时单条序列不合规即报错，否则拒绝该序列并记录诊断

    Returns:
        SeriesCollection: 序列集合

    Raises:
        DataValidationError: 文件级错误，或 strict 模式下的序列级错误
    """
    frequency = Frequency.parse(frequency)
    frame = _read_csv(path, ACTUALS_COLUMNS)
    frame["ds"] = _parse_timestamps(frame["ds"], path)
    frame["y"] = _parse_values(frame["y"], "y", path)

    duplicated = frame.duplicated(["unique_id", "ds"], keep=False)
    if duplicated.any():
        pairs = frame.loc[duplicated, ["unique_id", "ds"]].drop_duplicates()
        shown = [f"{r.unique_id}@{r.ds.date()}" for r in pairs.itertuples()]
        raise DuplicateTimestampError(f"{path} 存在重复时间戳: {_preview(shown)}", str(path))

    series: Dict[str, TimeSeries] = {}
    rejected: Dict[str, str] = {}
    for unique_id, group in frame.groupby("unique_id", sort=False):
        group = group.sort_values("ds", kind="mergesort")
        timestamps = pd.DatetimeIndex(group["ds"])

        problem = _spacing_problem(timestamps, frequency)
        if problem is not None:
            error: DataValidationError = IrregularSpacingError(
                f"序列 {unique_id} 间隔不规则: {problem}", str(path))
        elif len(group) < frequency.min_length:
            error = SeriesTooShortError(
                f"序列 {unique_id} 长度 {len(group)} 小于 2m+H={frequency.min_length}", str(path))
        else:
            series[unique_id] = TimeSeries(unique_id=unique_id,
                                           timestamps=timestamps,
                                           values=group["y"].to_numpy(),
                                           frequency=frequency,
                                           source=str(path),
                                           dataset=dataset)
            continue

        if strict:
            raise error
        rejected[unique_id] = f"{error.error_type}: {error.message}"
        logger.warning(f"拒绝序列 {unique_id} ({error.error_type}): {error.message}")

    if not series:
        raise EmptyInputError(f"{path} 中没有合规的序列", str(path))

    logger.info(f"读取实际值: {path}, 序列 {len(series)} 条, 观测 {len(frame)} 行, 拒绝 {len(rejected)} 条")
    return SeriesCollection(series=series, provenance=(str(path),), rejected=rejected)


def load_actuals_many(entries: Iterable[Dict], strict: bool = False) -> SeriesCollection:
    """
    读取并合并多个实际值文件，序列 id 必须在所有文件中唯一

    Args:
        entries: 每项包含 path、frequency 及可选的 dataset
        strict: 见 load_actuals
    """
    collections: List[SeriesCollection] = []
    seen: Dict[str, str] = {}
    for entry in entries:
        collection = load_actuals(entry["path"], entry["frequency"],
                                  dataset=entry.get("dataset"), strict=strict)
        clashes = [uid for uid in collection.ids if uid in seen]
        if clashes:
            raise DuplicateSeriesError(
                f"序列 id 在多个文件中重复: {_preview(clashes)} "
                f"({seen[clashes[0]]} 与 {entry['path']})", str(entry["path"]))
        seen.update({uid: str(entry["path"]) for uid in collection.ids})
        collections.append(collection)
    return SeriesCollection.merge(collections)


def save_actuals(collection: SeriesCollection, path: PathLike) -> Path:
    """
    把序列集合写回 unique_id,ds,y 格式，保持序列顺序与全精度数值

    Args:
        collection: 序列集合
        path: 输出路径

    Returns:
        Path: 写入的文件路径
    """
    frames = []
    for ts in collection:
        timestamps = ts.timestamps
        if (timestamps == timestamps.normalize()).all():
            ds = timestamps.strftime("%Y-%m-%d")
        else:
            ds = timestamps.strftime("%Y-%m-%dT%H:%M:%S")
        frames.append(pd.DataFrame({"unique_id": ts.unique_id, "ds": ds, "y": ts.values}))
    frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=ACTUALS_COLUMNS)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def holdout_frame(collection: SeriesCollection) -> pd.DataFrame:
    """每条序列最后 H 个观测的 (unique_id, ds, horizon, actual)"""
    frames = []
    for ts in collection:
        horizon = ts.horizon
        frames.append(pd.DataFrame({
            "unique_id": ts.unique_id,
            "ds": ts.timestamps[-horizon:],
            "horizon": np.arange(1, horizon + 1),
            "actual": ts.values[-horizon:],
        }))
    return pd.concat(frames, ignore_index=True)


def load_forecasts(paths: Union[PathLike, Sequence[PathLike]],
                   collection: SeriesCollection) -> ForecastSet:
    """
    读取预测值 CSV（unique_id,ds,model,y_hat），并按留出窗口校验

    Args:
        paths: 一个或多个文件路径，多个文件按行合并
        collection: 已读取的实际值集合（完整序列，含留出窗口）

    Returns:
        ForecastSet: 预测集合

    Raises:
        DataValidationError: UnknownSeries / TimestampOutsideHoldout /
            IncompleteHorizon / DuplicateForecast 等
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]

    frames = []
    for path in paths:
        frame = _read_csv(path, FORECAST_COLUMNS)
        frame["ds"] = _parse_timestamps(frame["ds"], path)
        frame["y_hat"] = _parse_values(frame["y_hat"], "y_hat", path)
        frames.append(frame)
    frame = pd.concat(frames, ignore_index=True)
    source = ", ".join(str(p) for p in paths)

    duplicated = frame.duplicated(["unique_id", "ds", "model"], keep=False)
    if duplicated.any():
        rows = frame.loc[duplicated, ["unique_id", "ds", "model"]].drop_duplicates()
        shown = [f"{r.model}/{r.unique_id}@{r.ds.date()}" for r in rows.itertuples()]
        raise DuplicateForecastError(f"{source} 存在重复预测: {_preview(shown)}", source)

    rejected = frame["unique_id"].isin(list(collection.rejected.keys()))
    if rejected.any():
        dropped = sorted(frame.loc[rejected, "unique_id"].unique().tolist())
        logger.warning(f"忽略已被拒绝序列的预测: {_preview(dropped)}")
        frame = frame[~rejected]

    unknown = sorted(set(frame["unique_id"]) - set(collection.ids))
    if unknown:
        raise UnknownSeriesError(f"{source} 引用了未知序列: {_preview(unknown)}", source)

    holdout = holdout_frame(collection)[["unique_id", "ds", "horizon"]]
    merged = frame.merge(holdout, on=["unique_id", "ds"], how="left")
    outside = merged["horizon"].isna()
    if outside.any():
        rows = merged.loc[outside]
        shown = [f"{r.model}/{r.unique_id}@{r.ds.date()}" for r in rows.itertuples()]
        raise TimestampOutsideHoldoutError(f"{source} 存在落在留出窗口之外的预测: {_preview(shown)}", source)

    counts = merged.groupby(["unique_id", "model"], sort=True).size()
    for (unique_id, model), count in counts.items():
        horizon = collection[unique_id].horizon
        if count != horizon:
            raise IncompleteHorizonError(
                f"模型 {model} 在序列 {unique_id} 上只提供了 {count}/{horizon} 步预测", source)

    frame = frame.sort_values(["unique_id", "model", "ds"], kind="mergesort").reset_index(drop=True)
    forecasts = ForecastSet(frame=frame[FORECAST_COLUMNS], provenance=tuple(str(p) for p in paths))
    logger.info(f"读取预测值: {source}, 行数 {len(forecasts)}, 模型 {forecasts.models}")
    return forecasts


def split_holdout(collection: SeriesCollection) -> Tuple[SeriesCollection, SeriesCollection]:
    """
    把每条序列的最后 H 个观测作为测试集，其余作为训练集

    Args:
        collection: 序列集合

    Returns:
        Tuple[SeriesCollection, SeriesCollection]: (train, test)

    Raises:
        SeriesTooShortError: 任一序列长度不超过 H
    """
    too_short = [ts.unique_id for ts in collection if len(ts) <= ts.horizon]
    if too_short:
        raise SeriesTooShortError(f"序列长度不超过预测步长 H: {_preview(too_short)}")

    train = collection.map(lambda ts: ts.slice(None, -ts.horizon))
    test = collection.map(lambda ts: ts.slice(-ts.horizon, None))
    return train, test


def align(test: SeriesCollection,
          forecasts: ForecastSet,
          train: Optional[SeriesCollection] = None) -> EvalFrame:
    """
    把测试集实际值与预测值对齐为评估表

    只保留被所有模型完整覆盖的序列，保证每个模型在相同的行上计分；
    被剔除的 (序列, 模型) 对会以一条警告列出。

    Args:
        test: 测试集（每条序列恰为 H 个观测）
        forecasts: 已校验的预测集合
        train: 训练集，作为评估表对训练部分的引用

    Returns:
        EvalFrame: 行序为 (unique_id, model, horizon) 的评估表

    Raises:
        NoOverlapError: 对齐后没有任何行
    """
    actuals = holdout_frame(test)
    horizons = {ts.unique_id: ts.horizon for ts in test}
    merged = forecasts.frame.merge(actuals, on=["unique_id", "ds"], how="inner")
    merged = merged.rename(columns={"y_hat": "forecast"})
    models = forecasts.models

    if merged.empty:
        raise NoOverlapError("预测值与测试集没有任何重叠")

    counts = merged.groupby(["unique_id", "model"]).size()
    complete = {key for key, count in counts.items() if count == horizons[key[0]]}
    covered = sorted(uid for uid in merged["unique_id"].unique()
                     if all((uid, model) in complete for model in models))

    present_pairs = set(counts.index)
    dropped = sorted((uid, model) for uid, model in present_pairs if uid not in covered)
    if dropped:
        shown = [f"{model}/{uid}" for uid, model in dropped]
        logger.warning(f"因模型覆盖不完整剔除 {len(dropped)} 个(模型/序列)对: {_preview(shown)}")

    uncovered = sorted(set(test.ids) - set(merged["unique_id"]))
    if uncovered:
        logger.warning(f"{len(uncovered)} 条序列没有任何预测: {_preview(uncovered)}")

    if not covered:
        raise NoOverlapError("没有被所有模型完整覆盖的序列")

    frame = merged[merged["unique_id"].isin(covered)][EVAL_COLUMNS]
    frame = frame.sort_values(["unique_id", "model", "horizon"], kind="mergesort").reset_index(drop=True)
    frame["horizon"] = frame["horizon"].astype(int)

    train_refs = {uid: train[uid] for uid in covered} if train is not None else {}
    return EvalFrame(frame=frame, train=train_refs, dropped_pairs=tuple(dropped))
