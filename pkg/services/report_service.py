# -*- coding: utf-8 -*-
"""
报告服务

输出评估结果：得分/排名/胜负 CSV、Markdown 摘要、雷达图 SVG、
标注与基线导出，以及带摘要哈希的运行清单。
"""

import hashlib
import json
import shutil
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib.patches import Patch, Polygon  # noqa: E402

from core.error_handler import ERROR_REPORT_FILE, STAGING_PREFIX  # noqa: E402
from core.pipeline import ReportIoError, TooFewAxesError  # noqa: E402
from models.results import (BaselineProfile, ConditionAnnotations,  # noqa: E402
                            DimensionScore, LossTable, Metric, RadarSummary,
                            WinDrawLoss)
from models.series import SeriesCollection  # noqa: E402
from services.aggregation_service import scores_frame, wdl_frame  # noqa: E402
from utils.logger import get_logger  # noqa: E402

logger = get_logger("report_service")

PathLike = Union[str, Path]

# 输出文件名
SCORES_FILE = "scores.csv"
RANKS_FILE = "ranks.csv"
WDL_FILE = "wdl.csv"
SUMMARY_FILE = "summary.md"
RADAR_FILE = "radar.svg"
LOSSES_FILE = "losses.csv"
HORIZON_FILE = "horizon_profile.csv"
SERIES_ANNOTATIONS_FILE = "annotations_series.csv"
OBS_ANNOTATIONS_FILE = "annotations_obs.csv"
BASELINE_FORECASTS_FILE = "baseline_forecasts.csv"
BASELINE_SCORES_FILE = "baseline_scores.csv"
MANIFEST_FILE = "manifest.json"

BASELINE_SCORE_COLUMNS = ["unique_id", "baseline_smape", "is_hard", "sigma", "level"]

# 输出目录中由本工具管理的文件，提交时整体替换
OUTPUT_FILES = (SCORES_FILE, RANKS_FILE, WDL_FILE, SUMMARY_FILE, RADAR_FILE, LOSSES_FILE, HORIZON_FILE,
                SERIES_ANNOTATIONS_FILE, OBS_ANNOTATIONS_FILE, BASELINE_FORECASTS_FILE,
                BASELINE_SCORES_FILE, MANIFEST_FILE)


# 雷达图的固定渲染参数，保证相同输入得到逐字节相同的 SVG
RADAR_RC = {
    "svg.hashsalt": "radar-eval",
    "svg.fonttype": "none",
    "path.simplify": False,
    "font.family": "DejaVu Sans",
}
RADAR_GID_PREFIX = "radar-model-"


def sha256_file(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    """
    以固定格式写出 CSV

    Raises:
        ReportIoError: 无法写入
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    except OSError as e:
        raise ReportIoError(f"无法写入 {path}: {e}", str(path)) from e
    logger.debug(f"写出 {path} ({len(frame)} 行)")
    return path


def write_text(text: str, path: PathLike) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as e:
        raise ReportIoError(f"无法写入 {path}: {e}", str(path)) from e
    return path


class StagedOutput:
    """
    暂存输出目录

    所有文件先写入输出目录下的临时子目录，成功后再逐个移动到位；
    失败时整体删除，不留下部分输出。
    """

    def __init__(self, output_dir: PathLike):
        self.output_dir = Path(output_dir)
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            self.staging_dir = Path(tempfile.mkdtemp(prefix=STAGING_PREFIX, dir=self.output_dir))
        except OSError as e:
            raise ReportIoError(f"输出目录不可写: {self.output_dir} ({e})", str(self.output_dir)) from e
        self.files: List[str] = []

    def path(self, name: str) -> Path:
        if name not in self.files:
            self.files.append(name)
        return self.staging_dir / name

    def commit(self) -> Dict[str, Path]:
        """
        把暂存文件移动到输出目录

        上一次运行留下的已知输出文件先移到备份目录，本次未生成的文件因此不会残留；
        移动中途失败时撤回已移入的文件并恢复备份。
        """
        backup_dir = self.staging_dir.with_name(f"{self.staging_dir.name}-previous")
        backed_up: List[str] = []
        committed: Dict[str, Path] = {}
        try:
            backup_dir.mkdir()
            for name in OUTPUT_FILES + (ERROR_REPORT_FILE,):
                existing = self.output_dir / name
                if existing.exists():
                    existing.replace(backup_dir / name)
                    backed_up.append(name)
            for name in self.files:
                source = self.staging_dir / name
                if not source.exists():
                    continue
                target = self.output_dir / name
                source.replace(target)
                committed[name] = target
        except OSError as e:
            for target in committed.values():
                target.unlink(missing_ok=True)
            for name in backed_up:
                (backup_dir / name).replace(self.output_dir / name)
            raise ReportIoError(f"无法移动输出文件到 {self.output_dir}: {e}", str(self.output_dir)) from e
        finally:
            shutil.rmtree(self.staging_dir, ignore_errors=True)
            shutil.rmtree(backup_dir, ignore_errors=True)
        logger.debug(f"已提交 {len(committed)} 个文件, 替换旧文件 {len(backed_up)} 个")
        return committed

    def discard(self) -> None:
        shutil.rmtree(self.staging_dir, ignore_errors=True)


def _display_value(value: float, metric: Metric, display_scale: str) -> str:
    if metric is Metric.SMAPE and display_scale == "fraction":
        return f"{value / 100.0:.4f}"
    return f"{value:.4f}"


def _markdown_table(frame: pd.DataFrame) -> str:
    header = "| " + " | ".join(str(c) for c in frame.columns) + " |"
    divider = "|" + "|".join("---" for _ in frame.columns) + "|"
    rows = ["| " + " | ".join(str(v) for v in row) + " |" for row in frame.itertuples(index=False)]
    return "\n".join([header, divider] + rows)


def render_summary(scores: Sequence[DimensionScore],
                   summary: RadarSummary,
                   wdl: Sequence[WinDrawLoss],
                   metric: Metric,
                   display_scale: str = "fraction",
                   top: Sequence[str] = ()) -> str:
    """
    生成与 CSV 内容对应的 Markdown 摘要

    SMAPE 在 CSV 中为 0-200 百分比刻度，摘要中按配置显示为 0-1 比例。
    """
    scale_note = ("0-1 比例（CSV 中为 0-200 百分比）"
                  if metric is Metric.SMAPE and display_scale == "fraction" else "与 CSV 相同")
    lines = ["# 预测评估摘要", "",
             f"- 指标: {metric.value.upper()}，显示刻度: {scale_note}",
             f"- 模型数: {len(summary.models)}，维度数: {summary.ranks.shape[1]}",
             f"- 雷达轴: {', '.join(summary.axes)}"]
    if top:
        lines.append(f"- 领先模型: {', '.join(top)}")

    frame = scores_frame(scores)
    values = frame.pivot(index="model", columns="dimension", values="value").sort_index()
    shown = values.apply(lambda col: col.map(lambda v: _display_value(v, metric, display_scale)))
    lines += ["", "## 维度得分（越低越好）", "", _markdown_table(shown.reset_index())]

    ranks = summary.ranks.apply(lambda col: col.map(lambda r: f"{r:g}"))
    lines += ["", "## 维度排名（1 为最好）", "", _markdown_table(ranks.rename_axis(index="model").reset_index())]

    if wdl:
        table = wdl_frame(wdl).assign(
            win=lambda f: f["win"].map(lambda v: f"{v:.3f}"),
            draw=lambda f: f["draw"].map(lambda v: f"{v:.3f}"),
            loss=lambda f: f["loss"].map(lambda v: f"{v:.3f}"),
            rope=lambda f: f["rope"].map(lambda v: f"{v:g}"))
        lines += ["", "## 胜/平/负", "", _markdown_table(table)]
    return "\n".join(lines) + "\n"


def emit_tables(scores: Sequence[DimensionScore],
                summary: RadarSummary,
                wdl: Sequence[WinDrawLoss],
                output: StagedOutput,
                metric: Metric = Metric.SMAPE,
                display_scale: str = "fraction",
                top: Sequence[str] = ()) -> Tuple[Dict[str, Path], Dict[str, str]]:
    """
    写出得分、排名、胜负 CSV 与 Markdown 摘要

    Args:
        scores: 维度得分
        summary: 排名矩阵
        wdl: 胜/平/负结果，为空时省略 wdl.csv
        output: 暂存输出
        metric: 指标
        display_scale: 摘要中 SMAPE 的显示刻度
        top: 领先模型列表

    Returns:
        Tuple[Dict[str, Path], Dict[str, str]]: (写出的文件, 省略的文件及原因)
    """
    if not scores:
        raise ReportIoError("没有可输出的得分", str(output.output_dir))
    written = {
        SCORES_FILE: write_csv(scores_frame(scores), output.path(SCORES_FILE)),
        RANKS_FILE: write_csv(summary.to_frame(), output.path(RANKS_FILE)),
    }
    omitted: Dict[str, str] = {}
    if wdl:
        written[WDL_FILE] = write_csv(wdl_frame(wdl), output.path(WDL_FILE))
    else:
        omitted[WDL_FILE] = "未配置参考模型"
    written[SUMMARY_FILE] = write_text(
        render_summary(scores, summary, wdl, metric, display_scale, top), output.path(SUMMARY_FILE))
    return written, omitted


def radar_radius(rank: float, n_models: int) -> float:
    """排名 1 位于最外圈：半径 (M + 1 - rank) / M"""
    return (n_models + 1 - rank) / n_models


def emit_radar_svg(summary: RadarSummary, path: PathLike, title: Optional[str] = None) -> Path:
    """
    绘制排名雷达图

    每个模型一个多边形，轴等角分布，第一根轴朝上、顺时针排列；
    多边形带有 id 为 radar-model-<序号> 的分组，顶点数等于轴数。

    Args:
        summary: 排名矩阵
        path: SVG 输出路径
        title: 图标题

    Raises:
        TooFewAxesError: 轴少于 3 个
    """
    axes = list(summary.axes)
    if len(axes) < 3:
        raise TooFewAxesError(f"雷达图至少需要 3 个轴，实际 {len(axes)}: {axes}")
    models = summary.models
    if not models:
        raise TooFewAxesError("雷达图至少需要 1 个模型")

    path = Path(path)
    n_models = len(models)
    angles = np.pi / 2 - 2 * np.pi * np.arange(len(axes)) / len(axes)
    unit = np.column_stack([np.cos(angles), np.sin(angles)])
    ranks = summary.axis_ranks()

    with plt.rc_context(RADAR_RC):
        fig, ax = plt.subplots(figsize=(7, 6.5))
        try:
            ax.set_aspect("equal")
            ax.axis("off")

            # 网格：每个名次一圈
            for level in range(1, n_models + 1):
                ring = unit * radar_radius(level, n_models)
                ring = np.vstack([ring, ring[:1]])
                ax.plot(ring[:, 0], ring[:, 1], color="#cccccc", linewidth=0.8, zorder=1)
            for (x, y), name in zip(unit, axes):
                ax.plot([0, x], [0, y], color="#cccccc", linewidth=0.8, zorder=1)
                ax.text(1.12 * x, 1.12 * y, name, ha="center", va="center", fontsize=9)

            colors = plt.get_cmap("tab10")
            handles = []
            for index, model in enumerate(models):
                radii = np.array([radar_radius(r, n_models) for r in ranks.loc[model].to_numpy()])
                vertices = unit * radii[:, None]
                color = colors(index % 10)
                ax.add_patch(Polygon(vertices, closed=True, facecolor=color, alpha=0.25,
                                     edgecolor=color, linewidth=1.6, zorder=2,
                                     gid=f"{RADAR_GID_PREFIX}{index}"))
                handles.append(Patch(facecolor=color, edgecolor=color, alpha=0.6, label=model))

            ax.set_xlim(-1.45, 1.45)
            ax.set_ylim(-1.3, 1.3)
            ax.legend(handles=handles, loc="upper left", bbox_to_anchor=(1.0, 1.0), frameon=False, fontsize=9)
            ax.set_title(title or "Model rank by dimension (outer is better)", fontsize=11)

            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
        except OSError as e:
            raise ReportIoError(f"无法写入雷达图 {path}: {e}", str(path)) from e
        finally:
            plt.close(fig)

    logger.debug(f"雷达图: {n_models} 个模型 × {len(axes)} 个轴 -> {path}")
    return path


def export_losses(loss_table: LossTable, path: PathLike) -> Path:
    return write_csv(loss_table.to_frame(), path)


def export_annotations(annotations: ConditionAnnotations, output: StagedOutput) -> Dict[str, Path]:
    """写出序列级与观测级标注"""
    series = annotations.series.copy()
    series["kpss_stat"] = series["kpss_stat"].round(12)
    series["seasonal_strength"] = series["seasonal_strength"].round(12)
    return {
        SERIES_ANNOTATIONS_FILE: write_csv(series, output.path(SERIES_ANNOTATIONS_FILE)),
        OBS_ANNOTATIONS_FILE: write_csv(annotations.observations, output.path(OBS_ANNOTATIONS_FILE)),
    }


def export_baseline(profiles: Mapping[str, BaselineProfile],
                    test: SeriesCollection,
                    annotations: ConditionAnnotations,
                    output: StagedOutput) -> Dict[str, Path]:
    """
    写出基线预测、区间与基线得分

    baseline_scores.csv 前三列固定为 unique_id,baseline_smape,is_hard，
    is_hard 取自条件标注，其后是 sigma 与 level。
    """
    frames = []
    for uid, profile in profiles.items():
        frames.append(pd.DataFrame({
            "unique_id": uid,
            "horizon": np.arange(1, profile.horizon + 1),
            "forecast": profile.forecast,
            "lower": profile.lower,
            "upper": profile.upper,
            "is_anomaly": profile.is_anomaly,
            "ds": test[uid].timestamps.strftime("%Y-%m-%d"),
            "actual": test[uid].values,
        }))
    forecasts = pd.concat(frames, ignore_index=True)
    ids = list(profiles)
    hard = annotations.series.set_index("unique_id")["is_hard"].reindex(ids)
    scores = pd.DataFrame({
        "unique_id": ids,
        "baseline_smape": [profiles[uid].smape for uid in ids],
        "is_hard": hard.to_numpy(),
        "sigma": [profiles[uid].sigma for uid in ids],
        "level": [profiles[uid].level for uid in ids],
    }, columns=BASELINE_SCORE_COLUMNS)
    return {
        BASELINE_FORECASTS_FILE: write_csv(forecasts, output.path(BASELINE_FORECASTS_FILE)),
        BASELINE_SCORES_FILE: write_csv(scores, output.path(BASELINE_SCORES_FILE)),
    }


def export_horizon_profile(profile: pd.DataFrame, output: StagedOutput) -> Path:
    return write_csv(profile, output.path(HORIZON_FILE))


def build_manifest(command: str,
                   version: str,
                   config: Mapping[str, Any],
                   inputs: Sequence[Tuple[str, str]],
                   warnings: Sequence[Mapping[str, str]],
                   exclusions: Sequence[Mapping[str, str]],
                   totals: Mapping[str, Any],
                   files: Mapping[str, PathLike],
                   omitted: Mapping[str, str]) -> Dict[str, Any]:
    """
    组装运行清单；不含时间戳，相同输入的清单逐字节相同

    Args:
        command: 子命令
        version: 引擎版本
        config: 配置回显
        inputs: (角色, 路径) 列表
        warnings: 运行警告（每条一次）
        exclusions: 排除记录
        totals: 标注统计等
        files: 已写出的文件
        omitted: 省略的文件及原因

    Returns:
        Dict[str, Any]: 清单内容
    """
    return {
        "tool": "radar-eval",
        "version": version,
        "command": command,
        "status": "success",
        "config": dict(config),
        "inputs": [{"role": role, "path": str(path), "sha256": sha256_file(path)} for role, path in inputs],
        "warnings": [dict(w) for w in warnings],
        "exclusions": [dict(e) for e in exclusions],
        "totals": dict(totals),
        "files": {name: sha256_file(path) for name, path in sorted(files.items())},
        "omitted": dict(sorted(omitted.items())),
    }


def write_json(payload: Mapping[str, Any], path: PathLike) -> Path:
    text = json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False, default=_json_default)
    return write_text(text + "\n", path)


def _json_default(value: Any) -> Any:
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"无法序列化为 JSON: {type(value).__name__}")
