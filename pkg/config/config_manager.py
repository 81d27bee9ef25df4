# -*- coding: utf-8 -*-
"""
配置管理模块

负责加载和验证运行配置文件（YAML 或 JSON），应用命令行覆盖项，
并提供只读的 RunConfig。
"""

import copy
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml

from core.pipeline import ConfigValidationError
from models.results import DEFAULT_DIMENSIONS, DEFAULT_RADAR_AXES, Dimension, Metric
from models.series import Frequency
from utils.logger import generate_log_path

KPSS_SIGNIFICANCE_LEVELS = (0.10, 0.05, 0.025, 0.01)
DISPLAY_SCALES = ("fraction", "percent")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

DEFAULT_CONFIG: Dict[str, Any] = {
    "inputs": {
        "actuals": [],
        "forecasts": [],
    },
    "evaluation": {
        "metric": "smape",
        "alpha": 0.10,
        "rope": 10.0,
        "rope_panels": [0.0],
        "seasonality_threshold": 0.6,
        "kpss_significance": 0.05,
        "anomaly_level": 0.99,
        "hardness_percentile": 0.90,
        "reference_model": None,
        "dimensions": list(DEFAULT_DIMENSIONS),
        "radar_axes": list(DEFAULT_RADAR_AXES),
        "include_baseline_model": False,
        "strict_ingestion": False,
        "top_k": 3,
    },
    "output": {
        "directory": None,
        "smape_display_scale": "fraction",
        "export_losses": True,
        "export_baseline": True,
    },
    "logging": {
        "level": "INFO",
        "file": None,
        "directory": None,
        "console": True,
    },
    "system": {
        "max_workers": None,
    },
}

# 命令行覆盖项 -> (配置段, 字段)
OVERRIDE_FIELDS = {
    "alpha": ("evaluation", "alpha"),
    "rope": ("evaluation", "rope"),
    "metric": ("evaluation", "metric"),
    "reference_model": ("evaluation", "reference_model"),
    "out": ("output", "directory"),
    "workers": ("system", "max_workers"),
    "log_level": ("logging", "level"),
}


@dataclass(frozen=True)
class ActualsInput:
    """一个实际值文件及其频率"""
    path: Path
    frequency: Frequency
    dataset: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    """校验后的运行配置"""
    actuals: Tuple[ActualsInput, ...]
    forecasts: Tuple[Path, ...]
    metric: Metric
    alpha: float
    rope: float
    rope_panels: Tuple[float, ...]
    seasonality_threshold: float
    kpss_significance: float
    anomaly_level: float
    hardness_percentile: float
    reference_model: Optional[str]
    dimensions: Tuple[str, ...]
    radar_axes: Tuple[str, ...]
    include_baseline_model: bool
    strict_ingestion: bool
    top_k: int
    output_dir: Path
    smape_display_scale: str
    export_losses: bool
    export_baseline: bool
    max_workers: int
    log_level: str
    log_file: Optional[str]
    log_console: bool

    @property
    def ropes(self) -> Tuple[float, ...]:
        """胜/平/负表中报告的所有 rope 取值"""
        return tuple(sorted({self.rope, *self.rope_panels}))

    def echo(self) -> Dict[str, Any]:
        """
        写入运行清单的配置回显

        不包含线程数与日志设置，这些设置不影响结果。
        """
        return {
            "inputs": {
                "actuals": [{"path": str(a.path), "frequency": a.frequency.value, "dataset": a.dataset}
                            for a in self.actuals],
                "forecasts": [str(p) for p in self.forecasts],
            },
            "evaluation": {
                "metric": self.metric.value,
                "alpha": self.alpha,
                "rope": self.rope,
                "rope_panels": list(self.rope_panels),
                "seasonality_threshold": self.seasonality_threshold,
                "kpss_significance": self.kpss_significance,
                "anomaly_level": self.anomaly_level,
                "hardness_percentile": self.hardness_percentile,
                "reference_model": self.reference_model,
                "dimensions": list(self.dimensions),
                "radar_axes": list(self.radar_axes),
                "include_baseline_model": self.include_baseline_model,
                "strict_ingestion": self.strict_ingestion,
                "top_k": self.top_k,
            },
            "output": {
                "directory": str(self.output_dir),
                "smape_display_scale": self.smape_display_scale,
                "export_losses": self.export_losses,
                "export_baseline": self.export_baseline,
            },
        }


def _merge(base: Dict[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


class ConfigManager:
    """配置管理器

    负责加载、验证和访问配置文件中的设置。
    """

    def __init__(self,
                 config_path: str,
                 overrides: Optional[Mapping[str, Any]] = None,
                 require_forecasts: bool = True):
        """
        初始化配置管理器

        Args:
            config_path: 配置文件路径
            overrides: 命令行覆盖项（值为 None 的项被忽略）
            require_forecasts: 是否要求配置预测文件（annotate 命令不需要）

        Raises:
            ConfigValidationError: 配置加载或验证失败
        """
        self.config_path = Path(config_path)
        self.require_forecasts = require_forecasts
        raw = self._load_config()
        self.config = _merge(DEFAULT_CONFIG, raw)
        self._apply_overrides(overrides or {})
        self._validate_config()
        self.run_config = self._build_run_config()

    def _load_config(self) -> Dict[str, Any]:
        """
        加载配置文件（JSON 是 YAML 的子集，统一用 yaml.safe_load 解析）

        Returns:
            Dict[str, Any]: 配置字典

        Raises:
            ConfigValidationError: 配置文件加载失败时抛出
        """
        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                loaded = yaml.safe_load(f)
        except FileNotFoundError:
            raise ConfigValidationError(f"配置文件不存在: {self.config_path}") from None
        except (OSError, yaml.YAMLError) as e:
            raise ConfigValidationError(f"无法加载配置文件 {self.config_path}: {e}") from e
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigValidationError(f"配置文件顶层必须是映射: {self.config_path}")
        unknown = sorted(set(loaded) - set(DEFAULT_CONFIG))
        if unknown:
            raise ConfigValidationError(f"配置文件包含未知的部分: {unknown}")
        return loaded

    def _apply_overrides(self, overrides: Mapping[str, Any]) -> None:
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in OVERRIDE_FIELDS:
                raise ConfigValidationError(f"不支持的覆盖项: {key}")
            section, field = OVERRIDE_FIELDS[key]
            if key == "out":
                # 命令行给出的相对路径以当前目录为基准
                value = str(Path(value).expanduser().resolve())
            self.config[section][field] = value

    def _resolve(self, path: Any) -> Path:
        """相对路径相对于配置文件所在目录"""
        resolved = Path(str(path)).expanduser()
        if not resolved.is_absolute():
            resolved = self.config_path.resolve().parent / resolved
        return resolved

    def _validate_config(self) -> None:
        """
        验证配置文件的完整性和正确性

        Raises:
            ConfigValidationError: 配置验证失败时抛出
        """
        self._validate_inputs()
        self._validate_evaluation()
        self._validate_output()

        log_level = str(self.config['logging']['level']).upper()
        if log_level not in LOG_LEVELS:
            raise ConfigValidationError(f"日志级别必须是 {LOG_LEVELS} 之一: {log_level}")
        workers = self.config['system']['max_workers']
        if workers is not None and (not isinstance(workers, int) or isinstance(workers, bool) or workers < 1):
            raise ConfigValidationError(f"max_workers 必须是正整数: {workers}")

    def _validate_inputs(self) -> None:
        inputs = self.config['inputs']
        actuals = inputs['actuals']
        if not isinstance(actuals, list) or not actuals:
            raise ConfigValidationError("inputs.actuals 必须是非空列表")
        for index, entry in enumerate(actuals):
            if not isinstance(entry, dict) or 'path' not in entry or 'frequency' not in entry:
                raise ConfigValidationError(f"inputs.actuals[{index}] 必须包含 'path' 与 'frequency' 字段")
            try:
                Frequency.parse(entry['frequency'])
            except ValueError as e:
                raise ConfigValidationError(f"inputs.actuals[{index}]: {e}") from None

        forecasts = inputs['forecasts']
        if isinstance(forecasts, str):
            inputs['forecasts'] = forecasts = [forecasts]
        if not isinstance(forecasts, list):
            raise ConfigValidationError("inputs.forecasts 必须是路径列表")
        if self.require_forecasts and not forecasts:
            raise ConfigValidationError("inputs.forecasts 不能为空")

    def _validate_evaluation(self) -> None:
        evaluation = self.config['evaluation']
        unknown = sorted(set(evaluation) - set(DEFAULT_CONFIG['evaluation']))
        if unknown:
            raise ConfigValidationError(f"evaluation 包含未知字段: {unknown}")

        try:
            evaluation['metric'] = Metric.parse(evaluation['metric']).value
        except ValueError as e:
            raise ConfigValidationError(str(e)) from None

        alpha = evaluation['alpha']
        if not _is_number(alpha) or not 0.0 < alpha <= 1.0:
            raise ConfigValidationError(f"alpha 必须在 (0, 1] 内: {alpha}")
        rope = evaluation['rope']
        if not _is_number(rope) or rope < 0:
            raise ConfigValidationError(f"rope 必须是非负数: {rope}")
        panels = evaluation['rope_panels'] or []
        if not isinstance(panels, list) or not all(_is_number(p) and p >= 0 for p in panels):
            raise ConfigValidationError(f"rope_panels 必须是非负数列表: {panels}")
        evaluation['rope_panels'] = panels

        threshold = evaluation['seasonality_threshold']
        if not _is_number(threshold) or not 0.0 <= threshold <= 1.0:
            raise ConfigValidationError(f"seasonality_threshold 必须在 [0, 1] 内: {threshold}")
        significance = evaluation['kpss_significance']
        if not _is_number(significance) or not any(
                abs(significance - level) < 1e-12 for level in KPSS_SIGNIFICANCE_LEVELS):
            raise ConfigValidationError(
                f"kpss_significance 必须是 {KPSS_SIGNIFICANCE_LEVELS} 之一: {significance}")
        for field in ('anomaly_level', 'hardness_percentile'):
            value = evaluation[field]
            if not _is_number(value) or not 0.0 < value < 1.0:
                raise ConfigValidationError(f"{field} 必须在 (0, 1) 内: {value}")

        reference = evaluation['reference_model']
        if reference is not None and (not isinstance(reference, str) or not reference.strip()):
            raise ConfigValidationError(f"reference_model 必须是模型名称: {reference}")

        known = {d.value for d in Dimension} | {f.label for f in Frequency}
        dimensions = evaluation['dimensions']
        if not isinstance(dimensions, list) or not dimensions:
            raise ConfigValidationError("dimensions 必须是非空列表")
        unknown_dims = [d for d in dimensions if d not in known]
        if unknown_dims:
            raise ConfigValidationError(f"未知的评估维度: {unknown_dims}，可选值: {sorted(known)}")

        axes = evaluation['radar_axes']
        if not isinstance(axes, list) or len(axes) < 3:
            raise ConfigValidationError(f"radar_axes 至少需要 3 个轴: {axes}")
        if len(set(axes)) != len(axes):
            raise ConfigValidationError(f"radar_axes 存在重复的轴: {axes}")
        scored = set(dimensions) | {f.label for f in Frequency}
        missing_axes = [a for a in axes if a not in scored]
        if missing_axes:
            raise ConfigValidationError(f"以下雷达轴不在 dimensions 中: {missing_axes}")

        for field in ('include_baseline_model', 'strict_ingestion'):
            if not isinstance(evaluation[field], bool):
                raise ConfigValidationError(f"{field} 必须是布尔值: {evaluation[field]}")
        top_k = evaluation['top_k']
        if not isinstance(top_k, int) or isinstance(top_k, bool) or top_k < 1:
            raise ConfigValidationError(f"top_k 必须是正整数: {top_k}")

    def _validate_output(self) -> None:
        output = self.config['output']
        if not output['directory']:
            raise ConfigValidationError("缺少输出目录 output.directory（或使用 --out 指定）")
        if output['smape_display_scale'] not in DISPLAY_SCALES:
            raise ConfigValidationError(
                f"smape_display_scale 必须是 {DISPLAY_SCALES} 之一: {output['smape_display_scale']}")
        for field in ('export_losses', 'export_baseline'):
            if not isinstance(output[field], bool):
                raise ConfigValidationError(f"{field} 必须是布尔值: {output[field]}")

        # 输出目录可写：已存在则检查自身，否则检查最近的已存在上级目录
        directory = self._resolve(output['directory'])
        existing = directory
        while not existing.exists() and existing.parent != existing:
            existing = existing.parent
        if not existing.is_dir() or not os.access(existing, os.W_OK):
            raise ConfigValidationError(f"输出目录不可写: {directory}")

    def _build_run_config(self) -> RunConfig:
        inputs = self.config['inputs']
        evaluation = self.config['evaluation']
        output = self.config['output']
        workers = self.config['system']['max_workers'] or (os.cpu_count() or 1)
        return RunConfig(
            actuals=tuple(ActualsInput(path=self._resolve(a['path']),
                                       frequency=Frequency.parse(a['frequency']),
                                       dataset=a.get('dataset'))
                          for a in inputs['actuals']),
            forecasts=tuple(self._resolve(p) for p in inputs['forecasts']),
            metric=Metric.parse(evaluation['metric']),
            alpha=float(evaluation['alpha']),
            rope=float(evaluation['rope']),
            rope_panels=tuple(float(p) for p in evaluation['rope_panels']),
            seasonality_threshold=float(evaluation['seasonality_threshold']),
            kpss_significance=float(evaluation['kpss_significance']),
            anomaly_level=float(evaluation['anomaly_level']),
            hardness_percentile=float(evaluation['hardness_percentile']),
            reference_model=evaluation['reference_model'],
            dimensions=tuple(evaluation['dimensions']),
            radar_axes=tuple(evaluation['radar_axes']),
            include_baseline_model=evaluation['include_baseline_model'],
            strict_ingestion=evaluation['strict_ingestion'],
            top_k=int(evaluation['top_k']),
            output_dir=self._resolve(output['directory']),
            smape_display_scale=output['smape_display_scale'],
            export_losses=output['export_losses'],
            export_baseline=output['export_baseline'],
            max_workers=int(workers),
            log_level=str(self.config['logging']['level']).upper(),
            log_file=self._log_file(),
            log_console=bool(self.config['logging']['console']),
        )

    def _log_file(self) -> Optional[str]:
        """日志文件路径：显式 file 优先，其次在 directory 下按日期生成，都为空时不写文件"""
        logging_config = self.config['logging']
        if logging_config['file']:
            return str(self._resolve(logging_config['file']))
        if logging_config['directory']:
            return generate_log_path(str(self._resolve(logging_config['directory'])))
        return None

    def get_input_paths(self) -> List[Tuple[str, Path]]:
        """所有输入文件 (角色, 路径)，用于清单摘要"""
        paths = [("actuals", a.path) for a in self.run_config.actuals]
        paths += [("forecasts", p) for p in self.run_config.forecasts]
        return paths
