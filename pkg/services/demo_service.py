# -*- coding: utf-8 -*-
"""
演示数据服务

生成内置的合成演示数据：20 条月度序列、3 个预测模型，以及一个与最优模型
几乎相同的扰动副本（单独的预测文件，用于观察 rope 对平局比例的影响）。
"""

from pathlib import Path
from typing import Dict, Union

import numpy as np
import pandas as pd
import yaml

from models.series import Frequency
from utils.logger import get_logger

logger = get_logger("demo_service")

N_SERIES = 20
LENGTH = 48
START = "2015-01-01"

ACTUALS_FILE = "actuals.csv"
FORECASTS_FILE = "forecasts.csv"
PERTURBED_FILE = "forecasts_perturbed.csv"
CONFIG_FILE = "config.yaml"

DOMINANT_MODEL = "ModelA"
PERTURBED_MODEL = "ModelA-perturbed"
# 模型名 -> 误差倍数；同一误差序列按倍数放大，保证 ModelA 在每个点上都最优
MODEL_ERROR_FACTORS = {"ModelA": 1.0, "ModelB": 2.0, "ModelC": -3.0}


def _series_shape(index: int, rng: np.random.Generator) -> np.ndarray:
    """按序号轮换四种形态：趋势+季节、季节、平稳噪声、随机游走"""
    level = 100.0 + 20.0 * index
    t = np.arange(LENGTH)
    season = np.sin(2 * np.pi * t / 12.0)
    kind = index % 4
    if kind == 0:
        y = level + 1.5 * t + 0.15 * level * season + rng.normal(0, 0.03 * level, LENGTH)
    elif kind == 1:
        y = level + 0.2 * level * season + rng.normal(0, 0.03 * level, LENGTH)
    elif kind == 2:
        y = level + rng.normal(0, 0.05 * level, LENGTH)
    else:
        y = level + np.cumsum(rng.normal(0, 0.03 * level, LENGTH))
    y = np.maximum(y, 0.1 * level)

    # 季节型序列在留出窗口内注入一个尖峰
    if kind == 1:
        horizon = Frequency.MONTHLY.horizon
        y[LENGTH - horizon + index % horizon] += 0.6 * level
    return y


def build_demo_frames(seed: int = 42) -> Dict[str, pd.DataFrame]:
    """
    生成演示数据表

    Args:
        seed: 随机种子

    Returns:
        Dict[str, pd.DataFrame]: actuals / forecasts / perturbed 三张表
    """
    rng = np.random.default_rng(seed)
    timestamps = pd.date_range(START, periods=LENGTH, freq="MS")
    horizon = Frequency.MONTHLY.horizon
    test_ds = timestamps[-horizon:]

    actual_rows = []
    forecast_rows = []
    perturbed_rows = []
    for index in range(N_SERIES):
        unique_id = f"M{index + 1:03d}"
        y = np.round(_series_shape(index, rng), 6)
        actual_rows.append(pd.DataFrame({"unique_id": unique_id, "ds": timestamps, "y": y}))

        actual = y[-horizon:]
        # 误差约为水平的 8%，绝对值限制在 [0.5%, 30%]，保证 ModelC 仍为正且各模型逐点严格有序
        noise = rng.normal(0, 0.08, horizon)
        magnitude = np.clip(np.abs(noise), 0.005, 0.30) * np.abs(actual)
        error = np.where(noise >= 0, 1.0, -1.0) * magnitude
        for model, factor in MODEL_ERROR_FACTORS.items():
            forecast_rows.append(pd.DataFrame({"unique_id": unique_id, "ds": test_ds, "model": model,
                                               "y_hat": np.round(actual + factor * error, 6)}))

        base = actual + MODEL_ERROR_FACTORS[DOMINANT_MODEL] * error
        jitter = rng.uniform(-0.002, 0.002, horizon)
        perturbed_rows.append(pd.DataFrame({"unique_id": unique_id, "ds": test_ds, "model": PERTURBED_MODEL,
                                            "y_hat": np.round(base * (1.0 + jitter), 6)}))

    frames = {
        "actuals": pd.concat(actual_rows, ignore_index=True),
        "forecasts": pd.concat(forecast_rows, ignore_index=True),
        "perturbed": pd.concat(perturbed_rows, ignore_index=True),
    }
    for frame in frames.values():
        frame["ds"] = pd.DatetimeIndex(frame["ds"]).strftime("%Y-%m-%d")
    return frames


def demo_config(output_subdir: str = "results") -> Dict:
    """演示配置；路径相对于配置文件所在目录"""
    return {
        "inputs": {
            "actuals": [{"path": ACTUALS_FILE, "frequency": "monthly", "dataset": "demo"}],
            "forecasts": [FORECASTS_FILE],
        },
        "evaluation": {
            "metric": "smape",
            "alpha": 0.10,
            "rope": 10,
            "reference_model": DOMINANT_MODEL,
        },
        "output": {"directory": output_subdir},
        "system": {"max_workers": 2},
    }


def generate_demo(out_dir: Union[str, Path], seed: int = 42) -> Dict[str, Path]:
    """
    把演示数据与配置写入目录

    Args:
        out_dir: 目标目录
        seed: 随机种子

    Returns:
        Dict[str, Path]: 文件名 -> 路径
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = build_demo_frames(seed)

    written = {}
    for name, key in ((ACTUALS_FILE, "actuals"), (FORECASTS_FILE, "forecasts"), (PERTURBED_FILE, "perturbed")):
        path = out_dir / name
        frames[key].to_csv(path, index=False, lineterminator="\n")
        written[name] = path

    config_path = out_dir / CONFIG_FILE
    with open(config_path, "w", encoding="utf-8") as f:
        yaml.safe_dump(demo_config(), f, allow_unicode=True, sort_keys=False)
    written[CONFIG_FILE] = config_path

    logger.info(f"演示数据已生成: {out_dir} ({N_SERIES} 条序列, 模型 {list(MODEL_ERROR_FACTORS)})")
    return written
