"""
路径嵌入模块
在计算签名前把一维序列提升为路径：时间增广、Lead-Lag、带基点的累积和
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.signature_core import log_signature, path_signature


@dataclass
class Series:
    """一维时间序列，时间戳可选（单位：秒）"""

    values: np.ndarray
    timestamps: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.size == 0:
            raise ValueError("序列不能为空")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("序列中含有非有限值")
        if self.timestamps is not None:
            self.timestamps = np.asarray(self.timestamps, dtype=np.float64).reshape(-1)
            if self.timestamps.size != self.values.size:
                raise ValueError(
                    f"时间戳长度 {self.timestamps.size} 与数值长度 {self.values.size} 不一致"
                )
            if not np.all(np.isfinite(self.timestamps)) or np.any(np.diff(self.timestamps) <= 0):
                raise ValueError("时间戳必须为有限值且严格递增")

    def __len__(self):
        return self.values.size

    def times(self):
        """显式时间戳，缺省为 0..N-1"""
        if self.timestamps is None:
            return np.arange(self.values.size, dtype=np.float64)
        return self.timestamps


def time_augment(series):
    """
    时间增广：点 (t_i, v_i)

    Args:
        series: Series

    Returns:
        (N, 2) 路径
    """
    return np.column_stack([series.times(), series.values])


def lead_lag(series):
    """
    Lead-Lag 变换，lead 先更新

    点序列为 (v_1, v_1)，之后每个 i ≥ 2 依次追加 (v_i, v_{i-1}) 和 (v_i, v_i)，
    共 2N-1 个点；第一坐标为 lead，第二坐标为 lag。

    Returns:
        (2N-1, 2) 路径
    """
    v = series.values
    points = np.empty((2 * v.size - 1, 2))
    points[0::2, 0] = v
    points[0::2, 1] = v
    points[1::2, 0] = v[1:]
    points[1::2, 1] = v[:-1]
    return points


def cumsum_basepoint(series):
    """累积和并以 0 为基点，输出长度 N+1"""
    return Series(np.concatenate([[0.0], np.cumsum(series.values)]))


def signature_moments(series):
    """
    由 cumsum + lead-lag 路径签名的前两层恢复均值与标准差

    第 1 层给出序列总和，Lévy 面积的两倍给出增量平方和（即 Σ v_i²）。

    Returns:
        (mean, std)，std 为总体标准差
    """
    n = len(series)
    path = lead_lag(cumsum_basepoint(series))
    total = path_signature(path, 1).levels[1][0]
    sum_sq = 2.0 * log_signature(path, 2).coordinate((1, 2))
    mean = total / n
    variance = max(sum_sq / n - mean * mean, 0.0)
    return mean, float(np.sqrt(variance))
