"""
相关性分析模块
特征与目标量表的 Spearman 秩相关，以及基于自助法（bootstrap）的置信区间与显著性
"""
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from config import ANALYSIS_CONFIG


@dataclass
class BootstrapSummary:
    """单个特征的自助法相关性汇总"""

    feature_name: str
    point_rho: float
    boot_mean: float
    ci_low: float
    ci_high: float
    n_boot: int
    n_skipped: int
    significant: bool


def _is_constant(values):
    return bool(np.all(values == values[0]))


def spearman(x, y):
    """
    Spearman 秩相关系数（并列值取平均秩）

    Args:
        x, y: 等长实数向量，长度 ≥ 3

    Returns:
        [-1, 1] 内的相关系数

    Raises:
        ValueError: 长度不一致/过短，或任一向量为常数（相关性无定义）
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.size != y.size:
        raise ValueError(f"向量长度不一致: {x.size} vs {y.size}")
    if x.size < 3:
        raise ValueError(f"至少需要 3 个样本，实际为 {x.size}")
    if _is_constant(x) or _is_constant(y):
        raise ValueError("常数向量的相关系数无定义")
    rho = stats.spearmanr(x, y)[0]
    return float(np.clip(rho, -1.0, 1.0))


def _column_spearman(ranked_x, ranked_y):
    """已排秩矩阵各列与目标秩向量的 Pearson 相关；常数列返回 NaN"""
    xc = ranked_x - ranked_x.mean(axis=0)
    yc = ranked_y - ranked_y.mean()
    denom = np.sqrt((xc ** 2).sum(axis=0) * (yc ** 2).sum())
    with np.errstate(invalid='ignore', divide='ignore'):
        rho = (xc * yc[:, None]).sum(axis=0) / denom
    constant = np.all(ranked_x == ranked_x[0], axis=0)
    rho[constant] = np.nan
    return np.clip(rho, -1.0, 1.0)


def _replica_rhos(features, target, seed, replica_indices):
    """一组重抽样副本的相关系数，行对应副本，目标为常数的副本整行为 NaN"""
    n, p = features.shape
    out = np.full((len(replica_indices), p), np.nan)
    for row, replica in enumerate(replica_indices):
        rng = np.random.default_rng([seed, replica])
        idx = rng.integers(0, n, size=n)
        y = target[idx]
        if _is_constant(y):
            continue
        ranked_x = stats.rankdata(features[idx], axis=0)
        out[row] = _column_spearman(ranked_x, stats.rankdata(y))
    return out


def bootstrap_correlations(features, names, target,
                           n_boot=ANALYSIS_CONFIG['n_boot'],
                           ci_level=ANALYSIS_CONFIG['ci_level'],
                           seed=ANALYSIS_CONFIG['seed'],
                           n_jobs=1):
    """
    自助法 Spearman 相关分析

    每个副本用 (seed, 副本序号) 派生的随机数抽取受试者下标，副本间相互独立，
    可并行执行，结果按副本序号归并，因此并行度不影响输出。重抽样后任一向量为
    常数的副本记为跳过，不做填补。

    Args:
        features: (n_subjects, n_features) 矩阵
        names: 特征名列表
        target: 目标分数向量
        n_boot: 副本数
        ci_level: 置信水平（百分位区间）
        seed: 随机种子
        n_jobs: 并行线程数

    Returns:
        BootstrapSummary 列表，按 |boot_mean| 降序排列（无定义的特征排在最后）

    Raises:
        ValueError: 参数非法或目标为常数
    """
    features = np.asarray(features, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    names = list(names)
    if features.ndim != 2 or features.shape[0] != target.size or features.shape[1] != len(names):
        raise ValueError(f"特征矩阵形状 {features.shape} 与目标长度 {target.size}/特征名数 {len(names)} 不匹配")
    if n_boot < 1:
        raise ValueError(f"n_boot 必须 ≥ 1，实际为 {n_boot}")
    if not 0 < ci_level < 1:
        raise ValueError(f"ci_level 必须在 (0, 1) 内，实际为 {ci_level}")
    if target.size < 3:
        raise ValueError(f"至少需要 3 个受试者，实际为 {target.size}")
    if _is_constant(target):
        raise ValueError("目标分数为常数，相关性无定义")

    chunks = np.array_split(np.arange(n_boot), max(1, min(n_jobs, n_boot)))
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(lambda c: _replica_rhos(features, target, seed, c), chunks))
    else:
        parts = [_replica_rhos(features, target, seed, c) for c in chunks]
    replicas = np.vstack(parts)

    alpha = (1.0 - ci_level) / 2.0
    summaries = []
    for j, name in enumerate(names):
        column = features[:, j]
        rhos = replicas[:, j]
        valid = rhos[np.isfinite(rhos)]
        n_skipped = int(n_boot - valid.size)
        if _is_constant(column) or valid.size == 0:
            print(f"[BOOT] ⚠ 特征 {name} 的相关性无定义，跳过", file=sys.stderr, flush=True)
            summaries.append(BootstrapSummary(name, float('nan'), float('nan'), float('nan'),
                                              float('nan'), n_boot, n_boot, False))
            continue
        boot_mean = float(np.mean(valid))
        ci_low, ci_high = np.quantile(valid, [alpha, 1.0 - alpha])
        # 极端偏态时百分位区间可能不含均值，放宽区间使其包含均值
        ci_low, ci_high = min(float(ci_low), boot_mean), max(float(ci_high), boot_mean)
        summaries.append(BootstrapSummary(
            feature_name=name,
            point_rho=spearman(column, target),
            boot_mean=boot_mean,
            ci_low=ci_low,
            ci_high=ci_high,
            n_boot=n_boot,
            n_skipped=n_skipped,
            significant=not (ci_low <= 0.0 <= ci_high),
        ))

    n_significant = sum(s.significant for s in summaries)
    print(f"[BOOT] {len(names)} 个特征, {n_boot} 个副本, 显著 {n_significant} 个", flush=True)
    return sorted(summaries, key=lambda s: (np.isnan(s.boot_mean), -abs(np.nan_to_num(s.boot_mean))))


def feature_correlation_matrix(features):
    """
    特征两两之间的 Spearman 相关矩阵

    Returns:
        (n_features, n_features) 矩阵，常数列对应的行列为 NaN
    """
    features = np.asarray(features, dtype=np.float64)
    ranked = stats.rankdata(features, axis=0)
    centered = ranked - ranked.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    with np.errstate(invalid='ignore', divide='ignore'):
        matrix = (centered.T @ centered) / np.outer(norms, norms)
    constant = norms == 0
    matrix[constant, :] = np.nan
    matrix[:, constant] = np.nan
    return np.clip(matrix, -1.0, 1.0)
