"""
分类模块
分数分档与二值化、线性最大间隔分类器（L2 正则、铰链损失）、
分层 K 折交叉验证、ROC/AUC，以及仅用人口学特征的基线
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from sklearn.metrics import roc_auc_score, roc_curve
from sklearn.model_selection import StratifiedKFold

from config import CLASSIFIER_CONFIG, SCALE_CONFIG


class Scale(str, Enum):
    WISC = 'WISC'
    TEA = 'TEA'
    NEPSY = 'NEPSY'
    CELF = 'CELF'

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).upper())
        except ValueError:
            valid = ', '.join(s.value for s in cls)
            raise ValueError(f"未知量表 '{name}'，可选: {valid}") from None


class Band(str, Enum):
    LOW = 'Low'
    MEDIUM = 'Medium'
    HIGH = 'High'


class Gender(str, Enum):
    MALE = 'male'
    FEMALE = 'female'


@dataclass(frozen=True)
class BandRule:
    """量表常模：均值与标准差"""

    scale: Scale
    mean: float
    sd: float

    @classmethod
    def for_scale(cls, scale):
        scale = Scale.parse(scale)
        conf = SCALE_CONFIG[scale.value]
        return cls(scale, conf['mean'], conf['sd'])


@dataclass(frozen=True)
class ScoreRecord:
    """单个受试者的测验分数与人口学信息"""

    subject_id: str
    wisc: int
    tea: int
    nepsy: int
    celf: int
    age_years: float
    gender: Gender

    def __post_init__(self):
        gender = self.gender if isinstance(self.gender, Gender) else Gender(str(self.gender).lower())
        object.__setattr__(self, 'gender', gender)
        for scale in Scale:
            _check_range(scale, self.score(scale))
        if not np.isfinite(self.age_years) or self.age_years <= 0:
            raise ValueError(f"{self.subject_id}: 年龄非法 {self.age_years}")

    def score(self, scale):
        return getattr(self, Scale.parse(scale).value.lower())


@dataclass
class LinearModel:
    """线性模型：标准化空间中的权重、偏置以及标准化参数"""

    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    objective_history: list = field(default_factory=list, repr=False)

    def transform(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale

    def decision_function(self, X):
        return self.transform(X) @ self.weights + self.bias


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray


@dataclass
class CvReport:
    """交叉验证报告"""

    scale: str
    per_fold_auc: list
    auc_mean: float
    auc_std: float
    roc_points: list
    fold_sizes: list = field(default_factory=list)


def _check_range(scale, score):
    conf = SCALE_CONFIG[scale.value]
    if not conf['min'] <= score <= conf['max']:
        raise ValueError(f"{scale.value} 分数 {score} 超出范围 [{conf['min']}, {conf['max']}]")


def band(scale, score):
    """
    分档：低于均值一个标准差为 Low，高于一个标准差为 High，边界值归为 Medium

    Raises:
        ValueError: 分数超出量表范围
    """
    rule = BandRule.for_scale(scale)
    _check_range(rule.scale, score)
    if score < rule.mean - rule.sd:
        return Band.LOW
    if score > rule.mean + rule.sd:
        return Band.HIGH
    return Band.MEDIUM


def positive_bands(scale):
    """二值化为 True 的分档：WISC/NEPSY/CELF 为 Low 与 Medium，TEA 仅 Low"""
    if Scale.parse(scale) is Scale.TEA:
        return (Band.LOW,)
    return (Band.LOW, Band.MEDIUM)


def binarize(scale, score):
    """WISC/NEPSY/CELF：Low 或 Medium 为 True；TEA：仅 Low 为 True"""
    return band(scale, score) in positive_bands(scale)


def band_counts(records, scale):
    """各分档人数，按 Low / Medium / High 顺序"""
    scale = Scale.parse(scale)
    counts = {level: 0 for level in Band}
    for r in records:
        counts[band(scale, r.score(scale))] += 1
    return counts


def _standardization(X):
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    return mean, np.where(sd > 0, sd, 1.0)


def _primal_objective(w_aug, Z_aug, y_signed, c_reg):
    margins = 1.0 - y_signed * (Z_aug @ w_aug)
    return 0.5 * float(w_aug @ w_aug) + c_reg * float(np.sum(np.maximum(margins, 0.0)))


def train_linear_svm(X, y, c_reg=CLASSIFIER_CONFIG['c_reg'],
                     tol=CLASSIFIER_CONFIG['tol'],
                     max_iter=CLASSIFIER_CONFIG['max_iter'],
                     seed=CLASSIFIER_CONFIG['seed']):
    """
    训练线性 SVM（铰链损失 + 平方范数惩罚），对偶坐标下降求解

    特征先用训练集均值/标准差做 z-score（常数列除以 1）；偏置作为常数 1 的
    增广特征一并正则化。每轮按固定种子打乱坐标顺序，投影梯度的最大差值
    小于 tol 或达到 max_iter 轮时停止。返回迄今原始目标最小的迭代点，
    因此 objective_history 单调不增。

    Args:
        X: (n, p) 特征矩阵
        y: 布尔标签
        c_reg: 正则化系数 C（> 0）
        tol: 收敛阈值
        max_iter: 最大轮数
        seed: 打乱顺序的随机种子

    Returns:
        LinearModel

    Raises:
        ValueError: 样本为空、含非有限值、C 非正或只有一个类别
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=bool).reshape(-1)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"特征矩阵为空或形状非法: {X.shape}")
    if X.shape[0] != y.size:
        raise ValueError(f"样本数 {X.shape[0]} 与标签数 {y.size} 不一致")
    if not np.all(np.isfinite(X)):
        raise ValueError("特征矩阵含有非有限值")
    if c_reg <= 0:
        raise ValueError(f"c_reg 必须为正: {c_reg}")
    if y.all() or not y.any():
        raise ValueError("训练标签只有一个类别")

    mean, scale = _standardization(X)
    Z = np.column_stack([(X - mean) / scale, np.ones(X.shape[0])])
    y_signed = np.where(y, 1.0, -1.0)
    q_diag = np.einsum('ij,ij->i', Z, Z)

    n = Z.shape[0]
    alpha = np.zeros(n)
    w = np.zeros(Z.shape[1])
    rng = np.random.default_rng(seed)

    best_w = w.copy()
    best_obj = _primal_objective(w, Z, y_signed, c_reg)
    history = [best_obj]
    for _ in range(max_iter):
        pg_max, pg_min = -np.inf, np.inf
        for i in rng.permutation(n):
            grad = y_signed[i] * (Z[i] @ w) - 1.0
            if alpha[i] == 0.0:
                pg = min(grad, 0.0)
            elif alpha[i] == c_reg:
                pg = max(grad, 0.0)
            else:
                pg = grad
            pg_max, pg_min = max(pg_max, pg), min(pg_min, pg)
            if pg != 0.0:
                old = alpha[i]
                alpha[i] = min(max(old - grad / q_diag[i], 0.0), c_reg)
                w += (alpha[i] - old) * y_signed[i] * Z[i]

        obj = _primal_objective(w, Z, y_signed, c_reg)
        if obj < best_obj:
            best_obj, best_w = obj, w.copy()
        history.append(best_obj)
        if pg_max - pg_min < tol:
            break

    return LinearModel(best_w[:-1], float(best_w[-1]), mean, scale, history)


def roc_auc(margins, labels):
    """
    ROC 曲线与 AUC（并列计 0.5）

    Returns:
        (auc, RocCurve)

    Raises:
        ValueError: 标签只有一个类别
    """
    margins = np.asarray(margins, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels, dtype=bool).reshape(-1)
    if labels.all() or not labels.any():
        raise ValueError("计算 AUC 需要正负两类样本")
    fpr, tpr, thresholds = roc_curve(labels, margins)
    return float(roc_auc_score(labels, margins)), RocCurve(fpr, tpr, thresholds)


def kfold_cv(X, y, k=CLASSIFIER_CONFIG['k_folds'], c_reg=CLASSIFIER_CONFIG['c_reg'],
             seed=CLASSIFIER_CONFIG['seed'], scale=''):
    """
    分层 K 折交叉验证

    按类别内带种子的洗牌分配折，每折在其余 K-1 折上拟合（标准化也只用训练折），
    对留出折打分并计算 AUC，报告均值与总体标准差。

    Raises:
        ValueError: k < 2，或某一类样本数少于 k
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=bool).reshape(-1)
    if k < 2:
        raise ValueError(f"k 必须 ≥ 2，实际为 {k}")
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if min(n_pos, n_neg) < k:
        raise ValueError(f"{scale or '标签'}: 类别样本过少（正 {n_pos} / 负 {n_neg}），无法做 {k} 折分层划分")

    splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    aucs, curves, sizes = [], [], []
    for fold, (train_idx, test_idx) in enumerate(splitter.split(X, y)):
        model = train_linear_svm(X[train_idx], y[train_idx], c_reg=c_reg, seed=seed)
        auc, curve = roc_auc(model.decision_function(X[test_idx]), y[test_idx])
        aucs.append(auc)
        curves.append(curve)
        sizes.append((len(train_idx), len(test_idx), int(y[test_idx].sum())))
        print(f"[CV] {scale} 第 {fold + 1}/{k} 折: AUC={auc:.4f}", flush=True)

    report = CvReport(scale, aucs, float(np.mean(aucs)), float(np.std(aucs)), curves, sizes)
    print(f"[CV] {scale} AUC 均值={report.auc_mean:.4f}, 标准差={report.auc_std:.4f}", flush=True)
    return report


def mean_roc(report, n_points=CLASSIFIER_CONFIG['roc_grid_points']):
    """
    各折 ROC 曲线插值到公共 FPR 网格后取平均

    Returns:
        (fpr_grid, mean_tpr)
    """
    grid = np.linspace(0.0, 1.0, n_points)
    tprs = []
    for curve in report.roc_points:
        tpr = np.interp(grid, curve.fpr, curve.tpr)
        tpr[0] = 0.0
        tprs.append(tpr)
    mean_tpr = np.mean(tprs, axis=0)
    mean_tpr[-1] = 1.0
    return grid, mean_tpr


def labels_for_scale(records, scale):
    return np.array([binarize(scale, r.score(scale)) for r in records], dtype=bool)


def demographics_matrix(records):
    """人口学特征矩阵：(年龄, 性别 0=男/1=女)"""
    return np.array([[r.age_years, 1.0 if r.gender is Gender.FEMALE else 0.0] for r in records])


def demographics_baseline(records, scale, k=CLASSIFIER_CONFIG['k_folds'],
                          c_reg=CLASSIFIER_CONFIG['c_reg'], seed=CLASSIFIER_CONFIG['seed']):
    """仅用年龄与性别作为输入的交叉验证基线"""
    scale = Scale.parse(scale)
    return kfold_cv(demographics_matrix(records), labels_for_scale(records, scale),
                    k=k, c_reg=c_reg, seed=seed, scale=scale.value)
