"""
路径签名核心模块
截断张量代数：分段线性路径签名（Chen 恒等式）、张量 log/exp、
Lyndon 词枚举以及对数签名在 Lyndon 括号基上的坐标
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_triangular

from config import SIGNATURE_CONFIG


@dataclass
class TruncatedTensor:
    """截断张量代数中的元素，按层存储稠密系数（第 k 层长度为 d^k）"""

    alphabet_size: int
    depth: int
    levels: list = field(repr=False)

    def __post_init__(self):
        d, depth = self.alphabet_size, self.depth
        if d < 1 or depth < 1:
            raise ValueError(f"字母表大小和截断深度必须为正整数: d={d}, depth={depth}")
        if len(self.levels) != depth + 1:
            raise ValueError(f"层数应为 {depth + 1}，实际为 {len(self.levels)}")

        levels = []
        for k, level in enumerate(self.levels):
            arr = np.asarray(level, dtype=np.float64).reshape(-1)
            if arr.size != d ** k:
                raise ValueError(f"第 {k} 层系数个数应为 {d ** k}，实际为 {arr.size}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"第 {k} 层含有非有限系数")
            levels.append(arr)
        self.levels = levels

    @classmethod
    def identity(cls, alphabet_size, depth):
        """单位元：level 0 为 1，其余层为 0"""
        levels = [np.zeros(alphabet_size ** k) for k in range(depth + 1)]
        levels[0][0] = 1.0
        return cls(alphabet_size, depth, levels)

    @classmethod
    def zeros(cls, alphabet_size, depth):
        return cls(alphabet_size, depth, [np.zeros(alphabet_size ** k) for k in range(depth + 1)])

    def coefficient(self, word):
        """
        读取某个词对应的系数

        Args:
            word: 字母从 1 开始的序列，或形如 "12" 的字符串

        Returns:
            系数值
        """
        letters = _parse_word(word)
        if len(letters) > self.depth:
            raise ValueError(f"词长 {len(letters)} 超过截断深度 {self.depth}")
        return float(self.levels[len(letters)][word_index(letters, self.alphabet_size)])

    def flatten(self):
        """按层拼接全部系数（含 level 0）"""
        return np.concatenate(self.levels)

    def max_abs_diff(self, other):
        _check_compatible(self, other)
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.levels, other.levels))


@dataclass
class LogSignature:
    """对数签名在 Lyndon 括号基上的坐标，按（长度，字典序）排列"""

    alphabet_size: int
    depth: int
    coords: np.ndarray
    words: tuple = field(repr=False)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64).reshape(-1)
        expected = sum(logsig_dim(self.alphabet_size, n) for n in range(1, self.depth + 1))
        if self.coords.size != expected or len(self.words) != expected:
            raise ValueError(f"对数签名坐标个数应为 {expected}，实际为 {self.coords.size}")

    def coordinate(self, word):
        letters = _parse_word(word)
        return float(self.coords[self.words.index(letters)])

    def level(self, n):
        """第 n 层的坐标"""
        mask = np.array([len(w) == n for w in self.words])
        return self.coords[mask]

    def names(self, prefix):
        """特征名：<prefix>_L<层>_<词>"""
        return [f"{prefix}_L{len(w)}_{word_label(w)}" for w in self.words]


def as_path(points):
    """
    校验并转换为路径数组

    Args:
        points: N 个 d 维点，形状 (N, d)

    Returns:
        float64 数组，形状 (N, d)

    Raises:
        ValueError: 点列表为空、维度不一致或含非有限值
    """
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"路径必须是非空的 (N, d) 点列，实际形状: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("路径中含有非有限坐标")
    return arr


def word_label(word):
    return ''.join(str(letter) for letter in word)


def word_index(letters, alphabet_size):
    """词（字母从 1 开始）在其所在层的扁平下标，首字母为最高位"""
    index = 0
    for letter in letters:
        if not 1 <= letter <= alphabet_size:
            raise ValueError(f"字母 {letter} 不在 1..{alphabet_size} 范围内")
        index = index * alphabet_size + (letter - 1)
    return index


def _parse_word(word):
    if isinstance(word, str):
        return tuple(int(ch) for ch in word)
    return tuple(int(letter) for letter in word)


def _check_compatible(a, b):
    if a.alphabet_size != b.alphabet_size or a.depth != b.depth:
        raise ValueError(
            f"张量不兼容: (d={a.alphabet_size}, depth={a.depth}) 与 "
            f"(d={b.alphabet_size}, depth={b.depth})"
        )


def signature_keys(alphabet_size, depth):
    """签名全部系数的词标签（含空词 ""），与 TruncatedTensor.flatten 顺序一致"""
    keys = ['']
    words = [()]
    for _ in range(depth):
        words = [w + (letter,) for w in words for letter in range(1, alphabet_size + 1)]
        keys.extend(word_label(w) for w in words)
    return keys


# ---------------------------------------------------------------------------
# 张量运算（按批次向量化，批次维在第 0 轴）
# ---------------------------------------------------------------------------

def _batch_segment_exp(increments, depth):
    """一批线段增量的张量指数，返回每层形状 (B, d^k) 的列表"""
    batch = increments.shape[0]
    levels = [np.ones((batch, 1))]
    for k in range(1, depth + 1):
        prev = levels[-1]
        levels.append((prev[:, :, None] * increments[:, None, :]).reshape(batch, -1) / k)
    return levels


def _batch_multiply(left, right, depth):
    """逐批截断张量积: out[k] = Σ_j left[j] ⊗ right[k-j]"""
    batch = left[0].shape[0]
    out = []
    for k in range(depth + 1):
        acc = None
        for j in range(k + 1):
            term = (left[j][:, :, None] * right[k - j][:, None, :]).reshape(batch, -1)
            acc = term if acc is None else acc + term
        out.append(acc)
    return out


def _multiply(a, b):
    levels = _batch_multiply([lvl[None, :] for lvl in a.levels],
                             [lvl[None, :] for lvl in b.levels], a.depth)
    return TruncatedTensor(a.alphabet_size, a.depth, [lvl[0] for lvl in levels])


def segment_signature(displacement, depth):
    """
    单条直线段的签名，即位移向量的张量指数

    Args:
        displacement: d 维位移向量
        depth: 截断深度 M

    Returns:
        TruncatedTensor，第 k 层系数为 Π_j v[w_j] / k!
    """
    v = np.asarray(displacement, dtype=np.float64).reshape(1, -1)
    if v.shape[1] == 0 or not np.all(np.isfinite(v)):
        raise ValueError("位移向量必须非空且为有限值")
    levels = _batch_segment_exp(v, depth)
    return TruncatedTensor(v.shape[1], depth, [lvl[0] for lvl in levels])


def chen_concat(a, b):
    """
    Chen 拼接：返回截断张量积 a ⊗ b

    Raises:
        ValueError: 字母表大小或深度不一致
    """
    _check_compatible(a, b)
    return _multiply(a, b)


def path_signature(path, depth):
    """
    分段线性路径的截断签名

    每段位移取张量指数后用 Chen 恒等式两两归并（结果与左折叠在数学上相同），
    零位移段等于单位元，直接跳过。第 1 层直接取终点减起点。

    Args:
        path: (N, d) 点列，N ≥ 1
        depth: 截断深度

    Returns:
        TruncatedTensor
    """
    points = as_path(path)
    d = points.shape[1]
    increments = np.diff(points, axis=0)
    increments = increments[np.any(increments != 0.0, axis=1)]
    if increments.shape[0] == 0:
        return TruncatedTensor.identity(d, depth)

    levels = _batch_segment_exp(increments, depth)
    while levels[0].shape[0] > 1:
        if levels[0].shape[0] % 2 == 1:
            pad = [np.zeros((1, d ** k)) for k in range(depth + 1)]
            pad[0][0, 0] = 1.0
            levels = [np.vstack([lvl, p]) for lvl, p in zip(levels, pad)]
        levels = _batch_multiply([lvl[0::2] for lvl in levels],
                                 [lvl[1::2] for lvl in levels], depth)

    result = [lvl[0] for lvl in levels]
    result[1] = points[-1] - points[0]
    return TruncatedTensor(d, depth, result)


def _check_level0(t, expected, what):
    atol = SIGNATURE_CONFIG['level0_atol']
    if abs(t.levels[0][0] - expected) > atol:
        raise ValueError(f"{what}: level 0 应为 {expected}，实际为 {t.levels[0][0]}")


def _scaled(t, factor):
    return TruncatedTensor(t.alphabet_size, t.depth, [lvl * factor for lvl in t.levels])


def _added(a, b):
    return TruncatedTensor(a.alphabet_size, a.depth, [x + y for x, y in zip(a.levels, b.levels)])


def tensor_log(t):
    """
    截断张量对数 log(1 + x) = Σ (-1)^{n+1} x^n / n

    Raises:
        ValueError: level 0 不为 1（非群元素）
    """
    _check_level0(t, 1.0, "tensor_log 需要群元素")
    x = TruncatedTensor(t.alphabet_size, t.depth, [np.zeros(1)] + t.levels[1:])
    result = TruncatedTensor.zeros(t.alphabet_size, t.depth)
    power = x
    for n in range(1, t.depth + 1):
        sign = 1.0 if n % 2 == 1 else -1.0
        result = _added(result, _scaled(power, sign / n))
        power = _multiply(power, x)
    return result


def tensor_exp(t):
    """
    截断张量指数 Σ x^n / n!

    Raises:
        ValueError: level 0 不为 0（非李代数元素）
    """
    _check_level0(t, 0.0, "tensor_exp 需要李代数元素")
    x = TruncatedTensor(t.alphabet_size, t.depth, [np.zeros(1)] + t.levels[1:])
    result = TruncatedTensor.identity(t.alphabet_size, t.depth)
    power = TruncatedTensor.identity(t.alphabet_size, t.depth)
    for n in range(1, t.depth + 1):
        power = _scaled(_multiply(power, x), 1.0 / n)
        result = _added(result, power)
    return result


# ---------------------------------------------------------------------------
# Lyndon 词与对数签名
# ---------------------------------------------------------------------------

def _mobius(n):
    result = 1
    p = 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            result = -result
        p += 1
    if n > 1:
        result = -result
    return result


def logsig_dim(d, n):
    """Witt 维数 L(d, n) = (1/n) Σ_{k|n} μ(n/k) d^k"""
    if d < 1 or n < 1:
        raise ValueError(f"d 和 n 必须为正整数: d={d}, n={n}")
    total = sum(_mobius(n // k) * d ** k for k in range(1, n + 1) if n % k == 0)
    return total // n


@lru_cache(maxsize=None)
def lyndon_words(d, max_depth):
    """
    枚举长度 ≤ max_depth 的全部 Lyndon 词（Duval 算法）

    Returns:
        字母从 1 开始的元组列表，按（长度，字典序）排序
    """
    if d < 1 or max_depth < 1:
        raise ValueError(f"d 和 max_depth 必须为正整数: d={d}, max_depth={max_depth}")
    words = []
    w = [-1]
    while w:
        w[-1] += 1
        words.append(tuple(letter + 1 for letter in w))
        m = len(w)
        while len(w) < max_depth:
            w.append(w[-m])
        while w and w[-1] == d - 1:
            w.pop()
    return tuple(sorted(words, key=lambda word: (len(word), word)))


def standard_factorization(word):
    """Lyndon 词的标准分解 w = uv，v 为最长的真 Lyndon 后缀"""
    if len(word) < 2:
        raise ValueError(f"单字母词没有标准分解: {word}")
    v = min(word[i:] for i in range(1, len(word)))
    return word[:len(word) - len(v)], v


def lyndon_bracket(word):
    """标准括号化，例如 (1,1,2) -> [1,[1,2]]"""
    word = _parse_word(word)
    if len(word) == 1:
        return word[0]
    u, v = standard_factorization(word)
    return [lyndon_bracket(u), lyndon_bracket(v)]


@lru_cache(maxsize=None)
def _bracket_expansion(word, d):
    """Lyndon 括号展开到张量代数第 len(word) 层的稠密向量"""
    if len(word) == 1:
        vec = np.zeros(d)
        vec[word[0] - 1] = 1.0
        return vec
    u, v = standard_factorization(word)
    pu, pv = _bracket_expansion(u, d), _bracket_expansion(v, d)
    return np.outer(pu, pv).ravel() - np.outer(pv, pu).ravel()


@lru_cache(maxsize=None)
def _level_system(d, n):
    """第 n 层的单位下三角系统：行、列均为按字典序排列的 Lyndon 词"""
    words = [w for w in lyndon_words(d, n) if len(w) == n]
    rows = np.array([word_index(w, d) for w in words], dtype=int)
    matrix = np.column_stack([_bracket_expansion(w, d)[rows] for w in words]) if words else np.zeros((0, 0))
    return tuple(words), rows, matrix


def project_to_lyndon(log_tensor):
    """
    将李代数元素（张量对数）投影到 Lyndon 括号基

    括号展开关于词序是单位三角的，因此只需对每层做一次回代。

    Returns:
        LogSignature
    """
    _check_level0(log_tensor, 0.0, "Lyndon 投影需要李代数元素")
    d, depth = log_tensor.alphabet_size, log_tensor.depth
    coords = []
    words = []
    for n in range(1, depth + 1):
        level_words, rows, matrix = _level_system(d, n)
        if not level_words:
            continue
        rhs = log_tensor.levels[n][rows]
        coords.append(solve_triangular(matrix, rhs, lower=True, unit_diagonal=True))
        words.extend(level_words)
    return LogSignature(d, depth, np.concatenate(coords), tuple(words))


def log_signature(path, depth):
    """
    路径的对数签名（Lyndon 基坐标）

    Args:
        path: (N, d) 点列
        depth: 截断深度

    Returns:
        LogSignature，坐标个数为 Σ_{n≤depth} L(d, n)
    """
    return project_to_lyndon(tensor_log(path_signature(path, depth)))
