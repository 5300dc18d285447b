"""
交互路径模块
由说话人分段和头部轨迹构建对话路径与运动路径，并组装命名特征向量
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from config import MOVEMENT_CONFIG, SPEECH_CONFIG
from src.signature_core import as_path, log_signature


class Speaker(str, Enum):
    PATIENT = 'patient'
    CLINICIAN = 'clinician'


# 对话路径坐标轴：(静默, 临床医生, 患者)
SILENCE_AXIS, CLINICIAN_AXIS, PATIENT_AXIS = 0, 1, 2
_SPEAKER_AXIS = {Speaker.CLINICIAN: CLINICIAN_AXIS, Speaker.PATIENT: PATIENT_AXIS}

SPEECH_STAT_NAMES = (
    'p_cnt', 'c_cnt', 's_cnt',
    'p_crel', 'c_crel', 's_crel',
    'p_t', 'c_t', 's_t',
    'p_r', 'c_r', 's_r',
    'p_mean', 'p_std', 'c_mean', 'c_std',
)


@dataclass(frozen=True)
class SpeechSegment:
    """说话人分离得到的一个语音轮次"""

    start_s: float
    end_s: float
    speaker: Speaker

    def __post_init__(self):
        object.__setattr__(self, 'speaker', Speaker(self.speaker))
        if not (np.isfinite(self.start_s) and np.isfinite(self.end_s)):
            raise ValueError(f"分段时间必须为有限值: {self}")
        if not 0 <= self.start_s < self.end_s:
            raise ValueError(f"分段时间非法（需 0 ≤ start < end）: {self}")


@dataclass
class TurnPath:
    """三维累积时长路径：(累计静默, 累计临床医生发言, 累计患者发言)"""

    points: np.ndarray


@dataclass
class HeadTrack:
    """单人逐帧头部位置（像素）"""

    person: Speaker
    frames: np.ndarray
    xy: np.ndarray

    def __post_init__(self):
        self.person = Speaker(self.person)
        self.frames = np.asarray(self.frames, dtype=np.int64).reshape(-1)
        self.xy = np.asarray(self.xy, dtype=np.float64).reshape(-1, 2)
        if self.frames.size != self.xy.shape[0]:
            raise ValueError(f"{self.person.value} 轨迹的帧号与坐标数量不一致")
        if np.any(np.diff(self.frames) <= 0):
            raise ValueError(f"{self.person.value} 轨迹的帧号必须严格递增")
        if not np.all(np.isfinite(self.xy)):
            raise ValueError(f"{self.person.value} 轨迹含有非有限坐标")

    def truncated(self, max_frames):
        keep = self.frames < max_frames
        return HeadTrack(self.person, self.frames[keep], self.xy[keep])


@dataclass
class MovementPaths:
    """对齐后的运动路径"""

    frames: np.ndarray
    patient_path: np.ndarray     # (x_p, y_p, t)
    joint_path: np.ndarray       # (x_p, y_p, x_c, y_c)
    max_frames: int


@dataclass
class FeatureVector:
    """命名特征向量"""

    names: tuple
    values: np.ndarray

    def __post_init__(self):
        self.names = tuple(self.names)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if len(self.names) != self.values.size:
            raise ValueError(f"特征名数量 {len(self.names)} 与取值数量 {self.values.size} 不一致")
        if len(set(self.names)) != len(self.names):
            raise ValueError("特征名必须唯一")
        if not np.all(np.isfinite(self.values)):
            bad = [n for n, v in zip(self.names, self.values) if not np.isfinite(v)]
            raise ValueError(f"特征含有非有限值: {bad}")

    def __len__(self):
        return len(self.names)

    def __getitem__(self, name):
        return float(self.values[self.names.index(name)])

    def concat(self, other):
        return FeatureVector(self.names + other.names, np.concatenate([self.values, other.values]))

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))


# ---------------------------------------------------------------------------
# 语音轮次
# ---------------------------------------------------------------------------

def _turn_intervals(segments, window_s):
    """
    把分段切分为按时间顺序的区间 [(坐标轴, 时长), ...]

    分段截断到 [0, window_s]，相邻分段之间（以及首尾）的空隙记为静默。

    Raises:
        ValueError: 窗口非正、分段未排序或相互重叠
    """
    if not window_s > 0:
        raise ValueError(f"窗口长度必须为正: {window_s}")

    for prev, curr in zip(segments, segments[1:]):
        if curr.start_s < prev.end_s:
            raise ValueError(f"分段重叠或未排序: {prev} 与 {curr}")

    intervals = []
    cursor = 0.0
    for seg in segments:
        if seg.start_s >= window_s:
            break
        end = min(seg.end_s, window_s)
        if seg.start_s > cursor:
            intervals.append((SILENCE_AXIS, seg.start_s - cursor))
        intervals.append((_SPEAKER_AXIS[seg.speaker], end - seg.start_s))
        cursor = end
    if cursor < window_s:
        intervals.append((SILENCE_AXIS, window_s - cursor))
    return intervals


def build_turn_path(segments, window_s=SPEECH_CONFIG['window_s']):
    """
    构建三维对话路径

    Args:
        segments: 按时间排序、互不重叠的 SpeechSegment 列表
        window_s: 分析窗口（秒）

    Returns:
        TurnPath，每个区间追加一个点，仅对应坐标增加该区间时长
    """
    intervals = _turn_intervals(list(segments), window_s)
    points = np.zeros((len(intervals) + 1, 3))
    for i, (axis, duration) in enumerate(intervals, start=1):
        points[i] = points[i - 1]
        points[i, axis] += duration
    return TurnPath(points)


def speech_stats(segments, window_s=SPEECH_CONFIG['window_s']):
    """
    语音轮次基础统计量（16 个）

    次数、相对次数、累计时长、时长占比，以及患者/临床医生轮次时长的均值和
    总体标准差；没有轮次的说话人均值和标准差记为 0。

    Returns:
        FeatureVector
    """
    intervals = _turn_intervals(list(segments), window_s)
    durations = {axis: [d for a, d in intervals if a == axis]
                 for axis in (PATIENT_AXIS, CLINICIAN_AXIS, SILENCE_AXIS)}

    counts = {axis: len(ds) for axis, ds in durations.items()}
    total_count = sum(counts.values())
    # 与 build_turn_path 相同的累加顺序，保证与路径终点逐位一致
    totals = {axis: 0.0 for axis in durations}
    for axis, duration in intervals:
        totals[axis] += duration

    def _mean_std(ds):
        if not ds:
            return 0.0, 0.0
        return float(np.mean(ds)), float(np.std(ds))

    p_mean, p_std = _mean_std(durations[PATIENT_AXIS])
    c_mean, c_std = _mean_std(durations[CLINICIAN_AXIS])
    order = (PATIENT_AXIS, CLINICIAN_AXIS, SILENCE_AXIS)
    values = (
        [counts[a] for a in order]
        + [counts[a] / total_count for a in order]
        + [totals[a] for a in order]
        + [totals[a] / window_s for a in order]
        + [p_mean, p_std, c_mean, c_std]
    )
    return FeatureVector(SPEECH_STAT_NAMES, values)


def speech_logsig_features(turn_path, depth=SPEECH_CONFIG['logsig_depth'],
                           drop_level1=SPEECH_CONFIG['drop_level1']):
    """
    对话路径的对数签名特征，命名为 speech_path_L<层>_<词>

    Args:
        turn_path: TurnPath
        depth: 截断深度，默认 4（三维时共 32 个坐标）
        drop_level1: 去掉 3 个一阶坐标（剩 29 个）

    Returns:
        FeatureVector
    """
    logsig = log_signature(turn_path.points, depth)
    names = logsig.names('speech_path')
    values = logsig.coords
    if drop_level1:
        keep = [len(w) > 1 for w in logsig.words]
        names = [n for n, k in zip(names, keep) if k]
        values = values[np.array(keep)]
    return FeatureVector(names, values)


# ---------------------------------------------------------------------------
# 头部运动
# ---------------------------------------------------------------------------

def build_movement_paths(patient, clinician, max_frames=MOVEMENT_CONFIG['max_frames'],
                         fps=MOVEMENT_CONFIG['fps']):
    """
    对齐患者与临床医生轨迹并构建运动路径

    两条轨迹截断到 frame < max_frames，按帧号取交集对齐，不插值缺失帧。

    Args:
        patient, clinician: HeadTrack
        max_frames: 最大帧数
        fps: 帧率

    Returns:
        MovementPaths：三维 (x_p, y_p, frame/fps) 与四维 (x_p, y_p, x_c, y_c) 路径

    Raises:
        ValueError: 参数非法或帧号交集为空
    """
    if max_frames <= 0 or fps <= 0:
        raise ValueError(f"max_frames 和 fps 必须为正: max_frames={max_frames}, fps={fps}")
    if patient.frames.size == 0 or clinician.frames.size == 0:
        raise ValueError("轨迹不能为空")

    p = patient.truncated(max_frames)
    c = clinician.truncated(max_frames)
    frames, p_idx, c_idx = np.intersect1d(p.frames, c.frames, assume_unique=True, return_indices=True)
    if frames.size == 0:
        raise ValueError("患者与临床医生轨迹没有公共帧，无法对齐")

    p_xy = p.xy[p_idx]
    c_xy = c.xy[c_idx]
    patient_path = as_path(np.column_stack([p_xy, frames / fps]))
    joint_path = as_path(np.column_stack([p_xy, c_xy]))
    return MovementPaths(frames, patient_path, joint_path, int(max_frames))


def movement_features(paths, patient_track, depth=MOVEMENT_CONFIG['logsig_depth']):
    """
    运动特征：患者位置标准差 + 两条路径的对数签名

    Args:
        paths: build_movement_paths 的结果
        patient_track: 患者 HeadTrack（标准差按 frame < max_frames 的样本计算）
        depth: 截断深度，默认 3

    Returns:
        FeatureVector：x_p_std, y_p_std, video_p_L*_*, video_joint_L*_*
    """
    xy = patient_track.truncated(paths.max_frames).xy
    if xy.shape[0] == 0:
        raise ValueError("患者轨迹在 max_frames 内没有样本")
    stds = np.std(xy, axis=0)
    stats = FeatureVector(('x_p_std', 'y_p_std'), stds)

    patient_logsig = log_signature(paths.patient_path, depth)
    joint_logsig = log_signature(paths.joint_path, depth)
    return (stats
            .concat(FeatureVector(patient_logsig.names('video_p'), patient_logsig.coords))
            .concat(FeatureVector(joint_logsig.names('video_joint'), joint_logsig.coords)))


class SessionFeatureExtractor:
    """会话特征提取器，负责语音与运动两路特征的组装"""

    def __init__(self, window_s=None, speech_depth=None, drop_level1=None,
                 max_frames=None, fps=None, movement_depth=None):
        """
        初始化特征提取器，未给出的参数从配置加载

        Args:
            window_s: 语音分析窗口（秒）
            speech_depth: 对话路径截断深度
            drop_level1: 是否去掉对话路径的一阶坐标
            max_frames: 运动轨迹最大帧数
            fps: 帧率
            movement_depth: 运动路径截断深度
        """
        self.window_s = SPEECH_CONFIG['window_s'] if window_s is None else window_s
        self.speech_depth = SPEECH_CONFIG['logsig_depth'] if speech_depth is None else speech_depth
        self.drop_level1 = SPEECH_CONFIG['drop_level1'] if drop_level1 is None else drop_level1
        self.max_frames = MOVEMENT_CONFIG['max_frames'] if max_frames is None else max_frames
        self.fps = MOVEMENT_CONFIG['fps'] if fps is None else fps
        self.movement_depth = MOVEMENT_CONFIG['logsig_depth'] if movement_depth is None else movement_depth

    def speech(self, segments):
        """语音统计量 + 对话路径对数签名"""
        segments = list(segments)
        stats = speech_stats(segments, self.window_s)
        turn_path = build_turn_path(segments, self.window_s)
        return stats.concat(speech_logsig_features(turn_path, self.speech_depth, self.drop_level1))

    def movement(self, patient_track, clinician_track):
        """运动统计量 + 两条运动路径的对数签名"""
        paths = build_movement_paths(patient_track, clinician_track, self.max_frames, self.fps)
        return movement_features(paths, patient_track, self.movement_depth)

    def extract(self, segments, patient_track, clinician_track):
        """
        单次会话的完整特征向量

        默认配置下共 16 + 32 + 2 + 14 + 30 = 94 个特征（drop_level1 时 91 个）。
        """
        return self.speech(segments).concat(self.movement(patient_track, clinician_track))


def session_features(segments, patient_track, clinician_track, **settings):
    """按给定参数（其余取配置默认值）提取单次会话的特征向量"""
    return SessionFeatureExtractor(**settings).extract(segments, patient_track, clinician_track)


def feature_group(name):
    """特征所属分组：speech_stats / speech_path / video_stats / video_path"""
    if name in SPEECH_STAT_NAMES:
        return 'speech_stats'
    if name.startswith('speech_path_'):
        return 'speech_path'
    if name in ('x_p_std', 'y_p_std'):
        return 'video_stats'
    if name.startswith('video_p_') or name.startswith('video_joint_'):
        return 'video_path'
    raise ValueError(f"未知特征名: {name}")
