"""
合成队列模块
生成带有可控“植入效应”的合成会话（语音分段、头部轨迹、分数、人口学信息），
用于在没有临床数据时端到端验证整条流程。生成模型仅作验证工具，不代表临床结论。
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter
from scipy.stats import norm

from config import SCALE_CONFIG, SYNTH_CONFIG
from src.classifier import Scale, ScoreRecord
from src.interaction_paths import HeadTrack, SpeechSegment, Speaker

# 各随机数子流的编号，保证改变 effect_size 不会改变其它子流的抽样
_STREAM_ABILITY, _STREAM_SPEECH, _STREAM_MOTION, _STREAM_SCORES, _STREAM_DEMO, _STREAM_STRATA = range(6)


@dataclass
class CohortSpec:
    """合成队列参数"""

    n_subjects: int
    seed: int = 0
    effect_size: float = 1.0
    session_s: float = SYNTH_CONFIG['session_s']
    fps: float = SYNTH_CONFIG['fps']
    n_frames: int = SYNTH_CONFIG['n_frames']
    score_noise_sd: float = SYNTH_CONFIG['score_noise_sd']

    def __post_init__(self):
        if self.n_subjects < 8:
            raise ValueError(f"n_subjects 至少为 8（交叉验证需要），实际为 {self.n_subjects}")
        if self.effect_size < 0:
            raise ValueError(f"effect_size 不能为负: {self.effect_size}")
        if self.session_s <= 0 or self.fps <= 0 or self.n_frames <= 0:
            raise ValueError("session_s、fps、n_frames 必须为正")
        if self.score_noise_sd < 0:
            raise ValueError(f"score_noise_sd 不能为负: {self.score_noise_sd}")


@dataclass
class Cohort:
    """生成结果，按受试者编号索引"""

    subject_ids: list
    segments: dict = field(repr=False)
    tracks: dict = field(repr=False)       # subject_id -> (patient, clinician)
    records: list = field(repr=False)
    abilities: np.ndarray = field(repr=False)


def subject_id(index):
    return f"S{index + 1:03d}"


def _rng(seed, index, stream):
    return np.random.default_rng([seed, index, stream])


def _generate_segments(rng, ability, spec):
    """
    交替生成临床医生与患者的语音轮次

    每个轮次固定消耗 3 个随机数（说话人、间隔、时长），能力只缩放时长，
    因此同一种子下 effect_size 改变时第 j 个轮次的随机来源不变。
    """
    conf = SYNTH_CONFIG
    gain = conf['speech_gain'] * spec.effect_size
    shape = conf['turn_shape']
    patient_turn = conf['patient_turn_s'] * np.exp(gain * ability)
    patient_latency = conf['patient_latency_s'] * np.exp(-gain * ability)

    segments = []
    cursor = 0.0
    previous = Speaker.PATIENT
    while True:
        u_speaker, u_gap, u_len = rng.random(), rng.gamma(shape), rng.gamma(shape)
        if previous is Speaker.CLINICIAN and u_speaker >= conf['clinician_repeat_p']:
            speaker = Speaker.PATIENT
            gap_mean, turn_mean = patient_latency, patient_turn
        else:
            speaker = Speaker.CLINICIAN
            gap_mean, turn_mean = conf['clinician_latency_s'], conf['clinician_turn_s']

        start = cursor + conf['min_gap_s'] + gap_mean * u_gap / shape
        if start >= spec.session_s:
            break
        end = min(start + turn_mean * u_len / shape, spec.session_s)
        if end > start:
            segments.append(SpeechSegment(float(start), float(end), speaker))
        cursor = end
        previous = speaker
        if end >= spec.session_s:
            break
    return segments


def _ar1(rng, n, sigma):
    phi = SYNTH_CONFIG['motion_phi']
    return lfilter([1.0], [1.0, -phi], rng.normal(0.0, sigma * np.sqrt(1 - phi ** 2), size=(n, 2)), axis=0)


def _generate_tracks(rng, ability, spec):
    """
    头部轨迹：AR(1) 抖动 + 临床医生对患者位移的滞后耦合，随机丢帧

    抖动幅度随能力缓慢下降，耦合强度随能力上升，二者都乘以 effect_size。
    jitter_gain 远小于 coupling_gain：高阶签名项按抖动幅度的幂次缩放。
    """
    conf = SYNTH_CONFIG
    n = spec.n_frames
    width, height = conf['frame_size']
    jitter_gain = conf['jitter_gain'] * spec.effect_size
    coupling_gain = conf['coupling_gain'] * spec.effect_size

    p_center = np.array([rng.uniform(0.2, 0.45) * width, rng.uniform(0.35, 0.65) * height])
    c_center = np.array([rng.uniform(0.55, 0.8) * width, rng.uniform(0.35, 0.65) * height])
    p_noise = _ar1(rng, n, 1.0)
    c_noise = _ar1(rng, n, 1.0)
    p_keep = rng.random(n) >= conf['dropout_p']
    c_keep = rng.random(n) >= conf['dropout_p']

    p_motion = conf['patient_jitter_px'] * np.exp(-jitter_gain * ability) * p_noise
    coupling = conf['coupling_base'] * (1.0 + np.tanh(coupling_gain * ability))
    lag = min(conf['coupling_lag_frames'], n)
    lagged = np.vstack([np.zeros((lag, 2)), p_motion[:-lag]]) if lag > 0 else p_motion
    c_motion = conf['clinician_jitter_px'] * c_noise + coupling * lagged

    frames = np.arange(n)
    patient = HeadTrack(Speaker.PATIENT, frames[p_keep], (p_center + p_motion)[p_keep])
    clinician = HeadTrack(Speaker.CLINICIAN, frames[c_keep], (c_center + c_motion)[c_keep])
    return patient, clinician


def _generate_scores(rng, ability, spec):
    """
    分数 = 常模均值 + 标准差 × (队列偏移 + 标准化(能力 + 噪声))，取整并截断到量表范围

    队列偏移见 SYNTH_CONFIG['score_offset_sd']，保证每个量表二值化后两类都有足够样本。
    """
    scores = {}
    spread = np.sqrt(1.0 + spec.score_noise_sd ** 2)
    for scale in Scale:
        conf = SCALE_CONFIG[scale.value]
        z = (ability + spec.score_noise_sd * rng.standard_normal()) / spread
        z += SYNTH_CONFIG['score_offset_sd'][scale.value]
        value = int(np.rint(conf['mean'] + conf['sd'] * z))
        scores[scale.value.lower()] = int(np.clip(value, conf['min'], conf['max']))
    return scores


def draw_abilities(n_subjects, seed):
    """
    分层抽取潜在能力

    把 (0, 1) 等分为 n_subjects 层，按种子打乱后每个受试者分到一层，在层内均匀取分位点
    再映射到标准正态。队列的能力分布因此贴近正态分位数，分档人数几乎不随种子波动。
    """
    strata = np.random.default_rng([seed, _STREAM_STRATA]).permutation(n_subjects)
    abilities = np.empty(n_subjects)
    for i in range(n_subjects):
        u = _rng(seed, i, _STREAM_ABILITY).random()
        q = np.clip((strata[i] + u) / n_subjects, 1e-12, 1.0 - 1e-12)
        abilities[i] = norm.ppf(q)
    return abilities


def _generate_demographics(rng):
    conf = SYNTH_CONFIG
    low, high = conf['age_range']
    age = float(np.clip(rng.normal(conf['age_mean'], conf['age_sd']), low, high))
    gender = 'male' if rng.random() < conf['male_p'] else 'female'
    return round(age, 2), gender


def generate_cohort(spec):
    """
    生成合成队列

    潜在能力按分层分位数抽取（见 draw_abilities）；轮次时长、应答延迟、头部抖动与耦合是能力的单调函数，
    强度由 effect_size 控制；分数是能力的仿射函数加噪声；人口学信息与能力独立。
    每个受试者的随机数由 (seed, 受试者序号, 子流) 派生，分层顺序只由 seed 决定，结果完全确定。

    Args:
        spec: CohortSpec

    Returns:
        Cohort
    """
    abilities = draw_abilities(spec.n_subjects, spec.seed)
    ids, segments, tracks, records = [], {}, {}, []
    for i in range(spec.n_subjects):
        sid = subject_id(i)
        ability = float(abilities[i])
        segments[sid] = _generate_segments(_rng(spec.seed, i, _STREAM_SPEECH), ability, spec)
        tracks[sid] = _generate_tracks(_rng(spec.seed, i, _STREAM_MOTION), ability, spec)
        scores = _generate_scores(_rng(spec.seed, i, _STREAM_SCORES), ability, spec)
        age, gender = _generate_demographics(_rng(spec.seed, i, _STREAM_DEMO))
        records.append(ScoreRecord(sid, age_years=age, gender=gender, **scores))
        ids.append(sid)

    print(f"[SYNTH] 生成 {spec.n_subjects} 个受试者 (seed={spec.seed}, effect={spec.effect_size})", flush=True)
    return Cohort(ids, segments, tracks, records, abilities)
