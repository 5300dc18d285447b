"""
命令行入口
子命令：synth（生成合成队列）、features（特征提取）、correlate（自助法相关分析）、
classify（交叉验证分类）
"""
import argparse
import glob
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import yaml

from config import RUN_DEFAULTS, SYNTH_CONFIG
from src.classifier import Scale, band_counts, demographics_baseline, kfold_cv, labels_for_scale
from src.interaction_paths import SessionFeatureExtractor
from src.session_io import (read_feature_matrix, read_scores, read_segments, read_tracks,
                            write_band_table, write_cohort, write_correlation_matrix,
                            write_correlation_report, write_cv_report, write_feature_matrix,
                            write_json, write_roc_table)
from src.stats_analysis import bootstrap_correlations, feature_correlation_matrix
from src.synth_cohort import CohortSpec, generate_cohort

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3

FEATURE_SETS = ('interaction', 'demographics')


class UsageError(Exception):
    """命令行用法错误（退出码 2）"""


@dataclass
class RunConfig:
    """一次运行的完整配置，键与 RUN_DEFAULTS 及配置文件一致"""

    data_dir: str
    segments_dir: Optional[str]
    tracks_dir: Optional[str]
    scores: Optional[str]
    feature_matrix: Optional[str]
    out: str
    speech_window_s: float
    movement_max_frames: int
    fps: float
    speech_logsig_depth: int
    movement_logsig_depth: int
    drop_level1: bool
    n_boot: int
    ci_level: float
    k_folds: int
    c_reg: float
    seed: int
    jobs: int

    def __post_init__(self):
        positive = ('speech_window_s', 'movement_max_frames', 'fps', 'speech_logsig_depth',
                    'movement_logsig_depth', 'n_boot', 'c_reg', 'jobs')
        for key in positive:
            if not getattr(self, key) > 0:
                raise UsageError(f"{key} 必须为正，实际为 {getattr(self, key)}")
        if not 0 < self.ci_level < 1:
            raise UsageError(f"ci_level 必须在 (0, 1) 内，实际为 {self.ci_level}")
        if self.k_folds < 2:
            raise UsageError(f"k_folds 必须 ≥ 2，实际为 {self.k_folds}")
        self.segments_dir = self.segments_dir or os.path.join(self.data_dir, 'segments')
        self.tracks_dir = self.tracks_dir or os.path.join(self.data_dir, 'tracks')
        self.scores = self.scores or os.path.join(self.data_dir, 'scores.csv')
        self.feature_matrix = self.feature_matrix or os.path.join(self.out, 'features.csv')

    def feature_settings(self):
        return {
            'window_s': self.speech_window_s,
            'speech_depth': self.speech_logsig_depth,
            'drop_level1': self.drop_level1,
            'max_frames': self.movement_max_frames,
            'fps': self.fps,
            'movement_depth': self.movement_logsig_depth,
        }


def _load_config_file(path):
    if not os.path.exists(path):
        raise UsageError(f"配置文件不存在: {path}")
    with open(path, encoding='utf-8') as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise UsageError(f"配置文件必须是键值映射: {path}")
    unknown = sorted(set(data) - set(RUN_DEFAULTS))
    if unknown:
        raise UsageError(f"配置文件含未知键: {unknown}")
    return data


def resolve_config(args):
    """优先级：命令行参数 > 配置文件 > RUN_DEFAULTS"""
    values = dict(RUN_DEFAULTS)
    if getattr(args, 'config', None):
        values.update(_load_config_file(args.config))
    for key in RUN_DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    try:
        return RunConfig(**values)
    except TypeError as e:
        raise UsageError(f"配置值非法: {e}") from e


# ---------------------------------------------------------------------------
# 子命令
# ---------------------------------------------------------------------------

def cmd_synth(n, seed, effect, out, session_s=SYNTH_CONFIG['session_s'], fps=SYNTH_CONFIG['fps'],
              n_frames=SYNTH_CONFIG['n_frames'], score_noise_sd=SYNTH_CONFIG['score_noise_sd']):
    """生成合成队列并按输入格式写出"""
    try:
        spec = CohortSpec(n_subjects=n, seed=seed, effect_size=effect, session_s=session_s,
                          fps=fps, n_frames=n_frames, score_noise_sd=score_noise_sd)
    except ValueError as e:
        raise UsageError(str(e)) from e

    cohort = generate_cohort(spec)
    try:
        os.makedirs(out, exist_ok=True)
        write_cohort(out, cohort)
    except OSError as e:
        raise OSError(f"无法写入输出目录 {out}: {e}") from e
    print(f"[CLI] 合成队列已写入: {out}", flush=True)
    return out


def _extract_subject(task):
    """单个受试者的特征提取，失败时返回原因而不是抛出"""
    sid, seg_path, track_path, settings = task
    try:
        segments = read_segments(seg_path)
        patient, clinician = read_tracks(track_path)
        return sid, SessionFeatureExtractor(**settings).extract(segments, patient, clinician), None
    except (OSError, ValueError, KeyError) as e:
        return sid, None, str(e)


def extract_features(config):
    """
    提取全部受试者的特征

    Returns:
        (subject_ids, vectors, skipped)，skipped 为 [(subject_id, 原因), ...]
    """
    if not os.path.isdir(config.segments_dir):
        raise FileNotFoundError(f"分段目录不存在: {config.segments_dir}")
    seg_files = sorted(glob.glob(os.path.join(config.segments_dir, '*.jsonl')))
    settings = config.feature_settings()
    tasks = []
    for seg_path in seg_files:
        sid = os.path.splitext(os.path.basename(seg_path))[0]
        tasks.append((sid, seg_path, os.path.join(config.tracks_dir, f"{sid}.csv"), settings))

    print(f"[特征提取] 共 {len(tasks)} 个受试者, 并行数 {config.jobs}", flush=True)
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_extract_subject, tasks))
    else:
        results = [_extract_subject(t) for t in tasks]

    ids, vectors, skipped = [], [], []
    for sid, vec, reason in results:
        if vec is None:
            print(f"[特征提取] ⚠ 跳过 {sid}: {reason}", file=sys.stderr, flush=True)
            skipped.append((sid, reason))
        else:
            ids.append(sid)
            vectors.append(vec)
    if not vectors:
        raise ValueError(f"没有可读取的受试者（{config.segments_dir}）")
    return ids, vectors, skipped


def cmd_features(config):
    """特征提取，写出 features.csv 与 features_meta.json"""
    ids, vectors, skipped = extract_features(config)
    os.makedirs(os.path.dirname(os.path.abspath(config.feature_matrix)), exist_ok=True)
    write_feature_matrix(config.feature_matrix, ids, vectors)
    meta_path = os.path.join(os.path.dirname(os.path.abspath(config.feature_matrix)), 'features_meta.json')
    write_json(meta_path, {
        'n_subjects': len(ids),
        'n_features': len(vectors[0]),
        'n_skipped': len(skipped),
        'skipped': [{'subject_id': sid, 'reason': reason} for sid, reason in skipped],
    })
    print(f"[特征提取] ✓ {len(ids)} 个受试者 × {len(vectors[0])} 个特征 -> {config.feature_matrix}", flush=True)
    return config.feature_matrix


def _load_features(config):
    if not os.path.exists(config.feature_matrix):
        print(f"[CLI] 特征矩阵不存在，先执行特征提取: {config.feature_matrix}", flush=True)
        cmd_features(config)
    return read_feature_matrix(config.feature_matrix)


def _join_scores(subject_ids, records):
    """按 subject_id 对齐特征行与分数记录"""
    by_id = {r.subject_id: r for r in records}
    rows, joined = [], []
    for i, sid in enumerate(subject_ids):
        if sid in by_id:
            rows.append(i)
            joined.append(by_id[sid])
        else:
            print(f"[CLI] ⚠ {sid} 没有分数记录，已忽略", file=sys.stderr, flush=True)
    if not joined:
        raise ValueError("特征矩阵与分数文件没有共同的受试者")
    return np.array(rows, dtype=int), joined


def _parse_scales(scale):
    if str(scale).upper() == 'ALL':
        return list(Scale)
    try:
        return [Scale.parse(scale)]
    except ValueError as e:
        raise UsageError(str(e)) from e


def cmd_correlate(config, scale, matrix=False):
    """自助法 Spearman 相关分析，每个量表写出一个报告"""
    scales = _parse_scales(scale)
    ids, names, X = _load_features(config)
    rows, records = _join_scores(ids, read_scores(config.scores))
    X = X[rows]
    os.makedirs(config.out, exist_ok=True)

    paths = []
    for s in scales:
        target = np.array([r.score(s) for r in records], dtype=np.float64)
        summaries = bootstrap_correlations(X, names, target, n_boot=config.n_boot,
                                           ci_level=config.ci_level, seed=config.seed,
                                           n_jobs=config.jobs)
        path = os.path.join(config.out, f"correlation_{s.value}.csv")
        write_correlation_report(path, summaries)
        paths.append(path)
        print(f"[CLI] 相关性报告: {path}", flush=True)

    if matrix:
        path = os.path.join(config.out, 'feature_correlation.csv')
        write_correlation_matrix(path, names, feature_correlation_matrix(X))
        paths.append(path)
    return paths


def cmd_classify(config, scale, feature_set='interaction'):
    """交叉验证分类，写出分档表、CV 报告与 ROC 表"""
    if feature_set not in FEATURE_SETS:
        raise UsageError(f"未知特征集 '{feature_set}'，可选: {', '.join(FEATURE_SETS)}")
    scales = _parse_scales(scale)
    records = read_scores(config.scores)
    if feature_set == 'interaction':
        ids, _, X = _load_features(config)
        rows, records = _join_scores(ids, records)
        X = X[rows]
    os.makedirs(config.out, exist_ok=True)

    reports = []
    for s in scales:
        y = labels_for_scale(records, s)
        counts = band_counts(records, s)
        write_band_table(os.path.join(config.out, f"bands_{s.value}.csv"), s, counts)
        summary = ', '.join(f"{level.value}={n}" for level, n in counts.items())
        print(f"[CV] {s.value} 分档: {summary}; 正类 {int(y.sum())}/{y.size}", flush=True)
        if y.all() or not y.any():
            raise ValueError(f"{s.value}: 二值化后只有一个类别，无法分类")
        if feature_set == 'interaction':
            report = kfold_cv(X, y, k=config.k_folds, c_reg=config.c_reg, seed=config.seed, scale=s.value)
        else:
            report = demographics_baseline(records, s, k=config.k_folds, c_reg=config.c_reg, seed=config.seed)
        write_cv_report(os.path.join(config.out, f"cv_{s.value}_{feature_set}.csv"), report, feature_set)
        write_roc_table(os.path.join(config.out, f"roc_{s.value}_{feature_set}.csv"), report)
        reports.append(report)
    return reports


# ---------------------------------------------------------------------------
# 参数解析
# ---------------------------------------------------------------------------

def _add_run_options(parser):
    parser.add_argument('--config', help='YAML 配置文件（键同 RunConfig，命令行参数优先）')
    parser.add_argument('--data', dest='data_dir', help='输入目录（含 segments/、tracks/、scores.csv）')
    parser.add_argument('--segments-dir', dest='segments_dir')
    parser.add_argument('--tracks-dir', dest='tracks_dir')
    parser.add_argument('--scores', dest='scores')
    parser.add_argument('--feature-matrix', dest='feature_matrix', help='特征矩阵 CSV，默认 <out>/features.csv')
    parser.add_argument('--out', dest='out', help='输出目录')
    parser.add_argument('--speech-window-s', dest='speech_window_s', type=float)
    parser.add_argument('--movement-max-frames', dest='movement_max_frames', type=int)
    parser.add_argument('--fps', dest='fps', type=float)
    parser.add_argument('--speech-logsig-depth', dest='speech_logsig_depth', type=int)
    parser.add_argument('--movement-logsig-depth', dest='movement_logsig_depth', type=int)
    parser.add_argument('--drop-level1', dest='drop_level1', action='store_const', const=True, default=None,
                        help='去掉语音对数签名的 3 个一阶坐标')
    parser.add_argument('--n-boot', dest='n_boot', type=int)
    parser.add_argument('--ci-level', dest='ci_level', type=float)
    parser.add_argument('--k-folds', dest='k_folds', type=int)
    parser.add_argument('--c-reg', dest='c_reg', type=float)
    parser.add_argument('--seed', dest='seed', type=int)
    parser.add_argument('--jobs', dest='jobs', type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog='run.py', description='医患交互路径签名特征与分析流程')
    sub = parser.add_subparsers(dest='command', required=True)

    synth = sub.add_parser('synth', help='生成合成队列')
    synth.add_argument('--n', type=int, required=True, help='受试者数（≥ 8）')
    synth.add_argument('--seed', type=int, default=0)
    synth.add_argument('--effect', type=float, default=1.0, help='植入效应强度')
    synth.add_argument('--session-s', type=float, default=SYNTH_CONFIG['session_s'])
    synth.add_argument('--fps', type=float, default=SYNTH_CONFIG['fps'])
    synth.add_argument('--n-frames', type=int, default=SYNTH_CONFIG['n_frames'])
    synth.add_argument('--score-noise-sd', type=float, default=SYNTH_CONFIG['score_noise_sd'])
    synth.add_argument('--out', required=True, help='输出目录')

    features = sub.add_parser('features', help='提取特征矩阵')
    _add_run_options(features)

    correlate = sub.add_parser('correlate', help='自助法相关分析')
    _add_run_options(correlate)
    correlate.add_argument('--scale', required=True, help='WISC / TEA / NEPSY / CELF / ALL')
    correlate.add_argument('--matrix', action='store_true', help='同时写出特征间相关矩阵')

    classify = sub.add_parser('classify', help='交叉验证分类')
    _add_run_options(classify)
    classify.add_argument('--scale', required=True, help='WISC / TEA / NEPSY / CELF / ALL')
    classify.add_argument('--features', dest='feature_set', choices=FEATURE_SETS, default='interaction')
    return parser


def main(argv=None):
    """解析参数并执行子命令，返回退出码"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        if args.command == 'synth':
            cmd_synth(args.n, args.seed, args.effect, args.out, session_s=args.session_s, fps=args.fps,
                      n_frames=args.n_frames, score_noise_sd=args.score_noise_sd)
            return EXIT_OK

        config = resolve_config(args)
        print(f"[CLI] 配置: {asdict(config)}", flush=True)
        if args.command == 'features':
            cmd_features(config)
        elif args.command == 'correlate':
            cmd_correlate(config, args.scale, matrix=args.matrix)
        elif args.command == 'classify':
            cmd_classify(config, args.scale, args.feature_set)
        return EXIT_OK
    except UsageError as e:
        print(f"[CLI] 用法错误: {e}", file=sys.stderr, flush=True)
        return EXIT_USAGE
    except (ValueError, OSError, KeyError) as e:
        print(f"[CLI] 数据错误: {e}", file=sys.stderr, flush=True)
        return EXIT_DATA
