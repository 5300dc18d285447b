"""
数据读写模块
会话输入格式（JSON Lines 分段、CSV 轨迹、CSV 分数）与报告输出（CSV，17 位有效数字）
"""
import json
import os

import numpy as np
import pandas as pd

from src.classifier import ScoreRecord, mean_roc, positive_bands
from src.interaction_paths import HeadTrack, SpeechSegment, Speaker, feature_group

FLOAT_FORMAT = '%.17g'
TRACK_COLUMNS = ['frame', 'person', 'x', 'y']
SCORE_COLUMNS = ['subject_id', 'wisc', 'tea', 'nepsy', 'celf', 'age_years', 'gender']


def _write_csv(df, path):
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')


# ---------------------------------------------------------------------------
# 输入格式
# ---------------------------------------------------------------------------

def write_segments(path, segments):
    """每行一个 {"start_s", "end_s", "speaker"} 对象"""
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for seg in segments:
            f.write(json.dumps({'start_s': seg.start_s, 'end_s': seg.end_s,
                                'speaker': seg.speaker.value}) + '\n')


def read_segments(path):
    """
    读取 JSON Lines 分段文件

    Raises:
        FileNotFoundError: 文件不存在
        ValueError: 行格式非法
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"分段文件不存在: {path}")
    segments = []
    with open(path, encoding='utf-8') as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                segments.append(SpeechSegment(float(obj['start_s']), float(obj['end_s']), obj['speaker']))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ValueError(f"{path} 第 {line_no} 行无法解析: {e}") from e
    return segments


def write_tracks(path, patient, clinician):
    frames = []
    for track in (patient, clinician):
        frames.append(pd.DataFrame({
            'frame': track.frames,
            'person': track.person.value,
            'x': track.xy[:, 0],
            'y': track.xy[:, 1],
        }))
    _write_csv(pd.concat(frames, ignore_index=True)[TRACK_COLUMNS], path)


def read_tracks(path):
    """
    读取轨迹 CSV（表头 frame,person,x,y）

    Returns:
        (patient, clinician) 两条 HeadTrack
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"轨迹文件不存在: {path}")
    df = pd.read_csv(path)
    missing = set(TRACK_COLUMNS) - set(df.columns)
    if missing:
        raise ValueError(f"{path} 缺少列: {sorted(missing)}")

    tracks = {}
    for person in Speaker:
        rows = df[df['person'] == person.value].sort_values('frame')
        if rows.empty:
            raise ValueError(f"{path} 中没有 {person.value} 的轨迹")
        tracks[person] = HeadTrack(person, rows['frame'].to_numpy(), rows[['x', 'y']].to_numpy())
    return tracks[Speaker.PATIENT], tracks[Speaker.CLINICIAN]


def write_scores(path, records):
    df = pd.DataFrame([{
        'subject_id': r.subject_id, 'wisc': r.wisc, 'tea': r.tea, 'nepsy': r.nepsy,
        'celf': r.celf, 'age_years': r.age_years, 'gender': r.gender.value,
    } for r in records], columns=SCORE_COLUMNS)
    _write_csv(df, path)


def read_scores(path):
    """读取分数 CSV，返回 ScoreRecord 列表"""
    if not os.path.exists(path):
        raise FileNotFoundError(f"分数文件不存在: {path}")
    df = pd.read_csv(path, dtype={'subject_id': str})
    missing = set(SCORE_COLUMNS) - set(df.columns)
    if missing:
        raise ValueError(f"{path} 缺少列: {sorted(missing)}")
    return [ScoreRecord(row.subject_id, int(row.wisc), int(row.tea), int(row.nepsy), int(row.celf),
                        float(row.age_years), row.gender)
            for row in df.itertuples(index=False)]


def write_cohort(out_dir, cohort):
    """按输入格式写出合成队列：segments/、tracks/、scores.csv"""
    seg_dir = os.path.join(out_dir, 'segments')
    track_dir = os.path.join(out_dir, 'tracks')
    os.makedirs(seg_dir, exist_ok=True)
    os.makedirs(track_dir, exist_ok=True)
    for sid in cohort.subject_ids:
        write_segments(os.path.join(seg_dir, f"{sid}.jsonl"), cohort.segments[sid])
        write_tracks(os.path.join(track_dir, f"{sid}.csv"), *cohort.tracks[sid])
    write_scores(os.path.join(out_dir, 'scores.csv'), cohort.records)


# ---------------------------------------------------------------------------
# 输出格式
# ---------------------------------------------------------------------------

def write_feature_matrix(path, subject_ids, vectors):
    """每行一个受试者：subject_id + 规范特征名列"""
    names = list(vectors[0].names)
    for sid, vec in zip(subject_ids, vectors):
        if list(vec.names) != names:
            raise ValueError(f"{sid} 的特征列与首个受试者不一致")
    df = pd.DataFrame(np.vstack([v.values for v in vectors]), columns=names)
    df.insert(0, 'subject_id', list(subject_ids))
    _write_csv(df, path)


def read_feature_matrix(path):
    """
    Returns:
        (subject_ids, names, matrix)
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"特征矩阵文件不存在: {path}")
    df = pd.read_csv(path, dtype={'subject_id': str})
    if 'subject_id' not in df.columns:
        raise ValueError(f"{path} 缺少 subject_id 列")
    names = [c for c in df.columns if c != 'subject_id']
    return df['subject_id'].tolist(), names, df[names].to_numpy(dtype=np.float64)


def write_correlation_report(path, summaries):
    df = pd.DataFrame([{
        'feature': s.feature_name,
        'group': feature_group(s.feature_name),
        'point_rho': s.point_rho,
        'boot_mean': s.boot_mean,
        'ci_low': s.ci_low,
        'ci_high': s.ci_high,
        'n_boot': s.n_boot,
        'n_skipped': s.n_skipped,
        'significant': s.significant,
    } for s in summaries])
    _write_csv(df, path)


def write_correlation_matrix(path, names, matrix):
    df = pd.DataFrame(matrix, columns=names)
    df.insert(0, 'feature', names)
    _write_csv(df, path)


def write_cv_report(path, report, feature_set):
    """每折一行，外加 mean/std 汇总行"""
    rows = [{
        'scale': report.scale, 'feature_set': feature_set, 'fold': str(i + 1),
        'n_train': n_train, 'n_test': n_test, 'n_positive_test': n_pos, 'auc': auc,
    } for i, (auc, (n_train, n_test, n_pos)) in enumerate(zip(report.per_fold_auc, report.fold_sizes))]
    for label, value in (('mean', report.auc_mean), ('std', report.auc_std)):
        rows.append({'scale': report.scale, 'feature_set': feature_set, 'fold': label,
                     'n_train': '', 'n_test': '', 'n_positive_test': '', 'auc': value})
    _write_csv(pd.DataFrame(rows), path)


def write_band_table(path, scale, counts):
    """分档人数表：每档一行，positive 标记该档二值化后是否为正类"""
    total = sum(counts.values())
    positive = positive_bands(scale)
    df = pd.DataFrame([{
        'scale': scale.value, 'band': level.value, 'n_subjects': n,
        'fraction': n / total if total else 0.0, 'positive': level in positive,
    } for level, n in counts.items()])
    _write_csv(df, path)


def write_roc_table(path, report):
    """绘图用 ROC 点：各折曲线 + 平均曲线（fold=mean）"""
    frames = []
    for i, curve in enumerate(report.roc_points):
        frames.append(pd.DataFrame({'fold': str(i + 1), 'fpr': curve.fpr, 'tpr': curve.tpr,
                                    'threshold': curve.thresholds}))
    grid, tpr = mean_roc(report)
    frames.append(pd.DataFrame({'fold': 'mean', 'fpr': grid, 'tpr': tpr, 'threshold': np.nan}))
    _write_csv(pd.concat(frames, ignore_index=True), path)


def write_json(path, payload):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(payload, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write('\n')
