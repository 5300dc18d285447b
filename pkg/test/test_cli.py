"""
命令行测试：子命令产物、退出码、跳过策略与可复现性
"""
import filecmp
import json
import os
import shutil

import pandas as pd
import pytest

from src.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, build_parser, main, resolve_config

SESSION_ARGS = ['--speech-window-s', '300', '--movement-max-frames', '300']


def _synth(out, n=40, seed=7, effect=1.0):
    return main(['synth', '--n', str(n), '--seed', str(seed), '--effect', str(effect),
                 '--session-s', '300', '--n-frames', '300', '--out', str(out)])


def _tree_files(root):
    files = []
    for base, _, names in os.walk(root):
        files.extend(os.path.relpath(os.path.join(base, n), root) for n in names)
    return sorted(files)


@pytest.fixture(scope='module')
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp('cohort')
    assert _synth(out) == EXIT_OK
    return out


@pytest.fixture(scope='module')
def features_dir(data_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp('features')
    assert main(['features', '--data', str(data_dir), '--out', str(out)] + SESSION_ARGS) == EXIT_OK
    return out


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def test_synth_writes_input_layout(data_dir):
    assert os.path.isfile(data_dir / 'scores.csv')
    assert len(os.listdir(data_dir / 'segments')) == 40
    assert len(os.listdir(data_dir / 'tracks')) == 40
    scores = pd.read_csv(data_dir / 'scores.csv', dtype={'subject_id': str})
    assert list(scores.columns) == ['subject_id', 'wisc', 'tea', 'nepsy', 'celf', 'age_years', 'gender']
    assert scores['subject_id'].tolist()[:2] == ['S001', 'S002']
    tracks = pd.read_csv(data_dir / 'tracks' / 'S001.csv')
    assert list(tracks.columns) == ['frame', 'person', 'x', 'y']
    with open(data_dir / 'segments' / 'S001.jsonl', encoding='utf-8') as f:
        assert set(json.loads(f.readline())) == {'start_s', 'end_s', 'speaker'}


def test_synth_rerun_is_byte_identical(data_dir, tmp_path):
    assert _synth(tmp_path) == EXIT_OK
    files = _tree_files(data_dir)
    assert files == _tree_files(tmp_path)
    _, mismatch, errors = filecmp.cmpfiles(data_dir, tmp_path, files, shallow=False)
    assert mismatch == [] and errors == []


def test_synth_usage_errors(tmp_path):
    assert _synth(tmp_path, n=0) == EXIT_USAGE
    assert main(['synth', '--n', '10']) == EXIT_USAGE
    assert main(['synth', '--n', '10', '--effect', '-1', '--out', str(tmp_path)]) == EXIT_USAGE
    assert main(['unknown']) == EXIT_USAGE


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------

def test_features_matrix_columns(features_dir):
    matrix = pd.read_csv(features_dir / 'features.csv', dtype={'subject_id': str})
    assert matrix.shape == (40, 95)
    assert matrix.columns[0] == 'subject_id'
    assert matrix.columns[1] == 'p_cnt'
    assert 'speech_path_L4_1233' in matrix.columns
    assert 'video_joint_L3_344' in matrix.columns

    with open(features_dir / 'features_meta.json', encoding='utf-8') as f:
        meta = json.load(f)
    assert meta['n_subjects'] == 40 and meta['n_features'] == 94 and meta['n_skipped'] == 0


def test_features_drop_level1(data_dir, tmp_path):
    code = main(['features', '--data', str(data_dir), '--out', str(tmp_path), '--drop-level1'] + SESSION_ARGS)
    assert code == EXIT_OK
    matrix = pd.read_csv(tmp_path / 'features.csv')
    assert matrix.shape[1] == 92
    assert 'speech_path_L1_1' not in matrix.columns


def test_features_skip_subject_without_tracks(data_dir, tmp_path, capsys):
    broken = tmp_path / 'data'
    shutil.copytree(data_dir, broken)
    os.remove(broken / 'tracks' / 'S005.csv')
    out = tmp_path / 'out'
    assert main(['features', '--data', str(broken), '--out', str(out)] + SESSION_ARGS) == EXIT_OK
    assert 'S005' in capsys.readouterr().err

    matrix = pd.read_csv(out / 'features.csv', dtype={'subject_id': str})
    assert len(matrix) == 39
    assert 'S005' not in matrix['subject_id'].tolist()
    with open(out / 'features_meta.json', encoding='utf-8') as f:
        meta = json.load(f)
    assert meta['n_skipped'] == 1
    assert meta['skipped'][0]['subject_id'] == 'S005'


def test_features_parallel_matches_serial(data_dir, features_dir, tmp_path):
    code = main(['features', '--data', str(data_dir), '--out', str(tmp_path), '--jobs', '2'] + SESSION_ARGS)
    assert code == EXIT_OK
    assert filecmp.cmp(features_dir / 'features.csv', tmp_path / 'features.csv', shallow=False)


def test_features_data_errors(tmp_path):
    assert main(['features', '--data', str(tmp_path / 'missing'), '--out', str(tmp_path)]) == EXIT_DATA
    os.makedirs(tmp_path / 'empty' / 'segments')
    assert main(['features', '--data', str(tmp_path / 'empty'), '--out', str(tmp_path)]) == EXIT_DATA


def test_run_option_validation(data_dir, tmp_path):
    base = ['features', '--data', str(data_dir), '--out', str(tmp_path)]
    assert main(base + ['--movement-max-frames', '0']) == EXIT_USAGE
    assert main(base + ['--k-folds', '1']) == EXIT_USAGE


# ---------------------------------------------------------------------------
# 配置文件
# ---------------------------------------------------------------------------

def test_config_file_precedence(tmp_path):
    config_path = tmp_path / 'run.yaml'
    config_path.write_text('n_boot: 17\nseed: 4\nout: from_file\n', encoding='utf-8')
    parser = build_parser()

    config = resolve_config(parser.parse_args(['correlate', '--scale', 'WISC', '--config', str(config_path)]))
    assert config.n_boot == 17 and config.seed == 4
    assert config.feature_matrix == os.path.join('from_file', 'features.csv')

    config = resolve_config(parser.parse_args(['correlate', '--scale', 'WISC', '--config', str(config_path),
                                               '--n-boot', '5']))
    assert config.n_boot == 5 and config.seed == 4

    defaults = resolve_config(parser.parse_args(['correlate', '--scale', 'WISC']))
    assert defaults.n_boot == 1000 and defaults.k_folds == 4 and defaults.c_reg == 1.0


def test_config_file_unknown_key(data_dir, tmp_path):
    config_path = tmp_path / 'bad.yaml'
    config_path.write_text('n_bootstrap: 10\n', encoding='utf-8')
    assert main(['features', '--data', str(data_dir), '--config', str(config_path)]) == EXIT_USAGE
    assert main(['features', '--config', str(tmp_path / 'missing.yaml')]) == EXIT_USAGE


# ---------------------------------------------------------------------------
# correlate / classify
# ---------------------------------------------------------------------------

def _run_args(data_dir, features_dir, out):
    return ['--data', str(data_dir), '--feature-matrix', str(features_dir / 'features.csv'), '--out', str(out)]


def test_correlate_report(data_dir, features_dir, tmp_path):
    args = ['correlate', '--scale', 'WISC', '--n-boot', '20'] + _run_args(data_dir, features_dir, tmp_path)
    assert main(args) == EXIT_OK
    report = pd.read_csv(tmp_path / 'correlation_WISC.csv')
    assert len(report) == 94
    assert list(report.columns) == ['feature', 'group', 'point_rho', 'boot_mean', 'ci_low', 'ci_high',
                                    'n_boot', 'n_skipped', 'significant']
    assert set(report['group']) <= {'speech_stats', 'speech_path', 'video_stats', 'video_path'}
    assert (report['n_boot'] == 20).all()

    first = (tmp_path / 'correlation_WISC.csv').read_bytes()
    assert main(args) == EXIT_OK
    assert (tmp_path / 'correlation_WISC.csv').read_bytes() == first


def test_correlate_all_scales_with_matrix(data_dir, features_dir, tmp_path):
    args = ['correlate', '--scale', 'all', '--matrix', '--n-boot', '10'] + _run_args(data_dir, features_dir, tmp_path)
    assert main(args) == EXIT_OK
    for scale in ('WISC', 'TEA', 'NEPSY', 'CELF'):
        assert os.path.isfile(tmp_path / f"correlation_{scale}.csv")
    matrix = pd.read_csv(tmp_path / 'feature_correlation.csv')
    assert matrix.shape == (94, 95)


def test_correlate_extracts_features_when_missing(data_dir, tmp_path):
    args = ['correlate', '--scale', 'CELF', '--n-boot', '10', '--data', str(data_dir),
            '--out', str(tmp_path)] + SESSION_ARGS
    assert main(args) == EXIT_OK
    assert os.path.isfile(tmp_path / 'features.csv')
    assert os.path.isfile(tmp_path / 'correlation_CELF.csv')


def test_correlate_unknown_scale(data_dir, features_dir, tmp_path, capsys):
    args = ['correlate', '--scale', 'IQ', '--n-boot', '10'] + _run_args(data_dir, features_dir, tmp_path)
    assert main(args) == EXIT_USAGE
    assert 'WISC' in capsys.readouterr().err


def test_classify_outputs(data_dir, features_dir, tmp_path, capsys):
    args = ['classify', '--scale', 'WISC'] + _run_args(data_dir, features_dir, tmp_path)
    assert main(args) == EXIT_OK
    assert '[CV] WISC 分档' in capsys.readouterr().out

    bands = pd.read_csv(tmp_path / 'bands_WISC.csv')
    assert bands['band'].tolist() == ['Low', 'Medium', 'High']
    assert bands['n_subjects'].sum() == 40
    assert bands['positive'].tolist() == [True, True, False]

    cv = pd.read_csv(tmp_path / 'cv_WISC_interaction.csv', dtype={'fold': str})
    assert cv['fold'].tolist() == ['1', '2', '3', '4', 'mean', 'std']
    assert ((cv['auc'] >= 0) & (cv['auc'] <= 1)).all()
    roc = pd.read_csv(tmp_path / 'roc_WISC_interaction.csv', dtype={'fold': str})
    assert set(roc['fold']) == {'1', '2', '3', '4', 'mean'}
    assert (roc['fold'] == 'mean').sum() == 101

    first = (tmp_path / 'cv_WISC_interaction.csv').read_bytes()
    assert main(args) == EXIT_OK
    assert (tmp_path / 'cv_WISC_interaction.csv').read_bytes() == first


def test_classify_all_scales_on_generated_scores(data_dir, features_dir, tmp_path):
    assert main(['classify', '--scale', 'ALL'] + _run_args(data_dir, features_dir, tmp_path)) == EXIT_OK
    for scale in ('WISC', 'TEA', 'NEPSY', 'CELF'):
        bands = pd.read_csv(tmp_path / f"bands_{scale}.csv")
        positives = bands.loc[bands['positive'], 'n_subjects'].sum()
        assert min(positives, 40 - positives) >= 4, scale
        assert os.path.isfile(tmp_path / f"cv_{scale}_interaction.csv")


def test_classify_demographics(data_dir, features_dir, tmp_path):
    args = ['classify', '--scale', 'WISC', '--features', 'demographics']
    assert main(args + _run_args(data_dir, features_dir, tmp_path)) == EXIT_OK
    assert os.path.isfile(tmp_path / 'cv_WISC_demographics.csv')
    assert os.path.isfile(tmp_path / 'roc_WISC_demographics.csv')


def test_classify_usage_and_data_errors(data_dir, features_dir, tmp_path):
    run = _run_args(data_dir, features_dir, tmp_path)
    assert main(['classify', '--scale', 'WISC', '--features', 'video'] + run) == EXIT_USAGE

    scores = pd.read_csv(data_dir / 'scores.csv', dtype={'subject_id': str})
    scores['wisc'] = 100
    single_class = tmp_path / 'scores.csv'
    scores.to_csv(single_class, index=False)
    assert main(['classify', '--scale', 'WISC', '--scores', str(single_class)] + run) == EXIT_DATA
    bands = pd.read_csv(tmp_path / 'bands_WISC.csv')
    assert bands['n_subjects'].tolist() == [0, 40, 0]


# ---------------------------------------------------------------------------
# 默认尺寸的合成队列：植入效应可分类，无效应时不产生大量显著特征
# ---------------------------------------------------------------------------

def _mean_auc(path):
    cv = pd.read_csv(path, dtype={'fold': str})
    return float(cv.loc[cv['fold'] == 'mean', 'auc'].iloc[0])


@pytest.fixture(scope='module')
def full_size_run(tmp_path_factory):
    data = tmp_path_factory.mktemp('full_cohort')
    out = tmp_path_factory.mktemp('full_features')
    assert main(['synth', '--n', '80', '--seed', '0', '--effect', '2.0', '--out', str(data)]) == EXIT_OK
    assert main(['features', '--data', str(data), '--out', str(out), '--jobs', '4']) == EXIT_OK
    return data, out


def test_planted_effect_classifies_tea(full_size_run):
    data, out = full_size_run
    assert main(['classify', '--scale', 'TEA', '--features', 'interaction', '--data', str(data),
                 '--out', str(out)]) == EXIT_OK
    assert _mean_auc(out / 'cv_TEA_interaction.csv') >= 0.8


def test_demographics_stay_at_chance_on_full_cohort(full_size_run):
    data, out = full_size_run
    assert main(['classify', '--scale', 'TEA', '--features', 'demographics', '--data', str(data),
                 '--out', str(out)]) == EXIT_OK
    assert 0.35 <= _mean_auc(out / 'cv_TEA_demographics.csv') <= 0.65


def test_correlate_without_effect_flags_few_features(tmp_path):
    data, out = tmp_path / 'data', tmp_path / 'out'
    assert main(['synth', '--n', '80', '--seed', '0', '--effect', '0', '--session-s', '600',
                 '--n-frames', '2000', '--out', str(data)]) == EXIT_OK
    args = ['correlate', '--scale', 'WISC', '--n-boot', '200', '--data', str(data), '--out', str(out),
            '--speech-window-s', '600', '--movement-max-frames', '2000']
    assert main(args) == EXIT_OK
    report = pd.read_csv(out / 'correlation_WISC.csv')
    assert report['significant'].mean() <= 0.3
