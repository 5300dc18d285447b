"""
项目配置文件
"""
import os

# 项目根目录
PROJECT_ROOT = os.path.dirname(os.path.abspath(__file__))

# 目录配置
DATA_DIR = os.path.join(PROJECT_ROOT, 'data')
OUTPUT_DIR = os.path.join(PROJECT_ROOT, 'output')

# 签名代数配置
SIGNATURE_CONFIG = {
    'level0_atol': 1e-12,    # 判定 level-0 为 1（或 0）的容差
}

# 语音轮次路径配置
SPEECH_CONFIG = {
    'window_s': 2400.0,      # 前 40 分钟
    'logsig_depth': 4,
    'drop_level1': False,
}

# 头部运动路径配置
MOVEMENT_CONFIG = {
    'max_frames': 10000,
    'fps': 15.0,
    'logsig_depth': 3,
}

# 相关性分析配置
ANALYSIS_CONFIG = {
    'n_boot': 1000,
    'ci_level': 0.95,
    'seed': 0,
}

# 分类器配置
CLASSIFIER_CONFIG = {
    'k_folds': 4,
    'c_reg': 1.0,
    'tol': 1e-8,             # 投影梯度收敛阈值
    'max_iter': 2000,        # 最大迭代轮数（epoch）
    'seed': 0,
    'roc_grid_points': 101,  # 平均 ROC 曲线的 FPR 网格点数
}

# 量表配置：常模均值、标准差、取值范围
SCALE_CONFIG = {
    'WISC': {'mean': 100.0, 'sd': 15.0, 'min': 40, 'max': 160},
    'TEA': {'mean': 10.0, 'sd': 3.0, 'min': 1, 'max': 19},
    'NEPSY': {'mean': 10.0, 'sd': 3.0, 'min': 1, 'max': 19},
    'CELF': {'mean': 10.0, 'sd': 3.0, 'min': 1, 'max': 19},
}

# 合成队列配置（生成模型参数，仅用于流程验证）
SYNTH_CONFIG = {
    'session_s': 2400.0,
    'fps': 15.0,
    'n_frames': 10000,
    'score_noise_sd': 0.3,
    # 各量表队列中心相对常模均值的偏移（单位：标准差），方向与临床样本的分档偏斜一致，
    # 幅度受边际分布约束（均值偏离常模不超过 15%）
    'score_offset_sd': {'WISC': 0.67, 'TEA': -0.4, 'NEPSY': 0.4, 'CELF': 0.4},
    # 语音轮次（秒）
    'patient_turn_s': 3.0,
    'clinician_turn_s': 4.0,
    'patient_latency_s': 1.0,
    'clinician_latency_s': 0.8,
    'min_gap_s': 0.05,
    'turn_shape': 2.0,            # Gamma 分布形状参数
    'clinician_repeat_p': 0.2,    # 临床医生连续发言的概率
    'speech_gain': 0.25,          # 能力对轮次时长/延迟的对数斜率（乘以 effect_size）
    # 头部运动（像素）
    'patient_jitter_px': 2.0,
    'clinician_jitter_px': 1.5,
    'motion_phi': 0.98,           # AR(1) 系数
    'jitter_gain': 0.05,          # 能力对抖动幅度的对数斜率（乘以 effect_size）
    'coupling_gain': 0.3,         # 能力对跟随耦合强度的斜率（乘以 effect_size）
    'coupling_base': 0.4,
    'coupling_lag_frames': 5,
    'dropout_p': 0.01,            # 姿态估计丢帧概率
    'frame_size': (1280, 720),
    # 人口学
    'age_mean': 10.0,
    'age_sd': 3.0,
    'age_range': (4.0, 18.0),
    'male_p': 0.63,
}

# 命令行运行默认值（RunConfig 的扁平键集合）
RUN_DEFAULTS = {
    'data_dir': DATA_DIR,
    'segments_dir': None,
    'tracks_dir': None,
    'scores': None,
    'feature_matrix': None,
    'out': OUTPUT_DIR,
    'speech_window_s': SPEECH_CONFIG['window_s'],
    'movement_max_frames': MOVEMENT_CONFIG['max_frames'],
    'fps': MOVEMENT_CONFIG['fps'],
    'speech_logsig_depth': SPEECH_CONFIG['logsig_depth'],
    'movement_logsig_depth': MOVEMENT_CONFIG['logsig_depth'],
    'drop_level1': SPEECH_CONFIG['drop_level1'],
    'n_boot': ANALYSIS_CONFIG['n_boot'],
    'ci_level': ANALYSIS_CONFIG['ci_level'],
    'k_folds': CLASSIFIER_CONFIG['k_folds'],
    'c_reg': CLASSIFIER_CONFIG['c_reg'],
    'seed': ANALYSIS_CONFIG['seed'],
    'jobs': 1,
}
