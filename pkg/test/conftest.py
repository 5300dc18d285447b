"""
测试公共夹具
"""
import os
import sys

import numpy as np
import pytest

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, PROJECT_ROOT)

from src.synth_cohort import CohortSpec, generate_cohort  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope='session')
def small_cohort():
    """短会话、少帧数的小队列，供 I/O 与流程测试使用"""
    return generate_cohort(CohortSpec(n_subjects=12, seed=7, effect_size=1.0,
                                      session_s=300.0, n_frames=300))
