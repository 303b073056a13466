"""Shared fixtures for the RM toolbox test suite."""

import numpy as np
import pytest

from config import RMToolboxConfig
from performance_optimizer import ParallelTaskRunner
from tensor_linalg import random_density_matrix


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_qubit_states(rng):
    return [random_density_matrix((2, 2, 2), rng) for _ in range(5)]


@pytest.fixture
def random_qutrit_states(rng):
    return [random_density_matrix((3, 3), rng) for _ in range(5)]


@pytest.fixture
def config():
    """Fresh default configuration (never the process-wide instance)."""
    return RMToolboxConfig()


@pytest.fixture
def small_config(tmp_path):
    """Reduced budgets for quick end-to-end runs."""
    cfg = RMToolboxConfig()
    cfg.apply_overrides({
        'protocol.num_unitaries': 200,
        'protocol.shots_per_unitary': 100,
        'protocol.seed': 7,
        'oracle.samples': 5000,
        'chessboard_sweep.shots_per_setting': 20000,
        'chessboard_sweep.bootstrap_replicas': 3,
        'tomography.max_iter': 300,
        'tomography.tol': 1e-8,
        'bound.grid_points': 3,
        'export.output_dir': str(tmp_path / 'results'),
        'advanced.max_worker_threads': 2,
        'advanced.chunk_size': 50,
    })
    return cfg


@pytest.fixture
def runner(config):
    return ParallelTaskRunner(config, max_workers=2, chunk_size=50)
