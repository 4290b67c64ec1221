"""
Shared fixtures: the two-sensor running example (N=4, J=2)

P       : common {1,2}, sensor 1 innovation {1}, sensor 2 innovation {}
P_tilde : common {1,2}, sensor 1 innovation {},  sensor 2 innovation {1}
X       : x_1 = [3,1,0,0], x_2 = [1,1,0,0]
"""

import json

import numpy as np
import pytest

from agents.bounds_analyzer import BoundsAnalyzerAgent
from agents.matching_analyzer import MatchingAnalyzerAgent
from agents.recovery_engine import RecoveryEngineAgent
from utils.ensemble_model import EnsembleModel, LocationMatrix, ModelFamily, SignalEnsemble
from utils.solver_interface import LinearSolver


@pytest.fixture
def P_example():
    return LocationMatrix.build(4, [1, 2], [[1], []])


@pytest.fixture
def P_tilde():
    return LocationMatrix.build(4, [1, 2], [[], [1]])


@pytest.fixture
def X_example():
    return SignalEnsemble(np.array([[3, 1, 0, 0], [1, 1, 0, 0]], dtype=float))


@pytest.fixture
def general_model():
    return EnsembleModel(family=ModelFamily.GENERAL, N=4, J=2, cap_common=4, cap_innovation=2)


@pytest.fixture
def solver():
    return LinearSolver()


@pytest.fixture
def bounds_agent():
    return BoundsAnalyzerAgent()


@pytest.fixture
def matching_agent(bounds_agent):
    return MatchingAnalyzerAgent(bounds_agent)


@pytest.fixture
def recovery_agent(solver, matching_agent, bounds_agent):
    return RecoveryEngineAgent(solver, matching_agent, bounds_agent)


@pytest.fixture
def write_config(tmp_path):
    """Write a dict as an experiment config file and return its path"""
    def _write(data, name="experiment.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding='utf-8')
        return str(path)
    return _write


@pytest.fixture
def example_config():
    return {
        "name": "running-example",
        "ensemble": {"N": 4, "J": 2, "signals": [[3, 1, 0, 0], [1, 1, 0, 0]]},
        "model": {"family": "general", "cap_common": 4, "cap_innovation": 2},
        "location": {"N": 4, "common": [0, 1], "innovations": [[0], []]},
        "allocations": [[1, 2], [2, 1], [1, 1]],
        "trials": 3,
        "base_seed": 11,
        "mode": "known",
    }
