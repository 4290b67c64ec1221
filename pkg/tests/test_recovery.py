"""
Test Recovery Engine: known-P, converse witness, cross-validation split, unknown-P
=================================================================================
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from agents.recovery_engine import AMBIGUOUS, INFEASIBLE, UNIQUE
from utils.ensemble_model import (EnsembleModel, LocationMatrix, ModelFamily, SignalEnsemble,
                                  expand, is_feasible)
from utils.errors import DimensionMismatchError, PreconditionError
from utils.measurement import MeasurementVector, compose, measure, sample_sensing


def test_known_p_unique(recovery_agent, P_example, X_example):
    print("🧪 TESTING known-P recovery, allocation (2, 1)")
    for seed in range(10):
        S = sample_sensing(4, (2, 1), seed)
        outcome = recovery_agent.recover_known_p(measure(S, X_example), S, P_example)
        assert outcome.status == UNIQUE
        assert outcome.rank == 3
        assert_allclose(outcome.x_hat.signals, X_example.signals, atol=1e-8)
        assert_allclose(outcome.theta.concatenated(), [1, 1, 2], atol=1e-8)


def test_known_p_ambiguous(recovery_agent, P_example, X_example):
    S = sample_sensing(4, (1, 1), seed=3)
    Y = measure(S, X_example)
    outcome = recovery_agent.recover_known_p(Y, S, P_example)
    assert outcome.status == AMBIGUOUS
    assert outcome.rank <= 2

    # the certificate explains the same measurements with a different ensemble
    U = compose(S, P_example)
    alternative = outcome.certificate.concatenated()
    assert_allclose(U @ alternative, Y.concatenated(), atol=1e-8)
    assert np.max(np.abs(expand(P_example) @ alternative - outcome.x_hat.X)) > 1e-6


def test_known_p_infeasible(recovery_agent, P_example, X_example):
    S = sample_sensing(4, (3, 2), seed=5)
    Y = measure(S, X_example)
    perturbed = MeasurementVector((Y.per_sensor[0] + np.array([1.0, 0.0, 0.0]), Y.per_sensor[1]))
    outcome = recovery_agent.recover_known_p(perturbed, S, P_example)
    assert outcome.status == INFEASIBLE
    assert outcome.x_hat is None


def test_known_p_dimension_checks(recovery_agent, P_example, X_example):
    S = sample_sensing(4, (2, 1), seed=1)
    Y = measure(sample_sensing(4, (2, 2), seed=1), X_example)
    with pytest.raises(DimensionMismatchError):
        recovery_agent.recover_known_p(Y, S, P_example)


def test_converse_witness(recovery_agent, P_example):
    S = sample_sensing(4, (1, 1), seed=8)
    witness = recovery_agent.converse_witness(S, P_example, {1, 2})
    U = compose(S, P_example)
    assert witness.rank_deficit >= 1
    assert np.linalg.norm(U @ witness.certificate) <= 1e-8 * np.linalg.norm(U)
    assert np.linalg.norm(witness.certificate) == pytest.approx(1.0)

    S = sample_sensing(4, (0, 2), seed=8)
    witness = recovery_agent.converse_witness(S, P_example, {1})
    assert witness.rank_deficit >= 1
    assert witness.restricted_columns == [2]


def test_converse_witness_preconditions(recovery_agent, P_example):
    S = sample_sensing(4, (2, 1), seed=8)
    with pytest.raises(PreconditionError):
        recovery_agent.converse_witness(S, P_example, {1, 2})
    with pytest.raises(PreconditionError):
        recovery_agent.converse_witness(S, P_example, set())


def test_split_for_cross_validation(recovery_agent, X_example):
    S = sample_sensing(4, (3, 2), seed=12)
    Y = measure(S, X_example)
    split = recovery_agent.split_for_cross_validation(Y, S)
    assert split.held_out_scalar == pytest.approx(Y.per_sensor[0][2] + Y.per_sensor[1][1], abs=1e-12)
    assert split.remaining.total_length == 3
    assert split.remaining_rows.allocation == (2, 1)
    assert split.held_out_row @ X_example.X == pytest.approx(split.held_out_scalar, abs=1e-12)

    ones = sample_sensing(4, (1, 1), seed=12)
    split = recovery_agent.split_for_cross_validation(measure(ones, X_example), ones)
    assert split.remaining.total_length == 0

    idle = sample_sensing(4, (0, 2), seed=12)
    with pytest.raises(PreconditionError):
        recovery_agent.split_for_cross_validation(measure(idle, X_example), idle)


def test_unknown_p_example(recovery_agent, X_example, general_model):
    for seed in range(5):
        S = sample_sensing(4, (3, 2), seed)
        outcome = recovery_agent.recover_unknown_p(measure(S, X_example), S, general_model)
        assert outcome.status == UNIQUE
        assert_allclose(outcome.x_hat.signals, X_example.signals, atol=1e-8)
        assert outcome.chosen_P.num_columns == 3
        assert is_feasible(outcome.chosen_P, X_example)


def test_unknown_p_zero_ensemble(recovery_agent, general_model):
    X = SignalEnsemble(np.zeros((2, 4)))
    S = sample_sensing(4, (2, 2), seed=0)
    outcome = recovery_agent.recover_unknown_p(measure(S, X), S, general_model)
    assert outcome.status == UNIQUE
    assert outcome.candidates_examined == 1
    assert outcome.chosen_P.num_columns == 0


def test_unknown_p_single_signal(recovery_agent):
    model = EnsembleModel(family=ModelFamily.GENERAL, N=8, J=1, cap_common=0, cap_innovation=3)
    x = np.zeros(8)
    x[[1, 4, 6]] = [1.5, -0.75, 2.0]
    X = SignalEnsemble(x.reshape(1, -1))
    S = sample_sensing(8, (4,), seed=21)
    outcome = recovery_agent.recover_unknown_p(measure(S, X), S, model)
    assert outcome.status == UNIQUE
    assert outcome.chosen_P == LocationMatrix.build(8, [], [[2, 5, 7]])


def test_unknown_p_exhaustion(recovery_agent):
    model = EnsembleModel(family=ModelFamily.GENERAL, N=4, J=1, cap_common=0, cap_innovation=1)
    X = SignalEnsemble(np.array([[1.0, -2.0, 0.5, 0.0]]))
    S = sample_sensing(4, (4,), seed=2)
    outcome = recovery_agent.recover_unknown_p(measure(S, X), S, model)
    assert outcome.status == INFEASIBLE
    assert outcome.candidates_examined == 5


def test_process_modes(recovery_agent, P_example, X_example, general_model):
    S = sample_sensing(4, (3, 2), seed=4)
    Y = measure(S, X_example)
    assert recovery_agent.process(Y, S, mode='known', P=P_example)['outcome'].status == UNIQUE
    assert recovery_agent.process(Y, S, mode='unknown', M=general_model)['outcome'].status == UNIQUE
    assert not recovery_agent.process(Y, S, mode='known')['success']

    data = recovery_agent.process(Y, S, mode='known', P=P_example)['outcome'].to_json_dict()
    assert set(data) >= {'status', 'chosen_P', 'x_hat', 'residuals', 'candidates_examined'}
    assert data['chosen_P'] == {'N': 4, 'common': [0, 1], 'innovations': [[0], []]}
