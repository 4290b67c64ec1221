"""
Test Measurement: seeded Gaussian matrices, block diagonal Phi, Upsilon = Phi P
===============================================================================
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from utils.ensemble_model import (EnsembleModel, LocationMatrix, ModelFamily, SignalEnsemble,
                                  expand, random_ensemble)
from utils.errors import DimensionMismatchError, PreconditionError
from utils.measurement import (MeasurementSet, block_diagonal, compose, measure, sample_sensing)


def test_sampling_is_deterministic():
    S1 = sample_sensing(4, (2, 3), seed=123)
    S2 = sample_sensing(4, (2, 3), seed=123)
    for a, b in zip(S1.per_sensor, S2.per_sensor):
        assert_array_equal(a, b)
    assert S1.allocation == (2, 3)
    assert S1.to_json_dict() == {'seed': 123, 'N': 4, 'allocation': [2, 3]}
    assert_array_equal(MeasurementSet.from_json_dict(S1.to_json_dict()).per_sensor[1], S1.per_sensor[1])


def test_sensor_substreams_are_independent():
    base = sample_sensing(4, (2, 3), seed=9)
    more = sample_sensing(4, (5, 3), seed=9)
    # changing M_1 leaves sensor 2 alone, and sensor 1 keeps its first rows
    assert_array_equal(base.per_sensor[1], more.per_sensor[1])
    assert_array_equal(base.per_sensor[0], more.per_sensor[0][:2])
    assert not np.array_equal(sample_sensing(4, (2, 3), seed=10).per_sensor[0], base.per_sensor[0])


def test_zero_rows_for_idle_sensor():
    S = sample_sensing(4, (0, 3), seed=1)
    assert S.per_sensor[0].shape == (0, 4)
    assert S.total_measurements == 3
    with pytest.raises(DimensionMismatchError):
        sample_sensing(4, (-1, 3), seed=1)


def test_gaussian_moments():
    S = sample_sensing(100, (1000,), seed=2024)
    entries = S.per_sensor[0].ravel()
    assert entries.size == 100_000
    assert abs(entries.mean()) < 0.02
    assert abs(entries.var() - 1.0) < 0.02


def test_block_diagonal_shapes():
    S1 = sample_sensing(3, (2,), seed=4)
    assert_array_equal(block_diagonal(S1), S1.per_sensor[0])

    S = sample_sensing(2, (1, 1), seed=4)
    Phi = block_diagonal(S)
    assert Phi.shape == (2, 4)
    assert_array_equal(Phi[0, 2:], [0, 0])
    assert_array_equal(Phi[1, :2], [0, 0])


def test_measure_fixture_and_zero():
    S = MeasurementSet.from_matrices([np.ones((1, 4)), np.ones((1, 4))])
    X = SignalEnsemble(np.array([[3, 1, 0, 0], [1, 1, 0, 0]], dtype=float))
    Y = measure(S, X)
    assert_array_equal(Y.per_sensor[0], [4])
    assert_array_equal(Y.per_sensor[1], [2])

    zero = measure(sample_sensing(4, (2, 2), seed=3), SignalEnsemble(np.zeros((2, 4))))
    assert not np.any(zero.concatenated())

    with pytest.raises(DimensionMismatchError):
        measure(sample_sensing(5, (2, 2), seed=3), X)


def test_measure_matches_block_diagonal_product():
    model = EnsembleModel(family=ModelFamily.GENERAL, N=5, J=3, cap_common=2, cap_innovation=1)
    for seed in range(10):
        X, P, theta = random_ensemble(model, seed)
        S = sample_sensing(5, (2, 0, 4), seed)
        Y = measure(S, X).concatenated()
        assert_allclose(block_diagonal(S) @ X.X, Y, atol=1e-12)
        assert_allclose(compose(S, P), block_diagonal(S) @ expand(P), atol=1e-12)
        assert_allclose(compose(S, P) @ theta.concatenated(), Y, atol=1e-10)


def test_fixture_matrices_are_not_serializable():
    S = MeasurementSet.from_matrices([np.eye(2), np.ones((1, 2))])
    assert S.seed is None
    with pytest.raises(PreconditionError):
        S.to_json_dict()
    with pytest.raises(PreconditionError):
        MeasurementSet.from_json_dict({'seed': None, 'N': 2, 'allocation': [2, 1]})


def test_compose_example(P_example):
    S = sample_sensing(4, (2, 1), seed=77)
    U = compose(S, P_example)
    phi1, phi2 = S.per_sensor
    assert U.shape == (3, 3)
    assert_array_equal(U[:2, :2], phi1[:, [0, 1]])
    assert_array_equal(U[:2, 2], phi1[:, 0])
    assert_array_equal(U[2, :2], phi2[0, [0, 1]])
    assert U[2, 2] == 0

    assert compose(S, LocationMatrix.empty(4, 2)).shape == (3, 0)
