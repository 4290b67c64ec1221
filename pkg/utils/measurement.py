"""
Distributed measurements: per-sensor Gaussian matrices and the composed system
==============================================================================

Sensor j observes y_j = Phi_j x_j with Phi_j an M_j x N matrix. Gaussian
matrices come from a counter-based generator (Philox) keyed by the seed and
the sensor index, so every sensor has its own substream: changing M_k never
perturbs Phi_j for j != k, and a longer Phi_j keeps its earlier rows.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from utils.ensemble_model import LocationMatrix, SignalEnsemble
from utils.errors import DimensionMismatchError, PreconditionError

RNG_VERSION = 1


def sensor_rng(seed: int, sensor: int) -> np.random.Generator:
    """Independent substream for one sensor (sensor is 1-indexed)"""
    sequence = np.random.SeedSequence(int(seed), spawn_key=(RNG_VERSION, int(sensor)))
    return np.random.Generator(np.random.Philox(sequence))


def _readonly(matrix) -> np.ndarray:
    matrix = np.array(matrix, dtype=float)
    matrix.setflags(write=False)
    return matrix


@dataclass(frozen=True)
class MeasurementSet:
    """Per-sensor matrices Phi_j (M_j x N); seed is None for hand-specified fixtures"""
    N: int
    per_sensor: Tuple[np.ndarray, ...]
    seed: Optional[int] = None

    def __post_init__(self):
        matrices = tuple(_readonly(m).reshape(-1, self.N) if np.size(m) == 0 else _readonly(m)
                         for m in self.per_sensor)
        for j, m in enumerate(matrices, 1):
            if m.ndim != 2 or m.shape[1] != self.N:
                raise DimensionMismatchError(f"Phi_{j} has shape {m.shape}, expected (M_{j}, {self.N})")
        object.__setattr__(self, 'per_sensor', matrices)

    @property
    def J(self) -> int:
        return len(self.per_sensor)

    @property
    def allocation(self) -> Tuple[int, ...]:
        return tuple(m.shape[0] for m in self.per_sensor)

    @property
    def total_measurements(self) -> int:
        return sum(self.allocation)

    def row_offset(self, sensor: int) -> int:
        return sum(self.allocation[:sensor - 1])

    @classmethod
    def from_matrices(cls, matrices: Sequence) -> 'MeasurementSet':
        """Fixture path: hand-specified (not necessarily Gaussian) matrices"""
        matrices = [np.atleast_2d(np.asarray(m, dtype=float)) for m in matrices]
        if not matrices:
            raise DimensionMismatchError("need at least one sensor")
        return cls(N=matrices[0].shape[1], per_sensor=tuple(matrices))

    def to_json_dict(self) -> Dict:
        if self.seed is None:
            raise PreconditionError("hand-specified sensing matrices have no seed to regenerate them from")
        return {'seed': self.seed, 'N': self.N, 'allocation': list(self.allocation)}

    @classmethod
    def from_json_dict(cls, data: Dict) -> 'MeasurementSet':
        if data.get('seed') is None:
            raise PreconditionError("a measurement set is regenerated from its seed, none was given")
        return sample_sensing(int(data['N']), [int(m) for m in data['allocation']], int(data['seed']))


@dataclass(frozen=True)
class MeasurementVector:
    per_sensor: Tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, 'per_sensor', tuple(_readonly(y).reshape(-1) for y in self.per_sensor))

    @property
    def total_length(self) -> int:
        return sum(y.size for y in self.per_sensor)

    def concatenated(self) -> np.ndarray:
        if not self.per_sensor:
            return np.zeros(0)
        return np.concatenate(self.per_sensor)


def sample_sensing(N: int, allocation: Sequence[int], seed: int) -> MeasurementSet:
    """Standard normal Phi_j of shape M_j x N for every sensor"""
    if N < 1:
        raise DimensionMismatchError(f"N must be positive, got {N}")
    if any(m < 0 for m in allocation):
        raise DimensionMismatchError(f"allocation entries must be non-negative, got {list(allocation)}")
    matrices = tuple(sensor_rng(seed, j).standard_normal((int(m), N))
                     for j, m in enumerate(allocation, 1))
    return MeasurementSet(N=N, per_sensor=matrices, seed=int(seed))


def block_diagonal(S: MeasurementSet) -> np.ndarray:
    """Phi = diag(Phi_1, ..., Phi_J), shape (sum M_j) x JN"""
    return scipy.linalg.block_diag(*S.per_sensor)


def _check_ensemble(S: MeasurementSet, X: SignalEnsemble):
    if S.N != X.N or S.J != X.J:
        raise DimensionMismatchError(f"measurement set is for N={S.N}, J={S.J}; ensemble has N={X.N}, J={X.J}")


def measure(S: MeasurementSet, X: SignalEnsemble) -> MeasurementVector:
    _check_ensemble(S, X)
    return MeasurementVector(tuple(phi @ X.x(j) for j, phi in enumerate(S.per_sensor, 1)))


def compose(S: MeasurementSet, P: LocationMatrix) -> np.ndarray:
    """
    Upsilon = Phi P, built block by block:
    every row block j holds Phi_j P_C in the common columns and Phi_j P_j in
    its own innovation columns
    """
    if S.N != P.N or S.J != P.J:
        raise DimensionMismatchError(f"measurement set is for N={S.N}, J={S.J}; location matrix has N={P.N}, J={P.J}")

    upsilon = np.zeros((S.total_measurements, P.num_columns))
    common = np.asarray(P.common.columns, dtype=int) - 1
    for j, phi in enumerate(S.per_sensor, 1):
        rows = slice(S.row_offset(j), S.row_offset(j) + phi.shape[0])
        upsilon[rows, :P.K_C] = phi[:, common]
        start = P.innovation_offset(j)
        innov = np.asarray(P.innovations[j - 1].columns, dtype=int) - 1
        upsilon[rows, start:start + innov.size] = phi[:, innov]
    return upsilon
