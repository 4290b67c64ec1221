"""
Ensemble Sparsity Models: location matrices, value vectors and signal ensembles
==============================================================================

A signal ensemble X (J signals of length N, concatenated) is written as
X = P @ Theta where the location matrix P has the block form

    [ P_C  P_1  0   ...  0  ]
    [ P_C  0    P_2 ...  0  ]
    [ ...                   ]
    [ P_C  0    0   ...  P_J]

and every block is an identity submatrix with N rows. Column indices are
1-indexed inside the domain model and 0-indexed in JSON.

Everything here is a pure function over immutable inputs.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from itertools import combinations, product
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from utils.errors import (DimensionMismatchError, InfeasibleModelError,
                          InvalidSensorError)
from utils.solver_interface import LinearSolver, is_integral

DEFAULT_FEASIBILITY_TOL = 1e-9


# ----------------------------------------------------------------------
# Location matrices
# ----------------------------------------------------------------------

class IdentitySubmatrix(BaseModel):
    """Columns of the N x N identity, kept in their original left-to-right order"""
    model_config = ConfigDict(frozen=True)

    n_rows: int = Field(ge=1)
    columns: Tuple[int, ...] = ()

    @model_validator(mode='after')
    def _check_columns(self):
        for n in self.columns:
            if not 1 <= n <= self.n_rows:
                raise ValueError(f"column index {n} outside [1, {self.n_rows}]")
        if any(a >= b for a, b in zip(self.columns, self.columns[1:])):
            raise ValueError(f"columns must be strictly increasing, got {list(self.columns)}")
        return self

    @property
    def width(self) -> int:
        return len(self.columns)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n_rows, self.width))
        for k, n in enumerate(self.columns):
            dense[n - 1, k] = 1.0
        return dense


class LocationMatrix(BaseModel):
    """Common block P_C plus one innovation block P_j per sensor"""
    model_config = ConfigDict(frozen=True)

    N: int = Field(ge=1)
    common: IdentitySubmatrix
    innovations: Tuple[IdentitySubmatrix, ...] = Field(min_length=1)

    @model_validator(mode='after')
    def _check_rows(self):
        blocks = (self.common,) + self.innovations
        if any(b.n_rows != self.N for b in blocks):
            raise ValueError(f"every submatrix must have N={self.N} rows")
        return self

    @classmethod
    def build(cls, N: int, common: Iterable[int], innovations: Sequence[Iterable[int]]) -> 'LocationMatrix':
        """Build from 1-indexed column lists"""
        return cls(
            N=N,
            common=IdentitySubmatrix(n_rows=N, columns=tuple(common)),
            innovations=tuple(IdentitySubmatrix(n_rows=N, columns=tuple(c)) for c in innovations),
        )

    @classmethod
    def empty(cls, N: int, J: int) -> 'LocationMatrix':
        return cls.build(N, (), [()] * J)

    @property
    def J(self) -> int:
        return len(self.innovations)

    @property
    def K_C(self) -> int:
        return self.common.width

    @property
    def K(self) -> Tuple[int, ...]:
        """Innovation widths (K_1, ..., K_J)"""
        return tuple(b.width for b in self.innovations)

    @property
    def num_columns(self) -> int:
        """D' = K_C + sum_j K_j"""
        return self.K_C + sum(self.K)

    def innovation_offset(self, sensor: int) -> int:
        """0-indexed column of P where sensor's innovation block starts (sensor is 1-indexed)"""
        return self.K_C + sum(self.K[:sensor - 1])

    def is_full_rank(self) -> bool:
        """No row index may sit in P_C and in every P_j at once"""
        shared = set(self.common.columns)
        for block in self.innovations:
            shared &= set(block.columns)
        return not shared

    def column_key(self) -> Tuple[Tuple[int, int], ...]:
        """Concatenated columns keyed as (block, row); block 0 is P_C"""
        key = [(0, n) for n in self.common.columns]
        for j, block in enumerate(self.innovations, 1):
            key.extend((j, n) for n in block.columns)
        return tuple(key)

    def label(self) -> str:
        parts = ["C{" + ",".join(map(str, self.common.columns)) + "}"]
        for j, block in enumerate(self.innovations, 1):
            parts.append(f"{j}{{" + ",".join(map(str, block.columns)) + "}")
        return "|".join(parts)

    def to_json_dict(self) -> Dict:
        return {
            'N': self.N,
            'common': [n - 1 for n in self.common.columns],
            'innovations': [[n - 1 for n in b.columns] for b in self.innovations],
        }

    @classmethod
    def from_json_dict(cls, data: Dict) -> 'LocationMatrix':
        return cls.build(
            int(data['N']),
            [int(n) + 1 for n in data['common']],
            [[int(n) + 1 for n in cols] for cols in data['innovations']],
        )


# ----------------------------------------------------------------------
# Numerical containers
# ----------------------------------------------------------------------

def _frozen(values, shape_name: str) -> np.ndarray:
    array = np.array(values, dtype=float)
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{shape_name} must contain finite real numbers")
    array.setflags(write=False)
    return array


def _json_number(v: float):
    return int(v) if float(v).is_integer() else float(v)


@dataclass(frozen=True)
class SignalEnsemble:
    """J real signals of length N, stored as a J x N array"""
    signals: np.ndarray

    def __post_init__(self):
        array = _frozen(self.signals, "signals")
        if array.ndim != 2 or array.shape[0] < 1 or array.shape[1] < 1:
            raise DimensionMismatchError(f"signals must be a non-empty J x N array, got shape {array.shape}")
        object.__setattr__(self, 'signals', array)

    @property
    def J(self) -> int:
        return self.signals.shape[0]

    @property
    def N(self) -> int:
        return self.signals.shape[1]

    @property
    def X(self) -> np.ndarray:
        """Concatenation [x_1; ...; x_J] of length J*N"""
        return self.signals.reshape(-1)

    def x(self, sensor: int) -> np.ndarray:
        return self.signals[sensor - 1]

    def to_json_dict(self) -> Dict:
        return {
            'N': self.N,
            'J': self.J,
            'signals': [[_json_number(v) for v in row] for row in self.signals.tolist()],
        }

    @classmethod
    def from_json_dict(cls, data: Dict) -> 'SignalEnsemble':
        ensemble = cls(np.array(data['signals'], dtype=float))
        if ensemble.N != int(data['N']) or ensemble.J != int(data['J']):
            raise DimensionMismatchError(
                f"declared N={data['N']}, J={data['J']} but signals are {ensemble.J} x {ensemble.N}")
        return ensemble


@dataclass(frozen=True)
class ValueVector:
    """Theta = [theta_C; theta_1; ...; theta_J]"""
    theta_common: np.ndarray
    theta_innov: Tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, 'theta_common', _frozen(self.theta_common, "theta_common").reshape(-1))
        object.__setattr__(self, 'theta_innov',
                           tuple(_frozen(t, "theta_innov").reshape(-1) for t in self.theta_innov))

    @property
    def total_length(self) -> int:
        return self.theta_common.size + sum(t.size for t in self.theta_innov)

    def concatenated(self) -> np.ndarray:
        return np.concatenate([self.theta_common, *self.theta_innov]) if self.total_length else np.zeros(0)

    @classmethod
    def from_flat(cls, P: LocationMatrix, theta: Sequence[float]) -> 'ValueVector':
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != P.num_columns:
            raise DimensionMismatchError(f"value vector has length {theta.size}, location matrix has {P.num_columns} columns")
        parts = [theta[:P.K_C]]
        for j in range(1, P.J + 1):
            start = P.innovation_offset(j)
            parts.append(theta[start:start + P.K[j - 1]])
        return cls(parts[0], tuple(parts[1:]))

    def matches(self, P: LocationMatrix) -> bool:
        return (self.theta_common.size == P.K_C and len(self.theta_innov) == P.J
                and all(t.size == k for t, k in zip(self.theta_innov, P.K)))


@dataclass(frozen=True)
class Decomposition:
    """Common component z_C and innovation components z_j, with x_j = z_C + z_j"""
    z_common: np.ndarray
    z_innov: Tuple[np.ndarray, ...] = field(default_factory=tuple)


# ----------------------------------------------------------------------
# Ensemble sparsity models
# ----------------------------------------------------------------------

class ModelFamily(str, Enum):
    GENERAL = "general"                  # any full-rank common/innovation matrix
    FULL_COMMON = "full_common"          # P_C = I
    SHARED_SUPPORT = "shared_support"    # P_C empty, P_1 = ... = P_J
    MIN_OVERLAP = "min_overlap"          # P_C empty, all P_j share >= t columns


class EnsembleModel(BaseModel):
    """A common/innovation ESM restricted by caps so that enumeration is finite"""
    model_config = ConfigDict(frozen=True)

    family: ModelFamily
    N: int = Field(ge=1)
    J: int = Field(ge=1)
    cap_common: int = Field(ge=0)
    cap_innovation: int = Field(ge=0)
    min_overlap: int = Field(default=0, ge=0)

    @model_validator(mode='after')
    def _check_family(self):
        if self.family == ModelFamily.FULL_COMMON and self.cap_common < self.N:
            raise ValueError(f"full_common needs cap_common >= N={self.N}")
        if self.family == ModelFamily.MIN_OVERLAP and self.min_overlap > min(self.cap_innovation, self.N):
            raise ValueError("min_overlap cannot exceed cap_innovation or N")
        return self

    def admits(self, P: LocationMatrix) -> bool:
        """Structural constraint of the family, caps and full rank"""
        if P.N != self.N or P.J != self.J or not P.is_full_rank():
            return False
        if P.K_C > self.cap_common or any(k > self.cap_innovation for k in P.K):
            return False
        supports = [set(b.columns) for b in P.innovations]
        if self.family == ModelFamily.FULL_COMMON:
            return P.common.columns == tuple(range(1, self.N + 1))
        if self.family == ModelFamily.SHARED_SUPPORT:
            return P.K_C == 0 and all(s == supports[0] for s in supports)
        if self.family == ModelFamily.MIN_OVERLAP:
            return P.K_C == 0 and len(set.intersection(*supports)) >= self.min_overlap
        return True

    def max_columns(self) -> int:
        innovation = self.J * min(self.cap_innovation, self.N)
        if self.family == ModelFamily.FULL_COMMON:
            return self.N + innovation
        if self.family in (ModelFamily.SHARED_SUPPORT, ModelFamily.MIN_OVERLAP):
            return innovation
        return min(self.cap_common, self.N) + innovation


# ----------------------------------------------------------------------
# Operations
# ----------------------------------------------------------------------

def expand(P: LocationMatrix) -> np.ndarray:
    """The JN x D' 0/1 matrix, columns ordered [P_C | P_1 | ... | P_J]"""
    N, J = P.N, P.J
    out = np.zeros((J * N, P.num_columns))
    for j in range(J):
        row0 = j * N
        for k, n in enumerate(P.common.columns):
            out[row0 + n - 1, k] = 1.0
        offset = P.innovation_offset(j + 1)
        for k, n in enumerate(P.innovations[j].columns):
            out[row0 + n - 1, offset + k] = 1.0
    return out


def synthesize(P: LocationMatrix, theta: ValueVector) -> Tuple[SignalEnsemble, Decomposition]:
    if not theta.matches(P):
        raise DimensionMismatchError(
            f"value vector blocks ({theta.theta_common.size}, {[t.size for t in theta.theta_innov]}) "
            f"do not match location matrix widths ({P.K_C}, {list(P.K)})")

    z_common = np.zeros(P.N)
    z_common[np.asarray(P.common.columns, dtype=int) - 1] = theta.theta_common
    z_innov = []
    for block, values in zip(P.innovations, theta.theta_innov):
        z = np.zeros(P.N)
        z[np.asarray(block.columns, dtype=int) - 1] = values
        z_innov.append(z)

    signals = np.vstack([z_common + z for z in z_innov])
    return SignalEnsemble(signals), Decomposition(z_common, tuple(z_innov))


def _check_sensors(P: LocationMatrix, gamma: Iterable[int]) -> frozenset:
    members = frozenset(int(j) for j in gamma)
    bad = sorted(j for j in members if not 1 <= j <= P.J)
    if bad:
        raise InvalidSensorError(f"sensor indices {bad} outside [1, {P.J}]")
    return members


def overlap_size(P: LocationMatrix, gamma: Iterable[int]) -> int:
    """
    K_C(Gamma, P): indices in P_C that also sit in P_j for every j outside Gamma

    These common entries can only be measured by sensors inside Gamma.
    """
    members = _check_sensors(P, gamma)
    if not members:
        return 0
    outside = [set(P.innovations[j - 1].columns) for j in range(1, P.J + 1) if j not in members]
    return sum(1 for n in P.common.columns if all(n in s for s in outside))


def _check_shapes(P: LocationMatrix, X: SignalEnsemble):
    if P.N != X.N or P.J != X.J:
        raise DimensionMismatchError(f"location matrix is for N={P.N}, J={P.J}; ensemble has N={X.N}, J={X.J}")


def factor(P: LocationMatrix, X: SignalEnsemble, solver: Optional[LinearSolver] = None) -> ValueVector:
    """Least-squares value vector of expand(P) @ Theta ~= X (exact when P is feasible and full rank)"""
    _check_shapes(P, X)
    solver = solver or LinearSolver()
    return ValueVector.from_flat(P, solver.solve_min_norm(expand(P), X.X))


def is_feasible(P: LocationMatrix, X: SignalEnsemble, tol: float = DEFAULT_FEASIBILITY_TOL,
                solver: Optional[LinearSolver] = None, exact: Optional[bool] = None) -> bool:
    """
    Membership of P in the feasible set of X

    Integer-valued ensembles use exact rational arithmetic unless exact=False;
    otherwise the relative least-squares residual is compared with tol.
    """
    _check_shapes(P, X)
    if not np.any(X.X):
        return True
    solver = solver or LinearSolver()
    A = expand(P)
    if exact is None:
        exact = is_integral(X.X)
    if exact:
        return solver.exact_is_consistent(A, X.X)
    theta = solver.solve_min_norm(A, X.X)
    return float(np.linalg.norm(A @ theta - X.X)) <= tol * float(np.linalg.norm(X.X))


# ----------------------------------------------------------------------
# Enumeration
# ----------------------------------------------------------------------

def _compositions(total: int, parts: int, cap: int) -> Iterator[Tuple[int, ...]]:
    """Ordered ways to write total as parts non-negative integers, each <= cap"""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(min(total, cap) + 1):
        for rest in _compositions(total - first, parts - 1, cap):
            yield (first,) + rest


def _innovation_choices(N: int, sizes: Tuple[int, ...]) -> Iterator[Tuple[Tuple[int, ...], ...]]:
    indices = range(1, N + 1)
    return product(*(combinations(indices, k) for k in sizes))


def _raw_level(M: EnsembleModel, d: int) -> Iterator[Tuple[Tuple[int, ...], Tuple[Tuple[int, ...], ...]]]:
    """(common, innovations) column tuples with exactly d columns, before rank filtering"""
    N, J = M.N, M.J
    cap_innov = min(M.cap_innovation, N)

    if M.family == ModelFamily.SHARED_SUPPORT:
        if d % J == 0 and d // J <= cap_innov:
            for support in combinations(range(1, N + 1), d // J):
                yield (), (support,) * J
        return

    if M.family == ModelFamily.FULL_COMMON:
        common_options = [tuple(range(1, N + 1))] if d >= N else []
    elif M.family == ModelFamily.MIN_OVERLAP:
        common_options = [()]
    else:
        common_options = [c for kc in range(min(M.cap_common, N, d) + 1)
                          for c in combinations(range(1, N + 1), kc)]

    for common in common_options:
        for sizes in _compositions(d - len(common), J, cap_innov):
            for innovations in _innovation_choices(N, sizes):
                if M.family == ModelFamily.MIN_OVERLAP:
                    shared = set(innovations[0]).intersection(*innovations[1:])
                    if len(shared) < M.min_overlap:
                        continue
                yield common, innovations


def enumerate_location_matrices(M: EnsembleModel) -> Iterator[LocationMatrix]:
    """
    Every full-rank matrix of the family within caps

    Order: non-decreasing D', ties broken lexicographically on the concatenated
    columns keyed (block, row). The stream is lazy level by level, so callers
    that stop at the first hit never build the larger levels.
    """
    for d in range(M.max_columns() + 1):
        level = []
        for common, innovations in _raw_level(M, d):
            shared = set(common)
            for cols in innovations:
                shared &= set(cols)
            if shared:
                continue
            level.append(LocationMatrix.build(M.N, common, innovations))
        level.sort(key=LocationMatrix.column_key)
        yield from level


@lru_cache(maxsize=32)
def model_family(M: EnsembleModel) -> Tuple[LocationMatrix, ...]:
    """The whole enumeration, materialized once per model"""
    return tuple(enumerate_location_matrices(M))


def ensemble_sparsity(X: SignalEnsemble, M: EnsembleModel, tol: float = DEFAULT_FEASIBILITY_TOL,
                      solver: Optional[LinearSolver] = None) -> Tuple[int, LocationMatrix]:
    """Smallest D' over feasible matrices of the model, with the first witness found"""
    if M.N != X.N or M.J != X.J:
        raise DimensionMismatchError(f"model is for N={M.N}, J={M.J}; ensemble has N={X.N}, J={X.J}")
    solver = solver or LinearSolver()
    for P in enumerate_location_matrices(M):
        if is_feasible(P, X, tol=tol, solver=solver):
            return P.num_columns, P
    raise InfeasibleModelError(
        f"no {M.family.value} location matrix with K_C <= {M.cap_common}, K_j <= {M.cap_innovation} "
        f"is feasible for this ensemble")


def minimal_witnesses(X: SignalEnsemble, M: EnsembleModel, tol: float = DEFAULT_FEASIBILITY_TOL,
                      solver: Optional[LinearSolver] = None) -> List[LocationMatrix]:
    """All feasible matrices of the model that attain the ensemble sparsity level"""
    solver = solver or LinearSolver()
    D, _ = ensemble_sparsity(X, M, tol=tol, solver=solver)
    witnesses = []
    for P in enumerate_location_matrices(M):
        if P.num_columns < D:
            continue
        if P.num_columns > D:
            break
        if is_feasible(P, X, tol=tol, solver=solver):
            witnesses.append(P)
    return witnesses


# ----------------------------------------------------------------------
# Random ensembles
# ----------------------------------------------------------------------

def ensemble_rng(seed: int) -> np.random.Generator:
    """Generator for ensemble draws; kept apart from every sensor substream"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(0,))))


def sample_location_matrix(M: EnsembleModel, rng: np.random.Generator) -> LocationMatrix:
    family = model_family(M)
    if not family:
        raise InfeasibleModelError(f"the {M.family.value} model admits no location matrix within its caps")
    return family[int(rng.integers(len(family)))]


def random_ensemble(M: EnsembleModel, seed: int) -> Tuple[SignalEnsemble, LocationMatrix, ValueVector]:
    """Uniform location matrix from the model, then i.i.d. standard normal values"""
    rng = ensemble_rng(seed)
    P = sample_location_matrix(M, rng)
    theta = ValueVector.from_flat(P, rng.standard_normal(P.num_columns))
    X, _ = synthesize(P, theta)
    return X, P, theta
