"""
Agent: Recovery Engine - joint reconstruction of the signal ensemble
===================================================================

Known P   : solve Y = Upsilon Theta with Upsilon = Phi P. A full column rank
            Upsilon gives the unique Theta; otherwise a null-space vector
            certifies that two different ensembles explain Y.
Converse  : for a subset Gamma that violates the known-P bound, show that the
            Gamma-restricted columns of the partially zeroed Upsilon are rank
            deficient and hand back a null-space certificate.
Unknown P : hold out the last measurement of every sensor (summed into one
            scalar), walk the model's location matrices in enumeration order,
            solve the remaining system with the minimum-norm solution and
            accept the first candidate that also predicts the held-out scalar.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from utils.ensemble_model import (EnsembleModel, LocationMatrix, SignalEnsemble,
                                  ValueVector, expand, model_family,
                                  synthesize)
from utils.errors import DimensionMismatchError, InvariantViolationError, PreconditionError
from utils.measurement import MeasurementSet, MeasurementVector, compose
from utils.solver_interface import LinearSolver
from .base_agent import BaseAgent
from .bounds_analyzer import BoundsAnalyzerAgent, SensorSubset
from .matching_analyzer import MatchingAnalyzerAgent

DEFAULT_RECOVERY_TOL = 1e-8

UNIQUE = 'unique'
AMBIGUOUS = 'ambiguous'
INFEASIBLE = 'infeasible'


@dataclass
class SplitMeasurements:
    held_out_scalar: float            # y-bar: sum of every sensor's last measurement
    held_out_row: np.ndarray          # phi-bar (length JN): last rows of the Phi_j side by side
    remaining: MeasurementVector      # Y-bar
    remaining_rows: MeasurementSet    # Phi-bar, allocation (M_1 - 1, ..., M_J - 1)


@dataclass
class RecoveryOutcome:
    status: str
    theta: Optional[ValueVector] = None
    x_hat: Optional[SignalEnsemble] = None
    chosen_P: Optional[LocationMatrix] = None
    certificate: Optional[ValueVector] = None
    residual: float = float('nan')
    cross_validation_residual: Optional[float] = None
    candidates_examined: int = 0
    rank: Optional[int] = None

    def to_json_dict(self) -> Dict:
        return {
            'status': self.status,
            'chosen_P': self.chosen_P.to_json_dict() if self.chosen_P is not None else None,
            'theta': self.theta.concatenated().tolist() if self.theta is not None else None,
            'x_hat': self.x_hat.signals.tolist() if self.x_hat is not None else None,
            'certificate': self.certificate.concatenated().tolist() if self.certificate is not None else None,
            'residuals': {
                'measurement': self.residual,
                'cross_validation': self.cross_validation_residual,
            },
            'rank': self.rank,
            'candidates_examined': self.candidates_examined,
        }


@dataclass
class ConverseWitness:
    gamma: SensorSubset
    rank_deficit: int
    certificate: np.ndarray           # unit vector v with Upsilon v = 0
    restricted_columns: List[int]     # 0-indexed columns of Upsilon kept in the restricted block
    restricted_rank: int


class RecoveryEngineAgent(BaseAgent):
    """
    Joint recovery for known and unknown location matrices
    Every solve goes through the shared LinearSolver
    """

    def __init__(self, solver: Optional[LinearSolver] = None,
                 matching_agent: Optional[MatchingAnalyzerAgent] = None,
                 bounds_agent: Optional[BoundsAnalyzerAgent] = None,
                 verbose: bool = False):
        super().__init__("Recovery Engine", uses_solver=True, verbose=verbose)
        self.solver = solver or LinearSolver()
        self.bounds = bounds_agent or BoundsAnalyzerAgent()
        self.matching = matching_agent or MatchingAnalyzerAgent(self.bounds)
        self.say(f"🧮 {self.name} initialized - shared linear solver")

    # ------------------------------------------------------------------
    # Known P
    # ------------------------------------------------------------------

    @staticmethod
    def _check_measurements(Y: MeasurementVector, S: MeasurementSet):
        lengths = tuple(y.size for y in Y.per_sensor)
        if lengths != S.allocation:
            raise DimensionMismatchError(f"measurement lengths {list(lengths)} do not match allocation {list(S.allocation)}")

    def recover_known_p(self, Y: MeasurementVector, S: MeasurementSet, P: LocationMatrix,
                        tol: float = DEFAULT_RECOVERY_TOL) -> RecoveryOutcome:
        self._check_measurements(Y, S)
        upsilon = compose(S, P)
        y = Y.concatenated()

        theta_flat = self.solver.solve_min_norm(upsilon, y)
        residual = float(np.linalg.norm(upsilon @ theta_flat - y))
        self.runs_completed += 1

        if residual > tol * (1.0 + float(np.linalg.norm(y))):
            self.say(f"   ❌ Residual {residual:.3e} - measurements are not explained by {P.label()}")
            return RecoveryOutcome(INFEASIBLE, residual=residual, chosen_P=P, candidates_examined=1)

        theta = ValueVector.from_flat(P, theta_flat)
        x_hat, _ = synthesize(P, theta)
        rank = self.solver.numerical_rank(upsilon)

        if rank == P.num_columns:
            return RecoveryOutcome(UNIQUE, theta=theta, x_hat=x_hat, chosen_P=P,
                                   residual=residual, candidates_examined=1, rank=rank)

        direction = self.solver.null_space(upsilon)[:, 0]
        certificate = ValueVector.from_flat(P, theta_flat + direction)
        self.say(f"   ⚠️ rank {rank} < {P.num_columns}: value vector is not identifiable")
        return RecoveryOutcome(AMBIGUOUS, theta=theta, x_hat=x_hat, chosen_P=P, certificate=certificate,
                               residual=residual, candidates_examined=1, rank=rank)

    # ------------------------------------------------------------------
    # Converse
    # ------------------------------------------------------------------

    def converse_witness(self, S: MeasurementSet, P: LocationMatrix, gamma: Iterable[int]) -> ConverseWitness:
        if S.N != P.N or S.J != P.J:
            raise DimensionMismatchError(f"measurement set is for N={S.N}, J={S.J}; location matrix has N={P.N}, J={P.J}")
        subset = SensorSubset(tuple(sorted(set(int(j) for j in gamma))), P.J)
        if not subset.members:
            raise PreconditionError("the converse needs a nonempty sensor subset")

        have = sum(S.allocation[j - 1] for j in subset.members)
        need = BoundsAnalyzerAgent.known_rhs(P, subset)
        if have >= need:
            raise PreconditionError(f"subset {subset} has {have} >= {need} measurements; the bound is not violated")

        upsilon = compose(S, P)
        zeroed = self.matching.partially_zero(upsilon, P)

        outside = [set(P.innovations[j - 1].columns) for j in subset.complement().members]
        columns = [k for k, n in enumerate(P.common.columns) if all(n in s for s in outside)]
        for j in subset.members:
            start = P.innovation_offset(j)
            columns.extend(range(start, start + P.K[j - 1]))
        restricted = zeroed[:, columns]

        for j in subset.complement().members:
            rows = slice(S.row_offset(j), S.row_offset(j) + S.allocation[j - 1])
            if np.any(restricted[rows] != 0):
                raise InvariantViolationError(f"restricted columns are nonzero on rows of sensor {j} outside {subset}")

        restricted_rank = self.solver.numerical_rank(restricted)
        deficit = len(columns) - restricted_rank
        if deficit < 1:
            raise InvariantViolationError(f"restricted block for {subset} unexpectedly has full column rank")

        null_basis = self.solver.null_space(upsilon)
        if null_basis.shape[1] == 0:
            raise InvariantViolationError("composed matrix has full column rank despite the violated bound")
        certificate = null_basis[:, 0]

        self.say(f"   🧾 Converse witness for {subset}: deficit {deficit}")
        return ConverseWitness(subset, deficit, certificate, columns, restricted_rank)

    # ------------------------------------------------------------------
    # Unknown P
    # ------------------------------------------------------------------

    def split_for_cross_validation(self, Y: MeasurementVector, S: MeasurementSet) -> SplitMeasurements:
        self._check_measurements(Y, S)
        empty = [j for j, m in enumerate(S.allocation, 1) if m == 0]
        if empty:
            raise PreconditionError(f"sensors {empty} have no measurements; one held-out row per sensor is required")

        held_out_scalar = float(sum(y[-1] for y in Y.per_sensor))
        held_out_row = np.concatenate([phi[-1] for phi in S.per_sensor])
        remaining = MeasurementVector(tuple(y[:-1] for y in Y.per_sensor))
        remaining_rows = MeasurementSet(N=S.N, per_sensor=tuple(phi[:-1] for phi in S.per_sensor), seed=S.seed)
        return SplitMeasurements(held_out_scalar, held_out_row, remaining, remaining_rows)

    def recover_unknown_p(self, Y: MeasurementVector, S: MeasurementSet, M: EnsembleModel,
                          tol: float = DEFAULT_RECOVERY_TOL) -> RecoveryOutcome:
        if M.N != S.N or M.J != S.J:
            raise DimensionMismatchError(f"model is for N={M.N}, J={M.J}; measurement set has N={S.N}, J={S.J}")
        split = self.split_for_cross_validation(Y, S)
        y_bar = split.remaining.concatenated()
        y_scale = 1.0 + float(np.linalg.norm(y_bar))
        phi_norm = float(np.linalg.norm(split.held_out_row))

        examined = 0
        for P in model_family(M):
            examined += 1
            A = compose(split.remaining_rows, P)
            theta_flat = self.solver.solve_min_norm(A, y_bar)
            residual = float(np.linalg.norm(A @ theta_flat - y_bar))
            if residual > tol * y_scale:
                continue

            x_candidate = expand(P) @ theta_flat
            cv_residual = abs(split.held_out_scalar - float(split.held_out_row @ x_candidate))
            cv_scale = tol * (1.0 + abs(split.held_out_scalar) + phi_norm * float(np.linalg.norm(x_candidate)))
            if cv_residual > cv_scale:
                continue

            theta = ValueVector.from_flat(P, theta_flat)
            x_hat, _ = synthesize(P, theta)
            # re-check both tests on the ensemble we are about to return
            recheck_cv = abs(split.held_out_scalar - float(split.held_out_row @ x_hat.X))
            recheck_residual = float(np.linalg.norm(A @ theta.concatenated() - y_bar))
            if recheck_residual > tol * y_scale or recheck_cv > cv_scale:
                raise InvariantViolationError(f"accepted {P.label()} without passing both tests")

            self.runs_completed += 1
            self.say(f"   ✅ Accepted {P.label()} after {examined} candidates")
            return RecoveryOutcome(UNIQUE, theta=theta, x_hat=x_hat, chosen_P=P, residual=residual,
                                   cross_validation_residual=cv_residual, candidates_examined=examined)

        self.runs_completed += 1
        self.say(f"   ❌ No candidate passed cross-validation ({examined} examined)")
        return RecoveryOutcome(INFEASIBLE, candidates_examined=examined)

    # ------------------------------------------------------------------

    def process(self, Y: MeasurementVector, S: MeasurementSet, mode: str = 'known',
                P: Optional[LocationMatrix] = None, M: Optional[EnsembleModel] = None,
                tol: float = DEFAULT_RECOVERY_TOL) -> Dict:
        """Main entry point: run one recovery and wrap it the usual way"""
        self.say(f"\n🧮 {self.name} running {mode}-P recovery on allocation {list(S.allocation)}")
        try:
            if mode == 'known':
                if P is None:
                    raise PreconditionError("known-P recovery needs a location matrix")
                outcome = self.recover_known_p(Y, S, P, tol)
            elif mode == 'unknown':
                if M is None:
                    raise PreconditionError("unknown-P recovery needs an ensemble model")
                outcome = self.recover_unknown_p(Y, S, M, tol)
            else:
                raise PreconditionError(f"unknown recovery mode {mode!r}")
        except Exception as e:
            return {'success': False, 'error': str(e)}

        return {'success': True, 'outcome': outcome}
