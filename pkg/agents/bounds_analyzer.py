"""
Agent: Bounds Analyzer - per-subset measurement conditions
=========================================================

For a location matrix P and an allocation (M_1, ..., M_J) this agent checks,
for every sensor subset Gamma,

    known P   : sum_{j in Gamma} M_j >= sum_{j in Gamma} K_j + K_C(Gamma, P)
    unknown P : the same right-hand side plus |Gamma|

and the converse (some nonempty Gamma violates the known-P condition). It
also lists the Pareto-minimal allocations for either bound.

Pure combinatorics, no linear algebra.
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

from utils.ensemble_model import LocationMatrix, overlap_size
from utils.errors import DimensionMismatchError, GuardExceededError
from .base_agent import BaseAgent

MAX_SENSORS_FOR_FRONTIER = 12


@dataclass(frozen=True, order=True)
class SensorSubset:
    """Gamma, a subset of the sensors {1, ..., J}"""
    members: Tuple[int, ...]
    J: int = field(compare=False)

    def complement(self) -> 'SensorSubset':
        return SensorSubset(tuple(j for j in range(1, self.J + 1) if j not in self.members), self.J)

    def __len__(self):
        return len(self.members)

    def __str__(self):
        return "{" + ",".join(map(str, self.members)) + "}"


def sensor_subsets(J: int, include_empty: bool = True) -> Iterator[SensorSubset]:
    """All subsets ordered by cardinality, then lexicographically"""
    for size in range(0 if include_empty else 1, J + 1):
        for members in combinations(range(1, J + 1), size):
            yield SensorSubset(members, J)


@dataclass
class BoundReport:
    """slacks[Gamma] = sum_{j in Gamma} M_j minus the right-hand side"""
    kind: str
    allocation: Tuple[int, ...]
    slacks: Dict[SensorSubset, int]
    rhs: Dict[SensorSubset, int]
    worst_subset: Optional[SensorSubset] = None

    @property
    def satisfied(self) -> bool:
        return all(s >= 0 for s in self.slacks.values())

    @property
    def violating_subsets(self) -> List[SensorSubset]:
        return [g for g in self.slacks if self.slacks[g] < 0]

    def to_json_dict(self) -> Dict:
        return {
            'kind': self.kind,
            'allocation': list(self.allocation),
            'satisfied': self.satisfied,
            'worst_subset': list(self.worst_subset.members) if self.worst_subset else None,
            'subsets': [
                {
                    'subset': list(g.members),
                    'measurements': self.rhs[g] + self.slacks[g],
                    'required': self.rhs[g],
                    'slack': self.slacks[g],
                }
                for g in self.slacks
            ],
        }


class BoundsAnalyzerAgent(BaseAgent):
    """
    Evaluates the achievability / converse / unknown-P bounds
    0 solver calls - counting only
    """

    MODES = ('known', 'unknown')

    def __init__(self, verbose: bool = False):
        super().__init__("Bounds Analyzer", uses_solver=False, verbose=verbose)
        self.say(f"📐 {self.name} initialized - 0 solver calls")

    # ------------------------------------------------------------------
    # Right-hand sides
    # ------------------------------------------------------------------

    @staticmethod
    def known_rhs(P: LocationMatrix, gamma: SensorSubset) -> int:
        return sum(P.K[j - 1] for j in gamma.members) + overlap_size(P, gamma.members)

    @classmethod
    def unknown_rhs(cls, P: LocationMatrix, gamma: SensorSubset) -> int:
        return cls.known_rhs(P, gamma) + len(gamma)

    def _rhs_for(self, mode: str) -> Callable[[LocationMatrix, SensorSubset], int]:
        if mode == 'known':
            return self.known_rhs
        if mode == 'unknown':
            return self.unknown_rhs
        raise ValueError(f"mode must be one of {self.MODES}, got {mode!r}")

    # ------------------------------------------------------------------
    # Checks
    # ------------------------------------------------------------------

    def _evaluate(self, kind: str, allocation: Sequence[int], P: LocationMatrix,
                  rhs_fn: Callable[[LocationMatrix, SensorSubset], int],
                  subsets: Sequence[SensorSubset]) -> BoundReport:
        allocation = tuple(int(m) for m in allocation)
        if len(allocation) != P.J:
            raise DimensionMismatchError(f"allocation has {len(allocation)} entries, location matrix has J={P.J}")

        slacks, rhs = {}, {}
        for gamma in subsets:
            rhs[gamma] = rhs_fn(P, gamma)
            slacks[gamma] = sum(allocation[j - 1] for j in gamma.members) - rhs[gamma]

        # subsets arrive in (cardinality, lexicographic) order
        worst = next((g for g in subsets if slacks[g] < 0), None)
        self.runs_completed += 1
        return BoundReport(kind, allocation, slacks, rhs, worst)

    def check_known_p(self, allocation: Sequence[int], P: LocationMatrix) -> BoundReport:
        """Achievability with known P, over all 2^J subsets"""
        return self._evaluate('known', allocation, P, self.known_rhs, list(sensor_subsets(P.J)))

    def check_converse(self, allocation: Sequence[int], P: LocationMatrix) -> BoundReport:
        """
        Converse: a nonempty Gamma with strict violation of the known-P bound

        The report's worst_subset is the witness; satisfied is False exactly
        when a witness exists.
        """
        return self._evaluate('converse', allocation, P, self.known_rhs,
                              list(sensor_subsets(P.J, include_empty=False)))

    def check_unknown_p(self, allocation: Sequence[int], P: LocationMatrix) -> BoundReport:
        """Achievability with unknown P (one extra measurement per sensor in Gamma)"""
        return self._evaluate('unknown', allocation, P, self.unknown_rhs, list(sensor_subsets(P.J)))

    def check_necessary(self, allocation: Sequence[int], P: LocationMatrix) -> BoundReport:
        """M_j >= K_j for every sensor and sum_j M_j >= D'"""
        J = P.J
        subsets = [SensorSubset((j,), J) for j in range(1, J + 1)] + [SensorSubset(tuple(range(1, J + 1)), J)]

        def rhs(P: LocationMatrix, gamma: SensorSubset) -> int:
            if len(gamma) == J:
                return P.num_columns
            return P.K[gamma.members[0] - 1]

        return self._evaluate('necessary', allocation, P, rhs, subsets)

    def check(self, allocation: Sequence[int], P: LocationMatrix, mode: str = 'known') -> BoundReport:
        self._rhs_for(mode)
        return self.check_known_p(allocation, P) if mode == 'known' else self.check_unknown_p(allocation, P)

    # ------------------------------------------------------------------
    # Pareto frontier
    # ------------------------------------------------------------------

    def minimal_allocations(self, P: LocationMatrix, mode: str = 'known') -> List[Tuple[int, ...]]:
        """
        Allocations satisfying the bound where lowering any M_j breaks it

        Depth-first over sensors in index order with values ascending, so the
        result is sorted lexicographically. A subset is checked as soon as all
        its sensors are assigned; M_j never needs to exceed the largest
        right-hand side of a subset containing j.
        """
        J = P.J
        if J > MAX_SENSORS_FOR_FRONTIER:
            raise GuardExceededError(f"frontier search is limited to J <= {MAX_SENSORS_FOR_FRONTIER}, got J={J}")
        rhs_fn = self._rhs_for(mode)

        subsets = list(sensor_subsets(J, include_empty=False))
        rhs = {g: rhs_fn(P, g) for g in subsets}
        closing = {j: [g for g in subsets if g.members[-1] == j] for j in range(1, J + 1)}
        upper = [max(rhs[g] for g in subsets if j in g.members) for j in range(1, J + 1)]

        self.say(f"   🔍 Searching {mode}-P frontier for J={J} (upper bounds {upper})")

        frontier: List[Tuple[int, ...]] = []
        partial: List[int] = []

        def holds(gamma: SensorSubset, values: Sequence[int]) -> bool:
            return sum(values[j - 1] for j in gamma.members) >= rhs[gamma]

        def is_minimal(values: List[int]) -> bool:
            for j in range(J):
                if values[j] == 0:
                    continue
                values[j] -= 1
                still_ok = all(holds(g, values) for g in subsets if j + 1 in g.members)
                values[j] += 1
                if still_ok:
                    return False
            return True

        def descend(j: int):
            if j > J:
                if is_minimal(partial):
                    frontier.append(tuple(partial))
                return
            for value in range(upper[j - 1] + 1):
                partial.append(value)
                if all(holds(g, partial) for g in closing[j]):
                    descend(j + 1)
                partial.pop()

        descend(1)
        self.runs_completed += 1
        return frontier

    # ------------------------------------------------------------------

    def process(self, P: LocationMatrix, allocation: Sequence[int], mode: str = 'known') -> Dict:
        """Main entry point: bound reports plus the frontier for one (P, allocation)"""
        self.say(f"\n📐 {self.name} checking allocation {list(allocation)} against {P.label()}")
        try:
            report = self.check(allocation, P, mode)
            converse = self.check_converse(allocation, P)
            necessary = self.check_necessary(allocation, P)
            frontier = self.minimal_allocations(P, mode)
        except Exception as e:
            return {'success': False, 'error': str(e)}

        if report.satisfied:
            self.say(f"   ✅ {mode}-P bound satisfied")
        else:
            self.say(f"   ❌ {mode}-P bound violated at Gamma={report.worst_subset}")

        return {
            'success': True,
            'mode': mode,
            'location_matrix': P.to_json_dict(),
            'report': report,
            'converse': converse,
            'necessary': necessary,
            'frontier': frontier,
        }
