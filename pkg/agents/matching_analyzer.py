"""
Agent: Matching Analyzer - bipartite dependency graph and Hall's condition
=========================================================================

Value vertices (one per column of P) are joined to measurement vertices (one
per row of Y):

- common column k joins every measurement of sensor j unless that column of
  P_C also appears in P_j (the two values are then added into the same entry
  of x_j, so sensor j cannot tell them apart)
- innovation columns of sensor j join exactly sensor j's measurements

A matching saturating every value vertex exists iff the known-P bound holds
for every sensor subset. On failure we return a deficient set read off the
alternating-path structure of the maximum matching.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

import numpy as np

from utils.ensemble_model import LocationMatrix
from utils.errors import DimensionMismatchError, InvariantViolationError
from .base_agent import BaseAgent
from .bounds_analyzer import BoundsAnalyzerAgent, sensor_subsets

FAKE_INFINITY = -1


class ValueVertex(NamedTuple):
    kind: str     # 'common' or 'innovation'
    sensor: int   # 0 for common vertices
    index: int    # k in 1..K_C, or the local innovation index

    def __str__(self):
        if self.kind == 'common':
            return f"c{self.index}"
        return f"i{self.sensor}_{self.index}"


class MeasurementVertex(NamedTuple):
    sensor: int
    row: int

    def __str__(self):
        return f"m{self.sensor}_{self.row}"


@dataclass
class BipartiteGraph:
    P: LocationMatrix
    allocation: Tuple[int, ...]
    value_vertices: List[ValueVertex]
    measurement_vertices: List[MeasurementVertex]
    edges: Dict[ValueVertex, List[MeasurementVertex]]
    # dependencies dropped by the overlap rule, kept for drawing only
    removed: Dict[ValueVertex, List[MeasurementVertex]] = field(default_factory=dict)

    def neighbors(self, vertices: Iterable[ValueVertex]) -> Set[MeasurementVertex]:
        found: Set[MeasurementVertex] = set()
        for v in vertices:
            found.update(self.edges[v])
        return found

    def to_json_dict(self) -> Dict:
        return {
            'value_vertices': [str(v) for v in self.value_vertices],
            'measurement_vertices': [str(m) for m in self.measurement_vertices],
            'edges': [[str(v), str(m)] for v in self.value_vertices for m in self.edges[v]],
        }


@dataclass
class MatchingResult:
    complete: bool
    pairs: Dict[ValueVertex, MeasurementVertex]
    deficient_set: Optional[List[ValueVertex]] = None
    assignment: Optional[Dict[int, int]] = None      # common index k -> sensor C(k)
    counts: Optional[Tuple[int, ...]] = None         # C_1, ..., C_J

    def to_json_dict(self) -> Dict:
        return {
            'complete': self.complete,
            'pairs': [[str(v), str(m)] for v, m in self.pairs.items()],
            'deficient_set': [str(v) for v in self.deficient_set] if self.deficient_set is not None else None,
            'assignment': {str(k): j for k, j in self.assignment.items()} if self.assignment is not None else None,
            'counts': list(self.counts) if self.counts is not None else None,
        }


class HopcroftKarp:
    """
    Hopcroft-Karp maximum matching on a bipartite graph given as an ordered
    adjacency dict. Left vertices and neighbor lists are scanned in the given
    order (no sets), so the matching is reproducible.
    """

    def __init__(self, graph_left: Dict[ValueVertex, List[MeasurementVertex]]):
        self._graph_left = graph_left
        self._left: List[ValueVertex] = list(graph_left.keys())
        self._pair_left: Dict[ValueVertex, MeasurementVertex] = {}
        self._pair_right: Dict[MeasurementVertex, ValueVertex] = {}
        self._dist_left: Dict[ValueVertex, int] = {}
        self._reference_distance = FAKE_INFINITY

    def maximum_matching(self) -> Dict[ValueVertex, MeasurementVertex]:
        self._pair_left.clear()
        self._pair_right.clear()
        while self._bfs():
            for left in self._left:
                if left not in self._pair_left:
                    self._dfs(left)
        return {left: self._pair_left[left] for left in self._left if left in self._pair_left}

    @property
    def pair_right(self) -> Dict[MeasurementVertex, ValueVertex]:
        return self._pair_right

    def _bfs(self) -> bool:
        queue: Deque[ValueVertex] = deque()
        for left in self._left:
            if left not in self._pair_left:
                self._dist_left[left] = 0
                queue.append(left)
            else:
                self._dist_left[left] = FAKE_INFINITY
        self._reference_distance = FAKE_INFINITY

        while queue:
            left = queue.popleft()
            if self._reference_distance != FAKE_INFINITY and self._dist_left[left] >= self._reference_distance:
                continue
            for right in self._graph_left[left]:
                if right not in self._pair_right:
                    if self._reference_distance == FAKE_INFINITY:
                        self._reference_distance = self._dist_left[left] + 1
                else:
                    other = self._pair_right[right]
                    if self._dist_left[other] == FAKE_INFINITY:
                        self._dist_left[other] = self._dist_left[left] + 1
                        queue.append(other)
        return self._reference_distance != FAKE_INFINITY

    def _dfs(self, left: ValueVertex) -> bool:
        for right in self._graph_left[left]:
            if right not in self._pair_right:
                if self._reference_distance == self._dist_left[left] + 1:
                    self._pair_left[left] = right
                    self._pair_right[right] = left
                    return True
            else:
                other = self._pair_right[right]
                if self._dist_left[other] == self._dist_left[left] + 1 and self._dfs(other):
                    self._pair_left[left] = right
                    self._pair_right[right] = left
                    return True
        self._dist_left[left] = FAKE_INFINITY
        return False


class MatchingAnalyzerAgent(BaseAgent):
    """
    Builds the dependency graph, runs the matching and derives the common
    component assignment
    0 solver calls
    """

    def __init__(self, bounds_agent: Optional[BoundsAnalyzerAgent] = None, verbose: bool = False):
        super().__init__("Matching Analyzer", uses_solver=False, verbose=verbose)
        self.bounds = bounds_agent or BoundsAnalyzerAgent()
        self.say(f"🔗 {self.name} initialized - 0 solver calls")

    # ------------------------------------------------------------------

    def build_graph(self, P: LocationMatrix, allocation: Sequence[int]) -> BipartiteGraph:
        allocation = tuple(int(m) for m in allocation)
        if len(allocation) != P.J:
            raise DimensionMismatchError(f"allocation has {len(allocation)} entries, location matrix has J={P.J}")

        by_sensor = {j: [MeasurementVertex(j, m) for m in range(1, allocation[j - 1] + 1)]
                     for j in range(1, P.J + 1)}
        measurement_vertices = [v for j in range(1, P.J + 1) for v in by_sensor[j]]

        value_vertices: List[ValueVertex] = []
        edges: Dict[ValueVertex, List[MeasurementVertex]] = {}
        removed: Dict[ValueVertex, List[MeasurementVertex]] = {}

        for k, n in enumerate(P.common.columns, 1):
            v = ValueVertex('common', 0, k)
            value_vertices.append(v)
            edges[v], removed[v] = [], []
            for j in range(1, P.J + 1):
                target = removed[v] if n in P.innovations[j - 1].columns else edges[v]
                target.extend(by_sensor[j])

        for j in range(1, P.J + 1):
            for local in range(1, P.K[j - 1] + 1):
                v = ValueVertex('innovation', j, local)
                value_vertices.append(v)
                edges[v] = list(by_sensor[j])
                removed[v] = []

        return BipartiteGraph(P, allocation, value_vertices, measurement_vertices, edges, removed)

    def find_matching(self, graph: BipartiteGraph) -> MatchingResult:
        hk = HopcroftKarp({v: graph.edges[v] for v in graph.value_vertices})
        pairs = hk.maximum_matching()
        self.runs_completed += 1

        if len(pairs) == len(graph.value_vertices):
            assignment = {v.index: pairs[v].sensor for v in graph.value_vertices if v.kind == 'common'}
            counts = tuple(sum(1 for s in assignment.values() if s == j) for j in range(1, graph.P.J + 1))
            result = MatchingResult(True, pairs, None, assignment, counts)
            self._verify_assignment(graph, result)
            return result

        deficient = self._deficient_set(graph, pairs, hk.pair_right)
        return MatchingResult(False, pairs, deficient)

    @staticmethod
    def _deficient_set(graph: BipartiteGraph, pairs: Dict[ValueVertex, MeasurementVertex],
                       pair_right: Dict[MeasurementVertex, ValueVertex]) -> List[ValueVertex]:
        """Value vertices reachable by alternating paths from the unmatched ones"""
        reached = {v for v in graph.value_vertices if v not in pairs}
        queue: Deque[ValueVertex] = deque(v for v in graph.value_vertices if v not in pairs)
        seen_right: Set[MeasurementVertex] = set()
        while queue:
            v = queue.popleft()
            for m in graph.edges[v]:
                if m in seen_right:
                    continue
                seen_right.add(m)
                partner = pair_right.get(m)
                if partner is not None and partner not in reached:
                    reached.add(partner)
                    queue.append(partner)
        return [v for v in graph.value_vertices if v in reached]

    def _verify_assignment(self, graph: BipartiteGraph, result: MatchingResult):
        P = graph.P
        for k, sensor in result.assignment.items():
            if P.common.columns[k - 1] in P.innovations[sensor - 1].columns:
                raise InvariantViolationError(f"common column {k} assigned to overlapping sensor {sensor}")
        for gamma in sensor_subsets(P.J, include_empty=False):
            have = sum(graph.allocation[j - 1] for j in gamma.members)
            need = sum(P.K[j - 1] + result.counts[j - 1] for j in gamma.members)
            if have < need:
                raise InvariantViolationError(f"subset {gamma} has {have} measurements for {need} assigned values")

    def hall_feasible(self, P: LocationMatrix, allocation: Sequence[int]) -> bool:
        """Hall's condition reduced to sensor subsets, i.e. the known-P bound"""
        return self.bounds.check_known_p(allocation, P).satisfied

    # ------------------------------------------------------------------

    def partially_zero(self, upsilon: np.ndarray, P: LocationMatrix) -> np.ndarray:
        """
        Subtract from common column k every innovation column holding the same
        row index, for k = 1..K_C in order. Column rank is unchanged.
        """
        upsilon = np.asarray(upsilon, dtype=float)
        if upsilon.ndim != 2 or upsilon.shape[1] != P.num_columns:
            raise DimensionMismatchError(f"matrix has shape {upsilon.shape}, location matrix has {P.num_columns} columns")

        zeroed = upsilon.copy()
        for k, n in enumerate(P.common.columns):
            for j in range(1, P.J + 1):
                columns = P.innovations[j - 1].columns
                if n in columns:
                    k_prime = P.innovation_offset(j) + columns.index(n)
                    zeroed[:, k] -= zeroed[:, k_prime]
        return zeroed

    # ------------------------------------------------------------------

    def to_dot(self, graph: BipartiteGraph, result: Optional[MatchingResult] = None) -> str:
        """Graphviz rendering: matched edges bold, edges removed by overlap dashed"""
        matched = set(result.pairs.items()) if result else set()
        lines = ["graph dependencies {", "  rankdir=LR;",
                 "  subgraph values { rank=same; node [shape=circle]; "
                 + " ".join(f'"{v}";' for v in graph.value_vertices) + " }",
                 "  subgraph measurements { rank=same; node [shape=box]; "
                 + " ".join(f'"{m}";' for m in graph.measurement_vertices) + " }"]
        for v in graph.value_vertices:
            for m in graph.edges[v]:
                style = ' [style=bold, penwidth=3]' if (v, m) in matched else ''
                lines.append(f'  "{v}" -- "{m}"{style};')
            for m in graph.removed.get(v, []):
                lines.append(f'  "{v}" -- "{m}" [style=dashed];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def process(self, P: LocationMatrix, allocation: Sequence[int]) -> Dict:
        """Main entry point: graph, matching and the Hall cross-check"""
        self.say(f"\n🔗 {self.name} building graph for {P.label()} with allocation {list(allocation)}")
        try:
            graph = self.build_graph(P, allocation)
            result = self.find_matching(graph)
            hall = self.hall_feasible(P, allocation)
        except Exception as e:
            return {'success': False, 'error': str(e)}

        self.say(f"   📊 {len(graph.value_vertices)} value vertices, {len(graph.measurement_vertices)} measurement vertices")
        if result.complete:
            self.say(f"   ✅ Saturating matching found, common assignment counts {list(result.counts)}")
        else:
            self.say(f"   ❌ No saturating matching; deficient set of size {len(result.deficient_set)}")

        return {
            'success': True,
            'graph': graph,
            'matching': result,
            'hall_feasible': hall,
            'consistent': hall == result.complete,
        }
