"""
Test Matching Analyzer: dependency graph, Hopcroft-Karp and Hall's condition
============================================================================
"""

from itertools import combinations

import numpy as np
import pytest

from agents.matching_analyzer import HopcroftKarp, MeasurementVertex, ValueVertex
from utils.ensemble_model import LocationMatrix
from utils.errors import DimensionMismatchError
from utils.measurement import compose, sample_sensing


def _names(vertices):
    return [str(v) for v in vertices]


def test_graph_edges_example(matching_agent, P_example):
    print("🧪 TESTING dependency graph for allocation (3, 2)")
    graph = matching_agent.build_graph(P_example, (3, 2))
    assert _names(graph.value_vertices) == ["c1", "c2", "i1_1"]
    assert len(graph.measurement_vertices) == 5

    c1, c2, innov = graph.value_vertices
    assert _names(graph.edges[c1]) == ["m2_1", "m2_2"]
    assert _names(graph.removed[c1]) == ["m1_1", "m1_2", "m1_3"]
    assert len(graph.edges[c2]) == 5
    assert _names(graph.edges[innov]) == ["m1_1", "m1_2", "m1_3"]


def test_graph_edge_cases(matching_agent):
    empty = matching_agent.build_graph(LocationMatrix.empty(3, 2), (2, 2))
    assert empty.value_vertices == []
    result = matching_agent.find_matching(empty)
    assert result.complete and result.pairs == {}

    no_overlap = LocationMatrix.build(4, [1, 2], [[3], [4]])
    graph = matching_agent.build_graph(no_overlap, (2, 3))
    for v in graph.value_vertices:
        if v.kind == 'common':
            assert len(graph.edges[v]) == 5

    with pytest.raises(DimensionMismatchError):
        matching_agent.build_graph(no_overlap, (1,))


def test_matching_example(matching_agent, P_example):
    graph = matching_agent.build_graph(P_example, (3, 2))
    result = matching_agent.find_matching(graph)
    assert result.complete
    pairs = {str(v): str(m) for v, m in result.pairs.items()}
    assert pairs == {"c1": "m2_1", "c2": "m1_1", "i1_1": "m1_2"}
    assert result.assignment == {1: 2, 2: 1}
    assert result.counts == (1, 1)


def test_deficient_set(matching_agent, P_example):
    graph = matching_agent.build_graph(P_example, (1, 1))
    result = matching_agent.find_matching(graph)
    assert not result.complete
    assert _names(result.deficient_set) == ["c1", "c2", "i1_1"]
    assert len(graph.neighbors(result.deficient_set)) < len(result.deficient_set)


def test_deficient_set_is_a_hall_violator(matching_agent):
    P = LocationMatrix.build(4, [1, 2], [[1], [3]])
    for allocation in [(0, 1), (1, 0), (0, 3), (1, 1), (2, 0)]:
        graph = matching_agent.build_graph(P, allocation)
        result = matching_agent.find_matching(graph)
        brute = any(len(graph.neighbors(pi)) < len(pi)
                    for size in range(1, len(graph.value_vertices) + 1)
                    for pi in combinations(graph.value_vertices, size))
        assert result.complete == (not brute)
        if not result.complete:
            assert len(graph.neighbors(result.deficient_set)) < len(result.deficient_set)


def test_hopcroft_karp_on_plain_graph():
    a, b, c = (ValueVertex('innovation', 1, k) for k in (1, 2, 3))
    x, y = MeasurementVertex(1, 1), MeasurementVertex(1, 2)
    matching = HopcroftKarp({a: [x], b: [x, y], c: [y]}).maximum_matching()
    assert len(matching) == 2
    assert len(set(matching.values())) == 2


def test_hall_feasible(matching_agent, P_example):
    assert matching_agent.hall_feasible(P_example, (2, 1))
    assert not matching_agent.hall_feasible(P_example, (1, 1))
    assert matching_agent.hall_feasible(P_example, (6, 6))


def test_partially_zero_example(matching_agent, P_example):
    S = sample_sensing(4, (2, 2), seed=31)
    U = compose(S, P_example)
    U0 = matching_agent.partially_zero(U, P_example)
    assert np.all(U0[:2, 0] == 0)
    np.testing.assert_array_equal(U0[2:, 0], U[2:, 0])
    np.testing.assert_array_equal(U0[:, 1:], U[:, 1:])

    no_overlap = LocationMatrix.build(4, [1, 2], [[3], [4]])
    U = compose(S, no_overlap)
    np.testing.assert_array_equal(matching_agent.partially_zero(U, no_overlap), U)

    with pytest.raises(DimensionMismatchError):
        matching_agent.partially_zero(U[:, :2], no_overlap)


def test_dot_output(matching_agent, P_example):
    graph = matching_agent.build_graph(P_example, (3, 2))
    dot = matching_agent.to_dot(graph, matching_agent.find_matching(graph))
    assert dot.startswith("graph dependencies {")
    assert '"c1" -- "m2_1" [style=bold, penwidth=3];' in dot
    assert '"c1" -- "m1_1" [style=dashed];' in dot


def test_process(matching_agent, P_example):
    result = matching_agent.process(P_example, (2, 1))
    assert result['success'] and result['consistent']
    assert result['matching'].complete and result['hall_feasible']
    assert matching_agent.process(P_example, (1,))['success'] is False
