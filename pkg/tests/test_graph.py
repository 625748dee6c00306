import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fairshift.graph import (
    CausalGraph, CIQuery, CycleError, GraphError, check_assumption_1, check_assumption_2,
    d_separated, parse_graph, serialize_graph,
)

from oracles import brute_d_separated, random_dag

FLU = """
# flu example
node C1 context
node D protected
node X1 system
node X2 system
node Y outcome
edge C1 D
edge C1 X1
edge D Y
edge D X1
edge X2 Y
edge Y X1
"""


def as_graph(names, edges):
    nodes = [(n, "context" if i == 0 else "outcome" if i == 1 else "system") for i, n in enumerate(names)]
    return CausalGraph(tuple(nodes), tuple(edges))


def test_parse_flu():
    g = parse_graph(FLU)
    assert len(g.nodes) == 5 and len(g.edges) == 6
    assert g.outcome == "Y" and g.context == ["C1"] and g.protected == ["D"]


def test_parse_isolated_nodes():
    g = parse_graph("node C context\nnode Y outcome\nnode A system\n")
    assert g.edges == ()
    assert d_separated(g, CIQuery.of({"Y"}, {"C"}))


@pytest.mark.parametrize("text, err", [
    ("node C context\nnode Y outcome\nnode D protected\nedge Y D\nedge D Y\n", CycleError),
    ("node C context\nnode Y outcome\nedge C Z\n", GraphError),
    ("node C context\nnode C system\nnode Y outcome\n", GraphError),
    ("node A system\nnode Y outcome\n", GraphError),
    ("node C context\nnode Y outcome\nnode Z outcome\n", GraphError),
    ("node C context\n", GraphError),
    ("node C context\nnode Y outcome\nbogus line\n", GraphError),
])
def test_parse_errors(text, err):
    with pytest.raises(err):
        parse_graph(text)


def test_round_trip(flu, aki_bun):
    for g in (flu, aki_bun, parse_graph(FLU)):
        text = serialize_graph(g)
        again = parse_graph(text)
        assert again == g
        assert serialize_graph(again) == text


def test_order_insensitive():
    lines = [ln for ln in FLU.splitlines() if ln and not ln.startswith("#")]
    g = parse_graph("\n".join(reversed(lines)))
    assert set(g.nodes) == set(parse_graph(FLU).nodes)
    assert set(g.edges) == set(parse_graph(FLU).edges)


def test_flu_dsep(flu):
    assert d_separated(flu, CIQuery.of({"Y"}, {"C1"}, {"D", "X2"}))
    assert not d_separated(flu, CIQuery.of({"Y"}, {"C1"}, {"D", "X2", "X1"}))


def test_direct_edge_never_blocked(flu):
    for a, b in flu.edges:
        assert not d_separated(flu, CIQuery.of({a}, {b}))


def test_assumptions_flu(flu):
    assert check_assumption_1(flu, {"D", "X2"})
    assert check_assumption_2(flu, {"D", "X2"})
    assert not check_assumption_1(flu, {"D", "X1", "X2"})
    assert check_assumption_2(flu, {"D"})


def test_assumptions_aki(aki, aki_bun):
    # single lab node X that includes BUN
    assert not check_assumption_1(aki, {"D", "M", "X"})
    # BUN split out: everything except BUN passes, adding BUN fails
    assert check_assumption_1(aki_bun, {"D", "M", "X"})
    assert check_assumption_2(aki_bun, {"D", "M", "X"})
    assert not check_assumption_1(aki_bun, {"D", "M", "X", "BUN"})


def test_assumption_rejects_context_or_outcome(flu):
    with pytest.raises(GraphError):
        check_assumption_1(flu, {"Y", "D"})
    with pytest.raises(GraphError):
        check_assumption_2(flu, {"C1"})


def test_assumptions_pure(flu):
    for s in [{"D"}, {"X2"}, {"D", "X1"}, {"D", "X1", "X2"}]:
        first = (check_assumption_1(flu, s), check_assumption_2(flu, s))
        assert all((check_assumption_1(flu, s), check_assumption_2(flu, s)) == first for _ in range(3))


def test_oracle_small_sample():
    rng = np.random.default_rng(3)
    for _ in range(10):
        names, edges = random_dag(rng, 6)
        g = as_graph(names, edges)
        for a, b in itertools.combinations(names, 2):
            rest = [v for v in names if v not in (a, b)]
            for k in range(3):
                for z in itertools.combinations(rest, k):
                    assert d_separated(g, CIQuery.of({a}, {b}, z)) == brute_d_separated(names, edges, a, b, z)


@st.composite
def dag_queries(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    names, edges = random_dag(np.random.default_rng(seed), 7)
    a, b = draw(st.sampled_from(list(itertools.combinations(names, 2))))
    rest = [v for v in names if v not in (a, b)]
    z = draw(st.lists(st.sampled_from(rest), unique=True, max_size=3)) if rest else []
    return names, edges, a, b, z


@given(dag_queries())
def test_symmetry(q):
    names, edges, a, b, z = q
    g = as_graph(names, edges)
    assert d_separated(g, CIQuery.of({a}, {b}, z)) == d_separated(g, CIQuery.of({b}, {a}, z))


@given(dag_queries())
def test_collider_descendant_opens(q):
    names, edges, a, b, z = q
    g = as_graph(names, edges)
    if d_separated(g, CIQuery.of({a}, {b}, z)):
        return
    # conditioning on further nodes never blocks a path that was open via a collider:
    # checked against the oracle rather than asserted structurally
    for extra in names:
        if extra in (a, b) or extra in z:
            continue
        zz = [*z, extra]
        assert d_separated(g, CIQuery.of({a}, {b}, zz)) == brute_d_separated(names, edges, a, b, zz)


def test_set_queries_match_pairwise(flu):
    # set d-separation is equivalent to pairwise d-separation
    q = CIQuery.of({"X2", "D"}, {"C1"}, {"Y"})
    assert d_separated(flu, q) == all(
        d_separated(flu, CIQuery.of({v}, {"C1"}, {"Y"})) for v in ("X2", "D")
    )
