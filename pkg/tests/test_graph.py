import pytest
from hypothesis import given, strategies as st

from natcf.errors import CycleDetected, UnknownVariable
from natcf.graph import (
    CausalGraph,
    ancestors_including,
    descendant_weights,
    topological_order,
)


def graph(nodes, parents):
    return CausalGraph(tuple(nodes), {n: tuple(parents.get(n, ())) for n in nodes})


TOY1 = graph(["n1", "n2", "n3"], {"n2": ["n1"], "n3": ["n1", "n2"]})
TOY3 = graph(["n1", "n2", "n3", "n4"], {"n2": ["n1"], "n3": ["n2"], "n4": ["n1", "n3"]})
CHAIN = graph(["n1", "n2", "n3"], {"n2": ["n1"], "n3": ["n2"]})


class TestTopologicalOrder:
    def test_toy1(self):
        assert topological_order(TOY1) == ["n1", "n2", "n3"]

    def test_single_node(self):
        assert topological_order(graph(["n1"], {})) == ["n1"]

    def test_toy3_by_kahn_by_hand(self):
        # Kahn on {n1->n2, n1->n4, n2->n3, n3->n4}: n1 alone is ready, then
        # n2, then n3, and n4 only after both its parents.
        assert topological_order(TOY3) == ["n1", "n2", "n3", "n4"]

    def test_declaration_order_breaks_ties(self):
        g = graph(["b", "a", "c"], {"c": ["a", "b"]})
        assert topological_order(g) == ["b", "a", "c"]

    def test_idempotent_and_stable(self):
        first = topological_order(TOY3)
        for _ in range(3):
            assert topological_order(TOY3) == first

    def test_cycle_detected_with_witness(self):
        with pytest.raises(CycleDetected) as exc:
            graph(["a", "b", "c"], {"a": ["c"], "b": ["a"], "c": ["b"]})
        cycle = exc.value.cycle
        assert cycle[0] == cycle[-1] and len(cycle) >= 3

    def test_self_loop(self):
        with pytest.raises(CycleDetected):
            graph(["a"], {"a": ["a"]})

    def test_unknown_parent_rejected(self):
        with pytest.raises(UnknownVariable):
            graph(["a"], {"a": ["zz"]})

    def test_duplicate_parent_rejected(self):
        with pytest.raises(UnknownVariable):
            graph(["a", "b"], {"b": ["a", "a"]})


class TestAncestors:
    def test_toy1_n2(self):
        assert ancestors_including(TOY1, {"n2"}) == {"n1", "n2"}

    def test_root_is_its_own_closure(self):
        assert ancestors_including(TOY1, {"n1"}) == {"n1"}

    def test_toy3_sink(self):
        assert ancestors_including(TOY3, {"n4"}) == {"n1", "n2", "n3", "n4"}

    def test_contains_targets_and_monotone(self):
        small = ancestors_including(TOY3, {"n2"})
        big = ancestors_including(TOY3, {"n2", "n4"})
        assert {"n2"} <= small
        assert small <= big

    def test_unknown_target(self):
        with pytest.raises(UnknownVariable):
            ancestors_including(TOY1, {"bogus"})


class TestDescendantWeights:
    def test_confounder_example(self):
        # C -> A, C -> B, B -> A: the weight of a node is itself plus its
        # distinct descendants.
        g = graph(["C", "B", "A"], {"B": ["C"], "A": ["C", "B"]})
        assert descendant_weights(g) == {"A": 1, "B": 2, "C": 3}

    def test_isolated_node(self):
        assert descendant_weights(graph(["x"], {}))["x"] == 1

    def test_chain(self):
        assert descendant_weights(CHAIN) == {"n1": 3, "n2": 2, "n3": 1}

    def test_diamond_counts_distinct(self):
        g = graph(["a", "b", "c", "d"], {"b": ["a"], "c": ["a"], "d": ["b", "c"]})
        assert descendant_weights(g)["a"] == 4


@st.composite
def random_dags(draw):
    n = draw(st.integers(min_value=1, max_value=8))
    nodes = [f"v{i}" for i in range(n)]
    parents = {}
    for i in range(n):
        pool = nodes[:i]
        k = draw(st.integers(min_value=0, max_value=len(pool)))
        parents[nodes[i]] = tuple(draw(st.permutations(pool))[:k]) if pool else ()
    return graph(nodes, parents)


@given(random_dags())
def test_topo_places_parents_first(g):
    order = topological_order(g)
    assert sorted(order) == sorted(g.nodes)
    pos = {v: i for i, v in enumerate(order)}
    for n in g.nodes:
        for p in g.parents[n]:
            assert pos[p] < pos[n]


@given(random_dags())
def test_weights_at_least_one_and_two_with_descendants(g):
    w = descendant_weights(g)
    has_child = {n: False for n in g.nodes}
    for n in g.nodes:
        for p in g.parents[n]:
            has_child[p] = True
    for n in g.nodes:
        assert w[n] >= 1
        if has_child[n]:
            assert w[n] >= 2


@given(random_dags(), st.data())
def test_ancestors_monotone_in_targets(g, data):
    targets = data.draw(st.sets(st.sampled_from(list(g.nodes)), min_size=1))
    bigger = data.draw(
        st.sets(st.sampled_from(list(g.nodes)), min_size=1).map(lambda s: s | targets)
    )
    assert ancestors_including(g, targets) <= ancestors_including(g, bigger)
