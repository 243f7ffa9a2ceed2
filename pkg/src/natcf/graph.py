"""Directed acyclic causal graph with ancestry queries and topological ordering."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import CycleDetected, UnknownVariable

VariableId = str


@dataclass(frozen=True)
class CausalGraph:
    """DAG over named endogenous variables.

    ``nodes`` fixes the declaration order used to break topological ties, so
    every downstream computation is reproducible. Parent lists are kept in
    their declared order (mechanism argument order depends on it).
    """

    nodes: tuple[VariableId, ...]
    parents: dict[VariableId, tuple[VariableId, ...]]
    _topo: tuple[VariableId, ...] = field(init=False, repr=False)
    _children: dict[VariableId, tuple[VariableId, ...]] = field(init=False, repr=False)

    def __init__(self, nodes, parents):
        nodes = tuple(nodes)
        if len(set(nodes)) != len(nodes):
            raise UnknownVariable(f"duplicate node names in {nodes}")
        for n in nodes:
            if not n:
                raise UnknownVariable("empty variable name")
        norm = {}
        known = set(nodes)
        for n in nodes:
            ps = tuple(parents.get(n, ()))
            if len(set(ps)) != len(ps):
                raise UnknownVariable(f"duplicate parents for {n!r}: {ps}")
            for p in ps:
                if p not in known:
                    raise UnknownVariable(f"parent {p!r} of {n!r} is not a declared node")
            norm[n] = ps
        extra = set(parents) - known
        if extra:
            raise UnknownVariable(f"parents declared for unknown nodes: {sorted(extra)}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "parents", norm)
        children: dict[VariableId, list[VariableId]] = {n: [] for n in nodes}
        for n in nodes:
            for p in norm[n]:
                children[p].append(n)
        object.__setattr__(self, "_children", {n: tuple(c) for n, c in children.items()})
        object.__setattr__(self, "_topo", _kahn_order(nodes, norm, self._children))

    def children(self, node: VariableId) -> tuple[VariableId, ...]:
        return self._children[node]

    def __contains__(self, node: VariableId) -> bool:
        return node in self.parents


def _kahn_order(nodes, parents, children) -> tuple[VariableId, ...]:
    pos = {v: i for i, v in enumerate(nodes)}
    indeg = {n: len(parents[n]) for n in nodes}
    ready = [n for n in nodes if indeg[n] == 0]
    order: list[VariableId] = []
    while ready:
        # Ties broken by declaration order.
        n = min(ready, key=pos.__getitem__)
        ready.remove(n)
        order.append(n)
        for c in children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    if len(order) != len(nodes):
        raise CycleDetected(_find_cycle(nodes, parents, set(order)))
    return tuple(order)


def _find_cycle(nodes, parents, acyclic_part):
    # Walk parent links inside the leftover (cyclic) node set until a repeat.
    leftover = [n for n in nodes if n not in acyclic_part]
    seen: list[VariableId] = []
    cur = leftover[0]
    while cur not in seen:
        seen.append(cur)
        cur = next(p for p in parents[cur] if p not in acyclic_part)
    start = seen.index(cur)
    return seen[start:] + [cur]


def topological_order(graph: CausalGraph) -> list[VariableId]:
    """Every node after all its parents; deterministic (declaration-order ties)."""
    return list(graph._topo)


def ancestors_including(graph: CausalGraph, targets) -> set[VariableId]:
    """Transitive closure of the parent relation over ``targets``, plus the targets."""
    result: set[VariableId] = set()
    stack = []
    for t in targets:
        if t not in graph:
            raise UnknownVariable(f"target {t!r} is not in the graph")
        stack.append(t)
    while stack:
        n = stack.pop()
        if n in result:
            continue
        result.add(n)
        stack.extend(graph.parents[n])
    return result


def descendant_weights(graph: CausalGraph) -> dict[VariableId, int]:
    """Per node: 1 (itself) plus the number of distinct endogenous descendants."""
    desc: dict[VariableId, set[VariableId]] = {n: set() for n in graph.nodes}
    for n in reversed(topological_order(graph)):
        for c in graph.children(n):
            desc[n].add(c)
            desc[n] |= desc[c]
    return {n: 1 + len(desc[n]) for n in graph.nodes}
