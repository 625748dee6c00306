"""Unified causal DAG with context variables, and the d-separation queries
used to decide whether a feature subset transfers across domains.

Graph file format (UTF-8)::

    # comment
    node C1 context
    node D protected
    node X1 system
    node Y outcome
    edge C1 D
    edge D Y

Lines are order-insensitive; ``#`` starts a comment.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

ROLES = ("system", "context", "protected", "outcome")


class GraphError(ValueError):
    pass


class CycleError(GraphError):
    pass


@dataclass(frozen=True)
class CausalGraph:
    nodes: tuple[tuple[str, str], ...]
    edges: tuple[tuple[str, str], ...]
    _parents: dict = field(default=None, init=False, repr=False, compare=False)
    _children: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        names = [n for n, _ in self.nodes]
        seen = set()
        for name, role in self.nodes:
            if name in seen:
                raise GraphError(f"duplicate node {name!r}")
            if role not in ROLES:
                raise GraphError(f"node {name!r} has unknown role {role!r}")
            seen.add(name)
        parents = {n: [] for n in names}
        children = {n: [] for n in names}
        for a, b in self.edges:
            for end in (a, b):
                if end not in seen:
                    raise GraphError(f"edge {a}->{b} names unknown node {end!r}")
            parents[b].append(a)
            children[a].append(b)
        roles = [r for _, r in self.nodes]
        if roles.count("outcome") != 1:
            raise GraphError(f"expected exactly one outcome node, got {roles.count('outcome')}")
        if "context" not in roles:
            raise GraphError("graph needs at least one context node")
        object.__setattr__(self, "_parents", {k: tuple(v) for k, v in parents.items()})
        object.__setattr__(self, "_children", {k: tuple(v) for k, v in children.items()})
        _topological_order(names, self._children)

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.nodes]

    def role(self, name: str) -> str:
        for n, r in self.nodes:
            if n == name:
                return r
        raise GraphError(f"unknown node {name!r}")

    def with_role(self, role: str) -> list[str]:
        return [n for n, r in self.nodes if r == role]

    @property
    def outcome(self) -> str:
        return self.with_role("outcome")[0]

    @property
    def context(self) -> list[str]:
        return self.with_role("context")

    @property
    def protected(self) -> list[str]:
        return self.with_role("protected")

    def parents(self, name: str) -> tuple[str, ...]:
        return self._parents[name]

    def children(self, name: str) -> tuple[str, ...]:
        return self._children[name]

    def ancestors(self, names: Iterable[str]) -> set[str]:
        """Ancestors of ``names``, including the nodes themselves."""
        out = set()
        stack = list(names)
        while stack:
            v = stack.pop()
            if v in out:
                continue
            out.add(v)
            stack.extend(self._parents[v])
        return out

    def topological_order(self) -> list[str]:
        return _topological_order(self.names, self._children)


def _topological_order(names, children) -> list[str]:
    indeg = {n: 0 for n in names}
    for n in names:
        for c in children[n]:
            indeg[c] += 1
    queue = deque(n for n in names if indeg[n] == 0)
    order = []
    while queue:
        v = queue.popleft()
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    if len(order) != len(names):
        stuck = sorted(n for n in names if indeg[n] > 0)
        raise CycleError(f"graph has a cycle through {stuck}")
    return order


def parse_graph(text: str) -> CausalGraph:
    nodes, edges = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "node" and len(parts) == 3:
            nodes.append((parts[1], parts[2]))
        elif parts[0] == "edge" and len(parts) == 3:
            edges.append((parts[1], parts[2]))
        else:
            raise GraphError(f"line {lineno}: cannot parse {raw.strip()!r}")
    return CausalGraph(tuple(nodes), tuple(edges))


def serialize_graph(g: CausalGraph) -> str:
    lines = [f"node {n} {r}" for n, r in g.nodes]
    lines += [f"edge {a} {b}" for a, b in g.edges]
    return "\n".join(lines) + "\n"


def load_graph(path) -> CausalGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read())


@dataclass(frozen=True)
class CIQuery:
    left: frozenset
    right: frozenset
    given: frozenset = frozenset()

    @classmethod
    def of(cls, left, right, given=()) -> "CIQuery":
        """Build a query, dropping conditioned nodes from both sides."""
        z = frozenset(given)
        return cls(frozenset(left) - z, frozenset(right) - z, z)


def d_separated(g: CausalGraph, q: CIQuery) -> bool:
    """True iff ``q.left`` and ``q.right`` are d-separated by ``q.given``.

    Uses the moralised ancestral graph: restrict to ancestors of all query
    nodes, marry co-parents, drop directions, delete the conditioning set and
    test reachability.
    """
    left, right, given = set(q.left), set(q.right), set(q.given)
    for name in left | right | given:
        g.role(name)
    if left & right:
        return False
    if left & given or right & given:
        raise GraphError("query sets must be disjoint")
    if not left or not right:
        return True

    keep = g.ancestors(left | right | given)
    adj = {v: set() for v in keep}
    for v in keep:
        ps = [p for p in g.parents(v) if p in keep]
        for p in ps:
            adj[v].add(p)
            adj[p].add(v)
        for i, a in enumerate(ps):
            for b in ps[i + 1:]:
                adj[a].add(b)
                adj[b].add(a)

    seen = set(left)
    queue = deque(left)
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w in given or w in seen:
                continue
            if w in right:
                return False
            seen.add(w)
            queue.append(w)
    return True


def _check_subset(g: CausalGraph, s) -> frozenset:
    s = frozenset(s)
    bad = [v for v in s if g.role(v) in ("outcome", "context")]
    if bad:
        raise GraphError(f"feature subset may not contain outcome/context nodes: {sorted(bad)}")
    return s


def check_assumption_1(g: CausalGraph, s) -> bool:
    """Outcome is d-separated from every context node given ``s``."""
    s = _check_subset(g, s)
    return d_separated(g, CIQuery.of({g.outcome}, g.context, s))


def check_assumption_2(g: CausalGraph, s) -> bool:
    """``s`` is d-separated from the context nodes given outcome and protected.

    Members of ``s`` that are already conditioned on (the protected node) are
    dropped from the left-hand side.
    """
    s = _check_subset(g, s)
    given = {g.outcome, *g.protected}
    return d_separated(g, CIQuery.of(s - given, g.context, given))
