"""Unified chain graphs: three edge kinds, validity checks, and set queries.

A unified chain graph (UCG) mixes three kinds of edges between distinct
nodes: undirected (``-``), solid directed (``->``, interference-style) and
dashed directed (``~>``, non-interference-style).  Validity requires

* at most one edge per node pair,
* no semidirected cycles (a cycle whose first step is directed and whose
  remaining steps all point forward or are undirected),
* for every chain component K, disjoint father and mother sets:
  Fa(K) & Mo(K) == set().

All graph values are immutable after construction, so they can be shared
freely across threads and hashed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Mapping, Sequence, Tuple

from .errors import (
    DuplicateEdgeError,
    FaMoOverlapError,
    SelfLoopError,
    SemidirectedCycleError,
    UnknownNodeError,
)

NodeId = str


class EdgeKind(Enum):
    UNDIRECTED = "undirected"
    SOLID_DIRECTED = "solid_directed"
    DASHED_DIRECTED = "dashed_directed"


_KIND_GLYPH = {
    EdgeKind.UNDIRECTED: "-",
    EdgeKind.SOLID_DIRECTED: "->",
    EdgeKind.DASHED_DIRECTED: "~>",
}

Edge = Tuple[NodeId, NodeId, EdgeKind]


@dataclass(frozen=True)
class NodeSets:
    """The set-valued neighbourhood queries for one node set."""

    pa: FrozenSet[NodeId]
    mo: FrozenSet[NodeId]
    fa: FrozenSet[NodeId]
    ne: FrozenSet[NodeId]
    ad: FrozenSet[NodeId]
    nd: FrozenSet[NodeId]


@dataclass(frozen=True)
class ChainDecomposition:
    """Topologically sorted chain components.

    ``components[i]`` lists the member nodes in node-list order, and every
    directed edge points from a lower component index to a strictly higher
    one.  ``component_of`` maps each node to its component index.
    """

    components: Tuple[Tuple[NodeId, ...], ...]
    component_of: Mapping[NodeId, int]


class Ucg:
    """Immutable unified chain graph.

    Build through :func:`build_ucg` (validating) or the equivalent
    constructor.  Undirected edges are stored with the endpoint that comes
    first in the node list first, so serialization is canonical.
    """

    __slots__ = (
        "_nodes",
        "_index",
        "_edges",
        "_fathers",
        "_mothers",
        "_neighbors",
        "_solid_children",
        "_dashed_children",
        "_decomposition",
    )

    def __init__(
        self,
        nodes: Sequence[NodeId],
        edges: Iterable[Tuple[NodeId, NodeId, EdgeKind]],
        *,
        check_fa_mo: bool = True,
    ):
        nodes = tuple(nodes)
        if len(set(nodes)) != len(nodes):
            dupes = sorted({n for n in nodes if list(nodes).count(n) > 1})
            raise DuplicateEdgeError(f"duplicate node names: {dupes}")
        for n in nodes:
            if not isinstance(n, str) or not n:
                raise UnknownNodeError(f"node names must be non-empty strings, got {n!r}")
        index = {n: i for i, n in enumerate(nodes)}

        canon: Dict[FrozenSet[NodeId], Edge] = {}
        for a, b, kind in edges:
            kind = EdgeKind(kind)
            for endpoint in (a, b):
                if endpoint not in index:
                    raise UnknownNodeError(f"edge ({a}, {b}) uses unknown node {endpoint!r}")
            if a == b:
                raise SelfLoopError(f"self loop at node {a!r}")
            pair = frozenset((a, b))
            if kind is EdgeKind.UNDIRECTED and index[a] > index[b]:
                a, b = b, a
            if pair in canon:
                prev = canon[pair]
                raise DuplicateEdgeError(
                    f"more than one edge between {a!r} and {b!r}: "
                    f"{prev[0]}{_KIND_GLYPH[prev[2]]}{prev[1]} and {a}{_KIND_GLYPH[kind]}{b}"
                )
            canon[pair] = (a, b, kind)

        self._nodes = nodes
        self._index = index
        self._edges = frozenset(canon.values())

        fathers = {n: set() for n in nodes}
        mothers = {n: set() for n in nodes}
        neighbors = {n: set() for n in nodes}
        solid_children = {n: set() for n in nodes}
        dashed_children = {n: set() for n in nodes}
        for a, b, kind in self._edges:
            if kind is EdgeKind.UNDIRECTED:
                neighbors[a].add(b)
                neighbors[b].add(a)
            elif kind is EdgeKind.SOLID_DIRECTED:
                fathers[b].add(a)
                solid_children[a].add(b)
            else:
                mothers[b].add(a)
                dashed_children[a].add(b)
        self._fathers = {n: frozenset(s) for n, s in fathers.items()}
        self._mothers = {n: frozenset(s) for n, s in mothers.items()}
        self._neighbors = {n: frozenset(s) for n, s in neighbors.items()}
        self._solid_children = {n: frozenset(s) for n, s in solid_children.items()}
        self._dashed_children = {n: frozenset(s) for n, s in dashed_children.items()}

        self._decomposition = self._decompose()
        if check_fa_mo:
            self._check_fa_mo()

    # -- validation ----------------------------------------------------

    def _undirected_components(self) -> List[List[NodeId]]:
        seen = set()
        comps = []
        for start in self._nodes:
            if start in seen:
                continue
            comp = []
            stack = [start]
            seen.add(start)
            while stack:
                n = stack.pop()
                comp.append(n)
                for m in self._neighbors[n]:
                    if m not in seen:
                        seen.add(m)
                        stack.append(m)
            comp.sort(key=self._index.__getitem__)
            comps.append(comp)
        return comps

    def _decompose(self) -> ChainDecomposition:
        comps = self._undirected_components()
        comp_of = {}
        for ci, comp in enumerate(comps):
            for n in comp:
                comp_of[n] = ci

        succ = {ci: set() for ci in range(len(comps))}
        indeg = {ci: 0 for ci in range(len(comps))}
        for a, b, kind in self._edges:
            if kind is EdgeKind.UNDIRECTED:
                continue
            ca, cb = comp_of[a], comp_of[b]
            if ca == cb:
                path = self._undirected_path(b, a)
                raise SemidirectedCycleError(
                    f"semidirected cycle through nodes {[a] + path}: "
                    f"{a}{_KIND_GLYPH[kind]}{b} plus an undirected path back to {a}"
                )
            if cb not in succ[ca]:
                succ[ca].add(cb)
                indeg[cb] += 1

        order: List[int] = []
        ready = [ci for ci in indeg if indeg[ci] == 0]
        while ready:
            ready.sort(key=lambda ci: self._index[comps[ci][0]])
            ci = ready.pop(0)
            order.append(ci)
            for cj in succ[ci]:
                indeg[cj] -= 1
                if indeg[cj] == 0:
                    ready.append(cj)
        if len(order) != len(comps):
            stuck = sorted(ci for ci in indeg if indeg[ci] > 0)
            involved = sorted(n for ci in stuck for n in comps[ci])
            raise SemidirectedCycleError(
                f"semidirected cycle among nodes {involved}"
            )

        components = tuple(tuple(comps[ci]) for ci in order)
        component_of = {n: i for i, comp in enumerate(components) for n in comp}
        return ChainDecomposition(components=components, component_of=component_of)

    def _undirected_path(self, src: NodeId, dst: NodeId) -> List[NodeId]:
        prev = {src: None}
        queue = [src]
        while queue:
            n = queue.pop(0)
            if n == dst:
                path = []
                while n is not None:
                    path.append(n)
                    n = prev[n]
                return path[::-1]
            for m in sorted(self._neighbors[n], key=self._index.__getitem__):
                if m not in prev:
                    prev[m] = n
                    queue.append(m)
        return [dst]

    def _check_fa_mo(self) -> None:
        for comp in self._decomposition.components:
            k = frozenset(comp)
            overlap = self.fa(k) & self.mo(k)
            if overlap:
                raise FaMoOverlapError(
                    f"nodes {sorted(overlap)} are both father and mother of "
                    f"chain component {sorted(k)}"
                )

    # -- basic accessors -----------------------------------------------

    @property
    def nodes(self) -> Tuple[NodeId, ...]:
        return self._nodes

    @property
    def edges(self) -> Tuple[Edge, ...]:
        return tuple(
            sorted(
                self._edges,
                key=lambda e: (self._index[e[0]], self._index[e[1]], e[2].value),
            )
        )

    def index(self, node: NodeId) -> int:
        try:
            return self._index[node]
        except KeyError:
            raise UnknownNodeError(f"unknown node {node!r}") from None

    def __contains__(self, node: NodeId) -> bool:
        return node in self._index

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Ucg)
            and self._nodes == other._nodes
            and self._edges == other._edges
        )

    def __hash__(self) -> int:
        return hash((self._nodes, self._edges))

    def __repr__(self) -> str:
        parts = [f"{a}{_KIND_GLYPH[k]}{b}" for a, b, k in self.edges]
        return f"Ucg({list(self._nodes)}, [{', '.join(parts)}])"

    def edge_between(self, a: NodeId, b: NodeId):
        """Return the (from, to, kind) edge between a and b, or None."""
        for e in self._edges:
            if {e[0], e[1]} == {a, b}:
                return e
        return None

    def fathers_of(self, node: NodeId) -> FrozenSet[NodeId]:
        self.index(node)
        return self._fathers[node]

    def mothers_of(self, node: NodeId) -> FrozenSet[NodeId]:
        self.index(node)
        return self._mothers[node]

    def neighbors_of(self, node: NodeId) -> FrozenSet[NodeId]:
        self.index(node)
        return self._neighbors[node]

    def solid_children_of(self, node: NodeId) -> FrozenSet[NodeId]:
        self.index(node)
        return self._solid_children[node]

    def dashed_children_of(self, node: NodeId) -> FrozenSet[NodeId]:
        self.index(node)
        return self._dashed_children[node]

    # -- set queries ----------------------------------------------------

    def _as_set(self, x: Iterable[NodeId]) -> FrozenSet[NodeId]:
        xs = frozenset(x)
        for n in xs:
            self.index(n)
        return xs

    def fa(self, x: Iterable[NodeId]) -> FrozenSet[NodeId]:
        xs = self._as_set(x)
        return frozenset().union(*(self._fathers[n] for n in xs)) if xs else frozenset()

    def mo(self, x: Iterable[NodeId]) -> FrozenSet[NodeId]:
        xs = self._as_set(x)
        return frozenset().union(*(self._mothers[n] for n in xs)) if xs else frozenset()

    def pa(self, x: Iterable[NodeId]) -> FrozenSet[NodeId]:
        return self.fa(x) | self.mo(x)

    def ne(self, x: Iterable[NodeId]) -> FrozenSet[NodeId]:
        xs = self._as_set(x)
        return frozenset().union(*(self._neighbors[n] for n in xs)) if xs else frozenset()

    def ad(self, x: Iterable[NodeId]) -> FrozenSet[NodeId]:
        xs = self._as_set(x)
        out = set()
        for n in xs:
            out |= self._neighbors[n]
            out |= self._fathers[n]
            out |= self._mothers[n]
            out |= self._solid_children[n]
            out |= self._dashed_children[n]
        return frozenset(out)

    def descendants(self, x: Iterable[NodeId]) -> FrozenSet[NodeId]:
        """Nodes reachable from x along forward edges using >= 1 directed edge."""
        xs = self._as_set(x)
        seen = set()  # (node, passed_directed_edge)
        stack = [(n, False) for n in xs]
        out = set()
        while stack:
            n, hit = stack.pop()
            if (n, hit) in seen:
                continue
            seen.add((n, hit))
            if hit:
                out.add(n)
            for m in self._neighbors[n]:
                if (m, hit) not in seen:
                    stack.append((m, hit))
            for m in self._solid_children[n] | self._dashed_children[n]:
                if (m, True) not in seen:
                    stack.append((m, True))
        return frozenset(out)

    def nd(self, x: Iterable[NodeId]) -> FrozenSet[NodeId]:
        return frozenset(self._nodes) - self.descendants(x)


def build_ucg(
    nodes: Sequence[NodeId],
    edges: Iterable[Tuple[NodeId, NodeId, EdgeKind]],
) -> Ucg:
    """Validate and construct a unified chain graph.

    Raises :class:`DuplicateEdgeError`, :class:`SelfLoopError`,
    :class:`SemidirectedCycleError`, :class:`FaMoOverlapError` or
    :class:`UnknownNodeError`; each message names the offending nodes.
    """
    return Ucg(nodes, edges)


def chain_decomposition(g: Ucg) -> ChainDecomposition:
    """Topologically sorted chain components of ``g`` (deterministic)."""
    return g._decomposition


def node_sets(g: Ucg, x: Iterable[NodeId]) -> NodeSets:
    """Parents, mothers, fathers, neighbours, adjacents and non-descendants of x."""
    xs = frozenset(x)
    return NodeSets(
        pa=g.pa(xs), mo=g.mo(xs), fa=g.fa(xs), ne=g.ne(xs), ad=g.ad(xs), nd=g.nd(xs)
    )


def induced_subgraph(g: Ucg, u: Iterable[NodeId]) -> Ucg:
    """Subgraph on node set u with all edges inside u.

    The father/mother disjointness requirement is deliberately not
    re-checked here: interventional reasoning works on subgraphs obtained
    by deleting intervened nodes, and those must be representable even
    when the check would be moot.  Cycle-freeness cannot be broken by
    taking subgraphs.
    """
    us = frozenset(u)
    for n in us:
        g.index(n)
    nodes = [n for n in g.nodes if n in us]
    edges = [(a, b, k) for a, b, k in g.edges if a in us and b in us]
    return Ucg(nodes, edges, check_fa_mo=False)


# -- serialization -------------------------------------------------------


def graph_to_dict(g: Ucg) -> dict:
    return {
        "nodes": list(g.nodes),
        "edges": [{"from": a, "to": b, "kind": k.value} for a, b, k in g.edges],
    }


def graph_from_dict(d: Mapping) -> Ucg:
    try:
        nodes = d["nodes"]
        raw_edges = d["edges"]
    except KeyError as exc:
        raise UnknownNodeError(f"graph document missing key {exc}") from None
    edges = []
    for e in raw_edges:
        try:
            kind = EdgeKind(e["kind"])
        except ValueError:
            raise UnknownNodeError(f"unknown edge kind {e['kind']!r}") from None
        edges.append((e["from"], e["to"], kind))
    return build_ucg(nodes, edges)


def graph_to_json(g: Ucg) -> str:
    return json.dumps(graph_to_dict(g), indent=2) + "\n"


def graph_from_json(text: str) -> Ucg:
    return graph_from_dict(json.loads(text))
