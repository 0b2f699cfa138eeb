"""Route-based separation for unified chain graphs.

A route may repeat nodes.  Walking a route, each interior occurrence of a
node is classified by the pair of edges around it:

* collider node: a dashed arrowhead points at it and the other edge is
  undirected or also points at it (solid or dashed);
* collider section member: it sits in a maximal undirected stretch whose
  two flanking edges are both solid arrowheads pointing in (a stretch can
  be a single node, which covers the plain ``a -> c <- b`` collider);
* plain otherwise.

A route is open given Z when every collider-node occurrence is at a node
in Z, every collider section contains some node of Z, and every plain
occurrence is at a node outside Z.  ``is_separated`` decides whether no
open route connects X and Y via breadth-first search over a finite
traversal-state space (at most six states per node, so each query is
linear in the graph size).

``route_oracle`` re-derives the answer by materialising concrete routes
and checking the openness conditions on each of them literally; it exists
to cross-check the transition rules of ``is_separated`` on small graphs.
"""

from __future__ import annotations

from collections import deque
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .errors import (
    GraphTooLargeError,
    InvalidQueryError,
    NodeSetMismatchError,
)
from .graphs import EdgeKind, NodeId, Ucg

# Edge types seen from one endpoint.
_T = "tail"
_HS = "head_solid"
_HD = "head_dashed"
_U = "undirected"

# Traversal states.  The route start behaves exactly like a tail arrival
# (endpoints carry no occurrence condition and are never in Z), so six
# states per node suffice.
TAIL = "tail_out"
HEAD_S = "solid_head_in"
HEAD_D = "dashed_head_in"
RUN_P = "undirected_in_plain"
RUN_S = "undirected_in_after_solid"
RUN_S_HIT = "undirected_in_after_solid_hit"

_ACCEPTING = (TAIL, HEAD_S, HEAD_D, RUN_P, RUN_S)


def _incidence(g: Ucg) -> Dict[NodeId, List[Tuple[NodeId, str, str]]]:
    """Per node: (other endpoint, edge type at this node, type at the other)."""
    inc = {n: [] for n in g.nodes}
    for a, b, kind in g.edges:
        if kind is EdgeKind.UNDIRECTED:
            inc[a].append((b, _U, _U))
            inc[b].append((a, _U, _U))
        elif kind is EdgeKind.SOLID_DIRECTED:
            inc[a].append((b, _T, _HS))
            inc[b].append((a, _HS, _T))
        else:
            inc[a].append((b, _T, _HD))
            inc[b].append((a, _HD, _T))
    return inc


def _next_head(t_other: str) -> str:
    return HEAD_S if t_other == _HS else HEAD_D


def _transitions(state: str, n: NodeId, inc, z: FrozenSet[NodeId]):
    """Yield successor (node, state) pairs for one traversal step.

    The departure resolves the occurrence at ``n``: the pair (arrival
    type, departure type) decides whether ``n`` had to be inside or
    outside Z, and section bookkeeping rides along in the RUN states.
    """
    n_in_z = n in z
    for m, t_n, t_m in inc[n]:
        if state == TAIL:
            if n_in_z:
                continue  # (tail, anything) is a plain occurrence
            if t_n == _T:
                yield m, _next_head(t_m)
            elif t_n == _U:
                yield m, RUN_P
            else:  # leave through an arrowhead at n: still plain
                yield m, TAIL
        elif state == HEAD_S:
            if t_n == _T:
                if not n_in_z:
                    yield m, _next_head(t_m)
            elif t_n == _HS:
                if n_in_z:  # singleton collider section ->n<-
                    yield m, TAIL
            elif t_n == _HD:
                if n_in_z:  # collider node ->n<~ (reversed ~>n<-)
                    yield m, TAIL
            else:  # open an undirected section behind a solid head
                yield m, RUN_S_HIT if n_in_z else RUN_S
        elif state == HEAD_D:
            if t_n == _T:
                if not n_in_z:
                    yield m, _next_head(t_m)
            elif t_n in (_HS, _HD):
                if n_in_z:  # collider node ~>n<- or ~>n<~
                    yield m, TAIL
            else:
                if n_in_z:  # collider node ~>n-; its section cannot collide
                    yield m, RUN_P
        elif state == RUN_P:
            # Section opened from a tail, a dashed collider or the route
            # start: it can never become a collider section, so members
            # must stay outside Z.
            if t_n == _U:
                if not n_in_z:
                    yield m, RUN_P
            elif t_n == _T:
                if not n_in_z:
                    yield m, _next_head(t_m)
            elif t_n == _HS:
                if not n_in_z:
                    yield m, TAIL
            else:  # exit through a dashed head: collider node -n<~
                if n_in_z:
                    yield m, TAIL
        elif state == RUN_S:
            # Inside a section entered through a solid head; no member
            # strictly before n touches Z.
            if t_n == _U:
                yield m, RUN_S_HIT if n_in_z else RUN_S
            elif t_n == _HS:
                if n_in_z:  # collider section closes with a member in Z
                    yield m, TAIL
            elif t_n == _HD:
                if n_in_z:  # collider node -n<~; earlier members clean
                    yield m, TAIL
            else:
                if not n_in_z:
                    yield m, _next_head(t_m)
        else:  # RUN_S_HIT: some member at or before n is in Z
            if t_n == _U:
                yield m, RUN_S_HIT
            elif t_n == _HS:
                yield m, TAIL  # collider section satisfied
            # any other exit leaves a Z member in a non-collider section


def _check_query(g: Ucg, x, y, z) -> Tuple[FrozenSet, FrozenSet, FrozenSet]:
    xs, ys, zs = frozenset(x), frozenset(y), frozenset(z)
    for n in xs | ys | zs:
        if n not in g:
            raise InvalidQueryError(f"unknown node {n!r} in query")
    if not xs or not ys:
        raise InvalidQueryError("query sets X and Y must be non-empty")
    if xs & ys or xs & zs or ys & zs:
        raise InvalidQueryError(
            f"query sets must be pairwise disjoint, got overlap "
            f"{sorted((xs & ys) | (xs & zs) | (ys & zs))}"
        )
    return xs, ys, zs


def is_separated(
    g: Ucg,
    x: Iterable[NodeId],
    y: Iterable[NodeId],
    z: Iterable[NodeId] = (),
) -> bool:
    """True when no Z-open route connects a node of X with a node of Y."""
    xs, ys, zs = _check_query(g, x, y, z)
    inc = _incidence(g)
    seen = {(n, TAIL) for n in xs}
    queue = deque(seen)
    while queue:
        n, state = queue.popleft()
        for m, mstate in _transitions(state, n, inc, zs):
            if (m, mstate) in seen:
                continue
            if m in ys and mstate in _ACCEPTING:
                return False
            seen.add((m, mstate))
            queue.append((m, mstate))
    return True


# -- literal route classification -----------------------------------------


def _edge_types(g: Ucg, a: NodeId, b: NodeId) -> Optional[Tuple[str, str]]:
    """Types of the edge between a and b at (a side, b side), or None."""
    e = g.edge_between(a, b)
    if e is None:
        return None
    src, dst, kind = e
    if kind is EdgeKind.UNDIRECTED:
        return (_U, _U)
    if kind is EdgeKind.SOLID_DIRECTED:
        return (_T, _HS) if (src, dst) == (a, b) else (_HS, _T)
    return (_T, _HD) if (src, dst) == (a, b) else (_HD, _T)


def _route_conditions(g: Ucg, route: Sequence[NodeId], zs: FrozenSet[NodeId], *, pending: bool) -> bool:
    """Literal openness conditions on one concrete route.

    With ``pending=True`` the final occurrence and the trailing undirected
    stretch are treated as unresolved: their plain/section conditions are
    skipped (used to prune route prefixes), while everything already fixed
    by two known edges is enforced.
    """
    m = len(route)
    if m < 2:
        return True
    sides = []
    for a, b in zip(route, route[1:]):
        t = _edge_types(g, a, b)
        if t is None:
            raise InvalidQueryError(f"route step {a!r}..{b!r} is not an edge")
        sides.append(t)
    arrive = [None] + [sides[k - 1][1] for k in range(1, m)]
    depart = [sides[k][0] for k in range(m - 1)] + [None]

    def collider_node(k: int) -> bool:
        a, d = arrive[k], depart[k]
        if a is None or d is None:
            return False
        return _HD in (a, d) and _T not in (a, d)

    # Sections: maximal stretches glued by undirected steps; every
    # occurrence belongs to exactly one (possibly a singleton).
    section_id = [0] * m
    sid = 0
    for k in range(1, m):
        if sides[k - 1] != (_U, _U):
            sid += 1
        section_id[k] = sid
    sections: Dict[int, List[int]] = {}
    for k in range(m):
        sections.setdefault(section_id[k], []).append(k)

    for members in sections.values():
        first, last = members[0], members[-1]
        unresolved = pending and last == m - 1
        left, right = arrive[first], depart[last]
        is_collider_section = left == _HS and right == _HS
        if is_collider_section and not any(route[k] in zs for k in members):
            return False
        for k in members:
            if k == 0 or k == m - 1:
                continue  # endpoint occurrences carry no condition
            if collider_node(k):
                if route[k] not in zs:
                    return False
            elif unresolved:
                continue  # plain check deferred until the stretch closes
            elif not is_collider_section and route[k] in zs:
                return False
    return True


def route_is_open(g: Ucg, route: Sequence[NodeId], z: Iterable[NodeId]) -> bool:
    """Literal check of the three openness conditions on a full route."""
    return _route_conditions(g, route, frozenset(z), pending=False)


def route_oracle(
    g: Ucg,
    x: Iterable[NodeId],
    y: Iterable[NodeId],
    z: Iterable[NodeId] = (),
    *,
    max_nodes: int = 10,
) -> bool:
    """Decide separation by enumerating routes and checking each literally.

    An open route revisiting an identical traversal context can be spliced
    down to a shorter open route, so enumeration stops at repeated
    (node, context) pairs; the context keeps the arrival type plus, inside
    an undirected stretch, the entry flank and whether a non-collider
    member in Z was already picked up.  Everything generated is vetted by
    :func:`route_is_open`, never by the transition rules of
    :func:`is_separated`.
    """
    if len(g.nodes) > max_nodes:
        raise GraphTooLargeError(
            f"route enumeration limited to {max_nodes} nodes, graph has {len(g.nodes)}"
        )
    xs, ys, zs = _check_query(g, x, y, z)
    inc = _incidence(g)

    witness = _find_open_route(g, inc, xs, ys, zs)
    return witness is None


def _find_open_route(g, inc, xs, ys, zs) -> Optional[List[NodeId]]:
    # Context: (arrival_type,) for directed/tail arrivals, or
    # ("run", entry_flank, z_before) inside an undirected stretch, where
    # z_before covers strictly-earlier stretch members that were not
    # collider-node occurrences.
    stack: List[Tuple[List[NodeId], Tuple]] = []
    visited = set()
    for s in sorted(xs, key=g.index):
        ctx = (_T,)
        stack.append(([s], ctx))
        visited.add((s, ctx))
    while stack:
        route, ctx = stack.pop()
        n = route[-1]
        for m, t_n, t_m in inc[n]:
            if t_m == _U:
                if ctx[0] == "run":
                    entry = ctx[1]
                    z_before = ctx[2] or (n in zs)
                else:
                    entry = ctx[0]
                    was_collider = ctx[0] == _HD  # ~>n- occurrence
                    z_before = (n in zs) and not was_collider
                nctx = ("run", entry, z_before)
            else:
                nctx = (t_m,)
            key = (m, nctx)
            if key in visited:
                continue
            nxt = route + [m]
            if not _route_conditions(g, nxt, zs, pending=True):
                continue
            if m in ys and _route_conditions(g, nxt, zs, pending=False):
                return nxt
            visited.add(key)
            stack.append((nxt, nctx))
    return None


# -- pure collider routes -------------------------------------------------

_PC_HS = "hs"
_PC_HD = "hd"
_PC_RUN_SOLID = "run_solid"
_PC_RUN_DASHED = "run_dashed"


def has_pure_collider_route(g: Ucg, i: NodeId, j: NodeId) -> bool:
    """True when some route from i to j keeps every interior occurrence
    a collider node or a member of a collider section.

    Structural only (no conditioning set): the absence of such a route
    forces a zero entry between i and j in the joint precision matrix,
    whatever the parameter values.
    """
    if i == j:
        raise InvalidQueryError("pure collider routes need two distinct endpoints")
    g.index(i)
    g.index(j)
    inc = _incidence(g)

    seen = set()
    queue = deque()

    def push(m, state):
        if (m, state) not in seen:
            seen.add((m, state))
            queue.append((m, state))

    for m, t_i, t_m in inc[i]:
        if m == j:
            return True  # direct edge of any kind
        if t_m == _HS:
            push(m, _PC_HS)
        elif t_m == _HD:
            push(m, _PC_HD)
        elif t_m == _U:
            # Stretch opened at the route start: only a dashed-head exit
            # (making the member a collider node) can continue it.
            push(m, _PC_RUN_DASHED)
        # tail arrivals cannot be interior to a pure collider route

    while queue:
        n, state = queue.popleft()
        for m, t_n, t_m in inc[n]:
            if state == _PC_HS:
                if t_n in (_HS, _HD):  # ->n<- or ->n<~ : collider at n
                    if m == j:
                        return True
                elif t_n == _U:
                    if m == j:
                        continue  # arriving at j inside an unclosed stretch
                    push(m, _PC_RUN_SOLID)
            elif state == _PC_HD:
                if t_n in (_HS, _HD):  # ~>n<- or ~>n<~
                    if m == j:
                        return True
                elif t_n == _U:  # ~>n- : collider node, stretch follows
                    if m == j:
                        return True  # pattern i ~> n - j
                    push(m, _PC_RUN_DASHED)
            elif state == _PC_RUN_SOLID:
                if t_n == _U:
                    if m == j:
                        continue
                    push(m, _PC_RUN_SOLID)
                elif t_n == _HS:  # closes ->C1-..-Cn<- collider section
                    if m == j:
                        return True
            else:  # _PC_RUN_DASHED: only a dashed head may close it
                if t_n == _HD:
                    if m == j:
                        return True
    return False


def same_separations(g: Ucg, h: Ucg, *, max_nodes: int = 8) -> bool:
    """Exhaustively compare the separations of two graphs on one node set."""
    if frozenset(g.nodes) != frozenset(h.nodes):
        raise NodeSetMismatchError(
            f"node sets differ: {sorted(g.nodes)} vs {sorted(h.nodes)}"
        )
    if len(g.nodes) > max_nodes:
        raise GraphTooLargeError(
            f"separation comparison limited to {max_nodes} nodes, got {len(g.nodes)}"
        )
    for x, y, z in all_disjoint_triples(g.nodes):
        if is_separated(g, x, y, z) != is_separated(h, x, y, z):
            return False
    return True


def all_disjoint_triples(nodes: Sequence[NodeId]):
    """All (X, Y, Z) with X, Y non-empty and pairwise disjoint.

    Symmetric duplicates (Y, X, Z) are skipped since separation is
    symmetric in X and Y.
    """
    n = len(nodes)
    order = {node: k for k, node in enumerate(nodes)}
    for assignment in range(4 ** n):
        x, y, z = [], [], []
        a = assignment
        for k in range(n):
            a, r = divmod(a, 4)
            if r == 1:
                x.append(nodes[k])
            elif r == 2:
                y.append(nodes[k])
            elif r == 3:
                z.append(nodes[k])
        if not x or not y:
            continue
        if order[x[0]] > order[y[0]]:
            continue
        yield frozenset(x), frozenset(y), frozenset(z)
