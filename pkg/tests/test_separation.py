import itertools
import random
from collections import deque

import pytest

from ucg.errors import GraphTooLargeError, InvalidQueryError, NodeSetMismatchError
from ucg.graphs import EdgeKind, build_ucg
from ucg.separation import (
    all_disjoint_triples,
    has_pure_collider_route,
    is_separated,
    route_is_open,
    route_oracle,
    same_separations,
)

from conftest import D, S, U, random_valid_ucg


class TestMotherChildQueries:
    """Behaviour on the vaccination example that motivates the model class."""

    @pytest.mark.parametrize(
        "x, y, z, expected",
        [
            ({"G1"}, {"D2"}, set(), True),      # gene is blocked at the collider D1
            ({"G1"}, {"D2"}, {"D1"}, False),    # conditioning opens the collider node
            ({"V1"}, {"V2"}, set(), True),
            ({"V1"}, {"V2"}, {"D1"}, False),    # collider section D1 - D2 activated
            ({"V1"}, {"D2"}, set(), False),     # vaccine interferes via D1 - D2
            ({"G1"}, {"G2"}, {"D1", "D2"}, False),
        ],
    )
    def test_expected_verdicts(self, fig_ucg, x, y, z, expected):
        assert is_separated(fig_ucg, x, y, z) is expected
        assert route_oracle(fig_ucg, x, y, z) is expected

    def test_four_chain(self, chain4):
        assert is_separated(chain4, {"1"}, {"2"}, set())
        assert not is_separated(chain4, {"1"}, {"2"}, {"3"})
        assert not is_separated(chain4, {"1"}, {"2"}, {"4"})


class TestQueryValidation:
    def test_overlap_rejected(self, fig_ucg):
        with pytest.raises(InvalidQueryError):
            is_separated(fig_ucg, {"D1"}, {"D1"}, set())

    def test_empty_side_rejected(self, fig_ucg):
        with pytest.raises(InvalidQueryError):
            is_separated(fig_ucg, set(), {"D1"}, set())

    def test_unknown_node_rejected(self, fig_ucg):
        with pytest.raises(InvalidQueryError):
            is_separated(fig_ucg, {"D1"}, {"zzz"}, set())

    def test_oracle_size_guard(self):
        g = build_ucg([f"n{i}" for i in range(11)], [])
        with pytest.raises(GraphTooLargeError):
            route_oracle(g, {"n0"}, {"n1"}, set())


def _blind_connected(g, xs, ys, zs, max_len):
    """Completely unpruned route enumeration; only usable on tiny graphs."""
    from ucg.separation import _incidence

    inc = _incidence(g)
    stack = [[s] for s in xs]
    while stack:
        route = stack.pop()
        if route[-1] in ys and route_is_open(g, route, zs):
            return True
        if len(route) < max_len:
            for m, _, _ in inc[route[-1]]:
                stack.append(route + [m])
    return False


class TestAgainstBlindEnumeration:
    """The reachability engine and the pruned oracle must both match a
    zero-cleverness enumerator wherever that enumerator is exhaustive."""

    @pytest.mark.parametrize("size, max_len, graphs", [(3, 12, 60), (4, 9, 40)])
    def test_three_way_agreement(self, size, max_len, graphs):
        rng = random.Random(20240800 + size)
        for _ in range(graphs):
            g = random_valid_ucg(rng, size, p=0.5)
            for x, y, z in all_disjoint_triples(g.nodes):
                blind = _blind_connected(g, x, y, z, max_len)
                assert is_separated(g, x, y, z) == (not blind)
                assert route_oracle(g, x, y, z) == (not blind)


class TestRouteClassifier:
    def test_repeated_node_route_open(self):
        # conditioning on a descendant of a collider opens it, which needs
        # a route that walks down to the descendant and back
        g = build_ucg(
            ["A", "B", "C", "E"],
            [("A", "C", S), ("B", "C", S), ("C", "E", S)],
        )
        assert route_is_open(g, ["A", "C", "E", "C", "B"], {"E"})
        assert not route_is_open(g, ["A", "C", "B"], {"E"})
        assert not is_separated(g, {"A"}, {"B"}, {"E"})
        assert is_separated(g, {"A"}, {"B"}, set())

    def test_non_adjacent_step_rejected(self, fig_ucg):
        with pytest.raises(InvalidQueryError):
            route_is_open(fig_ucg, ["V1", "V2"], set())

    def test_collider_section_needs_a_conditioned_member(self, chain4):
        assert not route_is_open(chain4, ["1", "3", "4", "2"], set())
        assert route_is_open(chain4, ["1", "3", "4", "2"], {"3"})
        assert route_is_open(chain4, ["1", "3", "4", "2"], {"4"})


class TestSymmetryAndGraphoids:
    def test_symmetry(self):
        rng = random.Random(17)
        for _ in range(20):
            g = random_valid_ucg(rng, 5)
            for x, y, z in itertools.islice(all_disjoint_triples(g.nodes), 0, None, 7):
                assert is_separated(g, x, y, z) == is_separated(g, y, x, z)

    def test_graphoid_closure_properties(self):
        # decomposition, weak union and composition over random graphs
        rng = random.Random(23)
        for _ in range(15):
            g = random_valid_ucg(rng, 5)
            nodes = list(g.nodes)
            for _ in range(40):
                rng.shuffle(nodes)
                x = frozenset(nodes[:1])
                y = frozenset(nodes[1:2])
                w = frozenset(nodes[2:3])
                z = frozenset(nodes[3 : 3 + rng.randint(0, 2)])
                if is_separated(g, x, y | w, z):
                    assert is_separated(g, x, y, z)  # decomposition
                    assert is_separated(g, x, y, z | w)  # weak union
                if is_separated(g, x, y, z) and is_separated(g, x, w, z):
                    assert is_separated(g, x, y | w, z)  # composition


def _lwf_separated(g, xs, ys, zs):
    """Collider-sections-only criterion for graphs without dashed edges.

    Independent mini-implementation: breadth-first over (node, state) where
    state encodes tail arrival, solid-head arrival, or membership of an
    undirected stretch (plain, or behind a solid head without/with a
    conditioned member so far)."""
    T, H, RP, RS, RSH = "t", "h", "rp", "rs", "rsh"
    inc = {n: [] for n in g.nodes}
    for a, b, kind in g.edges:
        if kind is EdgeKind.UNDIRECTED:
            inc[a].append((b, "u", "u"))
            inc[b].append((a, "u", "u"))
        else:
            inc[a].append((b, "t", "h"))
            inc[b].append((a, "h", "t"))
    start = {(n, T) for n in xs}
    seen = set(start)
    queue = deque(start)
    accepting = (T, H, RP, RS)
    while queue:
        n, state = queue.popleft()
        if n in ys and state in accepting:
            return False
        for m, tn, tm in inc[n]:
            nxt = None
            inz = n in zs
            if state == T:
                if not inz:
                    nxt = {"t": H, "h": T, "u": RP}[tn]
            elif state == H:
                if tn == "t" and not inz:
                    nxt = H
                elif tn == "h" and inz:
                    nxt = T
                elif tn == "u":
                    nxt = RSH if inz else RS
            elif state == RP:
                if tn == "u" and not inz:
                    nxt = RP
                elif tn == "t" and not inz:
                    nxt = H
                elif tn == "h" and not inz:
                    nxt = T
            elif state == RS:
                if tn == "u":
                    nxt = RSH if inz else RS
                elif tn == "h" and inz:
                    nxt = T
                elif tn == "t" and not inz:
                    nxt = H
            else:  # RSH
                if tn == "u":
                    nxt = RSH
                elif tn == "h":
                    nxt = T
            if nxt is not None and (m, nxt) not in seen:
                seen.add((m, nxt))
                queue.append((m, nxt))
    for n in ys:
        if (n, T) in seen or (n, H) in seen or (n, RP) in seen or (n, RS) in seen:
            return False
    return True


def _amp_separated(g, xs, ys, zs):
    """Collider-nodes-only criterion for graphs without solid edges."""
    T, H, R = "t", "h", "r"
    inc = {n: [] for n in g.nodes}
    for a, b, kind in g.edges:
        if kind is EdgeKind.UNDIRECTED:
            inc[a].append((b, "u", "u"))
            inc[b].append((a, "u", "u"))
        else:
            inc[a].append((b, "t", "h"))
            inc[b].append((a, "h", "t"))
    start = {(n, T) for n in xs}
    seen = set(start)
    queue = deque(start)
    while queue:
        n, state = queue.popleft()
        if n in ys:
            return False
        for m, tn, tm in inc[n]:
            inz = n in zs
            nxt = None
            if state == T:
                if not inz:
                    nxt = {"t": H, "h": T, "u": R}[tn]
            elif state == H:
                # dashed head in: leaving through a head or an undirected
                # edge makes n a collider node
                if tn == "t" and not inz:
                    nxt = H
                elif tn == "h" and inz:
                    nxt = T
                elif tn == "u" and inz:
                    nxt = R
            else:  # inside an undirected stretch
                if tn == "u" and not inz:
                    nxt = R
                elif tn == "t" and not inz:
                    nxt = H
                elif tn == "h" and inz:
                    nxt = T
            if nxt is not None and (m, nxt) not in seen:
                seen.add((m, nxt))
                queue.append((m, nxt))
    return True


class TestSpecialization:
    def test_matches_lwf_criterion_without_dashed_edges(self):
        rng = random.Random(41)
        for _ in range(40):
            g = random_valid_ucg(rng, 5, kinds=(U, S))
            for x, y, z in all_disjoint_triples(g.nodes):
                assert is_separated(g, x, y, z) == _lwf_separated(g, x, y, z)

    def test_matches_amp_criterion_without_solid_edges(self):
        rng = random.Random(43)
        for _ in range(40):
            g = random_valid_ucg(rng, 5, kinds=(U, D))
            for x, y, z in all_disjoint_triples(g.nodes):
                assert is_separated(g, x, y, z) == _amp_separated(g, x, y, z)

    def test_dag_matches_d_separation(self):
        # solid-only DAGs reduce to d-separation; spot-check the classic
        # collider/chain/fork verdicts
        g = build_ucg(["A", "B", "C"], [("A", "C", S), ("B", "C", S)])
        assert is_separated(g, {"A"}, {"B"}, set())
        assert not is_separated(g, {"A"}, {"B"}, {"C"})
        h = build_ucg(["A", "B", "C"], [("A", "B", S), ("B", "C", S)])
        assert not is_separated(h, {"A"}, {"C"}, set())
        assert is_separated(h, {"A"}, {"C"}, {"B"})


class TestPureColliderRoutes:
    def test_mother_child_pairs(self, fig_ucg):
        assert has_pure_collider_route(fig_ucg, "V1", "G1")  # V1 -> D1 <~ G1
        assert has_pure_collider_route(fig_ucg, "V1", "D1")
        assert has_pure_collider_route(fig_ucg, "G1", "D2")  # G1 ~> D1 - D2
        assert has_pure_collider_route(fig_ucg, "G1", "G2")  # G1 ~> D1 - D2 <~ G2
        assert has_pure_collider_route(fig_ucg, "V1", "V2")  # V1 -> D1 - D2 <- V2
        # a solid head into the stretch with no closing head is not pure:
        # the joint precision entry between V1 and D2 vanishes identically
        assert not has_pure_collider_route(fig_ucg, "V1", "D2")

    def test_edgeless_pair(self):
        g = build_ucg(["A", "B"], [])
        assert not has_pure_collider_route(g, "A", "B")

    def test_collider_section_pattern(self, chain4):
        assert has_pure_collider_route(chain4, "1", "2")  # 1 -> 3 - 4 <- 2

    def test_solid_head_into_terminal_stretch_is_not_pure(self):
        g = build_ucg(["i", "c", "j"], [("i", "c", S), ("c", "j", U)])
        assert not has_pure_collider_route(g, "i", "j")

    def test_dashed_head_into_terminal_stretch_is_pure(self):
        g = build_ucg(["i", "c", "j"], [("i", "c", D), ("c", "j", U)])
        assert has_pure_collider_route(g, "i", "j")

    def test_mixed_flank_stretch_is_not_pure(self):
        g = build_ucg(
            ["i", "r", "s", "j"],
            [("i", "r", D), ("r", "s", U), ("j", "s", S)],
        )
        assert not has_pure_collider_route(g, "i", "j")

    def test_identical_endpoints_rejected(self, fig_ucg):
        with pytest.raises(InvalidQueryError):
            has_pure_collider_route(fig_ucg, "D1", "D1")


class TestSameSeparations:
    def test_identity(self, fig_ucg):
        assert same_separations(fig_ucg, fig_ucg)

    def test_reversed_two_node_edge(self):
        g = build_ucg(["A", "B"], [("A", "B", S)])
        h = build_ucg(["A", "B"], [("B", "A", D)])
        assert same_separations(g, h)

    def test_extra_edge_changes_separations(self):
        g = build_ucg(["A", "B", "C"], [("A", "B", S), ("B", "C", U)])
        h = build_ucg(["A", "B", "C"], [("A", "B", S), ("A", "C", S), ("B", "C", U)])
        assert not same_separations(g, h)

    def test_node_set_mismatch(self, fig_ucg, chain4):
        with pytest.raises(NodeSetMismatchError):
            same_separations(fig_ucg, chain4)

    def test_size_guard(self):
        g = build_ucg([f"n{i}" for i in range(9)], [])
        with pytest.raises(GraphTooLargeError):
            same_separations(g, g)
