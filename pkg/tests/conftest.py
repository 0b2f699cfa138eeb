"""Shared fixtures and random-graph helpers for the test suite."""

import itertools
import random

import pytest

from ucg.errors import UcgError
from ucg.graphs import EdgeKind, Ucg, build_ucg

U = EdgeKind.UNDIRECTED
S = EdgeKind.SOLID_DIRECTED
D = EdgeKind.DASHED_DIRECTED

ALL_KINDS = (U, S, D)


def mother_child_graph() -> Ucg:
    """The six-node vaccination example: two solid parents, two dashed
    parents, and an undirected link between the two disease nodes."""
    return build_ucg(
        ["V1", "G1", "V2", "G2", "D1", "D2"],
        [
            ("V1", "D1", S),
            ("G1", "D1", D),
            ("V2", "D2", S),
            ("G2", "D2", D),
            ("D1", "D2", U),
        ],
    )


def four_chain_graph() -> Ucg:
    """Two solid parents feeding an undirected pair: 1 -> 3 - 4 <- 2."""
    return build_ucg(
        ["1", "2", "3", "4"],
        [("1", "3", S), ("3", "4", U), ("2", "4", S)],
    )


def random_valid_ucg(rng: random.Random, n: int, p: float = 0.4, kinds=ALL_KINDS) -> Ucg:
    """Rejection-sample a valid graph with the given edge density."""
    nodes = [f"n{i}" for i in range(n)]
    while True:
        edges = []
        for i, j in itertools.combinations(range(n), 2):
            if rng.random() < p:
                kind = rng.choice(kinds)
                a, b = (nodes[i], nodes[j]) if rng.random() < 0.5 else (nodes[j], nodes[i])
                edges.append((a, b, kind))
        try:
            return build_ucg(nodes, edges)
        except UcgError:
            continue


@pytest.fixture
def fig_ucg() -> Ucg:
    return mother_child_graph()


@pytest.fixture
def chain4() -> Ucg:
    return four_chain_graph()
