import random

import numpy as np
import pytest

from ucg.errors import (
    GraphMismatchError,
    InvalidQueryError,
    NotAComponentError,
    RejectionLimitError,
)
from ucg.gaussian import is_ci
from ucg.graphs import EdgeKind, build_ucg, chain_decomposition
from ucg.model import (
    Block,
    UcgModel,
    assemble_joint,
    model_from_json,
    model_to_json,
    random_experiment_model,
    random_params,
    random_ucg,
    simulate,
    zero_pattern,
)
from ucg.separation import all_disjoint_triples, is_separated

from conftest import D, S, U, random_valid_ucg


class TestZeroPattern:
    def test_mother_child_component(self, fig_ucg):
        pat = zero_pattern(fig_ucg, ["D1", "D2"])
        assert pat.nodes == ("D1", "D2")
        assert pat.mothers == ("G1", "G2")
        assert pat.fathers == ("V1", "V2")
        assert pat.beta_mo.tolist() == [[True, False], [False, True]]
        assert pat.omega_kfa.tolist() == [[True, False], [False, True]]
        assert pat.omega_kk.tolist() == [[True, True], [True, True]]

    def test_four_chain_component(self, chain4):
        pat = zero_pattern(chain4, ["3", "4"])
        # solid edge 1 -> 4 is absent, so that coupling is pinned to zero
        assert pat.fathers == ("1", "2")
        assert pat.omega_kfa.tolist() == [[True, False], [False, True]]

    def test_complete_component_all_free(self):
        g = build_ucg(["a", "b", "c"], [("a", "b", U), ("b", "c", U), ("a", "c", U)])
        pat = zero_pattern(g, ["a", "b", "c"])
        assert pat.omega_kk.all()
        assert pat.beta_mo.shape == (3, 0) and pat.omega_kfa.shape == (3, 0)

    def test_not_a_component(self, fig_ucg):
        with pytest.raises(NotAComponentError):
            zero_pattern(fig_ucg, ["D1"])

    def test_without_disjointness_dashed_pattern_matches_dashed_only_graph(self):
        # dropping the father/mother split and treating every parent as a
        # mother reproduces the masks of the graph with solid edges removed
        rng = random.Random(77)
        for _ in range(20):
            g = random_valid_ucg(rng, 5)
            stripped = build_ucg(
                g.nodes,
                [
                    (a, b, D if k is S else k)
                    for a, b, k in g.edges
                ],
            )
            for comp in chain_decomposition(g).components:
                pat = zero_pattern(stripped, comp)
                for r, child in enumerate(pat.nodes):
                    for c, parent in enumerate(pat.mothers):
                        expected = parent in (g.mothers_of(child) | g.fathers_of(child))
                        assert pat.beta_mo[r, c] == expected
                # undirected masks are untouched by the edge relabeling
                assert pat.omega_kk.tolist() == zero_pattern(g, comp).omega_kk.tolist()


class TestBlockAndModel:
    def test_masked_entry_rejected(self, chain4):
        m = random_params(chain4, seed=1)
        block = next(b for b in m.blocks if b.nodes == ("3", "4"))
        bad = block.omega_kfa.copy()
        bad[1, 0] = 0.7  # 1 -> 4 is not an edge
        params = {
            frozenset(b.nodes): (b.beta_mo, b.omega_kk, b.omega_kfa)
            for b in m.blocks
        }
        params[frozenset(("3", "4"))] = (block.beta_mo, block.omega_kk, bad)
        with pytest.raises(GraphMismatchError):
            UcgModel.from_components(chain4, params)

    def test_father_block_is_derived(self, chain4):
        m = random_params(chain4, seed=5)
        block = next(b for b in m.blocks if b.nodes == ("3", "4"))
        expected = -np.linalg.inv(block.omega_kk) @ block.omega_kfa
        assert np.allclose(block.beta_fa(), expected)


class TestAssembleJoint:
    def test_single_rootless_component(self):
        g = build_ucg(["a", "b"], [("a", "b", U)])
        m = random_params(g, seed=3)
        jg = assemble_joint(m)
        assert np.allclose(jg.sigma, np.linalg.inv(m.blocks[0].omega_kk))

    def test_two_node_hand_example(self):
        # A -> B with regression weight 0.5, residual variance 1, var(A) = 2:
        # joint covariance [[2, 1], [1, 1.5]]
        g = build_ucg(["A", "B"], [("A", "B", S)])
        blocks = [
            Block(("A",), (), (), np.zeros((1, 0)), np.array([[0.5]]), np.zeros((1, 0))),
            Block(("B",), (), ("A",), np.zeros((1, 0)), np.array([[1.0]]), np.array([[-0.5]])),
        ]
        jg = assemble_joint(UcgModel(g, blocks))
        assert np.allclose(jg.sigma, [[2.0, 1.0], [1.0, 1.5]])

    def test_satisfies_global_markov_property(self, fig_ucg):
        m = random_params(fig_ucg, seed=21, pd_margin=0.05)
        jg = assemble_joint(m)
        for x, y, z in all_disjoint_triples(fig_ucg.nodes):
            if is_separated(fig_ucg, x, y, z):
                assert is_ci(jg, tuple(x), tuple(y), tuple(z), tol=1e-8)


class TestRandomUcg:
    def test_constraints_hold(self):
        for seed in range(15):
            g = random_ucg(3, 2, 5, 0.3, seed=seed)
            decomp = chain_decomposition(g)
            children = {n for n in g.nodes if n.startswith("C")}
            assert any(set(c) == children for c in decomp.components)
            for parent in (n for n in g.nodes if not n.startswith("C")):
                assert g.solid_children_of(parent) or g.dashed_children_of(parent)

    def test_determinism(self):
        assert random_ucg(5, 5, 10, 0.2, seed=9) == random_ucg(5, 5, 10, 0.2, seed=9)

    def test_high_density_accepts_quickly(self):
        g = random_ucg(2, 2, 4, 0.95, seed=0, max_tries=5)
        assert len(g.edges) >= 4 + 3  # parents wired plus a connected child set

    def test_minimal_counts(self):
        g = random_ucg(1, 1, 1, 0.5, seed=4)
        assert set(g.edges) == {("M1", "C1", D), ("F1", "C1", S)}

    def test_rejection_limit(self):
        with pytest.raises(RejectionLimitError):
            # (i) forces every parent to hit a child; with minuscule edge
            # probability and one try this cannot happen
            random_ucg(5, 5, 10, 1e-9, seed=1, max_tries=1)

    def test_invalid_probability(self):
        with pytest.raises(InvalidQueryError):
            random_ucg(1, 1, 1, 1.5, seed=0)


class TestRandomParams:
    def test_intervals_and_positive_definiteness(self):
        for seed in (0, 1, 2):
            g = random_ucg(3, 3, 6, 0.3, seed=seed)
            m = random_params(g, seed=seed + 100)
            for block in m.blocks:
                assert np.linalg.eigvalsh(block.omega_kk)[0] > 0
                assert np.all(np.abs(block.beta_mo) <= 3.0)
                assert np.all(np.abs(block.omega_kfa) <= 3.0)
                off = block.omega_kk[~np.eye(len(block.nodes), dtype=bool)]
                assert np.all(np.abs(off) <= 3.0)
                assert np.all(np.diag(block.omega_kk) >= 0.0)
                assert np.all(np.diag(block.omega_kk) <= 30.0)

    def test_zero_fraction_zeroes_exactly_the_floor(self):
        g = random_ucg(3, 3, 6, 0.4, seed=7)
        m_full = random_params(g, seed=8)
        m_zero = random_params(g, seed=8, zero_fraction=0.25)
        def free_edge_values(m):
            vals = []
            for b in m.blocks:
                pat = zero_pattern(m.graph, b.nodes)
                vals.extend(b.beta_mo[pat.beta_mo].tolist())
                vals.extend(b.omega_kfa[pat.omega_kfa].tolist())
                vals.extend(b.omega_kk[np.triu(pat.omega_kk, k=1)].tolist())
            return vals
        full = free_edge_values(m_full)
        zeroed = free_edge_values(m_zero)
        assert len(full) == len(zeroed)
        assert sum(v == 0.0 for v in zeroed) == int(np.floor(0.25 * len(zeroed)))

    def test_experiment_model_has_dense_root_layer(self):
        g = random_ucg(4, 4, 6, 0.3, seed=2)
        m = random_experiment_model(g, seed=3)
        root = m.blocks[0]
        assert not root.graph_faithful
        assert len(root.nodes) == 8 and not root.parents
        assert np.all(np.linalg.eigvalsh(root.omega_kk) > 0)
        child = m.blocks[1]
        assert child.graph_faithful and len(child.nodes) == 6


class TestSimulate:
    def test_zero_draws_rejected(self, fig_ucg):
        m = random_params(fig_ucg, seed=1)
        with pytest.raises(InvalidQueryError):
            simulate(m, 0, seed=0)

    def test_single_node_variance(self):
        g = build_ucg(["A"], [])
        m = UcgModel(
            g, [Block(("A",), (), (), np.zeros((1, 0)), np.array([[0.25]]), np.zeros((1, 0)))]
        )
        n = 50_000
        data = simulate(m, n, seed=3)
        var = float(np.var(data.values))
        assert abs(var - 4.0) < 3 * 4.0 * np.sqrt(2.0 / n)

    def test_matches_assembled_joint(self, fig_ucg):
        m = random_params(fig_ucg, seed=6, pd_margin=0.3)
        jg = assemble_joint(m)
        n = 200_000
        data = simulate(m, n, seed=7)
        cov = data.values @ data.values.T / n
        scale = np.sqrt(np.outer(np.diag(jg.sigma), np.diag(jg.sigma)))
        assert np.max(np.abs(cov - jg.sigma) / scale) < 0.05

    def test_seed_determinism(self, fig_ucg):
        m = random_params(fig_ucg, seed=6)
        a = simulate(m, 100, seed=5)
        b = simulate(m, 100, seed=5)
        assert np.array_equal(a.values, b.values)


class TestModelSerialization:
    def test_round_trip(self, fig_ucg):
        m = random_params(fig_ucg, seed=10)
        again = model_from_json(model_to_json(m))
        assert again == m

    def test_zeros_written_explicitly_and_validated(self, chain4):
        m = random_params(chain4, seed=2)
        doc = model_to_json(m)
        import json

        parsed = json.loads(doc)
        child = next(b for b in parsed["blocks"] if b["nodes"] == ["3", "4"])
        assert child["omega_kfa"][1][0] == 0.0
        child["omega_kfa"][1][0] = 0.9
        with pytest.raises(GraphMismatchError):
            model_from_json(json.dumps(parsed))
