"""Parameterized unified chain graphs.

Each chain component K carries three parameter matrices: the regression
block of K on its mothers, the within-component precision, and the
precision block coupling K to its fathers.  Missing edges pin entries of
these matrices to zero; the regression block on the fathers is never a
free parameter but derived as -omega_kk^-1 @ omega_kfa.

The module also provides the random generation protocol used by the
experiment harness (edge sampling with rejection, uniform parameter
draws, optional zeroing of a fraction of the free parameters) and data
simulation by ancestral sampling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    GraphMismatchError,
    InvalidQueryError,
    NotAComponentError,
    RejectionLimitError,
    SingularMatrixError,
)
from .gaussian import Dataset, JointGaussian
from .graphs import EdgeKind, NodeId, Ucg, build_ucg, chain_decomposition, graph_from_dict, graph_to_dict


@dataclass(frozen=True)
class ZeroPattern:
    """Free-entry masks for one chain component (True = unrestricted)."""

    nodes: Tuple[NodeId, ...]
    mothers: Tuple[NodeId, ...]
    fathers: Tuple[NodeId, ...]
    beta_mo: np.ndarray
    omega_kk: np.ndarray
    omega_kfa: np.ndarray


def zero_pattern(g: Ucg, k: Iterable[NodeId]) -> ZeroPattern:
    """Masks for component k: free exactly where the matching edge exists."""
    ks = frozenset(k)
    decomp = chain_decomposition(g)
    if not any(frozenset(comp) == ks for comp in decomp.components):
        raise NotAComponentError(f"{sorted(ks)} is not a chain component of the graph")
    nodes = tuple(n for n in g.nodes if n in ks)
    mothers = tuple(sorted(g.mo(ks), key=g.index))
    fathers = tuple(sorted(g.fa(ks), key=g.index))
    beta_mo = np.zeros((len(nodes), len(mothers)), dtype=bool)
    omega_kfa = np.zeros((len(nodes), len(fathers)), dtype=bool)
    omega_kk = np.eye(len(nodes), dtype=bool)
    for r, child in enumerate(nodes):
        for c, mother in enumerate(mothers):
            beta_mo[r, c] = mother in g.mothers_of(child)
        for c, father in enumerate(fathers):
            omega_kfa[r, c] = father in g.fathers_of(child)
        for c, other in enumerate(nodes):
            if other in g.neighbors_of(child):
                omega_kk[r, c] = True
    return ZeroPattern(nodes, mothers, fathers, beta_mo, omega_kk, omega_kfa)


@dataclass(frozen=True)
class Block:
    """Parameters of one model block (normally one chain component)."""

    nodes: Tuple[NodeId, ...]
    mothers: Tuple[NodeId, ...]
    fathers: Tuple[NodeId, ...]
    beta_mo: np.ndarray
    omega_kk: np.ndarray
    omega_kfa: np.ndarray
    graph_faithful: bool = True

    def __post_init__(self):
        k, nmo, nfa = len(self.nodes), len(self.mothers), len(self.fathers)
        for name, mat, shape in (
            ("beta_mo", self.beta_mo, (k, nmo)),
            ("omega_kk", self.omega_kk, (k, k)),
            ("omega_kfa", self.omega_kfa, (k, nfa)),
        ):
            arr = np.asarray(mat, dtype=float)
            if arr.shape != shape:
                raise InvalidQueryError(f"{name} must have shape {shape}, got {arr.shape}")
            object.__setattr__(self, name, arr)
        if np.max(np.abs(self.omega_kk - self.omega_kk.T), initial=0.0) > 1e-12:
            raise SingularMatrixError("omega_kk must be symmetric")
        try:
            np.linalg.cholesky(self.omega_kk)
        except np.linalg.LinAlgError:
            raise SingularMatrixError("omega_kk must be positive definite") from None

    @property
    def parents(self) -> Tuple[NodeId, ...]:
        return self.mothers + self.fathers

    def lam(self) -> np.ndarray:
        return np.linalg.inv(self.omega_kk)

    def beta_fa(self) -> np.ndarray:
        if not self.fathers:
            return np.zeros((len(self.nodes), 0))
        return -np.linalg.solve(self.omega_kk, self.omega_kfa)

    def beta_full(self) -> np.ndarray:
        return np.hstack([self.beta_mo, self.beta_fa()])


def _check_block_pattern(block: Block, pattern: ZeroPattern) -> None:
    if block.nodes != pattern.nodes or block.mothers != pattern.mothers or block.fathers != pattern.fathers:
        raise GraphMismatchError("block labels do not match the component pattern")
    for name, mat, mask in (
        ("beta_mo", block.beta_mo, pattern.beta_mo),
        ("omega_kk", block.omega_kk, pattern.omega_kk),
        ("omega_kfa", block.omega_kfa, pattern.omega_kfa),
    ):
        bad = (~mask) & (mat != 0.0)
        if np.any(bad):
            r, c = np.argwhere(bad)[0]
            raise GraphMismatchError(
                f"{name} has a non-zero entry at masked position ({r}, {c})"
            )


class UcgModel:
    """A graph plus one parameter block per chain component.

    Blocks are stored in topological order; ``graph_faithful`` blocks have
    been validated against the component's zero pattern.  The experiment
    harness also builds models whose parent-only components are merged
    into a single dense root block; those skip the pattern check.
    """

    def __init__(self, graph: Ucg, blocks: Sequence[Block]):
        self.graph = graph
        self.blocks = tuple(blocks)
        covered: List[NodeId] = []
        seen = set()
        for block in self.blocks:
            for n in block.nodes:
                graph.index(n)
                if n in seen:
                    raise GraphMismatchError(f"node {n!r} appears in two blocks")
                seen.add(n)
            for p in block.parents:
                if p not in covered:
                    raise GraphMismatchError(
                        f"parent {p!r} of block {list(block.nodes)} is not in an earlier block"
                    )
            covered.extend(block.nodes)
        if set(covered) != set(graph.nodes):
            missing = sorted(set(graph.nodes) - set(covered))
            raise GraphMismatchError(f"blocks do not cover nodes {missing}")

    @classmethod
    def from_components(cls, graph: Ucg, params: Mapping[frozenset, Tuple[np.ndarray, np.ndarray, np.ndarray]]) -> "UcgModel":
        """Build a graph-faithful model from per-component matrices.

        ``params`` maps each component (as a frozenset) to a
        (beta_mo, omega_kk, omega_kfa) triple laid out per the component's
        zero pattern.
        """
        blocks = []
        for comp in chain_decomposition(graph).components:
            pat = zero_pattern(graph, comp)
            try:
                beta_mo, omega_kk, omega_kfa = params[frozenset(comp)]
            except KeyError:
                raise GraphMismatchError(f"missing parameters for component {sorted(comp)}") from None
            block = Block(pat.nodes, pat.mothers, pat.fathers, beta_mo, omega_kk, omega_kfa)
            _check_block_pattern(block, pat)
            blocks.append(block)
        return cls(graph, blocks)

    def block_of(self, node: NodeId) -> Block:
        for block in self.blocks:
            if node in block.nodes:
                return block
        raise InvalidQueryError(f"unknown node {node!r}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, UcgModel) or self.graph != other.graph:
            return False
        if len(self.blocks) != len(other.blocks):
            return False
        for a, b in zip(self.blocks, other.blocks):
            if a.nodes != b.nodes or a.mothers != b.mothers or a.fathers != b.fathers:
                return False
            for x, y in ((a.beta_mo, b.beta_mo), (a.omega_kk, b.omega_kk), (a.omega_kfa, b.omega_kfa)):
                if x.shape != y.shape or np.any(x != y):
                    return False
        return True


def assemble_joint(m: UcgModel) -> JointGaussian:
    """Joint covariance by chaining block conditionals in topological order."""
    names: List[NodeId] = []
    sigma = np.zeros((0, 0))
    for block in m.blocks:
        lam = block.lam()
        beta = block.beta_full()
        expanded = np.zeros((len(block.nodes), len(names)))
        for c, p in enumerate(block.parents):
            expanded[:, names.index(p)] = beta[:, c]
        cross = expanded @ sigma
        cov = lam + cross @ expanded.T
        sigma = np.block([[sigma, cross.T], [cross, cov]]) if names else cov
        names.extend(block.nodes)
    order = [names.index(n) for n in m.graph.nodes]
    sigma = sigma[np.ix_(order, order)]
    sigma = (sigma + sigma.T) / 2.0
    return JointGaussian(m.graph.nodes, sigma)


def simulate(m: UcgModel, n: int, seed: int) -> Dataset:
    """Ancestral sampling: parents first, then each block's conditional."""
    if n < 1:
        raise InvalidQueryError(f"need n >= 1 draws, got {n}")
    rng = np.random.default_rng(seed)
    values: Dict[NodeId, np.ndarray] = {}
    for block in m.blocks:
        eps = rng.standard_normal((len(block.nodes), n))
        chol = np.linalg.cholesky(block.lam())
        draw = chol @ eps
        if block.parents:
            pa = np.vstack([values[p] for p in block.parents])
            draw += block.beta_full() @ pa
        for r, node in enumerate(block.nodes):
            values[node] = draw[r]
    return Dataset(m.graph.nodes, np.vstack([values[n_] for n_ in m.graph.nodes]))


# -- random generation -----------------------------------------------------


def random_ucg(
    n_mo: int,
    n_fa: int,
    n_k: int,
    p_edge: float,
    seed: int,
    *,
    max_tries: int = 100_000,
) -> Ucg:
    """Random experiment graph: mothers, fathers and one child component.

    Mother-child, father-child and child-child edges are sampled
    independently with probability ``p_edge``; a draw is kept only when
    every parent reaches some child and the children are connected by
    undirected edges.
    """
    if min(n_mo, n_fa, n_k) < 1:
        raise InvalidQueryError("need at least one mother, father and child")
    if not 0.0 < p_edge < 1.0:
        raise InvalidQueryError(f"edge probability must be in (0, 1), got {p_edge}")
    rng = np.random.default_rng(seed)
    mothers = [f"M{i + 1}" for i in range(n_mo)]
    fathers = [f"F{i + 1}" for i in range(n_fa)]
    children = [f"C{i + 1}" for i in range(n_k)]
    nodes = mothers + fathers + children
    for _ in range(max_tries):
        edges = []
        mo_hit = {m_: False for m_ in mothers}
        fa_hit = {f_: False for f_ in fathers}
        for m_ in mothers:
            for c in children:
                if rng.random() < p_edge:
                    edges.append((m_, c, EdgeKind.DASHED_DIRECTED))
                    mo_hit[m_] = True
        for f_ in fathers:
            for c in children:
                if rng.random() < p_edge:
                    edges.append((f_, c, EdgeKind.SOLID_DIRECTED))
                    fa_hit[f_] = True
        adj = {c: set() for c in children}
        for a_i, a in enumerate(children):
            for b in children[a_i + 1:]:
                if rng.random() < p_edge:
                    edges.append((a, b, EdgeKind.UNDIRECTED))
                    adj[a].add(b)
                    adj[b].add(a)
        if not (all(mo_hit.values()) and all(fa_hit.values())):
            continue
        stack, seen = [children[0]], {children[0]}
        while stack:
            cur = stack.pop()
            for nxt in adj[cur]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if len(seen) != n_k:
            continue
        return build_ucg(nodes, edges)
    raise RejectionLimitError(f"no admissible graph in {max_tries} draws")


def _draw_spd(
    rng: np.random.Generator,
    size: int,
    free_offdiag: np.ndarray,
    *,
    diag_low: float = 0.0,
    diag_high: float = 30.0,
    offdiag_bound: float = 3.0,
    pd_margin: float = 0.0,
    max_tries: int = 100_000,
) -> np.ndarray:
    """Symmetric draw with uniform entries, rejected until positive definite."""
    for _ in range(max_tries):
        omega = np.zeros((size, size))
        for r in range(size):
            omega[r, r] = rng.uniform(diag_low, diag_high)
            for c in range(r + 1, size):
                if free_offdiag[r, c]:
                    omega[r, c] = omega[c, r] = rng.uniform(-offdiag_bound, offdiag_bound)
        if size == 0 or np.linalg.eigvalsh(omega)[0] > pd_margin:
            return omega
    raise RejectionLimitError(f"no positive definite draw in {max_tries} tries")


def random_params(
    g: Ucg,
    seed: int,
    *,
    zero_fraction: float = 0.0,
    pd_margin: float = 0.0,
    max_tries: int = 100_000,
) -> UcgModel:
    """Uniform random parameters for every chain component of ``g``.

    Free regression and precision couplings are drawn from [-3, 3],
    precision diagonals from [0, 30], and each within-component precision
    is redrawn until positive definite.  With ``zero_fraction`` > 0 that
    fraction of the free edge parameters (rounded down, pooled across all
    blocks and matrices) is set to zero afterwards, preserving positive
    definiteness by rejection.
    """
    rng = np.random.default_rng(seed)
    decomp = chain_decomposition(g)
    patterns = [zero_pattern(g, comp) for comp in decomp.components]
    for _ in range(max_tries):
        blocks = []
        for pat in patterns:
            k = len(pat.nodes)
            beta_mo = np.zeros(pat.beta_mo.shape)
            beta_mo[pat.beta_mo] = rng.uniform(-3.0, 3.0, size=int(pat.beta_mo.sum()))
            omega_kfa = np.zeros(pat.omega_kfa.shape)
            omega_kfa[pat.omega_kfa] = rng.uniform(-3.0, 3.0, size=int(pat.omega_kfa.sum()))
            omega_kk = _draw_spd(
                rng, k, pat.omega_kk, pd_margin=pd_margin, max_tries=max_tries
            )
            blocks.append(Block(pat.nodes, pat.mothers, pat.fathers, beta_mo, omega_kk, omega_kfa))
        if zero_fraction:
            blocks = _zero_edge_parameters(rng, blocks, patterns, zero_fraction)
            if blocks is None or any(
                np.linalg.eigvalsh(b.omega_kk)[0] <= pd_margin for b in blocks
            ):
                continue
        return UcgModel(g, blocks)
    raise RejectionLimitError(f"no admissible parameter draw in {max_tries} tries")


def _zero_edge_parameters(rng, blocks, patterns, zero_fraction) -> Optional[List[Block]]:
    """Zero a global fraction of the free edge parameters, one per edge."""
    slots = []  # (block index, matrix name, row, col)
    for bi, pat in enumerate(patterns):
        for r, c in np.argwhere(pat.beta_mo):
            slots.append((bi, "beta_mo", int(r), int(c)))
        for r, c in np.argwhere(pat.omega_kfa):
            slots.append((bi, "omega_kfa", int(r), int(c)))
        for r, c in np.argwhere(np.triu(pat.omega_kk, k=1)):
            slots.append((bi, "omega_kk", int(r), int(c)))
    n_zero = int(np.floor(zero_fraction * len(slots)))
    if n_zero == 0:
        return list(blocks)
    chosen = rng.choice(len(slots), size=n_zero, replace=False)
    mats = [
        {"beta_mo": b.beta_mo.copy(), "omega_kk": b.omega_kk.copy(), "omega_kfa": b.omega_kfa.copy()}
        for b in blocks
    ]
    for sl in chosen:
        bi, name, r, c = slots[int(sl)]
        mats[bi][name][r, c] = 0.0
        if name == "omega_kk":
            mats[bi][name][c, r] = 0.0
    out = []
    for b, m in zip(blocks, mats):
        try:
            out.append(Block(b.nodes, b.mothers, b.fathers, m["beta_mo"], m["omega_kk"], m["omega_kfa"]))
        except SingularMatrixError:
            return None
    return out


def random_experiment_model(
    g: Ucg,
    seed: int,
    *,
    zero_fraction: float = 0.0,
    pd_margin: float = 0.0,
    max_tries: int = 100_000,
) -> UcgModel:
    """Experiment-protocol model: dense root layer plus the child component.

    All parentless singleton components are merged into one root block
    whose precision has no structural zeros (drawn like the others), so
    the simulated parents are mutually dependent; the child component is
    parameterized per its zero pattern.
    """
    rng = np.random.default_rng(seed)
    decomp = chain_decomposition(g)
    roots: List[NodeId] = []
    child_comps = []
    for comp in decomp.components:
        if not g.pa(comp):
            if len(comp) != 1:
                raise InvalidQueryError(
                    "experiment layout expects parentless components to be singletons"
                )
            roots.extend(comp)
        else:
            child_comps.append(comp)
    roots = [n for n in g.nodes if n in set(roots)]
    for _ in range(max_tries):
        omega_roots = _draw_spd(
            rng, len(roots), np.ones((len(roots), len(roots)), dtype=bool),
            pd_margin=pd_margin, max_tries=max_tries,
        )
        root_block = Block(
            tuple(roots), (), (),
            np.zeros((len(roots), 0)), omega_roots, np.zeros((len(roots), 0)),
            graph_faithful=False,
        )
        blocks = [root_block]
        patterns = []
        ok = True
        for comp in child_comps:
            pat = zero_pattern(g, comp)
            patterns.append(pat)
            k = len(pat.nodes)
            beta_mo = np.zeros(pat.beta_mo.shape)
            beta_mo[pat.beta_mo] = rng.uniform(-3.0, 3.0, size=int(pat.beta_mo.sum()))
            omega_kfa = np.zeros(pat.omega_kfa.shape)
            omega_kfa[pat.omega_kfa] = rng.uniform(-3.0, 3.0, size=int(pat.omega_kfa.sum()))
            omega_kk = _draw_spd(rng, k, pat.omega_kk, pd_margin=pd_margin, max_tries=max_tries)
            blocks.append(Block(pat.nodes, pat.mothers, pat.fathers, beta_mo, omega_kk, omega_kfa))
        if zero_fraction:
            child_blocks = _zero_edge_parameters(rng, blocks[1:], patterns, zero_fraction)
            if child_blocks is None or any(
                np.linalg.eigvalsh(b.omega_kk)[0] <= pd_margin for b in child_blocks
            ):
                continue
            blocks = [root_block] + child_blocks
        if ok:
            return UcgModel(g, blocks)
    raise RejectionLimitError(f"no admissible parameter draw in {max_tries} tries")


# -- serialization ---------------------------------------------------------


def model_to_dict(m: UcgModel) -> dict:
    return {
        "graph": graph_to_dict(m.graph),
        "blocks": [
            {
                "nodes": list(b.nodes),
                "mothers": list(b.mothers),
                "fathers": list(b.fathers),
                "beta_mo": b.beta_mo.tolist(),
                "omega_kk": b.omega_kk.tolist(),
                "omega_kfa": b.omega_kfa.tolist(),
                "graph_faithful": b.graph_faithful,
            }
            for b in m.blocks
        ],
    }


def model_from_dict(d: Mapping) -> UcgModel:
    graph = graph_from_dict(d["graph"])
    blocks = []
    for bd in d["blocks"]:
        block = Block(
            tuple(bd["nodes"]),
            tuple(bd["mothers"]),
            tuple(bd["fathers"]),
            np.array(bd["beta_mo"], dtype=float).reshape(len(bd["nodes"]), len(bd["mothers"])),
            np.array(bd["omega_kk"], dtype=float).reshape(len(bd["nodes"]), len(bd["nodes"])),
            np.array(bd["omega_kfa"], dtype=float).reshape(len(bd["nodes"]), len(bd["fathers"])),
            graph_faithful=bool(bd.get("graph_faithful", True)),
        )
        if block.graph_faithful:
            pat = zero_pattern(graph, block.nodes)
            _check_block_pattern(block, pat)
        blocks.append(block)
    return UcgModel(graph, blocks)


def model_to_json(m: UcgModel) -> str:
    return json.dumps(model_to_dict(m), indent=2) + "\n"


def model_from_json(text: str) -> UcgModel:
    return model_from_dict(json.loads(text))
