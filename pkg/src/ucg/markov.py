"""Block-recursive, pairwise, local and global Markov properties.

Each property is an enumerator producing independence statements from
set expressions over the graph (evaluated left to right), plus a checker
that tests every statement against the exact joint covariance of a
parameterized model.  For Gaussian distributions the four properties are
equivalent, which the cross-equivalence report exercises in both
directions: random models must satisfy all suites, and breaking one
structural zero must break at least one suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import GraphTooLargeError, InvalidQueryError
from .gaussian import JointGaussian, partial_covariance
from .graphs import NodeId, Ucg, chain_decomposition
from .model import Block, UcgModel, assemble_joint, random_params, zero_pattern
from .separation import all_disjoint_triples, is_separated

BLOCK_RECURSIVE = ("B1", "B2", "B3")
PAIRWISE = ("P1", "P2")
LOCAL = ("L1", "L2")
GROUPS = {
    "block": BLOCK_RECURSIVE,
    "pairwise": PAIRWISE,
    "local": LOCAL,
    "global": ("Global",),
}


@dataclass(frozen=True)
class IndependenceStatement:
    x: FrozenSet[NodeId]
    y: FrozenSet[NodeId]
    z: FrozenSet[NodeId]
    origin: str

    def __post_init__(self):
        if not self.x or not self.y:
            raise InvalidQueryError("independence statements need non-empty x and y")
        if self.x & self.y or self.x & self.z or self.y & self.z:
            raise InvalidQueryError("independence statement sets must be disjoint")

    def pretty(self) -> str:
        def fmt(s):
            return "{" + ",".join(sorted(s)) + "}"

        return f"[{self.origin}] {fmt(self.x)} _||_ {fmt(self.y)} | {fmt(self.z)}"


def _selector_origins(which: str) -> Tuple[str, ...]:
    if which in GROUPS:
        return GROUPS[which]
    if which in BLOCK_RECURSIVE + PAIRWISE + LOCAL + ("Global",):
        return (which,)
    if which == "all":
        return BLOCK_RECURSIVE + PAIRWISE + LOCAL + ("Global",)
    raise InvalidQueryError(f"unknown property selector {which!r}")


def _emit(stmts, dropped, x, y, z, origin):
    x, y, z = frozenset(x), frozenset(y), frozenset(z)
    if not x or not y:
        dropped[0] += 1
        return
    stmts.append(IndependenceStatement(x, y, z, origin))


def _enumerate(g: Ucg, origins: Sequence[str], max_global_nodes: int = 8):
    """Build the statement list; returns (statements, vacuous_count)."""
    stmts: List[IndependenceStatement] = []
    dropped = [0]
    decomp = chain_decomposition(g)

    def comp_of(i):
        return frozenset(decomp.components[decomp.component_of[i]])

    for origin in origins:
        if origin == "Global":
            if len(g.nodes) > max_global_nodes:
                raise GraphTooLargeError(
                    f"global enumeration limited to {max_global_nodes} nodes"
                )
            for x, y, z in all_disjoint_triples(g.nodes):
                if is_separated(g, x, y, z):
                    stmts.append(IndependenceStatement(x, y, z, "Global"))
            continue
        for comp in decomp.components:
            k = frozenset(comp)
            for i in comp:
                nd_k = g.nd(k)
                nd_i = g.nd([i])
                if origin == "B1":
                    _emit(
                        stmts, dropped,
                        {i},
                        nd_k - k - g.fa(k) - g.mo([i]),
                        g.fa(k) | g.mo([i]),
                        origin,
                    )
                elif origin == "B2":
                    _emit(
                        stmts, dropped,
                        {i},
                        nd_k - k - g.fa([i]) - g.mo(k),
                        (k - {i}) | g.fa([i]) | g.mo(k),
                        origin,
                    )
                elif origin == "B3":
                    for j in sorted(k - {i} - g.ne([i]), key=g.index):
                        if g.index(j) < g.index(i):
                            continue  # emit each unordered pair once
                        _emit(
                            stmts, dropped,
                            {i}, {j},
                            (k - {i, j}) | g.pa(k),
                            origin,
                        )
                elif origin == "P1":
                    eligible = nd_i - k - g.fa(k) - g.mo([i])
                    for j in sorted(eligible, key=g.index):
                        if j in g.ad([i]) or j == i:
                            continue
                        _emit(stmts, dropped, {i}, {j}, nd_i - k - {j}, origin)
                elif origin == "P2":
                    eligible = nd_i - {i} - g.fa([i]) - g.mo(k)
                    for j in sorted(eligible, key=g.index):
                        if j in g.ad([i]) or j == i:
                            continue
                        _emit(stmts, dropped, {i}, {j}, nd_i - {i, j}, origin)
                elif origin == "L1":
                    _emit(
                        stmts, dropped,
                        {i},
                        nd_i - k - g.fa(k) - g.mo([i]),
                        g.fa(k) | g.mo([i]),
                        origin,
                    )
                elif origin == "L2":
                    ne_i = g.ne([i])
                    _emit(
                        stmts, dropped,
                        {i},
                        nd_i - {i} - g.pa([i]) - ne_i - g.mo(ne_i),
                        g.pa([i]) | ne_i | g.mo(ne_i),
                        origin,
                    )
    return stmts, dropped[0]


def enumerate_property(g: Ucg, which: str) -> List[IndependenceStatement]:
    """Statements of one property (B1..B3, P1..P2, L1..L2, grouped names, or Global)."""
    stmts, _ = _enumerate(g, _selector_origins(which))
    return stmts


@dataclass
class PropertyReport:
    which: str
    total: int
    vacuous: int
    failures: List[Tuple[IndependenceStatement, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "property": self.which,
            "total": self.total,
            "vacuous": self.vacuous,
            "failures": [
                {"statement": s.pretty(), "max_residual": r} for s, r in self.failures
            ],
        }


def check_property(
    m_or_joint,
    which: str,
    tol: float = 1e-8,
    *,
    graph: Optional[Ucg] = None,
) -> PropertyReport:
    """Test every statement of a property against the exact joint.

    Accepts a parameterized model (the joint is assembled) or a
    JointGaussian together with ``graph``.
    """
    if isinstance(m_or_joint, UcgModel):
        g = m_or_joint.graph
        joint = assemble_joint(m_or_joint)
    else:
        if graph is None:
            raise InvalidQueryError("checking a joint directly needs the graph")
        g = graph
        joint = m_or_joint
    stmts, vacuous = _enumerate(g, _selector_origins(which))
    failures = []
    for s in stmts:
        res = partial_covariance(joint, tuple(s.x), tuple(s.y), tuple(s.z))
        worst = float(np.max(np.abs(res))) if res.size else 0.0
        if worst >= tol:
            failures.append((s, worst))
    return PropertyReport(which=which, total=len(stmts), vacuous=vacuous, failures=failures)


@dataclass
class CrossEquivalenceReport:
    trials: int
    suite_failures: List[Tuple[int, str]] = field(default_factory=list)
    perturbations_tried: int = 0
    perturbations_detected: int = 0

    @property
    def passed(self) -> bool:
        return (
            not self.suite_failures
            and self.perturbations_detected == self.perturbations_tried
        )


def _masked_slots(m: UcgModel):
    slots = []
    for bi, block in enumerate(m.blocks):
        if not block.graph_faithful:
            continue
        pat = zero_pattern(m.graph, block.nodes)
        for r, c in np.argwhere(~pat.beta_mo):
            slots.append((bi, "beta_mo", int(r), int(c)))
        for r, c in np.argwhere(~pat.omega_kfa):
            slots.append((bi, "omega_kfa", int(r), int(c)))
        for r, c in np.argwhere(~pat.omega_kk):
            if r < c:
                slots.append((bi, "omega_kk", int(r), int(c)))
    return slots


def perturb_masked_entry(m: UcgModel, slot, value: float = 0.4) -> UcgModel:
    """Copy of the model with one structurally-zero entry set to ``value``."""
    bi, name, r, c = slot
    blocks = list(m.blocks)
    b = blocks[bi]
    mats = {
        "beta_mo": b.beta_mo.copy(),
        "omega_kk": b.omega_kk.copy(),
        "omega_kfa": b.omega_kfa.copy(),
    }
    mats[name][r, c] = value
    if name == "omega_kk":
        mats[name][c, r] = value
        if np.linalg.eigvalsh(mats[name])[0] <= 0:
            # keep the perturbed matrix positive definite
            mats[name][r, c] = mats[name][c, r] = value / 8.0
    blocks[bi] = Block(
        b.nodes, b.mothers, b.fathers,
        mats["beta_mo"], mats["omega_kk"], mats["omega_kfa"],
        graph_faithful=False,
    )
    return UcgModel(m.graph, blocks)


def cross_equivalence(
    g: Ucg,
    trials: int,
    seed: int,
    tol: float = 1e-8,
    *,
    detect_tol: float = 1e-6,
) -> CrossEquivalenceReport:
    """Equivalence of the four suites over random parameterizations.

    For each trial all four suites must pass on a fresh random model; a
    random masked entry is then perturbed and at least one suite must
    pick the violation up (detection threshold ``detect_tol``).
    """
    report = CrossEquivalenceReport(trials=trials)
    rng = np.random.default_rng(seed)
    for t in range(trials):
        m = random_params(g, seed=int(rng.integers(2**63)), pd_margin=0.05)
        for group in ("global", "block", "pairwise", "local"):
            rep = check_property(m, group, tol)
            if not rep.passed:
                report.suite_failures.append((t, group))
        slots = _masked_slots(m)
        if not slots:
            continue
        slot = slots[int(rng.integers(len(slots)))]
        perturbed = perturb_masked_entry(m, slot)
        report.perturbations_tried += 1
        for group in ("block", "pairwise", "local", "global"):
            rep = check_property(perturbed, group, detect_tol)
            if not rep.passed:
                report.perturbations_detected += 1
                break
    return report
