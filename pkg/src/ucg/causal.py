"""Interventions on unified chain graphs.

An intervention replaces the natural mechanism of each target variable.
Whether the replacement interferes with the rest of the target's chain
component decides the kind of the indicator edge added to the graph: a
solid edge for interfering mechanisms, a dashed edge otherwise.  The
three calculus rules then reduce to separation queries on the augmented
graph, and the distribution under an all-interfering intervention is
identified in closed form by conditioning each component's conditional
on the targets it contains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    InvalidQueryError,
    NonInterferingUnsupportedError,
    OverlappingTargetsError,
    SingularMatrixError,
)
from .gaussian import JointGaussian
from .graphs import EdgeKind, NodeId, Ucg, induced_subgraph
from .model import UcgModel, assemble_joint
from .separation import is_separated

INTERFERING = "interfering"
NON_INTERFERING = "non_interfering"


@dataclass(frozen=True)
class InterventionSpec:
    """Target assignments plus the mechanism kind for each target."""

    assignments: Mapping[NodeId, float]
    mechanisms: Mapping[NodeId, str]

    def __post_init__(self):
        object.__setattr__(self, "assignments", dict(self.assignments))
        object.__setattr__(self, "mechanisms", dict(self.mechanisms))
        for target in self.assignments:
            kind = self.mechanisms.get(target)
            if kind not in (INTERFERING, NON_INTERFERING):
                raise InvalidQueryError(
                    f"target {target!r} needs a mechanism, one of "
                    f"'{INTERFERING}' or '{NON_INTERFERING}'"
                )
        extra = set(self.mechanisms) - set(self.assignments)
        if extra:
            raise InvalidQueryError(f"mechanisms given for non-targets {sorted(extra)}")

    @property
    def targets(self) -> FrozenSet[NodeId]:
        return frozenset(self.assignments)

    def all_interfering(self) -> bool:
        return all(k == INTERFERING for k in self.mechanisms.values())


def indicator_name(node: NodeId) -> NodeId:
    return f"F_{node}"


@dataclass(frozen=True)
class AugmentedUcg:
    """A base graph plus one indicator parent per intervened variable."""

    graph: Ucg
    base: Ucg
    indicator_of: Mapping[NodeId, NodeId]

    def indicators(self, targets: Iterable[NodeId]) -> List[NodeId]:
        return [self.indicator_of[t] for t in targets]


def augment(
    g: Ucg,
    spec: InterventionSpec,
    already_done: Iterable[NodeId] = (),
) -> AugmentedUcg:
    """Indicator-augmented graph over the nodes not already intervened on.

    ``already_done`` names variables whose mechanisms were replaced in an
    earlier step; they are deleted before augmenting.  Father/mother
    disjointness is not re-checked: indicator nodes are fresh parents by
    construction and deletion cannot create an overlap.
    """
    done = frozenset(already_done)
    for n in done:
        g.index(n)
    overlap = spec.targets & done
    if overlap:
        raise OverlappingTargetsError(
            f"targets {sorted(overlap)} are already intervened on"
        )
    base = induced_subgraph(g, frozenset(g.nodes) - done)
    missing = spec.targets - frozenset(base.nodes)
    if missing:
        raise InvalidQueryError(f"targets {sorted(missing)} not in the remaining graph")
    nodes = list(base.nodes)
    edges = list(base.edges)
    indicator_of = {}
    for target in sorted(spec.targets, key=base.index):
        name = indicator_name(target)
        if name in base:
            raise InvalidQueryError(f"node name {name!r} collides with an indicator")
        nodes.append(name)
        kind = (
            EdgeKind.SOLID_DIRECTED
            if spec.mechanisms[target] == INTERFERING
            else EdgeKind.DASHED_DIRECTED
        )
        edges.append((name, target, kind))
        indicator_of[target] = name
    return AugmentedUcg(
        graph=Ucg(nodes, edges, check_fa_mo=False),
        base=base,
        indicator_of=indicator_of,
    )


def rule_applies(
    g: Ucg,
    rule: int,
    x: Iterable[NodeId],
    y: Iterable[NodeId],
    z: Iterable[NodeId],
    w: Iterable[NodeId] = (),
    spec: Optional[InterventionSpec] = None,
) -> bool:
    """Evaluate one calculus rule as a separation statement.

    Rule 1 (insert/delete an observation):   Y _|_ Z | W
    Rule 2 (exchange intervention/observation): Y _|_ F_Z | W u Z
    Rule 3 (insert/delete an intervention):  Y _|_ F_Z | W
    all in the graph left after removing X, with indicator parents on Z
    for rules 2 and 3 (their kinds come from ``spec``).
    """
    xs, ys, zs, ws = frozenset(x), frozenset(y), frozenset(z), frozenset(w)
    if rule not in (1, 2, 3):
        raise InvalidQueryError(f"rule must be 1, 2 or 3, got {rule}")
    sets = [xs, ys, zs, ws]
    for i, a in enumerate(sets):
        for b in sets[i + 1:]:
            if a & b:
                raise InvalidQueryError(f"rule sets overlap on {sorted(a & b)}")
    if not ys or not zs:
        raise InvalidQueryError("rules need non-empty Y and Z")
    if rule == 1:
        base = induced_subgraph(g, frozenset(g.nodes) - xs)
        return is_separated(base, ys, zs, ws)
    if spec is None or not zs <= spec.targets:
        raise InvalidQueryError("rules 2 and 3 need mechanisms for every node of Z")
    sub_spec = InterventionSpec(
        assignments={t: spec.assignments[t] for t in zs},
        mechanisms={t: spec.mechanisms[t] for t in zs},
    )
    aug = augment(g, sub_spec, already_done=xs)
    f_z = aug.indicators(sorted(zs))
    given = (ws | zs) if rule == 2 else ws
    return is_separated(aug.graph, ys, f_z, given)


@dataclass(frozen=True)
class InterventionalGaussian:
    """Gaussian over the untouched variables, with an explicit mean."""

    variables: Tuple[NodeId, ...]
    mean: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        sigma = np.asarray(self.sigma, dtype=float)
        if mean.shape[0] != len(self.variables) or sigma.shape != (len(self.variables),) * 2:
            raise InvalidQueryError("mean/covariance shapes do not match the variables")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sigma", sigma)

    def index(self, variables: Iterable[NodeId]) -> List[int]:
        pos = {v: i for i, v in enumerate(self.variables)}
        return [pos[v] for v in variables]

    def joint(self) -> JointGaussian:
        return JointGaussian(self.variables, self.sigma)

    def condition_on(self, given: Mapping[NodeId, float]) -> "InterventionalGaussian":
        """Gaussian conditioning on observed values of some variables."""
        g_vars = tuple(given)
        keep = tuple(v for v in self.variables if v not in given)
        gi, ki = self.index(g_vars), self.index(keep)
        s_gg = self.sigma[np.ix_(gi, gi)]
        s_kg = self.sigma[np.ix_(ki, gi)]
        s_kk = self.sigma[np.ix_(ki, ki)]
        try:
            gain = np.linalg.solve(s_gg, s_kg.T).T
        except np.linalg.LinAlgError:
            raise SingularMatrixError("conditioning block is singular") from None
        delta = np.array([given[v] for v in g_vars]) - self.mean[gi]
        mean = self.mean[ki] + gain @ delta
        sigma = s_kk - gain @ s_kg.T
        return InterventionalGaussian(keep, mean, (sigma + sigma.T) / 2.0)


def identified_effect(m: UcgModel, spec: InterventionSpec) -> InterventionalGaussian:
    """Distribution of the remaining variables under an interfering do().

    Chains, per model block in topological order, the conditional of the
    untouched members given the block's parents and the intervened
    members.  Only all-interfering interventions admit this closed form;
    a non-interfering mechanism inside a non-singleton component has no
    identified expression here and is refused.
    """
    if not spec.all_interfering():
        raise NonInterferingUnsupportedError(
            "closed-form effects are only identified for interfering mechanisms"
        )
    targets = spec.targets
    for t in targets:
        m.graph.index(t)
    if not targets:
        jg = assemble_joint(m)
        return InterventionalGaussian(
            jg.variables, np.zeros(len(jg.variables)), jg.sigma
        )
    kept_names: List[NodeId] = []
    mean = np.zeros(0)
    sigma = np.zeros((0, 0))
    for block in m.blocks:
        keep = [n for n in block.nodes if n not in targets]
        if not keep:
            continue
        lam = block.lam()
        beta = block.beta_full()
        ki = [block.nodes.index(n) for n in keep]
        ti = [block.nodes.index(n) for n in block.nodes if n in targets]

        # Condition the block conditional on its intervened members.
        lam_kk = lam[np.ix_(ki, ki)]
        if ti:
            lam_kt = lam[np.ix_(ki, ti)]
            lam_tt = lam[np.ix_(ti, ti)]
            gain = np.linalg.solve(lam_tt, lam_kt.T).T
            lam_kk = lam_kk - gain @ lam_kt.T
            t_vals = np.array([spec.assignments[block.nodes[i]] for i in ti])
        else:
            gain = np.zeros((len(ki), 0))
            t_vals = np.zeros(0)

        coef_pa = beta[ki, :] - (gain @ beta[ti, :] if ti else 0.0)
        coef_prev = np.zeros((len(ki), len(kept_names)))
        shift = gain @ t_vals if ti else np.zeros(len(ki))
        for c, parent in enumerate(block.parents):
            if parent in targets:
                shift = shift + coef_pa[:, c] * spec.assignments[parent]
            else:
                coef_prev[:, kept_names.index(parent)] = coef_pa[:, c]

        cross = coef_prev @ sigma
        cov = lam_kk + cross @ coef_prev.T
        new_mean = shift + coef_prev @ mean
        sigma = (
            np.block([[sigma, cross.T], [cross, cov]]) if kept_names else cov
        )
        mean = np.concatenate([mean, new_mean])
        kept_names.extend(keep)
    order = [kept_names.index(n) for n in m.graph.nodes if n not in targets]
    names = tuple(n for n in m.graph.nodes if n not in targets)
    sigma = sigma[np.ix_(order, order)]
    return InterventionalGaussian(names, mean[order], (sigma + sigma.T) / 2.0)


@dataclass
class CorollaryReport:
    """Outcome of the three per-component separation checks behind the
    truncated-factorization identification of interfering interventions."""

    checks: List[Tuple[Tuple[NodeId, ...], int, bool]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, _, ok in self.checks)


def verify_corollary_steps(g: Ucg, x: Iterable[NodeId]) -> CorollaryReport:
    """Check the separation statements used to identify do(X) stepwise.

    Per chain component K (with all mechanisms interfering):

    1. K\\X _|_ F_{Pa(K) n X} | Pa(K),          after removing X \\ Pa(K);
    2. K\\X _|_ F_{K n X} | Pa(K) u (K n X),    after removing X \\ Pa(K) \\ K;
    3. K\\X _|_ F_{X \\ Pa(K) \\ K} | Pa(K) u (K n X), on the full graph.
    """
    xs = frozenset(x)
    for n in xs:
        g.index(n)
    report = CorollaryReport()

    def check(comp, step, kept, f_targets, removed, given):
        if not kept or not f_targets:
            return
        spec = InterventionSpec(
            assignments={t: 0.0 for t in f_targets},
            mechanisms={t: INTERFERING for t in f_targets},
        )
        aug = augment(g, spec, already_done=removed)
        ok = is_separated(
            aug.graph, kept, aug.indicators(sorted(f_targets)), given
        )
        report.checks.append((tuple(comp), step, ok))

    from .graphs import chain_decomposition

    for comp in chain_decomposition(g).components:
        k = frozenset(comp)
        kept = k - xs
        pa = g.pa(k)
        check(comp, 1, kept, pa & xs, xs - pa, pa)
        check(comp, 2, kept, k & xs, xs - pa - k, pa | (k & xs))
        check(comp, 3, kept, xs - pa - k, frozenset(), pa | (k & xs))
    return report
