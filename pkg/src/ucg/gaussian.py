"""Zero-mean multivariate Gaussian algebra over named variables.

Covers conditioning, exact conditional-independence checks, seeded
sampling, and the two path-sum decompositions for undirected models: the
precision-based expansion of covariance entries and its reformulation in
terms of regression coefficients and variance inflation factors.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    GraphTooLargeError,
    InvalidQueryError,
    MarkovViolationError,
    SingularMatrixError,
)
from .graphs import EdgeKind, NodeId, Ucg

SYMMETRY_TOL = 1e-12

# When true, condition() re-derives its results through the precision
# matrix and checks both forms agree to 1e-10.
DUAL_CHECK = False


@dataclass(frozen=True)
class Dataset:
    """Real-valued matrix; rows indexed by variables, columns by instances."""

    variables: Tuple[NodeId, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != len(self.variables):
            raise InvalidQueryError(
                f"need one row per variable: {len(self.variables)} variables, "
                f"value shape {values.shape}"
            )
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def rows(self, variables: Iterable[NodeId]) -> np.ndarray:
        idx = [self.variables.index(v) for v in variables]
        return self.values[idx, :]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for name, row in zip(self.variables, self.values):
            writer.writerow([name] + [repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Dataset":
        names, rows = [], []
        for rec in csv.reader(io.StringIO(text)):
            if not rec:
                continue
            names.append(rec[0])
            rows.append([float(v) for v in rec[1:]])
        if not names:
            raise InvalidQueryError("empty dataset file")
        return cls(tuple(names), np.array(rows, dtype=float))


class JointGaussian:
    """Zero-mean Gaussian given by a covariance matrix over named variables."""

    __slots__ = ("variables", "sigma")

    def __init__(self, variables: Sequence[NodeId], sigma: np.ndarray):
        variables = tuple(variables)
        sigma = np.asarray(sigma, dtype=float)
        if sigma.shape != (len(variables), len(variables)):
            raise InvalidQueryError(
                f"covariance shape {sigma.shape} does not match "
                f"{len(variables)} variables"
            )
        asym = float(np.max(np.abs(sigma - sigma.T))) if sigma.size else 0.0
        if asym > SYMMETRY_TOL:
            raise SingularMatrixError(f"covariance asymmetric by {asym:.2e}")
        sigma = (sigma + sigma.T) / 2.0
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            lo = float(np.linalg.eigvalsh(sigma)[0]) if sigma.size else 0.0
            raise SingularMatrixError(
                f"covariance not positive definite (smallest eigenvalue {lo:.3e})"
            ) from None
        self.variables = variables
        self.sigma = sigma
        self.sigma.setflags(write=False)

    def index(self, variables: Iterable[NodeId]) -> np.ndarray:
        pos = {v: i for i, v in enumerate(self.variables)}
        try:
            return np.array([pos[v] for v in variables], dtype=int)
        except KeyError as exc:
            raise InvalidQueryError(f"unknown variable {exc}") from None

    def sub(self, rows: Sequence[NodeId], cols: Sequence[NodeId]) -> np.ndarray:
        r, c = self.index(rows), self.index(cols)
        return self.sigma[np.ix_(r, c)] if len(r) and len(c) else np.zeros((len(r), len(c)))

    def marginal(self, variables: Sequence[NodeId]) -> "JointGaussian":
        keep = tuple(variables)
        return JointGaussian(keep, self.sub(keep, keep))

    def __repr__(self) -> str:
        return f"JointGaussian({list(self.variables)}, sigma={self.sigma!r})"


@dataclass(frozen=True)
class ConditionalGaussian:
    """targets | givens ~ N(beta @ givens, lam)."""

    targets: Tuple[NodeId, ...]
    givens: Tuple[NodeId, ...]
    beta: np.ndarray
    lam: np.ndarray


def _solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        c = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise SingularMatrixError(
            "conditioning block is singular or not positive definite"
        ) from None
    y = np.linalg.solve(c, b)
    return np.linalg.solve(c.T, y)


def condition(
    jg: JointGaussian,
    k: Sequence[NodeId],
    pa: Sequence[NodeId] = (),
    *,
    dual_check: Optional[bool] = None,
) -> ConditionalGaussian:
    """Conditional of ``k`` given ``pa``: beta and residual covariance.

    beta = S_k,pa S_pa,pa^-1 and lam is the Schur complement.  With
    ``dual_check`` the same quantities are recomputed from the precision
    matrix of (k, pa) as -O_kk^-1 O_k,pa and O_kk^-1 and both routes must
    agree to 1e-10.
    """
    k, pa = tuple(k), tuple(pa)
    if set(k) & set(pa):
        raise InvalidQueryError(f"targets and givens overlap: {sorted(set(k) & set(pa))}")
    s_kk = jg.sub(k, k)
    if not pa:
        beta = np.zeros((len(k), 0))
        lam = s_kk
    else:
        s_pp = jg.sub(pa, pa)
        s_kp = jg.sub(k, pa)
        beta = _solve_spd(s_pp, s_kp.T).T
        lam = s_kk - beta @ s_kp.T
        lam = (lam + lam.T) / 2.0

    if dual_check if dual_check is not None else DUAL_CHECK:
        both = k + pa
        omega = np.linalg.inv(jg.sub(both, both))
        o_kk = omega[: len(k), : len(k)]
        lam2 = np.linalg.inv(o_kk)
        if pa:
            beta2 = -lam2 @ omega[: len(k), len(k):]
            if np.max(np.abs(beta2 - beta)) > 1e-10:
                raise SingularMatrixError("beta mismatch between covariance and precision forms")
        if np.max(np.abs(lam2 - lam)) > 1e-10:
            raise SingularMatrixError("lambda mismatch between covariance and precision forms")
    return ConditionalGaussian(targets=k, givens=pa, beta=beta, lam=lam)


def partial_covariance(
    jg: JointGaussian,
    x: Sequence[NodeId],
    y: Sequence[NodeId],
    z: Sequence[NodeId] = (),
) -> np.ndarray:
    """S_x,y - S_x,z S_z,z^-1 S_z,y (plain covariance block for empty z)."""
    x, y, z = tuple(x), tuple(y), tuple(z)
    s_xy = jg.sub(x, y)
    if not z:
        return s_xy
    s_zz = jg.sub(z, z)
    s_zy = jg.sub(z, y)
    s_xz = jg.sub(x, z)
    return s_xy - s_xz @ _solve_spd(s_zz, s_zy)


def is_ci(
    jg: JointGaussian,
    x: Iterable[NodeId],
    y: Iterable[NodeId],
    z: Iterable[NodeId] = (),
    tol: float = 1e-8,
) -> bool:
    """Exact-parameter conditional independence: partial covariance below tol."""
    xs, ys, zs = tuple(x), tuple(y), tuple(z)
    if set(xs) & set(ys) or set(xs) & set(zs) or set(ys) & set(zs):
        raise InvalidQueryError("x, y, z must be pairwise disjoint")
    if not xs or not ys:
        raise InvalidQueryError("x and y must be non-empty")
    res = partial_covariance(jg, xs, ys, zs)
    return float(np.max(np.abs(res))) < tol if res.size else True


def sample(
    dist,
    n: int,
    seed: int,
    given: Optional[Dataset] = None,
) -> Dataset:
    """Draw n i.i.d. columns; reproducible for a fixed seed.

    ``dist`` is a JointGaussian, or a ConditionalGaussian together with a
    ``given`` dataset holding one column per requested draw.
    """
    if n < 1:
        raise InvalidQueryError(f"need n >= 1 draws, got {n}")
    rng = np.random.default_rng(seed)
    if isinstance(dist, JointGaussian):
        chol = np.linalg.cholesky(dist.sigma)
        eps = rng.standard_normal((len(dist.variables), n))
        return Dataset(dist.variables, chol @ eps)
    if isinstance(dist, ConditionalGaussian):
        if given is None:
            raise InvalidQueryError("sampling a conditional needs parent data")
        if given.n != n:
            raise InvalidQueryError(f"parent data has {given.n} columns, need {n}")
        parents = given.rows(dist.givens)
        chol = np.linalg.cholesky(dist.lam)
        eps = rng.standard_normal((len(dist.targets), n))
        return Dataset(dist.targets, dist.beta @ parents + chol @ eps)
    raise InvalidQueryError(f"cannot sample from {type(dist).__name__}")


# -- path-sum decompositions ----------------------------------------------


def _undirected_paths(g_k: Ucg, i: NodeId, l: NodeId) -> List[List[NodeId]]:
    """Simple paths from i to l along undirected edges, in node-list order."""
    paths = []

    def walk(path, seen):
        n = path[-1]
        if n == l:
            paths.append(list(path))
            return
        for m in sorted(g_k.neighbors_of(n), key=g_k.index):
            if m not in seen:
                path.append(m)
                seen.add(m)
                walk(path, seen)
                seen.remove(m)
                path.pop()

    walk([i], {i})
    return paths


def _check_undirected(g_k: Ucg, max_nodes: int) -> None:
    if any(kind is not EdgeKind.UNDIRECTED for _, _, kind in g_k.edges):
        raise InvalidQueryError("path sums are defined over undirected graphs only")
    if len(g_k.nodes) > max_nodes:
        raise GraphTooLargeError(
            f"path enumeration limited to {max_nodes} nodes, got {len(g_k.nodes)}"
        )


def precision_path_sum(
    omega_kk: np.ndarray,
    g_k: Ucg,
    i: NodeId,
    l: NodeId,
    *,
    max_nodes: int = 8,
) -> float:
    """Covariance entry (omega_kk^-1)_{i,l} as a sum of weights over paths.

    Each simple path rho between i and l contributes
    (-1)^(|rho|+1) * det(omega with rho removed) / det(omega) * prod of
    the traversed off-diagonal entries.  The zero-length path (i == l)
    contributes the principal-minor ratio, with the determinant of an
    empty matrix taken to be 1.
    """
    _check_undirected(g_k, max_nodes)
    omega = np.asarray(omega_kk, dtype=float)
    names = list(g_k.nodes)
    if omega.shape != (len(names), len(names)):
        raise InvalidQueryError("omega shape does not match the graph nodes")
    pos = {n: k for k, n in enumerate(names)}
    for a in names:
        for b in names:
            if a != b and b not in g_k.neighbors_of(a):
                if omega[pos[a], pos[b]] != 0.0:
                    raise InvalidQueryError(
                        f"omega has a non-zero entry at non-edge ({a}, {b})"
                    )
    det = float(np.linalg.det(omega))
    total = 0.0
    for rho in _undirected_paths(g_k, i, l):
        keep = [pos[n] for n in names if n not in rho]
        minor = float(np.linalg.det(omega[np.ix_(keep, keep)])) if keep else 1.0
        weight = 1.0
        for a, b in zip(rho, rho[1:]):
            weight *= omega[pos[a], pos[b]]
        total += (-1.0) ** (len(rho) + 1) * (minor / det) * weight
    return total


def _cond_moment(sig: np.ndarray, a: int, b: int, given: List[int]) -> float:
    """Conditional covariance of variables a, b given an index set."""
    if not given:
        return float(sig[a, b])
    s_gg = sig[np.ix_(given, given)]
    s_ga = sig[np.ix_(given, [a])]
    s_bg = sig[np.ix_([b], given)]
    return float(sig[a, b] - (s_bg @ _solve_spd(s_gg, s_ga))[0, 0])


def undirected_cov_decomposition(
    jg: JointGaussian,
    g_k: Ucg,
    i: NodeId,
    l: NodeId,
    *,
    max_nodes: int = 8,
    markov_tol: float = 1e-8,
) -> float:
    """Covariance entry Sigma_{i,l} rebuilt from per-path regression terms.

    Every simple path from l to i contributes the source variance times,
    per step, a full-conditional regression coefficient and an inflation
    factor: the ratio of the step variable's variance given the path
    prefix to its variance given everything else.  Requires ``jg`` to
    satisfy the global Markov property of the undirected graph (checked
    on every missing edge; violation raises MarkovViolationError).
    """
    _check_undirected(g_k, max_nodes)
    if tuple(g_k.nodes) != tuple(jg.variables):
        raise InvalidQueryError("distribution and graph must share the variable list")
    names = list(g_k.nodes)
    pos = {n: k for k, n in enumerate(names)}
    for a_i, a in enumerate(names):
        for b in names[a_i + 1:]:
            if b not in g_k.neighbors_of(a):
                rest = [n for n in names if n not in (a, b)]
                if not is_ci(jg, [a], [b], rest, tol=markov_tol):
                    raise MarkovViolationError(
                        f"distribution is not Markov to the graph: "
                        f"({a}, {b}) dependent given the rest"
                    )
    sig = jg.sigma
    everything = list(range(len(names)))
    total = 0.0
    for rho in _undirected_paths(g_k, l, i):
        idx = [pos[n] for n in rho]
        term = float(sig[idx[0], idx[0]])
        for step in range(1, len(idx)):
            cur, prev = idx[step], idx[step - 1]
            others = [k for k in everything if k not in (cur, prev)]
            beta = _cond_moment(sig, cur, prev, others) / _cond_moment(sig, prev, prev, others)
            var_prefix = _cond_moment(sig, cur, cur, idx[:step])
            var_full = _cond_moment(sig, cur, cur, [k for k in everything if k != cur])
            term *= beta * (var_prefix / var_full)
        total += term
    return total
