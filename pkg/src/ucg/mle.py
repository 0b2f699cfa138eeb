"""Maximum likelihood estimation for parameterized unified chain graphs.

Each chain component is fit separately.  The regression block on the
mothers starts at zero and the procedure alternates between

1. iterative proportional fitting of the joint precision of the
   mother-residualized children and the fathers, over an auxiliary
   undirected graph whose father part is complete;
2. reading the father regression block off that precision;
3. a pattern-restricted generalized least squares update of the mother
   regression block with the fitted within-component precision as the
   weight.

Both moves increase the conditional likelihood, so the per-iteration
average log-likelihood trace reported back is non-decreasing up to
round-off.  A run that hits the iteration cap is reported as
non-converged rather than failed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    GraphMismatchError,
    InvalidQueryError,
    SingularSampleCovarianceError,
    SingularSystemError,
)
from .gaussian import Dataset
from .graphs import NodeId, Ucg, chain_decomposition
from .model import Block, UcgModel, ZeroPattern, zero_pattern


@dataclass(frozen=True)
class FitConfig:
    outer_tol: float = 1e-6
    outer_max: int = 100
    ipf_tol: float = 1e-9
    ipf_max: int = 500
    # sample covariance normalization: maximum-likelihood 1/n by default
    ddof: int = 0

    def __post_init__(self):
        if self.outer_tol <= 0 or self.ipf_tol <= 0:
            raise InvalidQueryError("tolerances must be positive")
        if self.outer_max < 1 or self.ipf_max < 1:
            raise InvalidQueryError("iteration caps must be at least 1")


@dataclass
class BlockFit:
    nodes: Tuple[NodeId, ...]
    iterations: int
    converged: bool
    loglik: List[float] = field(default_factory=list)


@dataclass
class FitReport:
    iterations: int
    converged: bool
    blocks: List[BlockFit] = field(default_factory=list)

    @property
    def loglik(self) -> List[float]:
        """Summed per-sample log-likelihood trace, padded with final values."""
        if not self.blocks:
            return []
        depth = max(len(b.loglik) for b in self.blocks)
        total = np.zeros(depth)
        for b in self.blocks:
            trace = np.asarray(b.loglik)
            padded = np.concatenate([trace, np.full(depth - len(trace), trace[-1])])
            total += padded
        return total.tolist()

    @property
    def min_loglik_step(self) -> float:
        worst = np.inf
        for b in self.blocks:
            if len(b.loglik) > 1:
                worst = min(worst, float(np.min(np.diff(b.loglik))))
        return worst


# -- clique machinery -------------------------------------------------------


def _bron_kerbosch(adj: Dict[int, set]) -> List[Tuple[int, ...]]:
    """Maximal cliques with pivoting."""
    cliques = []

    def expand(r, p, x):
        if not p and not x:
            cliques.append(tuple(sorted(r)))
            return
        pivot = max(p | x, key=lambda v: len(adj[v] & p))
        for v in sorted(p - adj[pivot]):
            expand(r | {v}, p & adj[v], x & adj[v])
            p = p - {v}
            x = x | {v}

    expand(set(), set(adj), set())
    return sorted(cliques)


def _aux_graph_cliques(pattern: ZeroPattern) -> List[Tuple[int, ...]]:
    """Cliques of the undirected graph over K + Fa(K) used by the IPF step.

    Children are linked per the component's undirected edges, a child and
    a father per the solid edges, and the fathers pairwise.
    """
    nk, nf = len(pattern.nodes), len(pattern.fathers)
    size = nk + nf
    adj = {v: set() for v in range(size)}
    for r in range(nk):
        for c in range(r + 1, nk):
            if pattern.omega_kk[r, c]:
                adj[r].add(c)
                adj[c].add(r)
    for r in range(nk):
        for f in range(nf):
            if pattern.omega_kfa[r, f]:
                adj[r].add(nk + f)
                adj[nk + f].add(r)
    for a in range(nf):
        for b in range(a + 1, nf):
            adj[nk + a].add(nk + b)
            adj[nk + b].add(nk + a)
    return _bron_kerbosch(adj)


def _sample_cov(values: np.ndarray, ddof: int) -> np.ndarray:
    n = values.shape[1]
    if n - ddof <= 0:
        raise SingularSampleCovarianceError("not enough samples for the covariance")
    return values @ values.T / (n - ddof)


def ipf_step(
    residuals: Dataset,
    fathers: Optional[Dataset],
    pattern: ZeroPattern,
    *,
    tol: float = 1e-9,
    max_sweeps: int = 500,
    warm_start: Optional[np.ndarray] = None,
    cliques: Optional[List[Tuple[int, ...]]] = None,
    ddof: int = 0,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fit the joint precision over (children, fathers) under the zero pattern.

    Classic Gaussian iterative proportional fitting: sweep the maximal
    cliques of the auxiliary graph, each time matching the fitted
    covariance to the sample covariance on the clique margin.  Returns
    (omega_kk, omega_kfa, full joint precision); the full matrix doubles
    as the warm start for the next outer iteration.
    """
    stacked = (
        np.vstack([residuals.values, fathers.values])
        if fathers is not None and len(fathers.variables)
        else residuals.values
    )
    s = _sample_cov(stacked, ddof)
    size = s.shape[0]
    try:
        np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        raise SingularSampleCovarianceError(
            "sample covariance of children and fathers is singular"
        ) from None
    if cliques is None:
        cliques = _aux_graph_cliques(pattern)
    if warm_start is not None:
        omega = warm_start.copy()
    else:
        omega = np.diag(1.0 / np.diag(s))
    for _ in range(max_sweeps):
        delta = 0.0
        for clique in cliques:
            idx = np.array(clique)
            sigma = np.linalg.inv(omega)
            adjust = np.linalg.inv(s[np.ix_(idx, idx)]) - np.linalg.inv(
                sigma[np.ix_(idx, idx)]
            )
            omega[np.ix_(idx, idx)] += adjust
            delta = max(delta, float(np.max(np.abs(adjust))))
        if delta < tol:
            break
    omega = (omega + omega.T) / 2.0
    nk = len(pattern.nodes)
    return omega[:nk, :nk], omega[:nk, nk:], omega


def gls_step(
    targets: Dataset,
    mothers: Optional[Dataset],
    weight: np.ndarray,
    pattern: ZeroPattern,
) -> np.ndarray:
    """Pattern-restricted generalized least squares for the mother block.

    Minimizes tr(W (Y - B M)(Y - B M)^T) over B with the masked entries
    pinned to zero; stationarity gives one linear equation per free
    coordinate: sum_kl W[i,k] (M M^T)[l,j] B[k,l] = (W Y M^T)[i,j].
    """
    free = np.argwhere(pattern.beta_mo)
    beta = np.zeros(pattern.beta_mo.shape)
    if free.size == 0:
        return beta
    y = targets.values
    m_vals = mothers.values
    mmt = m_vals @ m_vals.T
    wymt = weight @ y @ m_vals.T
    n_free = len(free)
    a = np.empty((n_free, n_free))
    b = np.empty(n_free)
    for out, (i, j) in enumerate(free):
        b[out] = wymt[i, j]
        for inn, (k, l) in enumerate(free):
            a[out, inn] = weight[i, k] * mmt[l, j]
    try:
        sol = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        raise SingularSystemError(
            "generalized least squares system is singular"
        ) from None
    for out, (i, j) in enumerate(free):
        beta[i, j] = sol[out]
    return beta


def _avg_loglik(omega_kk: np.ndarray, resid: np.ndarray) -> float:
    """Per-sample Gaussian conditional log-likelihood, constants dropped."""
    n = resid.shape[1]
    sign, logdet = np.linalg.slogdet(omega_kk)
    if sign <= 0:
        return -np.inf
    quad = float(np.sum((omega_kk @ resid) * resid)) / n
    return 0.5 * (logdet - quad)


def _fit_block(
    pattern: ZeroPattern,
    data: Dataset,
    cfg: FitConfig,
) -> Tuple[Block, BlockFit]:
    d_k = Dataset(pattern.nodes, data.rows(pattern.nodes))
    d_mo = Dataset(pattern.mothers, data.rows(pattern.mothers)) if pattern.mothers else None
    d_fa = Dataset(pattern.fathers, data.rows(pattern.fathers)) if pattern.fathers else None
    cliques = _aux_graph_cliques(pattern)

    beta_mo = np.zeros(pattern.beta_mo.shape)
    omega_kk = np.eye(len(pattern.nodes))
    omega_kfa = np.zeros(pattern.omega_kfa.shape)
    warm = None
    trace: List[float] = []
    converged = False
    iterations = 0
    for it in range(1, cfg.outer_max + 1):
        iterations = it
        prev = (beta_mo.copy(), omega_kk.copy(), omega_kfa.copy())
        resid_mo = d_k.values - (beta_mo @ d_mo.values if d_mo is not None else 0.0)
        omega_kk, omega_kfa, warm = ipf_step(
            Dataset(pattern.nodes, resid_mo),
            d_fa,
            pattern,
            tol=cfg.ipf_tol,
            max_sweeps=cfg.ipf_max,
            warm_start=warm,
            cliques=cliques,
            ddof=cfg.ddof,
        )
        beta_fa = (
            -np.linalg.solve(omega_kk, omega_kfa)
            if pattern.fathers
            else np.zeros(pattern.omega_kfa.shape)
        )
        if d_mo is not None and pattern.beta_mo.any():
            resid_fa = d_k.values - (beta_fa @ d_fa.values if d_fa is not None else 0.0)
            beta_mo = gls_step(
                Dataset(pattern.nodes, resid_fa), d_mo, omega_kk, pattern
            )
        full_resid = d_k.values.copy()
        if d_mo is not None:
            full_resid -= beta_mo @ d_mo.values
        if d_fa is not None:
            full_resid -= beta_fa @ d_fa.values
        trace.append(_avg_loglik(omega_kk, full_resid))
        change = max(
            float(np.max(np.abs(beta_mo - prev[0]), initial=0.0)),
            float(np.max(np.abs(omega_kk - prev[1]), initial=0.0)),
            float(np.max(np.abs(omega_kfa - prev[2]), initial=0.0)),
        )
        if change < cfg.outer_tol:
            converged = True
            break
    block = Block(
        pattern.nodes, pattern.mothers, pattern.fathers, beta_mo, omega_kk, omega_kfa
    )
    return block, BlockFit(pattern.nodes, iterations, converged, trace)


def fit(g: Ucg, data: Dataset, cfg: Optional[FitConfig] = None) -> Tuple[UcgModel, FitReport]:
    """Maximum likelihood parameters of every chain component from data."""
    cfg = cfg or FitConfig()
    missing = [n for n in g.nodes if n not in data.variables]
    if missing:
        raise InvalidQueryError(f"data lacks rows for {missing}")
    if data.n <= len(g.nodes):
        raise SingularSampleCovarianceError(
            f"need more samples than variables: n={data.n}, |V|={len(g.nodes)}"
        )
    blocks = []
    fits = []
    for comp in chain_decomposition(g).components:
        pattern = zero_pattern(g, comp)
        block, block_fit = _fit_block(pattern, data, cfg)
        blocks.append(block)
        fits.append(block_fit)
    report = FitReport(
        iterations=max(f.iterations for f in fits),
        converged=all(f.converged for f in fits),
        blocks=fits,
    )
    return UcgModel(g, blocks), report


# -- accuracy metrics -------------------------------------------------------


@dataclass
class BlockMetrics:
    nodes: Tuple[NodeId, ...]
    relative: Dict[str, List[float]] = field(default_factory=dict)
    absolute_zeroed: Dict[str, List[float]] = field(default_factory=dict)


@dataclass
class FitMetrics:
    blocks: List[BlockMetrics]
    residual_truth: float
    residual_est: float
    weighted_residual_truth: float
    weighted_residual_est: float

    @property
    def residual_difference(self) -> float:
        return self.residual_est - self.residual_truth

    @property
    def weighted_residual_difference(self) -> float:
        return self.weighted_residual_est - self.weighted_residual_truth

    def pooled_relative(self, name: str) -> List[float]:
        out: List[float] = []
        for b in self.blocks:
            out.extend(b.relative.get(name, []))
        return out

    def pooled_absolute(self, name: str) -> List[float]:
        out: List[float] = []
        for b in self.blocks:
            out.extend(b.absolute_zeroed.get(name, []))
        return out


def _block_residuals(blocks: Sequence[Block], data: Dataset, weighted: bool) -> float:
    total = 0.0
    for block in blocks:
        resid = data.rows(block.nodes).copy()
        if block.parents:
            resid -= block.beta_full() @ data.rows(block.parents)
        if weighted:
            total += float(np.sum((block.omega_kk @ resid) * resid))
        else:
            total += float(np.sum(resid * resid))
    return total


def metrics(
    truth: UcgModel,
    est: UcgModel,
    data: Dataset,
    *,
    blocks: Optional[Iterable[Tuple[NodeId, ...]]] = None,
) -> FitMetrics:
    """Per-parameter relative differences plus residual comparisons.

    Free parameters with a non-zero true value contribute
    abs((true - est) / true); free parameters whose true value is zero
    contribute abs(est) instead (their relative difference is undefined).
    The father regression block is derived, so it is compared entry-wise
    over its full rectangle.  ``blocks`` restricts the comparison (and the
    residuals) to the named node tuples; by default the two models must
    share their whole block structure.
    """
    if truth.graph != est.graph:
        raise GraphMismatchError("metrics need both models on the same graph")
    if blocks is None:
        if len(truth.blocks) != len(est.blocks) or any(
            t.nodes != e.nodes for t, e in zip(truth.blocks, est.blocks)
        ):
            raise GraphMismatchError("model blocks are not aligned")
        pairs_iter = list(zip(truth.blocks, est.blocks))
    else:
        t_by_nodes = {b.nodes: b for b in truth.blocks}
        e_by_nodes = {b.nodes: b for b in est.blocks}
        pairs_iter = []
        for nodes in blocks:
            nodes = tuple(nodes)
            if nodes not in t_by_nodes or nodes not in e_by_nodes:
                raise GraphMismatchError(f"both models need a block over {list(nodes)}")
            pairs_iter.append((t_by_nodes[nodes], e_by_nodes[nodes]))
    blocks_out = []
    for t_block, e_block in pairs_iter:
        bm = BlockMetrics(nodes=t_block.nodes)
        if t_block.graph_faithful:
            pat = zero_pattern(truth.graph, t_block.nodes)
            masks = {
                "beta_mo": pat.beta_mo,
                "omega_kk": np.triu(pat.omega_kk),
                "omega_kfa": pat.omega_kfa,
            }
        else:
            masks = {
                "beta_mo": np.ones(t_block.beta_mo.shape, dtype=bool),
                "omega_kk": np.triu(np.ones(t_block.omega_kk.shape, dtype=bool)),
                "omega_kfa": np.ones(t_block.omega_kfa.shape, dtype=bool),
            }
        pairs = {
            "beta_mo": (t_block.beta_mo, e_block.beta_mo),
            "omega_kk": (t_block.omega_kk, e_block.omega_kk),
            "omega_kfa": (t_block.omega_kfa, e_block.omega_kfa),
            "beta_fa": (t_block.beta_fa(), e_block.beta_fa()),
        }
        for name, (t_mat, e_mat) in pairs.items():
            mask = (
                np.ones(t_mat.shape, dtype=bool) if name == "beta_fa" else masks[name]
            )
            rel, zeroed = [], []
            for r, c in np.argwhere(mask):
                t_val, e_val = t_mat[r, c], e_mat[r, c]
                if t_val == 0.0:
                    zeroed.append(abs(e_val))
                else:
                    rel.append(abs((t_val - e_val) / t_val))
            bm.relative[name] = rel
            bm.absolute_zeroed[name] = zeroed
        blocks_out.append(bm)
    t_blocks = [t for t, _ in pairs_iter]
    e_blocks = [e for _, e in pairs_iter]
    return FitMetrics(
        blocks=blocks_out,
        residual_truth=_block_residuals(t_blocks, data, weighted=False),
        residual_est=_block_residuals(e_blocks, data, weighted=False),
        weighted_residual_truth=_block_residuals(t_blocks, data, weighted=True),
        weighted_residual_est=_block_residuals(e_blocks, data, weighted=True),
    )
