"""Replicated estimation experiment with quantile summaries.

Each replicate draws a random graph (mothers, fathers, one child
component), parameterizes it with a dense parent layer, simulates data at
several sample sizes, fits the child component and records accuracy
criteria.  Aggregates are reported as min/Q1/median/mean/Q3/max rows,
with quantiles computed by linear interpolation between order statistics
(type 7).  Replicates are independent and may run in a process pool;
per-replicate seeds are spawned from the master seed, so results do not
depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .errors import InvalidQueryError
from .graphs import EdgeKind
from .mle import FitConfig, fit, metrics
from .model import random_experiment_model, random_ucg, simulate

EDGE_CRITERIA = (
    ("edges_solid", EdgeKind.SOLID_DIRECTED),
    ("edges_dashed", EdgeKind.DASHED_DIRECTED),
    ("edges_undirected", EdgeKind.UNDIRECTED),
)
REL_CRITERIA = ("omega_kk_rel", "omega_kfa_rel", "beta_fa_rel", "beta_mo_rel")
ZERO_CRITERIA = ("omega_kk_zero_abs", "omega_kfa_zero_abs", "beta_mo_zero_abs")
_REL_KEYS = {
    "omega_kk_rel": "omega_kk",
    "omega_kfa_rel": "omega_kfa",
    "beta_fa_rel": "beta_fa",
    "beta_mo_rel": "beta_mo",
}
_ZERO_KEYS = {
    "omega_kk_zero_abs": "omega_kk",
    "omega_kfa_zero_abs": "omega_kfa",
    "beta_mo_zero_abs": "beta_mo",
}


@dataclass(frozen=True)
class ExperimentConfig:
    replicates: int = 100
    n_mo: int = 5
    n_fa: int = 5
    n_k: int = 10
    p_edge: float = 0.2
    sample_sizes: Tuple[int, ...] = (500, 2500, 5000)
    zero_fraction: float = 0.0
    master_seed: int = 0
    workers: int = 1
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if self.replicates < 1 or min(self.n_mo, self.n_fa, self.n_k) < 1:
            raise InvalidQueryError("replicates and node counts must be positive")
        if not 0.0 < self.p_edge < 1.0:
            raise InvalidQueryError("p_edge must be in (0, 1)")
        if not 0.0 <= self.zero_fraction < 1.0:
            raise InvalidQueryError("zero_fraction must be in [0, 1)")
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        d = dict(d)
        if "fit" in d and not isinstance(d["fit"], FitConfig):
            d["fit"] = FitConfig(**d["fit"])
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


@dataclass(frozen=True)
class QuantileRow:
    criterion: str
    min: float
    q1: float
    median: float
    mean: float
    q3: float
    max: float


def quantile_row(criterion: str, values: Sequence[float]) -> QuantileRow:
    arr = np.asarray(sorted(values), dtype=float)
    if arr.size == 0:
        raise InvalidQueryError(f"no values to summarize for {criterion!r}")
    lo, q1, med, q3, hi = np.quantile(arr, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    return QuantileRow(
        criterion=criterion,
        min=float(lo), q1=float(q1), median=float(med),
        mean=float(arr.mean()), q3=float(q3), max=float(hi),
    )


@dataclass
class ReplicateRecord:
    index: int
    edge_counts: Dict[str, int]
    per_size: Dict[int, Dict[str, object]]
    min_loglik_step: float


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: List[ReplicateRecord]
    failures: List[Tuple[int, str]]

    def rows(self) -> List[QuantileRow]:
        out = [
            quantile_row(name, [r.edge_counts[name] for r in self.records])
            for name, _ in EDGE_CRITERIA
        ]
        for n in self.config.sample_sizes:
            out.append(
                quantile_row(
                    f"n={n}/iterations",
                    [r.per_size[n]["iterations"] for r in self.records],
                )
            )
            for crit in REL_CRITERIA:
                pooled: List[float] = []
                for r in self.records:
                    pooled.extend(r.per_size[n][crit])
                if pooled:
                    out.append(quantile_row(f"n={n}/{crit}", pooled))
            if self.config.zero_fraction:
                for crit in ZERO_CRITERIA:
                    pooled = []
                    for r in self.records:
                        pooled.extend(r.per_size[n][crit])
                    if pooled:
                        out.append(quantile_row(f"n={n}/{crit}", pooled))
            out.append(
                quantile_row(
                    f"n={n}/residual_diff",
                    [r.per_size[n]["residual_diff"] for r in self.records],
                )
            )
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["criterion", "min", "q1", "median", "mean", "q3", "max"])
        for row in self.rows():
            writer.writerow(
                [row.criterion]
                + [f"{v:.6g}" for v in (row.min, row.q1, row.median, row.mean, row.q3, row.max)]
            )
        return buf.getvalue()

    def log_entries(self) -> List[dict]:
        return [
            {
                "replicate": r.index,
                "edge_counts": r.edge_counts,
                "min_loglik_step": r.min_loglik_step,
                "per_size": {
                    str(n): {
                        "iterations": rec["iterations"],
                        "converged": rec["converged"],
                        "residual_diff": rec["residual_diff"],
                        "weighted_residual_diff": rec["weighted_residual_diff"],
                    }
                    for n, rec in r.per_size.items()
                },
            }
            for r in self.records
        ]


def run_replicate(cfg: ExperimentConfig, index: int, seed_seq: np.random.SeedSequence) -> ReplicateRecord:
    """One replicate: draw, simulate at each size, fit, score."""
    seeds = np.random.default_rng(seed_seq).integers(2**62, size=2 + len(cfg.sample_sizes))
    g = random_ucg(cfg.n_mo, cfg.n_fa, cfg.n_k, cfg.p_edge, int(seeds[0]))
    truth = random_experiment_model(g, int(seeds[1]), zero_fraction=cfg.zero_fraction)
    child = next(b for b in truth.blocks if b.parents)
    edge_counts = {
        name: sum(1 for _, _, k in g.edges if k is kind) for name, kind in EDGE_CRITERIA
    }
    per_size: Dict[int, Dict[str, object]] = {}
    min_step = np.inf
    for pos, n in enumerate(cfg.sample_sizes):
        data = simulate(truth, n, int(seeds[2 + pos]))
        est, report = fit(g, data, cfg.fit)
        fm = metrics(truth, est, data, blocks=[child.nodes])
        rec: Dict[str, object] = {
            "iterations": report.iterations if report.converged else cfg.fit.outer_max + 1,
            "converged": report.converged,
            "residual_diff": fm.residual_difference,
            "weighted_residual_diff": fm.weighted_residual_difference,
        }
        for crit, key in _REL_KEYS.items():
            rec[crit] = fm.pooled_relative(key)
        for crit, key in _ZERO_KEYS.items():
            rec[crit] = fm.pooled_absolute(key)
        per_size[n] = rec
        min_step = min(min_step, report.min_loglik_step)
    return ReplicateRecord(
        index=index, edge_counts=edge_counts, per_size=per_size,
        min_loglik_step=float(min_step),
    )


def _replicate_star(args):
    cfg, index, seed_seq = args
    try:
        return run_replicate(cfg, index, seed_seq)
    except Exception as exc:  # noqa: BLE001 - replicate failures are data
        return (index, f"{type(exc).__name__}: {exc}")


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """All replicates, serially or in a process pool; failures are counted."""
    seed_seqs = np.random.SeedSequence(cfg.master_seed).spawn(cfg.replicates)
    jobs = [(cfg, i, ss) for i, ss in enumerate(seed_seqs)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_replicate_star, jobs))
    else:
        outcomes = [_replicate_star(job) for job in jobs]
    records = sorted(
        (o for o in outcomes if isinstance(o, ReplicateRecord)), key=lambda r: r.index
    )
    failures = sorted(o for o in outcomes if isinstance(o, tuple))
    return ExperimentResult(config=cfg, records=records, failures=failures)
