"""Gaussian unified chain graphs.

Graphs mixing undirected, solid directed (interference) and dashed
directed (non-interference) edges, with route-based separation, the four
Markov property suites, maximum likelihood fitting, and interventional
inference.
"""

from .errors import UcgError
from .gaussian import (
    ConditionalGaussian,
    Dataset,
    JointGaussian,
    condition,
    is_ci,
    precision_path_sum,
    sample,
    undirected_cov_decomposition,
)
from .graphs import (
    ChainDecomposition,
    EdgeKind,
    NodeSets,
    Ucg,
    build_ucg,
    chain_decomposition,
    graph_from_json,
    graph_to_json,
    induced_subgraph,
    node_sets,
)
from .causal import (
    AugmentedUcg,
    InterventionSpec,
    InterventionalGaussian,
    augment,
    identified_effect,
    rule_applies,
    verify_corollary_steps,
)
from .markov import (
    IndependenceStatement,
    check_property,
    cross_equivalence,
    enumerate_property,
)
from .mle import FitConfig, FitReport, fit, gls_step, ipf_step, metrics
from .model import (
    Block,
    UcgModel,
    ZeroPattern,
    assemble_joint,
    model_from_json,
    model_to_json,
    random_experiment_model,
    random_params,
    random_ucg,
    simulate,
    zero_pattern,
)
from .separation import (
    has_pure_collider_route,
    is_separated,
    route_is_open,
    route_oracle,
    same_separations,
)
from .experiment import ExperimentConfig, ExperimentResult, run_experiment

__version__ = "0.1.0"

__all__ = [
    "AugmentedUcg",
    "Block",
    "ChainDecomposition",
    "ConditionalGaussian",
    "Dataset",
    "EdgeKind",
    "ExperimentConfig",
    "ExperimentResult",
    "FitConfig",
    "FitReport",
    "IndependenceStatement",
    "InterventionSpec",
    "InterventionalGaussian",
    "JointGaussian",
    "NodeSets",
    "Ucg",
    "UcgError",
    "UcgModel",
    "ZeroPattern",
    "assemble_joint",
    "augment",
    "build_ucg",
    "chain_decomposition",
    "check_property",
    "condition",
    "cross_equivalence",
    "enumerate_property",
    "fit",
    "gls_step",
    "graph_from_json",
    "graph_to_json",
    "has_pure_collider_route",
    "identified_effect",
    "induced_subgraph",
    "ipf_step",
    "is_ci",
    "is_separated",
    "metrics",
    "model_from_json",
    "model_to_json",
    "node_sets",
    "precision_path_sum",
    "random_experiment_model",
    "random_params",
    "random_ucg",
    "rule_applies",
    "route_is_open",
    "route_oracle",
    "run_experiment",
    "same_separations",
    "sample",
    "simulate",
    "undirected_cov_decomposition",
    "verify_corollary_steps",
    "zero_pattern",
]
