"""Command-line front end.

Subcommands: validate, separate, verify, fit, simulate, intervene and
experiment.  Exit status 0 on success, 1 for negative boolean answers
(a connected pair, a failed verification), 2 for errors, 64 for usage
problems.  Structured output goes to ``--out`` files or standard output
as JSON/CSV.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from .causal import INTERFERING, NON_INTERFERING, InterventionSpec, identified_effect
from .errors import UcgError
from .experiment import ExperimentConfig, run_experiment
from .gaussian import Dataset
from .graphs import graph_from_json, graph_to_json
from .markov import GROUPS, check_property
from .mle import FitConfig, fit
from .model import (
    model_from_json,
    model_to_json,
    simulate,
)

USAGE_EXIT = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _read(path: str) -> str:
    return Path(path).read_text()


def _write_or_print(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_graph(path: str):
    return graph_from_json(_read(path))


def _cmd_validate(args) -> int:
    _load_graph(args.graph)
    print("valid")
    return 0


def _cmd_separate(args) -> int:
    from .separation import is_separated

    g = _load_graph(args.graph)
    separated = is_separated(g, args.x, args.y, args.z or [])
    print("separated" if separated else "connected")
    return 0 if separated else 1


def _cmd_verify(args) -> int:
    m = model_from_json(_read(args.model))
    g = _load_graph(args.graph) if args.graph else m.graph
    if g != m.graph:
        raise UcgError("graph file does not match the model's graph")
    names = ["local", "pairwise", "block", "global"] if args.property == "all" else [args.property]
    reports = [check_property(m, name, args.tol) for name in names]
    doc = {"tol": args.tol, "properties": [r.to_dict() for r in reports]}
    _write_or_print(json.dumps(doc, indent=2) + "\n", args.out)
    return 0 if all(r.passed for r in reports) else 1


def _cmd_fit(args) -> int:
    g = _load_graph(args.graph)
    data = Dataset.from_csv(_read(args.data))
    cfg = FitConfig(**json.loads(_read(args.config))) if args.config else FitConfig()
    model, report = fit(g, data, cfg)
    _write_or_print(model_to_json(model), args.out)
    if args.report:
        doc = {
            "iterations": report.iterations,
            "converged": report.converged,
            "loglik_per_sample": report.loglik,
            "blocks": [
                {"nodes": list(b.nodes), "iterations": b.iterations, "converged": b.converged}
                for b in report.blocks
            ],
        }
        Path(args.report).write_text(json.dumps(doc, indent=2) + "\n")
    return 0


def _cmd_simulate(args) -> int:
    m = model_from_json(_read(args.model))
    data = simulate(m, args.n, args.seed)
    _write_or_print(data.to_csv(), args.out)
    return 0


def _parse_assignments(pairs: List[str], what: str) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise UcgError(f"malformed {what} {pair!r}, expected NAME=VALUE")
        name, value = pair.split("=", 1)
        out[name] = value
    return out


def _cmd_intervene(args) -> int:
    m = model_from_json(_read(args.model))
    assignments = {
        k: float(v) for k, v in _parse_assignments(args.do or [], "assignment").items()
    }
    mech_names = {"interfering": INTERFERING, "non_interfering": NON_INTERFERING}
    mechanisms = {}
    for k, v in _parse_assignments(args.mechanism or [], "mechanism").items():
        if v not in mech_names:
            raise UcgError(f"unknown mechanism {v!r} for {k!r}")
        mechanisms[k] = mech_names[v]
    spec = InterventionSpec(assignments, mechanisms)
    eff = identified_effect(m, spec)
    doc = {
        "variables": list(eff.variables),
        "mean": eff.mean.tolist(),
        "sigma": eff.sigma.tolist(),
    }
    _write_or_print(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def _cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_json(_read(args.config))
    if args.replicates:
        cfg = ExperimentConfig.from_dict({**json.loads(cfg.to_json()), "replicates": args.replicates})
    result = run_experiment(cfg)
    _write_or_print(result.to_csv(), args.out)
    if args.log:
        doc = {
            "failures": [{"replicate": i, "error": msg} for i, msg in result.failures],
            "replicates": result.log_entries(),
        }
        Path(args.log).write_text(json.dumps(doc, indent=2) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ucg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a graph file for structural validity")
    p.add_argument("--graph", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("separate", help="decide a separation query on a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--x", nargs="+", required=True)
    p.add_argument("--y", nargs="+", required=True)
    p.add_argument("--z", nargs="*", default=[])
    p.set_defaults(func=_cmd_separate)

    p = sub.add_parser("verify", help="check Markov properties of a model")
    p.add_argument("--graph")
    p.add_argument("--model", required=True)
    p.add_argument(
        "--property",
        default="all",
        choices=sorted(GROUPS) + ["all"],
    )
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("fit", help="maximum likelihood fit from a data file")
    p.add_argument("--graph", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--report")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("simulate", help="draw samples from a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("intervene", help="identified effect of an intervention")
    p.add_argument("--model", required=True)
    p.add_argument("--do", action="append", metavar="VAR=VALUE")
    p.add_argument("--mechanism", action="append", metavar="VAR=KIND")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_intervene)

    p = sub.add_parser("experiment", help="run the replicated estimation experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--replicates", type=int, help="override the configured count")
    p.add_argument("--out")
    p.add_argument("--log")
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_EXIT
    try:
        return args.func(args)
    except UcgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
