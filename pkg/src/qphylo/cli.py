"""Command-line interface: simulate, likelihood, optimize, verify.

Exit codes are stable API: 0 ok, 1 verify failure, 2 input parse error,
3 model error, 4 taxa mismatch, 5 zero site likelihood, 6 optimizer
degeneracy. All outputs are deterministic for a fixed seed: no timestamps,
no environment-dependent content.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .engine import ENGINES, alignment_loglik, simulate_tree
from .errors import (ModelError, OptimizerError, ParseError, QPhyloError,
                     TaxaMismatchError, ZeroLikelihoodError)
from .optimize import OptimizationProblem, maximize_loglik
from .treeio import parse_fasta, parse_newick
from .verify import run_suites

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_PARSE = 2
EXIT_MODEL = 3
EXIT_TAXA = 4
EXIT_ZERO_LIKELIHOOD = 5
EXIT_OPTIMIZER = 6

_FAMILIES = ("JC", "K2", "K3", "B", "F")


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_tree(path: str):
    return parse_newick(Path(path).read_text(encoding="utf-8"))


def _load_alignment(path: str):
    return parse_fasta(Path(path).read_text(encoding="utf-8"))


def cmd_simulate(args) -> int:
    tree = _load_tree(args.tree)
    tensor = simulate_tree(tree)
    rng = np.random.default_rng(args.seed)
    flat = tensor.values.ravel()
    draws = rng.choice(flat.size, size=args.sites, p=flat / flat.sum())
    patterns = np.unravel_index(draws, tensor.values.shape)
    symbols = tree.alphabet.symbols
    fasta_lines = []
    for row, name in enumerate(tree.leaf_names):
        seq = "".join(symbols[idx] for idx in patterns[row])
        fasta_lines.append(f">{name}")
        fasta_lines.append(seq)
    out = Path(args.out)
    fasta_path = out.with_name(out.name + ".fasta")
    doc_path = out.with_name(out.name + ".patterns.json")
    fasta_path.write_text("\n".join(fasta_lines) + "\n", encoding="utf-8")
    _write_json(doc_path, {
        "alphabet": tree.alphabet.name,
        "leaves": list(tree.leaf_names),
        "seed": args.seed,
        "sites": args.sites,
        "pattern_probabilities": tensor.values.tolist(),
    })
    print(f"simulated {args.sites} sites for {tree.n_leaves} taxa")
    print(f"wrote {fasta_path} and {doc_path}")
    return EXIT_OK


def cmd_likelihood(args) -> int:
    tree = _load_tree(args.tree)
    aln = _load_alignment(args.alignment)
    engines = ENGINES if args.engine == "all" else (args.engine,)
    reports = {tag: alignment_loglik(tree, aln, engine=tag) for tag in engines}
    for tag, report in reports.items():
        print(f"{tag}: total log-likelihood {report.total_log_likelihood:.12g} "
              f"({aln.n_sites} sites)")
    doc = {"engines": {tag: rep.to_document() for tag, rep in reports.items()}}
    if len(reports) > 1:
        totals = {tag: rep.total_log_likelihood for tag, rep in reports.items()}
        site_vectors = {tag: np.array([r.likelihood for r in rep.per_site])
                        for tag, rep in reports.items()}
        deviations = {}
        tags = list(reports)
        for i, one in enumerate(tags):
            for other in tags[i + 1:]:
                deviations[f"{one}_vs_{other}"] = {
                    "total": abs(totals[one] - totals[other]),
                    "per_site_max": float(np.abs(site_vectors[one] - site_vectors[other]).max()),
                }
        doc["cross_engine_deviation"] = deviations
        worst = max(d["total"] for d in deviations.values())
        print(f"max cross-engine deviation in total log-likelihood: {worst:.3e}")
    if args.out:
        _write_json(Path(args.out), doc)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    tree = _load_tree(args.tree)
    aln = _load_alignment(args.alignment)
    problem = OptimizationProblem(tree=tree, alignment=aln, family=args.family,
                                  engine=args.engine, seed=args.seed)
    result = maximize_loglik(problem)
    fitted = ", ".join(f"{n}={v:.10g}" for n, v in zip(result.names, result.w_star))
    print(f"{args.family} fit ({args.engine} engine): {fitted}")
    print(f"log-likelihood {result.loglik:.12g} after {result.n_eval} evaluations "
          f"({'converged' if result.converged else 'evaluation budget reached'})")
    if args.out:
        _write_json(Path(args.out), result.to_document())
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_suites(level=args.level, perturb_markov=args.perturb_markov)
    for result in results:
        print(result.line())
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} suite(s) failed: " + ", ".join(r.name for r in failed))
        return EXIT_VERIFY
    print("all suites passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qphylo",
                                     description="Quantum-circuit simulation of phylogenetic "
                                                 "pattern distributions and tree likelihoods.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="sample an alignment from a tree's pattern distribution")
    sim.add_argument("--tree", required=True, help="Newick file")
    sim.add_argument("--sites", type=int, required=True, help="number of sites to sample")
    sim.add_argument("--seed", type=int, required=True, help="sampling seed")
    sim.add_argument("--out", required=True, help="output prefix (<out>.fasta, <out>.patterns.json)")
    sim.set_defaults(run=cmd_simulate)

    lik = sub.add_parser("likelihood", help="alignment log-likelihood under one or all engines")
    lik.add_argument("--tree", required=True, help="Newick file")
    lik.add_argument("--alignment", required=True, help="FASTA file")
    lik.add_argument("--engine", default="classical", choices=ENGINES + ("all",))
    lik.add_argument("--out", help="write the JSON report here")
    lik.set_defaults(run=cmd_likelihood)

    opt = sub.add_parser("optimize", help="maximum-likelihood fit of shared model weights")
    opt.add_argument("--tree", required=True, help="Newick file (topology)")
    opt.add_argument("--alignment", required=True, help="FASTA file")
    opt.add_argument("--family", required=True, choices=_FAMILIES)
    opt.add_argument("--engine", default="classical", choices=ENGINES)
    opt.add_argument("--seed", type=int, required=True, help="recorded in the report")
    opt.add_argument("--out", help="write the JSON report here")
    opt.set_defaults(run=cmd_optimize)

    ver = sub.add_parser("verify", help="run the cross-representation property suites")
    ver.add_argument("--level", default="default", choices=("default", "deep"))
    ver.add_argument("--perturb-markov", action="store_true", help=argparse.SUPPRESS)
    ver.set_defaults(run=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.run(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"parse error: cannot read {exc.filename}", file=sys.stderr)
        return EXIT_PARSE
    except TaxaMismatchError as exc:
        print(f"taxa mismatch: {exc}", file=sys.stderr)
        return EXIT_TAXA
    except ZeroLikelihoodError as exc:
        print(f"zero likelihood: {exc}", file=sys.stderr)
        return EXIT_ZERO_LIKELIHOOD
    except OptimizerError as exc:
        print(f"optimizer error: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZER
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except QPhyloError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
