#!/usr/bin/env python3
"""Cross-engine stress test on random tree/alignment instances.

Draws random topologies, per-edge parameters, and site patterns for every
model family, evaluates the log-likelihood with all three engines, and
reports the worst pairwise deviation per family and leaf count.
"""

import argparse
from collections import defaultdict

import numpy as np

from qphylo.engine import alignment_loglik
from qphylo.verify import random_instance

FAMILIES = ("JC", "K2", "K3", "B", "F")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--instances", type=int, default=200)
    parser.add_argument("--max-leaves", type=int, default=8)
    parser.add_argument("--sites", type=int, default=1)
    parser.add_argument("--seed", type=int, default=20240809)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    worst = defaultdict(float)
    grand = 0.0
    for i in range(args.instances):
        family = FAMILIES[i % len(FAMILIES)]
        n_leaves = int(rng.integers(2, args.max_leaves + 1))
        tree, aln = random_instance(rng, n_leaves, family, n_sites=args.sites)
        totals = {engine: alignment_loglik(tree, aln, engine=engine).total_log_likelihood
                  for engine in ("classical", "quantum", "dual")}
        dev = max(abs(totals["classical"] - totals["quantum"]),
                  abs(totals["classical"] - totals["dual"]))
        worst[(family, n_leaves)] = max(worst[(family, n_leaves)], dev)
        grand = max(grand, dev)

    print(f"{args.instances} instances, up to {args.max_leaves} leaves, {args.sites} site(s) each")
    print("family  leaves  worst |delta logL|")
    for (family, n_leaves), dev in sorted(worst.items()):
        print(f"{family:>6}  {n_leaves:6d}  {dev:.3e}")
    print(f"grand worst: {grand:.3e}")


if __name__ == "__main__":
    main()
