"""Cross-representation verification suites.

Each suite checks that two independent constructions of the same object
agree: the projector and Fourier forms of the diagonalizer, traced unitary
dilations against their operator-sum channels, the structural identities
behind the dilations, and the three likelihood engines against each other on
random instances. The suites are deterministic (seeded) and report their
worst observed deviation against the pinned tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

from . import linalg
from .channels import apply_channel, diagonalizer, diagonalizer_fourier
from .engine import alignment_loglik
from .models import (ModelParams, binary_channel, binary_dilation, bitflip_generator,
                     bitflip_unitary, group_channel, qw_dilation, weights)
from .treeio import Alignment, BINARY, DNA, PhyloTree, TreeNode


@dataclass(frozen=True)
class SuiteResult:
    name: str
    max_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation < self.tolerance

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict}  {self.name}: max deviation {self.max_deviation:.3e} (tolerance {self.tolerance:g})"


def random_density(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_params(rng: np.random.Generator, family: str) -> ModelParams:
    if family == "JC":
        return ModelParams.jc(rng.uniform(0.0, 1.0 / 3.0))
    if family == "K2":
        lam = rng.dirichlet(np.ones(3))
        return ModelParams.k2(lam[1], lam[2] / 2.0)
    if family == "K3":
        lam = rng.dirichlet(np.ones(4))
        return ModelParams.k3(lam[1], lam[2], lam[3])
    if family == "B":
        return ModelParams.binary(rng.uniform(0.0, 1.0))
    pi = rng.dirichlet(np.ones(4)) + 0.02
    return ModelParams.felsenstein(rng.uniform(0.0, 1.0), pi / pi.sum())


def random_topology(rng: np.random.Generator, names, family: str) -> TreeNode:
    """Random rooted binary topology over the given leaf names."""
    names = list(names)
    if len(names) == 1:
        return TreeNode(name=names[0], params=random_params(rng, family), annotated=True)
    cut = int(rng.integers(1, len(names)))
    left = random_topology(rng, names[:cut], family)
    right = random_topology(rng, names[cut:], family)
    return TreeNode(children=(left, right), params=random_params(rng, family), annotated=True)


def random_instance(rng: np.random.Generator, n_leaves: int, family: str, n_sites: int = 1):
    """Random (tree, alignment) pair for one family."""
    names = [f"t{i + 1}" for i in range(n_leaves)]
    root = random_topology(rng, names, family)
    # The root carries no parent edge; drop its params.
    root = replace(root, params=None, annotated=False)
    tree = PhyloTree(root=root)
    alphabet = BINARY if family == "B" else DNA
    data = rng.integers(0, alphabet.n_states, size=(n_leaves, n_sites))
    aln = Alignment(taxa=tuple(tree.leaf_names), data=data, alphabet=alphabet)
    return tree, aln


def suite_fourier_equivalence(rng: np.random.Generator, samples: int = 50) -> SuiteResult:
    worst = 0.0
    for n in (2, 4, 5):
        proj = diagonalizer(n)
        four = diagonalizer_fourier(n)
        for _ in range(samples):
            m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            worst = max(worst, linalg.max_abs(apply_channel(proj, m) - apply_channel(four, m)))
    return SuiteResult("diagonalizer Fourier equivalence", worst, 1e-12)


def suite_dilation_vs_channel(rng: np.random.Generator, draws: int = 50,
                              densities: int = 20, perturb_markov: bool = False) -> SuiteResult:
    worst = 0.0
    for family in ("JC", "K2", "K3"):
        for _ in range(draws):
            params = random_params(rng, family)
            dil = qw_dilation(params)
            ch = group_channel(params)
            for _ in range(densities):
                rho = random_density(rng, 4)
                expected = apply_channel(ch, rho)
                if perturb_markov:
                    expected = expected + 1e-3 * linalg.projector(0, 4)
                worst = max(worst, linalg.max_abs(dil.apply(rho) - expected))
    for _ in range(draws):
        a = rng.uniform(0.0, 1.0)
        dil = binary_dilation(a)
        ch = binary_channel(dil.metadata["flip_weight"])
        for _ in range(densities):
            rho = random_density(rng, 2)
            worst = max(worst, linalg.max_abs(dil.apply(rho) - apply_channel(ch, rho)))
    return SuiteResult("dilation vs channel", worst, 1e-12)


def suite_flip_generators() -> SuiteResult:
    """Exponentiated generators reproduce the four bit-flip unitaries."""
    worst = 0.0
    for k in (0, 1):
        for l in (0, 1):
            dev = linalg.max_abs(expm(1j * bitflip_generator(k, l)) - bitflip_unitary(k, l))
            worst = max(worst, dev)
    return SuiteResult("bit-flip generator exponentials", worst, 1e-10)


def suite_dilation_unitarity(rng: np.random.Generator, draws: int = 20) -> SuiteResult:
    worst = 0.0
    for _ in range(draws):
        v = binary_dilation(rng.uniform(0.0, 1.0)).unitary
        worst = max(worst, linalg.max_abs(v @ v.conj().T - np.eye(4)))
    for family in ("JC", "K2", "K3"):
        for _ in range(draws):
            u = qw_dilation(random_params(rng, family)).unitary
            worst = max(worst, linalg.max_abs(u @ u.conj().T - np.eye(16)))
    return SuiteResult("dilation unitarity", worst, 1e-14)


def suite_coin_weights(rng: np.random.Generator, draws: int = 20) -> SuiteResult:
    """The walk dilation's coin column squares to the model weights."""
    worst = 0.0
    for family in ("JC", "K2", "K3"):
        for _ in range(draws):
            params = random_params(rng, family)
            coin_sq = np.abs(np.asarray(qw_dilation(params).metadata["coin_column"])) ** 2
            worst = max(worst, linalg.max_abs(coin_sq - weights(params).vector))
    return SuiteResult("coin-column weights", worst, 1e-12)


def suite_pruning_equivalence(rng: np.random.Generator, instances: int = 60,
                              max_leaves: int = 5) -> SuiteResult:
    families = ("JC", "K2", "K3", "B", "F")
    worst = 0.0
    for i in range(instances):
        family = families[i % len(families)]
        n_leaves = int(rng.integers(2, max_leaves + 1))
        tree, aln = random_instance(rng, n_leaves, family)
        total = {}
        for engine in ("classical", "quantum", "dual"):
            total[engine] = alignment_loglik(tree, aln, engine=engine).total_log_likelihood
        worst = max(worst,
                    abs(total["classical"] - total["quantum"]),
                    abs(total["classical"] - total["dual"]))
    return SuiteResult("pruning engine equivalence", worst, 1e-8)


def run_suites(level: str = "default", seed: int = 20240901, perturb_markov: bool = False) -> list:
    """Run every suite; ``deep`` raises the pruning suite to 8-leaf instances."""
    rng = np.random.default_rng(seed)
    deep = level == "deep"
    results = [
        suite_fourier_equivalence(rng, samples=50),
        suite_dilation_vs_channel(rng, draws=50 if deep else 20, densities=20 if deep else 5,
                                  perturb_markov=perturb_markov),
        suite_flip_generators(),
        suite_dilation_unitarity(rng, draws=20 if deep else 10),
        suite_coin_weights(rng, draws=20 if deep else 10),
        suite_pruning_equivalence(rng, instances=200 if deep else 60, max_leaves=8 if deep else 5),
    ]
    return results
