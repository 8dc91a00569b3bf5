"""Tree simulation and the three likelihood engines.

The classical engine runs the textbook pruning recursion on likelihood
vectors. The quantum engine runs the pruning circuit: per-edge operator-sum
propagation of the two child likelihood operators, the collective pinch onto
the |kk> subspace, the inverse control-shift (which parks the duplicate
character on the null ancilla), and a partial trace. The dual engine reduces
subtrees the same way but evaluates the final (root) cherry in the state
picture, propagating the stationary density backwards through the adjoint
map and recording the trace factor nu of the left child.

All three agree because each edge step, restricted to diagonal operators,
factors through the same likelihood-propagation matrix W = M^T.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from . import linalg
from .channels import DiagonalDensity, collective_diagonalizer, control_not, split_at
from .errors import ModelError, ShapeMismatchError, TaxaMismatchError, ZeroLikelihoodError
from .linalg import ProbabilityTensor
from .models import ModelParams, markov, prune_matrix, prune_operators
from .treeio import DNA, Alignment, PhyloTree, SplitGate, TreeNode, compile_circuit, emit_newick

ENGINES = ("classical", "quantum", "dual")


def stationary_density(pi) -> DiagonalDensity:
    """Diagonal density with the stationary weights on the non-null characters."""
    return DiagonalDensity.from_block(pi)


def _evolve_slot(values: np.ndarray, m: np.ndarray, slot: int) -> np.ndarray:
    """Apply a column-stochastic matrix along one 1-based tensor slot."""
    return np.moveaxis(np.tensordot(m, values, axes=([1], [slot - 1])), 0, slot - 1)


def simulate_tree(tree: PhyloTree) -> ProbabilityTensor:
    """Exact site-pattern distribution at the leaves.

    Executes the compiled schedule on the root's stationary vector: splits
    duplicate a lineage slot, evolutions push the slot through the edge's
    substitution matrix. Output slots follow the tree's left-to-right leaf
    order.
    """
    schedule = compile_circuit(tree)
    tensor = ProbabilityTensor(tree.pi)
    for gate in schedule.gates:
        if isinstance(gate, SplitGate):
            tensor = split_at(tensor, gate.slot)
        else:
            tensor = ProbabilityTensor(_evolve_slot(tensor.values, markov(gate.params), gate.slot))
    return tensor


def leaf_likelihood(symbol: str, n_states: int = 4) -> np.ndarray:
    """Indicator likelihood vector for an observed leaf character.

    Accepts the DNA letters A/C/G/T (4-state) or a 1-based numeric character
    label: '1' is the first non-null character of any alphabet.
    """
    if n_states == 4 and symbol in DNA.symbols:
        idx = DNA.symbols.index(symbol)
    elif symbol.isdigit() and 1 <= int(symbol) <= n_states:
        idx = int(symbol) - 1
    else:
        raise ModelError(f"unknown character {symbol!r} for a {n_states}-state alphabet")
    out = np.zeros(n_states)
    out[idx] = 1.0
    return out


def classical_prune(lb, lc, mb, mc) -> np.ndarray:
    """Parent likelihood (W_B L_B) o (W_C L_C) with W = M^T per edge."""
    lb = np.asarray(lb, dtype=float)
    lc = np.asarray(lc, dtype=float)
    mb = np.asarray(mb, dtype=float)
    mc = np.asarray(mc, dtype=float)
    if lb.shape != lc.shape or mb.shape != (lb.size, lb.size) or mc.shape != mb.shape:
        raise ShapeMismatchError("pruning operands have mismatched dimensions")
    return (mb.T @ lb) * (mc.T @ lc)


@functools.lru_cache(maxsize=None)
def _circuit_pieces(n: int):
    """Cached pinch operators and inverse control-shift for the full alphabet."""
    pinch = np.stack(collective_diagonalizer(n).operators)
    pinch_dag = pinch.conj().transpose(0, 2, 1).copy()
    ucn_dag = control_not(n).conj().T
    for arr in (pinch, pinch_dag, ucn_dag):
        arr.setflags(write=False)
    return pinch, pinch_dag, ucn_dag


def _embed_operator(op: np.ndarray, corner: complex) -> np.ndarray:
    """Extend an operator over the non-null block to the full alphabet.

    Likelihood operators carry no weight on the null character, so the
    corner value never reaches a result; unitaries use 1 to stay unitary,
    general Kraus operators use 0.
    """
    m = op.shape[0]
    out = np.zeros((m + 1, m + 1), dtype=complex)
    out[0, 0] = corner
    out[1:, 1:] = op
    return out


def _embed_stack(ops, corner: complex) -> np.ndarray:
    return np.stack([_embed_operator(linalg.as_matrix(op), corner) for op in ops])


def _propagate_diagonal(stack: np.ndarray, stack_dag: np.ndarray, diag: np.ndarray) -> np.ndarray:
    """sum_k A_k diag(d) A_k^dagger for a stacked operator family."""
    return ((stack * diag) @ stack_dag).sum(axis=0)


def _prune_pair(lb: np.ndarray, lc: np.ndarray, stack_b: np.ndarray, stack_c: np.ndarray,
                stack_b_dag: np.ndarray | None = None, stack_c_dag: np.ndarray | None = None) -> np.ndarray:
    """The pruning circuit on two likelihood operators over the non-null block.

    Both operators are embedded with null weight 0, propagated through their
    edge families, pinched onto the collective diagonal, unwound by the
    inverse control-shift (collective |kk> goes to |k0>), and the second slot
    is traced out.
    """
    n = stack_b.shape[1]
    if stack_b_dag is None:
        stack_b_dag = stack_b.conj().transpose(0, 2, 1)
    if stack_c_dag is None:
        stack_c_dag = stack_c.conj().transpose(0, 2, 1)
    rho_b = _propagate_diagonal(stack_b, stack_b_dag, np.concatenate([[0.0], lb]))
    rho_c = _propagate_diagonal(stack_c, stack_c_dag, np.concatenate([[0.0], lc]))
    pinch, pinch_dag, ucn_dag = _circuit_pieces(n)
    joint = np.kron(rho_b, rho_c)
    pinched = (pinch @ joint @ pinch_dag).sum(axis=0)
    recovered = ucn_dag @ pinched @ ucn_dag.conj().T
    reduced = linalg.partial_trace(recovered, [n, n], traced=2)
    return np.diag(reduced).real[1:]


def quantum_prune(lb, lc, ub, uc) -> np.ndarray:
    """Pruning-circuit parent operator using one unitary per edge.

    The unitaries must satisfy |U|^2 = W for the intended propagation
    matrices; the result then equals classical_prune with M = W^T.
    """
    lb = np.asarray(lb, dtype=float)
    lc = np.asarray(lc, dtype=float)
    ub = linalg.as_matrix(ub)
    uc = linalg.as_matrix(uc)
    for u in (ub, uc):
        if not linalg.is_unitary(u):
            raise ModelError("edge operator is not unitary")
    if ub.shape != (lb.size, lb.size) or uc.shape != (lc.size, lc.size) or lb.size != lc.size:
        raise ShapeMismatchError("pruning operands have mismatched dimensions")
    return _prune_pair(lb, lc, _embed_stack([ub], 1.0), _embed_stack([uc], 1.0))


def prune_embedded(operators, r: int, ub, uc) -> list:
    """Merge slots r and r+1 of a likelihood-operator list, leaving the rest.

    The joint state of the s slots is the tensor product of the listed
    diagonal operators, so the embedded map id^(r-1) (x) mu (x) id^(s-r-1)
    acts only on the named pair and the list representation is exact.
    """
    ops = [np.asarray(x, dtype=float) for x in operators]
    if not 1 <= r <= len(ops) - 1:
        raise ShapeMismatchError(f"slot {r} out of range for {len(ops)} operators")
    merged = quantum_prune(ops[r - 1], ops[r], ub, uc)
    return ops[:r - 1] + [merged] + ops[r + 1:]


def dual_prune(lb, lc, ub, uc):
    """State-picture form of the pruning map: (E_B(L_C), nu).

    nu = Tr L_B; q_k = <k| U_B L_B U_B^dagger |k> / nu; the returned operator
    is sum_k q_k P_k U_C L_C U_C^dagger P_k. The circuit-picture result
    equals nu times this operator (the scaling convention is pinned to the
    circuit picture, which reproduces classical pruning).
    """
    lb = np.asarray(lb, dtype=float)
    lc = np.asarray(lc, dtype=float)
    ub = linalg.as_matrix(ub)
    uc = linalg.as_matrix(uc)
    nu = float(lb.sum())
    if nu <= 0.0:
        raise ZeroLikelihoodError(-1, "dead lineage: the left operator has zero trace")
    q = np.diag(ub @ np.diag(lb).astype(complex) @ ub.conj().T).real / nu
    evolved = uc @ np.diag(lc).astype(complex) @ uc.conj().T
    return q * np.diag(evolved).real, nu


def dual_adjoint_state(q, uc, rho) -> np.ndarray:
    """Adjoint map U_C^dagger (sum_k q_k P_k rho P_k) U_C on a density matrix."""
    rho = linalg.as_matrix(rho)
    q = np.asarray(q, dtype=float)
    pinched = np.diag(q * np.diag(rho))
    return uc.conj().T @ pinched @ uc


def site_likelihood(ltr, pi: DiagonalDensity) -> float:
    """Contraction sum_i pi_i L_i of a likelihood operator with the root density."""
    ltr = np.asarray(ltr, dtype=float)
    if ltr.min() < 0.0:
        raise ModelError(f"likelihood operator has negative entry {ltr.min()}")
    if ltr.size != pi.dim - 1:
        raise ShapeMismatchError(f"operator size {ltr.size} vs {pi.dim - 1} characters")
    return float(pi.block @ ltr)


@dataclass(frozen=True)
class _EdgeOps:
    """Per-edge data the engines reuse across sites."""

    w: np.ndarray          # likelihood propagation matrix M^T
    stack: np.ndarray      # embedded Kraus family for the pruning circuit
    stack_dag: np.ndarray

    @classmethod
    def for_params(cls, params: ModelParams) -> "_EdgeOps":
        w = prune_matrix(params)
        stack = _embed_stack(prune_operators(params), 0.0)
        stack_dag = stack.conj().transpose(0, 2, 1).copy()
        for arr in (w, stack, stack_dag):
            arr.setflags(write=False)
        return cls(w=w, stack=stack, stack_dag=stack_dag)


@dataclass(frozen=True)
class SiteRecord:
    site: int
    likelihood: float
    log: float
    nu: float | None = None


@dataclass(frozen=True)
class SiteLikelihoodReport:
    """Per-site likelihoods, their logs, and the total for one engine run."""

    engine: str
    per_site: tuple
    total_log_likelihood: float
    parameters: dict

    def to_document(self) -> dict:
        sites = []
        for rec in self.per_site:
            entry = {"site": rec.site, "likelihood": rec.likelihood, "log": rec.log}
            if rec.nu is not None:
                entry["nu"] = rec.nu
            sites.append(entry)
        return {
            "engine": self.engine,
            "per_site": sites,
            "total_log_likelihood": self.total_log_likelihood,
            "parameters": self.parameters,
        }


class _TreeContext:
    """Tree data prepared once per likelihood evaluation."""

    def __init__(self, tree: PhyloTree, taxa_order):
        self.tree = tree
        self.n_states = tree.n_states
        self.pi = tree.pi
        self.row_of = {}
        for leaf in tree.root.leaves():
            self.row_of[leaf.name] = taxa_order.index(leaf.name)
        self.edges = {}

        def collect(node: TreeNode) -> None:
            for child in node.children:
                self.edges[id(child)] = _EdgeOps.for_params(child.params)
                collect(child)

        collect(tree.root)

    def leaf_vector(self, node: TreeNode, pattern: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_states)
        out[pattern[self.row_of[node.name]]] = 1.0
        return out

    def reduce(self, node: TreeNode, pattern: np.ndarray, engine: str) -> np.ndarray:
        """Likelihood operator at a node (before its parent edge)."""
        if node.is_leaf:
            return self.leaf_vector(node, pattern)
        left, right = node.children
        lb = self.reduce(left, pattern, engine)
        lc = self.reduce(right, pattern, engine)
        eb = self.edges[id(left)]
        ec = self.edges[id(right)]
        if engine == "classical":
            return (eb.w @ lb) * (ec.w @ lc)
        return _prune_pair(lb, lc, eb.stack, ec.stack, eb.stack_dag, ec.stack_dag)

    def pattern_likelihood(self, pattern: np.ndarray, engine: str):
        """Site likelihood for one character pattern; returns (value, nu)."""
        if engine in ("classical", "quantum"):
            ltr = self.reduce(self.tree.root, pattern, engine)
            return float(self.pi @ ltr), None
        # Dual engine: subtrees reduce through the pruning circuit, the root
        # cherry is contracted in the state picture.
        left, right = self.tree.root.children
        lbf = self.reduce(left, pattern, "quantum")
        lcf = self.reduce(right, pattern, "quantum")
        nu = float(lbf.sum())
        if nu <= 0.0:
            return 0.0, 0.0
        eb = self.edges[id(left)]
        ec = self.edges[id(right)]
        q = (eb.w @ lbf) / nu
        backward = ec.w.T @ (q * self.pi)
        return nu * float(lcf @ backward), nu


def alignment_loglik(tree: PhyloTree, aln: Alignment, engine: str = "classical") -> SiteLikelihoodReport:
    """Total log-likelihood of an alignment under one engine.

    Sites are independent; identical site patterns are evaluated once and the
    per-site report is expanded back in alignment order. A site of zero
    likelihood raises ZeroLikelihoodError naming the (1-based) site.
    """
    if engine not in ENGINES:
        raise ModelError(f"unknown engine {engine!r}; choose from {ENGINES}")
    tree_leaves = set(tree.leaf_names)
    aln_taxa = set(aln.taxa)
    if tree_leaves != aln_taxa:
        missing = sorted(tree_leaves - aln_taxa)
        extra = sorted(aln_taxa - tree_leaves)
        raise TaxaMismatchError(f"tree/alignment taxa differ (missing from alignment: {missing}, "
                                f"not in tree: {extra})")
    if aln.alphabet.n_states != tree.n_states:
        raise ModelError(f"alignment alphabet has {aln.alphabet.n_states} states, "
                         f"tree models have {tree.n_states}")

    ctx = _TreeContext(tree, aln.taxa)
    patterns, _, inverse = aln.site_patterns()
    values = np.empty(len(patterns))
    nus = np.empty(len(patterns))
    for i, pattern in enumerate(patterns):
        value, nu = ctx.pattern_likelihood(pattern, engine)
        values[i] = value
        nus[i] = nu if nu is not None else np.nan
    site_values = values[inverse]
    if site_values.min() <= 0.0:
        site = int(np.argmax(site_values <= 0.0))
        raise ZeroLikelihoodError(site + 1)
    logs = np.log(site_values)
    records = []
    for site in range(aln.n_sites):
        nu = nus[inverse[site]]
        records.append(SiteRecord(site=site + 1, likelihood=float(site_values[site]),
                                  log=float(logs[site]), nu=None if np.isnan(nu) else float(nu)))
    return SiteLikelihoodReport(
        engine=engine,
        per_site=tuple(records),
        total_log_likelihood=float(np.sum(logs)),
        parameters={"tree": emit_newick(tree), "n_sites": aln.n_sites, "n_taxa": aln.n_taxa},
    )
