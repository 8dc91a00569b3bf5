"""Maximum-likelihood estimation of model weights on a fixed topology.

The search is a plain Nelder-Mead simplex over the family's free weights,
shared across all edges of the tree. Candidate points that leave the
family's feasible region (a box, plus a weight-sum constraint for the
4-state group families) are reflected back inside before evaluation, so the
objective only ever sees valid substitution matrices. The search itself is
deterministic; the seed is carried through to the report for provenance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .engine import alignment_loglik
from .errors import ModelError, OptimizerError, ZeroLikelihoodError
from .models import ModelParams
from .treeio import Alignment, PhyloTree, TreeNode

DIAMETER_TOL = 1e-7
MAX_EVALS = 2000
_SPREAD = 0.05
_START = 0.1


@dataclass(frozen=True)
class _FamilySpec:
    names: tuple
    lower: np.ndarray
    upper: np.ndarray
    sum_coeffs: np.ndarray | None  # feasible iff sum_coeffs @ x <= sum_bound
    sum_bound: float = 1.0


def _family_spec(family: str) -> _FamilySpec:
    if family == "JC":
        return _FamilySpec(("a",), np.zeros(1), np.array([1.0 / 3.0]), None)
    if family == "K2":
        return _FamilySpec(("a", "b"), np.zeros(2), np.ones(2), np.array([1.0, 2.0]))
    if family == "K3":
        return _FamilySpec(("a", "b", "c"), np.zeros(3), np.ones(3), np.ones(3))
    if family in ("B", "F"):
        return _FamilySpec(("a",), np.zeros(1), np.ones(1), None)
    raise ModelError(f"unknown model family {family!r}")


def _build_params(family: str, x: np.ndarray, pi) -> ModelParams:
    if family == "JC":
        return ModelParams.jc(x[0])
    if family == "K2":
        return ModelParams.k2(x[0], x[1])
    if family == "K3":
        return ModelParams.k3(x[0], x[1], x[2])
    if family == "B":
        return ModelParams.binary(x[0])
    return ModelParams.felsenstein(x[0], pi)


@dataclass(frozen=True)
class OptimizationProblem:
    """Tree topology, data, and search configuration for one ML fit.

    By default all edges share one parameter vector of the chosen family
    (the template tree's own edge parameters are placeholders for the
    topology); ``per_edge`` gives every edge its own vector instead. For the
    F family the stationary distribution is fixed, taken from ``pi`` or the
    tree root (uniform when absent); only the weight a is searched.
    """

    tree: PhyloTree
    alignment: Alignment
    family: str
    engine: str = "classical"
    seed: int = 0
    pi: np.ndarray | None = None
    fixed: dict | None = None  # e.g. {"b": 0.2} to search only the rest
    per_edge: bool = False

    def states(self) -> int:
        return 2 if self.family == "B" else 4

    def stationary(self) -> np.ndarray:
        if self.pi is not None:
            return np.asarray(self.pi, dtype=float)
        if self.tree.root_pi is not None and self.tree.root_pi.size == self.states():
            return self.tree.root_pi
        return np.full(self.states(), 1.0 / self.states())


@dataclass(frozen=True)
class TracePoint:
    n_eval: int
    params: tuple
    loglik: float


@dataclass(frozen=True)
class OptimizationResult:
    family: str
    engine: str
    seed: int
    names: tuple
    w_star: tuple
    loglik: float
    n_eval: int
    converged: bool
    trace: tuple
    fixed: tuple = ()

    def to_document(self) -> dict:
        return {
            "family": self.family,
            "engine": self.engine,
            "seed": self.seed,
            "w_star": dict(zip(self.names, self.w_star)),
            "fixed": dict(self.fixed),
            "log_likelihood": self.loglik,
            "n_eval": self.n_eval,
            "converged": self.converged,
            "trace": [
                {"n_eval": t.n_eval, "params": list(t.params), "loglik": t.loglik}
                for t in self.trace
            ],
        }


def count_edges(tree: PhyloTree) -> int:
    return 2 * tree.n_leaves - 2


def _retree(node: TreeNode, next_params, is_root: bool) -> TreeNode:
    if is_root:
        children = tuple(_retree(c, next_params, False) for c in node.children)
        return replace(node, children=children)
    params = next_params()
    children = tuple(_retree(c, next_params, False) for c in node.children)
    return replace(node, children=children, params=params, annotated=True)


def tree_with_edge_params(tree: PhyloTree, params_by_edge, root_pi=None) -> PhyloTree:
    """Copy of the topology with edges parameterized in pre-order."""
    queue = iter(params_by_edge)

    def next_params():
        return next(queue)

    root = _retree(tree.root, next_params, True)
    return PhyloTree(root=root, root_pi=root_pi)


def tree_with_shared_params(tree: PhyloTree, params: ModelParams, root_pi=None) -> PhyloTree:
    """Copy of the topology with every edge carrying the same parameters."""
    root = _retree(tree.root, lambda: params, True)
    return PhyloTree(root=root, root_pi=root_pi)


def _reflect_box(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    span = upper - lower
    period = 2.0 * span
    y = np.mod(x - lower, period)
    y = np.minimum(y, period - y)
    return lower + y


def reflect_feasible(x: np.ndarray, spec: _FamilySpec) -> np.ndarray:
    """Mirror a point across the violated bounds into the family's region."""
    x = _reflect_box(np.asarray(x, dtype=float), spec.lower, spec.upper)
    if spec.sum_coeffs is not None:
        c = spec.sum_coeffs
        excess = c @ x - spec.sum_bound
        if excess > 0.0:
            x = x - 2.0 * excess / (c @ c) * c
            x = _reflect_box(x, spec.lower, spec.upper)
            if c @ x > spec.sum_bound:
                # Pathological double violation: pull straight to the facet.
                x = x * (spec.sum_bound / (c @ x))
    return np.clip(x, spec.lower, spec.upper)


def maximize_loglik(problem: OptimizationProblem) -> OptimizationResult:
    """Nelder-Mead search for the family weights maximizing the log-likelihood.

    Stops when the simplex diameter drops below 1e-7 or after 2000
    evaluations; the trace records the best point after each iteration and is
    monotone in the objective. Raises OptimizerError when every vertex of
    the initial simplex has zero likelihood.
    """
    full_spec = _family_spec(problem.family)
    fixed = dict(problem.fixed or {})
    unknown = set(fixed) - set(full_spec.names)
    if unknown:
        raise ModelError(f"cannot fix unknown parameters {sorted(unknown)} of family {problem.family}")
    free_idx = [i for i, name in enumerate(full_spec.names) if name not in fixed]
    if not free_idx:
        raise OptimizerError("no free parameters left to optimize")
    if full_spec.sum_coeffs is None:
        sum_coeffs, sum_bound = None, 1.0
    else:
        sum_coeffs = full_spec.sum_coeffs[free_idx]
        sum_bound = 1.0 - sum(full_spec.sum_coeffs[i] * fixed[name]
                              for i, name in enumerate(full_spec.names) if name in fixed)
    spec = _FamilySpec(
        names=tuple(full_spec.names[i] for i in free_idx),
        lower=full_spec.lower[free_idx],
        upper=full_spec.upper[free_idx],
        sum_coeffs=sum_coeffs,
        sum_bound=sum_bound,
    )
    if problem.states() != problem.alignment.alphabet.n_states:
        raise ModelError(f"family {problem.family} has {problem.states()} states but the "
                         f"alignment alphabet has {problem.alignment.alphabet.n_states}")
    pi = problem.stationary() if problem.family == "F" else None
    root_pi = problem.tree.root_pi
    block_dim = len(spec.names)
    n_blocks = count_edges(problem.tree) if problem.per_edge else 1
    dim = n_blocks * block_dim

    def expand(x: np.ndarray) -> np.ndarray:
        full = np.array([fixed.get(name, 0.0) for name in full_spec.names])
        full[free_idx] = x
        return full

    def reflect(x: np.ndarray) -> np.ndarray:
        out = np.empty_like(x, dtype=float)
        for b in range(n_blocks):
            sl = slice(b * block_dim, (b + 1) * block_dim)
            out[sl] = reflect_feasible(x[sl], spec)
        return out

    def edge_params(x: np.ndarray) -> list:
        return [_build_params(problem.family, expand(x[b * block_dim:(b + 1) * block_dim]), pi)
                for b in range(n_blocks)]

    n_eval = 0

    def objective(x: np.ndarray) -> float:
        nonlocal n_eval
        n_eval += 1
        params = edge_params(x)
        if problem.per_edge:
            tree = tree_with_edge_params(problem.tree, params, root_pi=root_pi)
        else:
            tree = tree_with_shared_params(problem.tree, params[0], root_pi=root_pi)
        try:
            report = alignment_loglik(tree, problem.alignment, engine=problem.engine)
        except ZeroLikelihoodError:
            return np.inf
        return -report.total_log_likelihood

    x0 = np.full(dim, _START)
    vertices = [reflect(x0)]
    for i in range(dim):
        step = x0.copy()
        step[i] += _SPREAD
        vertices.append(reflect(step))
    values = [objective(v) for v in vertices]
    if not np.isfinite(values).any():
        raise OptimizerError("zero likelihood across the entire initial simplex")

    alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5
    trace = []

    def record():
        best = int(np.argmin(values))
        trace.append(TracePoint(n_eval=n_eval, params=tuple(float(v) for v in vertices[best]),
                                loglik=-float(values[best])))

    record()
    converged = False
    while n_eval < MAX_EVALS:
        order = np.argsort(values, kind="stable")
        vertices = [vertices[i] for i in order]
        values = [values[i] for i in order]
        diameter = max(np.abs(v - vertices[0]).max() for v in vertices[1:])
        if diameter < DIAMETER_TOL:
            converged = True
            break
        centroid = np.mean(vertices[:-1], axis=0)
        reflected = reflect(centroid + alpha * (centroid - vertices[-1]))
        f_reflected = objective(reflected)
        if f_reflected < values[0]:
            expanded = reflect(centroid + gamma * (reflected - centroid))
            f_expanded = objective(expanded)
            if f_expanded < f_reflected:
                vertices[-1], values[-1] = expanded, f_expanded
            else:
                vertices[-1], values[-1] = reflected, f_reflected
        elif f_reflected < values[-2]:
            vertices[-1], values[-1] = reflected, f_reflected
        else:
            contracted = reflect(centroid + rho * (vertices[-1] - centroid))
            f_contracted = objective(contracted)
            if f_contracted < values[-1]:
                vertices[-1], values[-1] = contracted, f_contracted
            else:
                for i in range(1, len(vertices)):
                    vertices[i] = reflect(vertices[0] + sigma * (vertices[i] - vertices[0]))
                    values[i] = objective(vertices[i])
        record()

    best = int(np.argmin(values))
    if problem.per_edge:
        names = tuple(f"edge{b + 1}.{name}" for b in range(n_blocks) for name in spec.names)
    else:
        names = spec.names
    return OptimizationResult(
        family=problem.family,
        engine=problem.engine,
        seed=problem.seed,
        names=names,
        w_star=tuple(float(v) for v in vertices[best]),
        loglik=-float(values[best]),
        n_eval=n_eval,
        converged=converged,
        trace=tuple(trace),
        fixed=tuple(sorted(fixed.items())),
    )
