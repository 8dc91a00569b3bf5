import numpy as np
import pytest

from qphylo.engine import simulate_tree
from qphylo.errors import ModelError, OptimizerError
from qphylo.models import ModelParams
from qphylo.optimize import (OptimizationProblem, _family_spec, maximize_loglik,
                             reflect_feasible, tree_with_shared_params)
from qphylo.treeio import BINARY, DNA, Alignment, parse_newick

BALANCED = parse_newick("((A:0.1,B:0.1):0.1,(C:0.1,D:0.1):0.1);")
CHERRY = parse_newick("(A:0.1,B:0.1);")


def simulated_alignment(tree, params, n_sites, seed):
    full = tree_with_shared_params(tree, params)
    tensor = simulate_tree(full)
    flat = tensor.values.ravel()
    rng = np.random.default_rng(seed)
    draws = rng.choice(flat.size, size=n_sites, p=flat / flat.sum())
    data = np.array(np.unravel_index(draws, tensor.values.shape))
    alphabet = BINARY if params.family == "B" else DNA
    return Alignment(taxa=full.leaf_names, data=data, alphabet=alphabet)


class TestReflection:
    def test_inside_stays_put(self):
        spec = _family_spec("K3")
        x = np.array([0.1, 0.2, 0.3])
        assert np.array_equal(reflect_feasible(x, spec), x)

    def test_box_violation_mirrors(self):
        spec = _family_spec("JC")
        assert reflect_feasible(np.array([-0.05]), spec)[0] == pytest.approx(0.05)

    def test_simplex_violation_reflects_across_facet(self):
        spec = _family_spec("K3")
        out = reflect_feasible(np.array([0.5, 0.4, 0.3]), spec)
        assert out.sum() <= 1.0 + 1e-12
        assert out.min() >= 0.0

    def test_k2_weight_sum(self):
        spec = _family_spec("K2")
        out = reflect_feasible(np.array([0.8, 0.4]), spec)
        assert out[0] + 2 * out[1] <= 1.0 + 1e-12


class TestMaximizeLoglik:
    def test_identical_sites_push_to_boundary(self):
        # All sites agree across both taxa, so no substitution fits best.
        data = np.zeros((2, 40), dtype=int)
        aln = Alignment(taxa=("A", "B"), data=data, alphabet=DNA)
        result = maximize_loglik(OptimizationProblem(tree=CHERRY, alignment=aln,
                                                     family="JC", seed=0))
        assert result.w_star[0] == pytest.approx(0.0, abs=1e-6)
        assert result.loglik == pytest.approx(40 * np.log(0.25), abs=1e-8)

    def test_trace_is_monotone_best_so_far(self):
        aln = simulated_alignment(BALANCED, ModelParams.jc(0.1), 200, seed=11)
        result = maximize_loglik(OptimizationProblem(tree=BALANCED, alignment=aln,
                                                     family="JC", seed=0))
        logs = [t.loglik for t in result.trace]
        assert all(b >= a - 1e-12 for a, b in zip(logs, logs[1:]))
        assert result.loglik >= max(logs) - 1e-12

    def test_rerun_is_bit_identical(self):
        aln = simulated_alignment(BALANCED, ModelParams.jc(0.1), 150, seed=3)
        problem = OptimizationProblem(tree=BALANCED, alignment=aln, family="JC", seed=7)
        first = maximize_loglik(problem)
        second = maximize_loglik(problem)
        assert first == second

    def test_jc_recovery_smoke(self):
        aln = simulated_alignment(BALANCED, ModelParams.jc(0.1), 2000, seed=101)
        result = maximize_loglik(OptimizationProblem(tree=BALANCED, alignment=aln,
                                                     family="JC", seed=0))
        assert 0.08 <= result.w_star[0] <= 0.12
        assert result.converged

    def test_k2_with_fixed_second_weight(self):
        truth = ModelParams.k2(0.12, 0.2)
        aln = simulated_alignment(BALANCED, truth, 2000, seed=5)
        result = maximize_loglik(OptimizationProblem(
            tree=BALANCED, alignment=aln, family="K2", seed=0, fixed={"b": 0.2}))
        assert result.names == ("a",)
        assert abs(result.w_star[0] - 0.12) <= 0.03
        assert dict(result.fixed) == {"b": 0.2}

    def test_classical_and_quantum_objectives_agree(self):
        aln = simulated_alignment(BALANCED, ModelParams.jc(0.1), 400, seed=23)
        runs = {}
        for engine in ("classical", "quantum"):
            runs[engine] = maximize_loglik(OptimizationProblem(
                tree=BALANCED, alignment=aln, family="JC", engine=engine, seed=1))
        assert abs(runs["classical"].w_star[0] - runs["quantum"].w_star[0]) < 1e-4

    def test_family_alphabet_mismatch(self):
        aln = Alignment(taxa=("A", "B"), data=np.zeros((2, 3), dtype=int), alphabet=BINARY)
        with pytest.raises(ModelError):
            maximize_loglik(OptimizationProblem(tree=CHERRY, alignment=aln, family="K3", seed=0))

    def test_no_free_parameters_is_degenerate(self):
        aln = Alignment(taxa=("A", "B"), data=np.zeros((2, 3), dtype=int), alphabet=DNA)
        with pytest.raises(OptimizerError):
            maximize_loglik(OptimizationProblem(tree=CHERRY, alignment=aln, family="JC",
                                                seed=0, fixed={"a": 0.1}))

    def test_binary_family_fit(self):
        truth = ModelParams.binary(0.15)
        aln = simulated_alignment(CHERRY, truth, 3000, seed=9)
        result = maximize_loglik(OptimizationProblem(tree=CHERRY, alignment=aln,
                                                     family="B", seed=0))
        assert abs(result.w_star[0] - 0.15) < 0.05

    def test_per_edge_mode_beats_or_matches_shared_fit(self):
        # Heterogeneous truth: each edge gets its own weight, pre-order.
        tree = parse_newick("((A:1,B:1):1,C:1);")
        from qphylo.optimize import tree_with_edge_params
        truth = [ModelParams.jc(a) for a in (0.05, 0.25, 0.02, 0.15)]
        full = tree_with_edge_params(tree, truth)
        tensor = simulate_tree(full)
        flat = tensor.values.ravel()
        rng = np.random.default_rng(77)
        draws = rng.choice(flat.size, size=400, p=flat / flat.sum())
        data = np.array(np.unravel_index(draws, tensor.values.shape))
        aln = Alignment(taxa=full.leaf_names, data=data, alphabet=DNA)
        shared = maximize_loglik(OptimizationProblem(tree=tree, alignment=aln,
                                                     family="JC", seed=0))
        per_edge = maximize_loglik(OptimizationProblem(tree=tree, alignment=aln,
                                                       family="JC", seed=0, per_edge=True))
        assert len(per_edge.w_star) == 4
        assert per_edge.names[0] == "edge1.a"
        assert per_edge.loglik >= shared.loglik - 1e-9

    def test_document_schema(self):
        aln = simulated_alignment(CHERRY, ModelParams.jc(0.1), 50, seed=2)
        doc = maximize_loglik(OptimizationProblem(tree=CHERRY, alignment=aln,
                                                  family="JC", seed=4)).to_document()
        assert {"family", "engine", "seed", "w_star", "fixed", "log_likelihood",
                "n_eval", "converged", "trace"} == set(doc)
        assert doc["seed"] == 4
