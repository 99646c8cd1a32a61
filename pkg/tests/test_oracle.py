import math

import numpy as np
import pytest

from cavitree.model import ModelError, TieBreak, TieBreakRule, UpdateRule
from cavitree.oracle import (
    feasible_set,
    oracle_decision_tables,
    oracle_error_probability,
    unroll,
)
from cavitree.trees import BudgetError, TreeGraph, path_graph, star_graph

SINGLE = TreeGraph(n=1)


def binom_tail(n, k0, q):
    return sum(math.comb(n, k) * q ** k * (1 - q) ** (n - k) for k in range(k0, n + 1))


def test_single_node_round0(model15, bayes):
    tensor = unroll(SINGLE, model15, bayes, 0)
    assert oracle_error_probability(tensor, 0, 0) == pytest.approx(0.15, rel=1e-12)
    # MAP of the own signal is the signal itself
    assert tensor.trajs[0][0, 0] == 0 and tensor.trajs[0][0, 1] == 1


def test_two_node_path_round1(model15, bayes):
    # Disagreement ties resolve to the own signal, so the error stays at noise.
    tensor = unroll(path_graph(2), model15, bayes, 1)
    for node in (0, 1):
        assert oracle_error_probability(tensor, node, 1) == pytest.approx(0.15, rel=1e-12)


def test_star4_center_round1(model15, bayes):
    tensor = unroll(star_graph(4), model15, bayes, 1)
    target = binom_tail(3, 2, 0.15)  # exhaustive enumeration collapses to this
    assert target == pytest.approx(0.06075, abs=1e-9)
    assert oracle_error_probability(tensor, 0, 1) == pytest.approx(target, rel=1e-12)


def test_feasible_set_own_signal_only(model15, bayes):
    graph = path_graph(3)
    tensor = unroll(graph, model15, bayes, 2)
    for x in (0, 1):
        idx = feasible_set(tensor, 1, x, None)
        assert len(idx) == 2 ** (graph.n - 1)
        assert all(tensor.signal_digits[1, y] == x for y in idx)
    idx = feasible_set(tensor, 0, 1, (0,), 0)
    assert all(tensor.signal_digits[0, y] == 1 for y in idx)


def test_feasible_set_two_node_initial_vote(model15, bayes):
    tensor = unroll(path_graph(2), model15, bayes, 1)
    idx = feasible_set(tensor, 0, 0, (1,), 0)
    # x_1 = +, observed sigma_2(0) = -: exactly the signal vector (+, -).
    assert idx.tolist() == [int(np.flatnonzero(
        (tensor.signal_digits[0] == 0) & (tensor.signal_digits[1] == 1))[0])]
    assert len(idx) == 1


@pytest.mark.parametrize("graph", [path_graph(3), path_graph(5), star_graph(5),
                                   path_graph(6)])
def test_feasible_sets_partition(graph, model15, bayes):
    t_max = 3
    tensor = unroll(graph, model15, bayes, t_max)
    n_vec = tensor.signal_digits.shape[1]
    for i in range(graph.n):
        nbrs = graph.observed[i]
        for t in range(t_max + 1):
            for x in (0, 1):
                pool = set(np.flatnonzero(tensor.signal_digits[i] == x).tolist())
                seen = set()
                observed_values = {
                    tuple(int(tensor.trajs[t][j, y]) for j in nbrs)
                    for y in range(n_vec) if tensor.signal_digits[i, y] == x}
                for obs in observed_values:
                    part = set(feasible_set(tensor, i, x, obs, t).tolist())
                    assert part and not (part & seen)
                    seen |= part
                assert seen == pool


def test_error_nonincreasing(model15, bayes):
    for graph in (path_graph(4), star_graph(5)):
        tensor = unroll(graph, model15, bayes, 3)
        for node in range(graph.n):
            errs = [oracle_error_probability(tensor, node, t) for t in range(4)]
            assert all(errs[t + 1] <= errs[t] + 1e-12 for t in range(3))


def test_relabeling_equivariance(model15, bayes):
    graph = TreeGraph(n=4, edges=((0, 1), (1, 2), (2, 3)))
    relabeled = TreeGraph(n=4, edges=((3, 2), (2, 1), (1, 0)))
    a = unroll(graph, model15, bayes, 2)
    b = unroll(relabeled, model15, bayes, 2)
    for node in range(4):
        assert oracle_error_probability(a, node, 2) == pytest.approx(
            oracle_error_probability(b, 3 - node, 2), rel=1e-12)


def test_majority_profiles_normalized(model15, majority):
    tensor = unroll(path_graph(3), model15, majority, 2)
    for profiles in tensor.profiles:
        assert sum(profiles.values()) == pytest.approx(1.0, abs=1e-12)


def test_budget_guard(model15, bayes):
    with pytest.raises(BudgetError):
        unroll(path_graph(12), model15, bayes, 3, budget=1000)


def test_stochastic_bayesian_rejected(model15):
    rule = UpdateRule(variant="bayesian",
                      tie_break=TieBreakRule(variant=TieBreak.UNIFORM_RANDOM))
    with pytest.raises(ModelError):
        unroll(path_graph(2), model15, rule, 1)


def test_decision_tables_recorded(model15, bayes):
    tensor = unroll(path_graph(2), model15, bayes, 1)
    tables = oracle_decision_tables(tensor)
    assert tables[0][0][(0, ())] == 0
    # round-1 entries hold the full two-round trajectory
    assert tables[0][1][(0, (0,))] == 0  # agree on 0: stay at 0
    assert tables[0][1][(0, (1,))] == 0  # disagree: keep own signal
