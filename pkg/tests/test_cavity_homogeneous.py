import itertools

import numpy as np
import pytest

from cavitree.cavity import RegularTreeEngine, cavity_step
from cavitree.cavity.core import round0_table
from cavitree.model import ModelError, UpdateRule
from cavitree.oracle import unroll
from cavitree.trees import path_graph


def test_initial_cavity_matches_signal_law(model15, bayes):
    q0, drift = cavity_step(None, round0_table(model15, bayes, 2), 0, 5, model15)
    assert drift == 0.0
    np.testing.assert_allclose(q0[:, 0, 0], [0.85, 0.15], rtol=1e-15)
    np.testing.assert_allclose(q0[:, 0, 1], [0.15, 0.85], rtol=1e-15)


def test_columns_normalized_every_round(model15, bayes):
    engine = RegularTreeEngine(model15, 3, bayes)
    engine.run(3)
    for q in engine.q:
        np.testing.assert_allclose(q.sum(axis=0), 1.0, atol=1e-12)


def test_q1_matches_zombie_enumeration(model15, bayes):
    """Brute-force zombie check of Q^1 for d=5: fix the observer's trajectory,
    enumerate every signal assignment in the depth-1 neighborhood of j."""
    d = 5
    engine = RegularTreeEngine(model15, d, bayes)
    engine.run(2)
    lik = model15.likelihood
    expected = np.zeros_like(engine.q[1])
    for s in (0, 1):
        for tau0 in (0, 1):
            for x_j in (0, 1):
                for kids in itertools.product((0, 1), repeat=d - 1):
                    w = lik[s, x_j] * np.prod([lik[s, c] for c in kids])
                    # round 0: vote the signal; round 1: weighted majority of
                    # (own signal, zombie vote, child votes), ties to own signal
                    votes = (tau0,) + kids
                    odds = np.log(0.85 / 0.15) * (
                        (1 if x_j == 0 else -1)
                        + sum(1 if v == 0 else -1 for v in votes))
                    if abs(odds) < 1e-12:
                        vote1 = x_j
                    else:
                        vote1 = 0 if odds > 0 else 1
                    sigma = x_j + 2 * vote1
                    expected[sigma, tau0, s] += w
    np.testing.assert_allclose(engine.q[1], expected, atol=1e-13)


def test_posterior_round0_is_signal_posterior(model15, bayes):
    engine = RegularTreeEngine(model15, 5, bayes)
    np.testing.assert_allclose(engine.posterior(0, (0,) * 5, 0), [0.85, 0.15],
                               rtol=1e-15)


def test_posterior_round1_closed_form(model15, bayes):
    engine = RegularTreeEngine(model15, 5, bayes)
    engine.run(1)
    post = engine.posterior(0, (0, 0, 0, 0, 0), 1)
    expected = 0.85 ** 6 / (0.85 ** 6 + 0.15 ** 6)
    assert post[0] == pytest.approx(expected, rel=1e-13)
    assert post[0] == pytest.approx(0.99997, abs=5e-6)


def test_two_node_path_posterior_matches_oracle(model15, bayes):
    """d=1 homogeneous engine against the brute force on the 2-node path."""
    engine = RegularTreeEngine(model15, 1, bayes)
    engine.run(3)
    tensor = unroll(path_graph(2), model15, bayes, 3)
    for t in range(1, 4):
        for x in (0, 1):
            for obs in range(2 ** t):
                idx = np.flatnonzero(
                    (tensor.signal_digits[0] == x)
                    & (tensor.trajs[t - 1][1] == obs))
                if len(idx) == 0:
                    continue  # unreachable zombie observation
                w = model15.prior * np.array(
                    [tensor.signal_probs[s][idx].sum() for s in (0, 1)])
                np.testing.assert_allclose(
                    engine.posterior(x, (obs,), t), w / w.sum(), atol=1e-12)


def test_advance_twice_gives_table1_round2(model15, bayes, assert_rel):
    engine = RegularTreeEngine(model15, 5, bayes)
    engine.advance()
    engine.advance()
    assert_rel(engine.error_probability(2), 7.6e-4, label="round-2 error")


def test_errors_trivial_round0(model15, bayes, majority):
    for rule in (bayes, majority):
        engine = RegularTreeEngine(model15, 3, rule)
        engine.advance()
        assert engine.error_probability(0) == pytest.approx(0.15, rel=1e-14)


def test_majority_d5_round4(model15, majority, assert_rel):
    engine = RegularTreeEngine(model15, 5, majority)
    engine.run(4)
    assert_rel(engine.error_probability(4), 2.5e-10, label="majority round 4")


def test_bayes_d7_noise30_round3(model30, bayes, assert_rel):
    engine = RegularTreeEngine(model30, 7, bayes)
    engine.run(3)
    assert_rel(engine.error_probability(3), 4.4e-6, label="d=7 round 3")


def test_condition_state_flip_symmetric(model15, bayes):
    engine = RegularTreeEngine(model15, 3, bayes)
    engine.run(2)
    a = engine.error_probability(2, condition_state=0)
    b = engine.error_probability(2, condition_state=1)
    avg = engine.error_probability(2)
    assert a == pytest.approx(b, rel=1e-12)
    assert avg == pytest.approx((a + b) / 2, rel=1e-12)


def test_prefix_consistency_of_decisions(model15, bayes):
    engine = RegularTreeEngine(model15, 3, bayes)
    engine.run(3)
    for t in range(1, 4):
        cur = engine.decision_table(t)
        prev = engine.decision_table(t - 1)
        assert cur.prefix_consistent_with(prev)


def test_stochastic_rule_rejected_on_even_degree(model15):
    with pytest.raises(ModelError):
        RegularTreeEngine(model15, 4, UpdateRule(variant="majority"))


def test_error_requires_advance(model15, bayes):
    engine = RegularTreeEngine(model15, 3, bayes)
    with pytest.raises(ModelError):
        engine.error_probability(1)


def test_ops_counter_within_complexity_envelope(model15, bayes):
    """Sanity check of the 2^(O(t d)) effort claim via operation counters."""
    d = 3
    engine = RegularTreeEngine(model15, d, bayes)
    engine.run(4)
    base = engine.ops[1] / 2.0 ** (2 * (d + 1))
    for t in range(1, 4):
        bound = 4.0 * base * 2.0 ** ((t + 1) * (d + 1))
        assert engine.ops[t] <= bound
