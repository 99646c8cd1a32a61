import numpy as np
import pytest
from hypothesis import given, strategies as st

from cavitree.model import (
    ModelError,
    SignalModel,
    TieBreak,
    TieBreakRule,
    Trajectory,
    UpdateRule,
    UtilityTable,
    decode_trajectory,
    encode_trajectory,
    majority_kernel,
    map_decision,
    model_from_json,
    model_to_json,
    signal_posterior,
    trajectory_prefix,
    validate_kernel,
)

OWN = TieBreakRule(variant=TieBreak.OWN_SIGNAL)
IDENT2 = UtilityTable.identity(2)


# -- trajectories -----------------------------------------------------------

def test_single_entry_identity():
    traj = encode_trajectory([1], 2)
    assert traj.code == 1 and traj.horizon == 0


def test_round_trip_example():
    assert decode_trajectory(encode_trajectory([0, 1, 1], 2)) == (0, 1, 1)


def test_prefix_truncation():
    traj = encode_trajectory([0, 1, 1], 2)
    assert decode_trajectory(trajectory_prefix(traj, 1)) == (0, 1)


def test_out_of_alphabet_entry_rejected():
    with pytest.raises(ModelError):
        encode_trajectory([0, 2], 2)


@pytest.mark.parametrize("alph", [2, 3])
def test_round_trip_exhaustive_horizon_12(alph):
    # Exhaustive identity of the positional encoding for every horizon <= 12,
    # plus agreement of the public codec with that definition (exhaustive for
    # short horizons, sampled for the rest).
    rng = np.random.default_rng(0)
    for t in range(13):
        codes = np.arange(alph ** (t + 1), dtype=np.int64)
        digits = [(codes // alph ** r) % alph for r in range(t + 1)]
        rebuilt = sum(dig * alph ** r for r, dig in enumerate(digits))
        assert np.array_equal(rebuilt, codes)
        if t <= 6:
            sample = codes
        else:
            sample = rng.choice(codes, size=200, replace=False)
        for code in sample:
            seq = decode_trajectory(Trajectory(t, alph, int(code)))
            assert encode_trajectory(seq, alph).code == int(code)
            assert seq == tuple(int(d[code]) for d in digits)


def test_prefix_matches_first_entries():
    for alph in (2, 3):
        for t in range(1, 6):
            for code in range(alph ** (t + 1)):
                traj = Trajectory(t, alph, code)
                full = decode_trajectory(traj)
                for h in range(t + 1):
                    assert decode_trajectory(trajectory_prefix(traj, h)) == full[:h + 1]


# -- signal model -----------------------------------------------------------

def test_prior_must_normalize():
    with pytest.raises(ModelError):
        SignalModel(prior=np.array([0.6, 0.6]),
                    likelihood=np.array([[0.9, 0.1], [0.2, 0.8]]))


def test_informative_rows_required():
    with pytest.raises(ModelError):
        SignalModel(prior=np.array([0.5, 0.5]),
                    likelihood=np.array([[0.7, 0.3], [0.7, 0.3]]))


def test_signal_posterior_symmetric_noise(model15):
    np.testing.assert_allclose(signal_posterior(model15, 0), [0.85, 0.15])


def test_signal_posterior_noiseless():
    model = SignalModel(prior=np.array([0.5, 0.5]), likelihood=np.eye(2))
    np.testing.assert_allclose(signal_posterior(model, 0), [1.0, 0.0])


def test_signal_posterior_skewed_prior():
    # Direct Bayes evaluation: (0.9 * 0.15, 0.1 * 0.85) normalized.
    model = SignalModel.binary_symmetric(0.15, prior=(0.9, 0.1))
    expected = np.array([0.9 * 0.15, 0.1 * 0.85])
    expected /= expected.sum()
    got = signal_posterior(model, 1)
    np.testing.assert_allclose(got, expected, rtol=1e-15)
    np.testing.assert_allclose(got, [0.6136, 0.3864], atol=5e-5)


def test_signal_posterior_zero_normalizer():
    model = SignalModel(prior=np.array([1.0, 0.0]),
                        likelihood=np.array([[1.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(ModelError):
        signal_posterior(model, 1)


@given(st.floats(0.01, 0.49))
def test_flip_symmetry_of_posterior(noise):
    model = SignalModel.binary_symmetric(noise)
    for x in (0, 1):
        a = signal_posterior(model, x)
        b = signal_posterior(model, 1 - x)[::-1]
        np.testing.assert_allclose(a, b, rtol=1e-14)


# -- decisions --------------------------------------------------------------

def test_strict_argmax():
    assert map_decision(np.array([0.7, 0.3]), IDENT2, OWN, own_signal=1) == 0


def test_own_signal_tie():
    assert map_decision(np.array([0.5, 0.5]), IDENT2, OWN, own_signal=1) == 1
    assert map_decision(np.array([0.5, 0.5]), IDENT2, OWN, own_signal=0) == 0


def test_uniform_tie_kernel(uniform_ties):
    kern = map_decision(np.array([0.5, 0.5]), IDENT2, uniform_ties, own_signal=0)
    assert kern == {0: 0.5, 1: 0.5}


def test_lowest_index_tie():
    rule = TieBreakRule(variant=TieBreak.LOWEST_INDEX)
    assert map_decision(np.array([0.5, 0.5]), IDENT2, rule) == 0


def test_concentrated_posterior_returns_state():
    for n in (2, 3, 5):
        ident = UtilityTable.identity(n)
        for k in range(n):
            post = np.zeros(n)
            post[k] = 1.0
            assert map_decision(post, ident, OWN, own_signal=0) == k


def test_empty_action_set():
    with pytest.raises(ModelError):
        map_decision(np.array([1.0]), UtilityTable(np.zeros((0, 1))), OWN, 0)


def test_own_signal_needs_correspondence():
    rule = TieBreakRule(variant=TieBreak.OWN_SIGNAL)
    with pytest.raises(ModelError):
        rule.action_for_signal(5, n_actions=2)


def test_general_payoff_decision():
    # Non-identity payoff: action 1 is safe, action 0 pays only in state 0.
    util = UtilityTable(np.array([[1.0, 0.0], [0.6, 0.6]]))
    assert map_decision(np.array([0.5, 0.5]), util, OWN, 0) == 1
    assert map_decision(np.array([0.9, 0.1]), util, OWN, 0) == 0


# -- rules and kernels ------------------------------------------------------

def test_majority_kernel_examples():
    assert majority_kernel([1, 1, 0]) == {1: 1.0}
    assert majority_kernel([1, 0]) == {0: 0.5, 1: 0.5}
    assert majority_kernel([0, 0, 0, 0, 0]) == {0: 1.0}
    with pytest.raises(ModelError):
        majority_kernel([])


def test_kernel_validation():
    assert validate_kernel({0: 0.5, 1: 0.5}, 2)
    with pytest.raises(ModelError):
        validate_kernel({0: 0.4, 1: 0.4}, 2)
    with pytest.raises(ModelError):
        validate_kernel({2: 1.0}, 2)


def test_update_rule_validation():
    with pytest.raises(ModelError):
        UpdateRule(variant="mystery")
    with pytest.raises(ModelError):
        UpdateRule(variant="custom")
    assert UpdateRule(variant="majority").deterministic_for_degree(3)
    assert not UpdateRule(variant="majority").deterministic_for_degree(2)


# -- JSON -------------------------------------------------------------------

def test_model_json_round_trip(model15):
    doc = model_to_json(model15, OWN)
    model, tie = model_from_json(doc)
    np.testing.assert_allclose(model.likelihood, model15.likelihood)
    assert tie.variant is TieBreak.OWN_SIGNAL


def test_model_json_noise_shorthand():
    model, tie = model_from_json({"noise": 0.2, "tie_break": "uniform"})
    np.testing.assert_allclose(model.likelihood, [[0.8, 0.2], [0.2, 0.8]])
    assert tie.variant is TieBreak.UNIFORM_RANDOM


def test_model_json_bad_tie():
    with pytest.raises(ModelError):
        model_from_json({"noise": 0.2, "tie_break": "coin"})
