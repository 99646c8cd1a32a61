"""Domain types for the learning process.

States, signals and actions are dense integer indices.  A trajectory (one
agent's vote sequence) is packed into a single base-``|A|`` integer with the
round-0 vote as the least significant digit, so tables indexed by
trajectories are plain dense arrays.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

TIE_TOL = 1e-12  # absolute tolerance on expected-utility differences
PROB_TOL = 1e-12  # tolerance for probability-vector validation


class ModelError(ValueError):
    """Invalid model configuration or argument."""


@dataclass(frozen=True)
class SignalModel:
    """Prior over world states plus the conditional signal law P(x|s).

    ``prior`` has one entry per state; ``likelihood[s, x]`` is the
    probability of observing signal ``x`` when the state is ``s``.  Signals
    of distinct agents are i.i.d. given the state.
    """

    prior: np.ndarray
    likelihood: np.ndarray

    def __post_init__(self):
        prior = np.asarray(self.prior, dtype=float)
        lik = np.asarray(self.likelihood, dtype=float)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "likelihood", lik)
        if prior.ndim != 1 or lik.ndim != 2 or lik.shape[0] != prior.shape[0]:
            raise ModelError("prior must be (n_states,), likelihood (n_states, n_signals)")
        if np.any(prior < 0) or abs(prior.sum() - 1.0) > PROB_TOL:
            raise ModelError("prior must be nonnegative and sum to 1")
        if np.any(lik < 0) or np.any(np.abs(lik.sum(axis=1) - 1.0) > PROB_TOL):
            raise ModelError("each likelihood row must be nonnegative and sum to 1")
        for s in range(lik.shape[0]):
            for s2 in range(s + 1, lik.shape[0]):
                if np.all(np.abs(lik[s] - lik[s2]) <= PROB_TOL):
                    raise ModelError(f"signal is uninformative: states {s} and {s2} "
                                     "have identical signal distributions")

    @property
    def n_states(self) -> int:
        return self.prior.shape[0]

    @property
    def n_signals(self) -> int:
        return self.likelihood.shape[1]

    @classmethod
    def binary_symmetric(cls, noise: float, prior: Sequence[float] | None = None) -> "SignalModel":
        """Two states, two signals, P(x != s) = noise."""
        if not 0.0 <= noise < 0.5:
            raise ModelError(f"binary symmetric noise must be in [0, 0.5), got {noise}")
        if prior is None:
            prior = (0.5, 0.5)
        lik = np.array([[1.0 - noise, noise], [noise, 1.0 - noise]])
        return cls(prior=np.asarray(prior, dtype=float), likelihood=lik)

    def config_hash(self) -> str:
        payload = json.dumps(
            {"prior": self.prior.tolist(), "likelihood": self.likelihood.tolist()},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def signal_posterior(model: SignalModel, x: int) -> np.ndarray:
    """Posterior over states after observing a single private signal.

    Returns the vector proportional to prior(s) * P(x|s), normalized.
    """
    if not 0 <= x < model.n_signals:
        raise ModelError(f"signal index {x} out of range")
    weights = model.prior * model.likelihood[:, x]
    total = weights.sum()
    if total <= 0.0:
        raise ModelError(f"signal {x} has probability zero under every state")
    return weights / total


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """A packed vote sequence covering rounds 0..horizon."""

    horizon: int
    alphabet_size: int
    code: int

    def __post_init__(self):
        if self.horizon < 0:
            raise ModelError("trajectory horizon must be >= 0")
        if self.alphabet_size < 2:
            raise ModelError("alphabet size must be >= 2")
        if not 0 <= self.code < self.alphabet_size ** (self.horizon + 1):
            raise ModelError(f"code {self.code} out of range for horizon {self.horizon}")


def encode_trajectory(seq: Sequence[int], alphabet_size: int) -> Trajectory:
    """Pack an action sequence; round 0 is the least significant digit."""
    if len(seq) == 0:
        raise ModelError("cannot encode an empty sequence")
    code = 0
    for t, a in enumerate(seq):
        if not 0 <= a < alphabet_size:
            raise ModelError(f"entry {a} at round {t} outside alphabet of size {alphabet_size}")
        code += a * alphabet_size ** t
    return Trajectory(horizon=len(seq) - 1, alphabet_size=alphabet_size, code=code)


def decode_trajectory(traj: Trajectory) -> tuple[int, ...]:
    code = traj.code
    out = []
    for _ in range(traj.horizon + 1):
        out.append(code % traj.alphabet_size)
        code //= traj.alphabet_size
    return tuple(out)


def trajectory_prefix(traj: Trajectory, horizon: int) -> Trajectory:
    """Truncate to rounds 0..horizon (horizon <= traj.horizon)."""
    if not 0 <= horizon <= traj.horizon:
        raise ModelError(f"prefix horizon {horizon} out of range")
    return Trajectory(horizon=horizon, alphabet_size=traj.alphabet_size,
                      code=traj.code % traj.alphabet_size ** (horizon + 1))


def prefix_code(code, horizon: int, alphabet_size: int):
    """Prefix of packed code(s) through the given horizon; horizon -1 maps to 0."""
    return code % alphabet_size ** (horizon + 1)


def round_digit(code, t: int, alphabet_size: int):
    """Round-t vote extracted from packed code(s)."""
    return (code // alphabet_size ** t) % alphabet_size


# ---------------------------------------------------------------------------
# Utilities, tie-breaking and decisions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UtilityTable:
    """u(a, s): payoff of action a in state s.  Default is identity payoff."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 2:
            raise ModelError("utility table must be 2-d (actions x states)")
        if not np.all(np.isfinite(vals)):
            raise ModelError("utility values must be finite")

    @property
    def n_actions(self) -> int:
        return self.values.shape[0]

    @classmethod
    def identity(cls, n: int) -> "UtilityTable":
        return cls(values=np.eye(n))


class TieBreak(enum.Enum):
    OWN_SIGNAL = "own_signal"
    LOWEST_INDEX = "lowest_index"
    UNIFORM_RANDOM = "uniform"


@dataclass(frozen=True)
class TieBreakRule:
    """How exact expected-utility ties are resolved.

    OWN_SIGNAL needs a signal -> action correspondence; identity is assumed
    when the alphabets have equal size and none is given.
    """

    variant: TieBreak = TieBreak.OWN_SIGNAL
    signal_to_action: tuple[int, ...] | None = None

    def action_for_signal(self, x: int, n_actions: int) -> int:
        if self.signal_to_action is not None:
            return self.signal_to_action[x]
        if x >= n_actions:
            raise ModelError("OwnSignal tie-break without a signal->action correspondence")
        return x


def map_decision(
    posterior: np.ndarray,
    utility: UtilityTable,
    tiebreak: TieBreakRule,
    own_signal: int | None = None,
):
    """Myopically optimal action for a posterior over states.

    Returns ``argmax_a sum_s u(a,s) posterior(s)``; with identity payoff this
    is the MAP state.  Expected utilities within TIE_TOL of the maximum are
    treated as exactly tied and resolved by the tie-break rule.  Deterministic
    rules return an action index; the uniform-random rule returns a kernel
    ``{action: probability}`` over the tied set.
    """
    posterior = np.asarray(posterior, dtype=float)
    if utility.n_actions == 0:
        raise ModelError("empty action set")
    if abs(posterior.sum() - 1.0) > 1e-9:
        raise ModelError("posterior does not sum to 1")
    eu = utility.values @ posterior
    tied = np.flatnonzero(eu >= eu.max() - TIE_TOL)
    return resolve_tie(tied, tiebreak, own_signal, utility.n_actions)


# ---------------------------------------------------------------------------
# Update rules
# ---------------------------------------------------------------------------

KernelFn = Callable[..., dict[int, float]]


@dataclass(frozen=True)
class UpdateRule:
    """How an agent turns its information into the next vote.

    ``bayesian`` computes the posterior and maximizes expected utility;
    ``majority`` adopts the majority of the neighbors' previous votes with a
    fair coin on ties; ``custom`` supplies, per round, a kernel
    P(action | x, neighbor trajectories, own trajectory).
    """

    variant: str = "bayesian"
    tie_break: TieBreakRule = TieBreakRule()
    utility: UtilityTable | None = None
    kernel_fn: KernelFn | None = None

    def __post_init__(self):
        if self.variant not in ("bayesian", "majority", "custom"):
            raise ModelError(f"unknown update rule {self.variant!r}")
        if self.variant == "custom" and self.kernel_fn is None:
            raise ModelError("custom rule needs a kernel function")

    @property
    def stochastic_ties(self) -> bool:
        return self.tie_break.variant is TieBreak.UNIFORM_RANDOM

    def deterministic_for_degree(self, degree: int) -> bool:
        """Whether the rule is a deterministic function for this many neighbors."""
        if self.variant == "bayesian":
            return not self.stochastic_ties
        if self.variant == "majority":
            return degree % 2 == 1
        return False


def resolve_tie(tied: Sequence[int], tiebreak: TieBreakRule,
                own_signal: int | None, n_actions: int):
    """Pick from a tied action set; deterministic variants return an index."""
    tied = sorted(int(a) for a in tied)
    if len(tied) == 1:
        return tied[0]
    if tiebreak.variant is TieBreak.LOWEST_INDEX:
        return tied[0]
    if tiebreak.variant is TieBreak.OWN_SIGNAL:
        if own_signal is None:
            raise ModelError("OwnSignal tie-break requires the agent's signal")
        choice = tiebreak.action_for_signal(own_signal, n_actions)
        return choice if choice in tied else tied[0]
    return {a: 1.0 / len(tied) for a in tied}


def round0_kernel(model: SignalModel, rule: "UpdateRule",
                  n_actions: int) -> list[list[tuple[int, float]]]:
    """Per-signal kernel over the round-0 vote, as [(action, prob), ...]."""
    out = []
    for x in range(model.n_signals):
        if rule.variant == "bayesian":
            utility = rule.utility or UtilityTable.identity(model.n_states)
            dec = map_decision(signal_posterior(model, x), utility,
                               rule.tie_break, own_signal=x)
            out.append([(dec, 1.0)] if isinstance(dec, int) else sorted(dec.items()))
        elif rule.variant == "majority":
            out.append([(rule.tie_break.action_for_signal(x, n_actions), 1.0)])
        else:
            kern = validate_kernel(rule.kernel_fn(0, x, (), None), n_actions)
            out.append(sorted((a, p) for a, p in kern.items() if p > 0))
    return out


def validate_kernel(kernel: dict[int, float], n_actions: int) -> dict[int, float]:
    total = 0.0
    for a, p in kernel.items():
        if not 0 <= a < n_actions:
            raise ModelError(f"kernel action {a} out of range")
        if p < 0:
            raise ModelError("kernel probabilities must be nonnegative")
        total += p
    if abs(total - 1.0) > PROB_TOL:
        raise ModelError(f"kernel row sums to {total}, expected 1")
    return kernel


def majority_kernel(votes: Sequence[int]) -> dict[int, float]:
    """Majority of binary votes; a zero margin yields the fair-coin kernel."""
    if len(votes) == 0:
        raise ModelError("majority update needs at least one neighbor vote")
    ones = int(np.sum(np.asarray(votes) == 1))
    margin = 2 * ones - len(votes)
    if margin > 0:
        return {1: 1.0}
    if margin < 0:
        return {0: 1.0}
    return {0: 0.5, 1: 0.5}


# ---------------------------------------------------------------------------
# JSON configuration
# ---------------------------------------------------------------------------

_TIE_NAMES = {
    "own_signal": TieBreak.OWN_SIGNAL,
    "lowest_index": TieBreak.LOWEST_INDEX,
    "uniform": TieBreak.UNIFORM_RANDOM,
}


def model_from_json(doc: dict) -> tuple[SignalModel, TieBreakRule]:
    """Read a model configuration document.

    Either a full specification (states/signals/prior/likelihood) or the
    shorthand {"noise": delta} for the binary symmetric model.
    """
    tie_name = doc.get("tie_break", "own_signal")
    if tie_name not in _TIE_NAMES:
        raise ModelError(f"unknown tie_break {tie_name!r}")
    tie = TieBreakRule(variant=_TIE_NAMES[tie_name])
    if "noise" in doc:
        model = SignalModel.binary_symmetric(float(doc["noise"]),
                                             prior=doc.get("prior"))
        return model, tie
    try:
        prior = doc["prior"]
        lik = doc["likelihood"]
    except KeyError as exc:
        raise ModelError(f"model document missing field {exc}") from exc
    model = SignalModel(prior=np.asarray(prior, float), likelihood=np.asarray(lik, float))
    if "states" in doc and int(doc["states"]) != model.n_states:
        raise ModelError("declared state count does not match the prior length")
    if "signals" in doc and int(doc["signals"]) != model.n_signals:
        raise ModelError("declared signal count does not match the likelihood width")
    return model, tie


def model_to_json(model: SignalModel, tie: TieBreakRule) -> dict:
    return {
        "states": model.n_states,
        "signals": model.n_signals,
        "prior": model.prior.tolist(),
        "likelihood": model.likelihood.tolist(),
        "tie_break": tie.variant.value,
    }
