"""Predictive rules as executable objects.

A rule is a triple (initial state, update, predict).  The law of the whole
process follows from the chain of one-step-ahead predictions, so a rule
alone is enough to simulate paths, condition on data and, on finite
spaces, evaluate exact joint probabilities.

States are immutable: ``update`` returns a new state and never touches the
old one, so a conditioned state can be branched into many futures.

Rules that can advance many independent chains in lockstep expose the
*batch protocol* (``draws_per_step`` and the ``batch_*`` methods).  A rule
that does so must consume exactly ``draws_per_step`` uniforms per step in
:meth:`PredictiveRule.sample_next` and turn them into the same point the
batched step would, so single-chain and batched simulation agree exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import BayesPredError, ConfigurationError, RuleUpdateError, UnsupportedOperationError
from .measures import (
    AtomicMixture,
    DiscreteDistribution,
    RandomSource,
    SampleSpace,
    eval_cdf,
    point_mass_of,
    sample,
)


class PredictiveRule:
    """Base class of all predictive rules.

    Subclasses set ``space`` and ``name`` and implement ``initial_state``,
    ``update`` and ``predict``.  Every state carries its step counter ``n``.
    """

    name = "rule"
    space: SampleSpace
    draws_per_step: int | None = None  # set by rules implementing the batch protocol

    def initial_state(self):
        raise NotImplementedError

    def update(self, state, x):
        raise NotImplementedError

    def predict(self, state) -> AtomicMixture | DiscreteDistribution:
        raise NotImplementedError

    # overridable shortcuts -------------------------------------------------
    def sample_next(self, state, rng: RandomSource):
        return sample(self.predict(state), rng)

    def prob(self, state, x) -> float:
        return point_mass_of(self.predict(state), x)

    def cdf(self, state, grid) -> np.ndarray:
        return np.asarray(eval_cdf(self.predict(state), np.asarray(grid, dtype=float)), dtype=float)

    def params(self) -> dict:
        """JSON-friendly description used in run metadata."""
        return {"rule": self.name}

    @property
    def supports_batch(self):
        return self.draws_per_step is not None

    # batch protocol --------------------------------------------------------
    def batch_pack(self, states):
        raise UnsupportedOperationError(f"{self.name} has no batch simulation")

    def batch_step(self, packed, u):
        raise UnsupportedOperationError(f"{self.name} has no batch simulation")

    def batch_unpack(self, packed):
        raise UnsupportedOperationError(f"{self.name} has no batch simulation")

    def batch_cdf(self, packed, grid):
        raise UnsupportedOperationError(f"{self.name} has no batch simulation")

    def batch_empirical_cdf(self, packed, grid):
        raise UnsupportedOperationError(f"{self.name} has no batch simulation")


@dataclass(frozen=True)
class ChainPath:
    """Observations of a simulated chain, plus optional cdf snapshots.

    ``snapshots[m]`` is the predictive distribution function after ``m``
    observations, evaluated on ``grid``; row 0 is the prior.
    """

    observations: tuple
    grid: np.ndarray | None = None
    snapshots: np.ndarray | None = None
    final_state: Any = field(default=None, compare=False, repr=False)

    def __len__(self):
        return len(self.observations)


def step(rule: PredictiveRule, state, x, position=None):
    """Validate ``x`` and apply one update, checking the counter discipline."""
    rule.space.validate(x, position)
    new = rule.update(state, x)
    if new.n != state.n + 1:
        raise ConfigurationError(f"{rule.name}: update must advance n by exactly one")
    return new


def condition(rule: PredictiveRule, data: Sequence, state=None):
    """Fold ``update`` over ``data`` in order, starting from the prior state."""
    state = rule.initial_state() if state is None else state
    for i, x in enumerate(data):
        try:
            state = step(rule, state, x, position=i)
        except (ConfigurationError, RuleUpdateError):
            raise
        except BayesPredError as exc:
            raise RuleUpdateError(i, exc) from exc
    return state


def simulate_chain(rule: PredictiveRule, n_steps: int, rng: RandomSource, grid=None, state=None) -> ChainPath:
    """Forward-simulate ``n_steps`` observations by drawing each from the current predictive."""
    if n_steps < 0:
        raise ConfigurationError("n_steps must be >= 0")
    state = rule.initial_state() if state is None else state
    grid_arr = None if grid is None else np.asarray(grid, dtype=float)
    snaps = []
    if grid_arr is not None:
        snaps.append(rule.cdf(state, grid_arr))
    obs = []
    for m in range(n_steps):
        x = rule.sample_next(state, rng)
        try:
            state = rule.update(state, x)
        except BayesPredError as exc:
            raise RuleUpdateError(m, exc) from exc
        obs.append(x)
        if grid_arr is not None:
            snaps.append(rule.cdf(state, grid_arr))
    return ChainPath(tuple(obs), grid_arr, np.array(snaps) if grid_arr is not None else None, state)


def _require_finite(rule):
    if rule.space.support is None:
        raise UnsupportedOperationError(f"{rule.name}: exact joint probabilities need a finite sample space")


def log_joint_prob(rule: PredictiveRule, sequence: Sequence, state=None) -> float:
    """Log of the chain factorisation prod_m P_{m-1}({x_m} | x_{1:m-1})."""
    _require_finite(rule)
    if len(sequence) == 0:
        raise ConfigurationError("sequence must be nonempty")
    state = rule.initial_state() if state is None else state
    total = 0.0
    for i, x in enumerate(sequence):
        rule.space.validate(x, i)
        p = rule.prob(state, x)
        if p <= 0.0:
            return -math.inf
        total += math.log(p)
        state = rule.update(state, x)
    return total


def joint_prob(rule: PredictiveRule, sequence: Sequence, state=None) -> float:
    """Exact probability of ``sequence`` on a finite space."""
    return math.exp(log_joint_prob(rule, sequence, state))


def enumerate_joint(rule: PredictiveRule, length: int, state=None) -> dict:
    """Joint probabilities of every sequence of ``length`` points.

    Depth-first, so each prefix is updated once.  Sequences of zero
    probability are included with probability 0.
    """
    _require_finite(rule)
    support = rule.space.support
    state = rule.initial_state() if state is None else state
    out = {}

    def visit(prefix, st, logp):
        if len(prefix) == length:
            out[prefix] = math.exp(logp)
            return
        for x in support:
            p = rule.prob(st, x)
            if p <= 0.0:
                _fill_zero(prefix + (x,), length, support, out)
                continue
            visit(prefix + (x,), rule.update(st, x), logp + math.log(p))

    visit((), state, 0.0)
    return out


def _fill_zero(prefix, length, support, out):
    if len(prefix) == length:
        out[prefix] = 0.0
        return
    for x in support:
        _fill_zero(prefix + (x,), length, support, out)


def predictive_table(rule: PredictiveRule, state) -> np.ndarray:
    """Predictive masses on the finite support, in support order."""
    _require_finite(rule)
    return np.array([rule.prob(state, x) for x in rule.space.support])


# ---------------------------------------------------------------------------
# simple rules

@dataclass(frozen=True)
class CountState:
    n: int = 0


class IidRule(PredictiveRule):
    """Independent draws from a fixed law: the predictive never learns."""

    name = "iid"

    def __init__(self, base):
        self.base = base
        self.measure = base if isinstance(base, DiscreteDistribution) else AtomicMixture.from_base(base)
        self.space = base.space
        if isinstance(base, DiscreteDistribution) and base.space.support is None:
            self.space = SampleSpace(base.space.kind, base.space.dim, base.labels)

    def initial_state(self):
        return CountState(0)

    def update(self, state, x):
        return CountState(state.n + 1)

    def predict(self, state):
        return self.measure

    def params(self):
        return {"rule": self.name, "base": self.base.description}


@dataclass(frozen=True)
class RecencyState:
    n: int = 0
    last: Any = None


class RecencyRule(PredictiveRule):
    """Order-dependent rule: extra mass on the most recent observation only.

    ``P_n = (1 - w) P_0 + w * delta_{x_n}`` for ``n >= 1``.  It is neither
    exchangeable nor c.i.d., which makes it a useful negative control.
    """

    name = "recency"

    def __init__(self, base: DiscreteDistribution, weight=0.5):
        if not 0.0 < weight < 1.0:
            raise ConfigurationError("weight must lie in (0, 1)")
        self.base = base
        self.weight = float(weight)
        self.space = SampleSpace(base.space.kind, base.space.dim, base.labels)

    def initial_state(self):
        return RecencyState()

    def update(self, state, x):
        return RecencyState(state.n + 1, x)

    def predict(self, state):
        if state.n == 0:
            return self.base
        probs = [(1 - self.weight) * p + (self.weight if x == state.last else 0.0)
                 for x, p in zip(self.base.labels, self.base.probs)]
        return DiscreteDistribution(self.base.labels, probs, self.space)

    def params(self):
        return {"rule": self.name, "weight": self.weight, "base": self.base.description}
