"""Predictive rules beyond exchangeability.

Markov-exchangeable reinforced urns and successor states, the Chinese
restaurant franchise, the infinite hidden Markov model's hierarchical urn,
partially c.i.d. weighted rules for several sequences, and graphon
samplers for exchangeable binary arrays.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .engine import PredictiveRule
from .errors import ConfigurationError
from .measures import (
    VECTOR,
    AtomicMixture,
    DiscreteDistribution,
    RandomSource,
    SampleSpace,
    TagBase,
    to_discrete,
)
from .exchangeable import PolyaRule

SWAP_TOL = 1e-10


# ---------------------------------------------------------------------------
# reinforced urns and Markov exchangeability

@dataclass(frozen=True)
class TransitionCounts:
    """Transition counts ``t[x, y]`` of a path started at ``x0``."""

    x0: object
    current: object = None
    counts: tuple = ()  # sorted ((x, y), count) pairs
    n: int = 0

    def __post_init__(self):
        if self.current is None:
            object.__setattr__(self, "current", self.x0)
        if any(c < 0 for _, c in self.counts):
            raise ConfigurationError("transition counts must be nonnegative")

    def as_dict(self):
        return dict(self.counts)

    def row(self, x) -> dict:
        return {y: c for (a, y), c in self.counts if a == x}

    def moved(self, y) -> "TransitionCounts":
        d = self.as_dict()
        d[(self.current, y)] = d.get((self.current, y), 0) + 1
        return TransitionCounts(self.x0, y, tuple(sorted(d.items(), key=repr)), self.n + 1)


def reinforced_predict(tc: TransitionCounts, params) -> DiscreteDistribution:
    """``(alpha_x q_x(y) + t_{x,y}) / (alpha_x + sum_j t_{x,j})`` at the current state ``x``."""
    x = tc.current
    if x not in params:
        raise ConfigurationError(f"no urn parameters for state {x!r}")
    alpha, q = params[x]
    if not alpha > 0:
        raise ConfigurationError("alpha_x must be positive")
    row = tc.row(x)
    labels = list(q.labels) + [y for y in row if y not in q.labels]
    tot = alpha + sum(row.values())
    probs = [(alpha * q.pmf(y) + row.get(y, 0)) / tot for y in labels]
    return DiscreteDistribution(tuple(labels), tuple(probs), q.space)


class ReinforcedUrnRule(PredictiveRule):
    """Reinforced urn process on a finite state space, started at ``x0``.

    ``params`` maps each state to ``(alpha_x, q_x)``.
    """

    name = "reinforced-urn"

    def __init__(self, x0, params: dict):
        self.x0 = x0
        self.params_ = dict(params)
        labels = sorted({y for _, q in self.params_.values() for y in q.labels} | set(self.params_))
        missing = [x for x in labels if x not in self.params_]
        if missing:
            raise ConfigurationError(f"no urn parameters for states {missing}")
        q0 = next(iter(self.params_.values()))[1]
        self.space = SampleSpace(q0.space.kind, q0.space.dim, tuple(labels))

    def params(self):
        return {"rule": self.name, "x0": self.x0,
                "urns": {str(x): {"alpha": a, "q": q.description} for x, (a, q) in self.params_.items()}}

    def initial_state(self):
        return TransitionCounts(self.x0)

    def update(self, state, x):
        return state.moved(x)

    def predict(self, state):
        return reinforced_predict(state, self.params_)

    def swap_predictive(self, y, x, row: dict) -> float:
        """Predictive as a function of (target, current state, current row)."""
        alpha, q = self.params_[x]
        return (alpha * q.pmf(y) + row.get(y, 0)) / (alpha + sum(row.values()))


def successor_states(path) -> dict:
    """``x -> [S_{x,1}, S_{x,2}, ...]``: the state visited right after each visit to ``x``."""
    path = list(path)
    if len(path) < 2:
        raise ConfigurationError("need a path of length >= 2")
    table: dict = {}
    for a, b in zip(path[:-1], path[1:]):
        table.setdefault(a, []).append(b)
    return table


def path_from_successors(table: dict, x0, length) -> list:
    """Rebuild a path of ``length`` points by walking the successor lists."""
    used = {x: 0 for x in table}
    path = [x0]
    while len(path) < length:
        x = path[-1]
        nxt = table[x][used[x]]
        used[x] += 1
        path.append(nxt)
    return path


def _rows(states, depth):
    """All count rows over ``states`` with total at most ``depth``."""
    for total in range(depth + 1):
        for combo in itertools.combinations_with_replacement(states, total):
            row = {}
            for s in combo:
                row[s] = row.get(s, 0) + 1
            yield row


def markov_swap_check(pred: Callable, states, depth, tol=SWAP_TOL) -> list:
    """Violations of ``p(y|x,t) p(z|x,t+e_y) = p(z|x,t) p(y|x,t+e_z)``.

    ``pred(y, x, row)`` is a predictive depending on the current state and
    its row of transition counts.  Returns ``(x, y, z, row, magnitude)``
    tuples for every violation larger than ``tol``.
    """
    states = list(states)
    out = []
    for row in _rows(states, depth):
        for x in states:
            for y, z in itertools.combinations(states, 2):
                ry = dict(row)
                ry[y] = ry.get(y, 0) + 1
                rz = dict(row)
                rz[z] = rz.get(z, 0) + 1
                lhs = pred(y, x, row) * pred(z, x, ry)
                rhs = pred(z, x, row) * pred(y, x, rz)
                if abs(lhs - rhs) > tol:
                    out.append((x, y, z, dict(row), abs(lhs - rhs)))
    return out


# ---------------------------------------------------------------------------
# Hoppe urns, the franchise and the infinite HMM

@dataclass(frozen=True)
class HoppeUrn:
    """Hoppe urn: ``alpha`` black mass plus colored balls ``((color, count), ...)``."""

    alpha: float
    balls: tuple = ()

    @property
    def n(self):
        return sum(c for _, c in self.balls)

    def draw(self, u):
        """Color index hit by uniform ``u`` or ``None`` for the black ball."""
        target = u * (self.alpha + self.n)
        acc = 0.0
        for i, (_, c) in enumerate(self.balls):
            acc += c
            if target < acc:
                return i
        return None

    def add(self, color) -> "HoppeUrn":
        balls = list(self.balls)
        for i, (c, k) in enumerate(balls):
            if c == color:
                balls[i] = (c, k + 1)
                return HoppeUrn(self.alpha, tuple(balls))
        return HoppeUrn(self.alpha, tuple(balls) + ((color, 1),))

    def predictive(self, base_mass):
        """Mass function given the new-color law ``base_mass(color)``; returns dict and new mass."""
        tot = self.alpha + self.n
        return {c: k / tot for c, k in self.balls}, self.alpha / tot


@dataclass(frozen=True)
class FranchiseState:
    """Per-restaurant table urns and the shared oracle urn of dishes."""

    restaurants: tuple  # HoppeUrn per restaurant, balls are (table id, count)
    table_dishes: tuple  # per restaurant: dish of each table, in table order
    oracle: HoppeUrn
    n: int = 0

    def __post_init__(self):
        for urn, dishes in zip(self.restaurants, self.table_dishes):
            if len(urn.balls) != len(dishes):
                raise ConfigurationError("every table needs exactly one dish")


def franchise_init(alphas, gamma) -> FranchiseState:
    if not gamma > 0 or any(not a > 0 for a in alphas):
        raise ConfigurationError("concentrations must be positive")
    return FranchiseState(tuple(HoppeUrn(float(a)) for a in alphas), tuple(() for _ in alphas), HoppeUrn(float(gamma)))


def franchise_next(s: FranchiseState, j: int, rng: RandomSource, base=None):
    """Seat the next customer of restaurant ``j``; returns ``(state, dish)``.

    A black ball opens a table whose dish comes from the oracle urn, itself
    a Hoppe urn over the base (fresh tags by default).
    """
    base = TagBase() if base is None else base
    if not 0 <= j < len(s.restaurants):
        raise ConfigurationError(f"restaurant {j} is not configured")
    urn, dishes = s.restaurants[j], s.table_dishes[j]
    oracle = s.oracle
    i = urn.draw(rng.uniform())
    if i is not None:
        dish = dishes[i]
        urn = urn.add(urn.balls[i][0])
    else:
        d = oracle.draw(rng.uniform())
        dish = base.sample(rng) if d is None else oracle.balls[d][0]
        oracle = oracle.add(dish)
        urn = urn.add(len(urn.balls))
        dishes = dishes + (dish,)
    rest = s.restaurants[:j] + (urn,) + s.restaurants[j + 1:]
    tds = s.table_dishes[:j] + (dishes,) + s.table_dishes[j + 1:]
    return FranchiseState(rest, tds, oracle, s.n + 1), dish


@dataclass(frozen=True)
class IhmmState:
    """Oracle urn, one Hoppe urn per discovered state, and the current state."""

    alpha: float
    oracle: HoppeUrn
    urns: tuple = ()  # ((state, HoppeUrn), ...) for every state drawn so far
    current: object = None
    n: int = -1  # becomes 0 once X_0 is drawn

    def urn(self, x):
        for s, u in self.urns:
            if s == x:
                return u
        raise KeyError(x)


def ihmm_init(alpha, gamma) -> IhmmState:
    if not alpha > 0 or not gamma > 0:
        raise ConfigurationError("concentrations must be positive")
    return IhmmState(float(alpha), HoppeUrn(float(gamma)))


def _ihmm_place(s: IhmmState, new_state, new_oracle, urns):
    if all(x != new_state for x, _ in urns):
        urns = urns + ((new_state, HoppeUrn(s.alpha)),)
    return IhmmState(s.alpha, new_oracle, urns, new_state, s.n + 1)


def ihmm_next(s: IhmmState, rng: RandomSource, base=None):
    """Draw the next latent state; returns ``(new_state_record, point)``.

    The first call draws ``X_0`` from the (empty) oracle, i.e. from the base.
    """
    base = TagBase() if base is None else base
    urns = s.urns
    if s.current is None:
        d = s.oracle.draw(rng.uniform())
        x = base.sample(rng) if d is None else s.oracle.balls[d][0]
        return _ihmm_place(s, x, s.oracle.add(x), urns), x
    urn = s.urn(s.current)
    i = urn.draw(rng.uniform())
    oracle = s.oracle
    if i is not None:
        x = urn.balls[i][0]
    else:
        d = oracle.draw(rng.uniform())
        x = base.sample(rng) if d is None else oracle.balls[d][0]
        oracle = oracle.add(x)
    urns = tuple((st, u.add(x) if st == s.current else u) for st, u in urns)
    return _ihmm_place(s, x, oracle, urns), x


def ihmm_predict(s: IhmmState) -> tuple[dict, float]:
    """Next-state masses over known states and the probability of a new state."""
    oracle_tot = s.oracle.alpha + s.oracle.n
    oracle_mass = {c: k / oracle_tot for c, k in s.oracle.balls}
    oracle_new = s.oracle.alpha / oracle_tot
    if s.current is None:
        return oracle_mass, oracle_new
    urn = s.urn(s.current)
    tot = urn.alpha + urn.n
    row = dict(urn.balls)
    known = {x for x, _ in s.urns}
    masses = {x: (row.get(x, 0) + urn.alpha * oracle_mass.get(x, 0.0)) / tot for x in known}
    return masses, urn.alpha * oracle_new / tot


# ---------------------------------------------------------------------------
# partially c.i.d. weighted rules

def pcid_predict(alpha0, base, pairs) -> AtomicMixture:
    """``(alpha0 P_0 + sum_k W_k delta_{X_k}) / (alpha0 + sum_k W_k)``."""
    if not alpha0 > 0:
        raise ConfigurationError("alpha0 must be positive")
    if any(not w > 0 for _, w in pairs):
        raise ConfigurationError("weights must be strictly positive")
    if not pairs:
        return AtomicMixture.from_base(base)
    tot = alpha0 + math.fsum(w for _, w in pairs)
    order, agg = [], {}
    for x, w in pairs:
        if x not in agg:
            order.append(x)
            agg[x] = 0.0
        agg[x] += w
    return AtomicMixture(tuple((x, agg[x] / tot) for x in order), alpha0 / tot, base, base.space)


@dataclass(frozen=True)
class MultiState:
    n: int
    parts: tuple  # per-sequence state


class PcidRule(PredictiveRule):
    """Several sequences with reinforcement weights that may read the others.

    Observations are tuples with one value per sequence.  Given the past the
    next values are independent across sequences; ``weight_fn(j, obs)``
    returns ``W_{n,j}`` from the whole observed tuple and must not depend on
    ``obs[j]`` for the construction to be partially c.i.d.  ``None`` gives
    unit weights (independent Pólya sequences).
    """

    name = "pcid"

    def __init__(self, alphas, bases, weight_fn=None):
        if len(alphas) != len(bases):
            raise ConfigurationError("one concentration per sequence")
        self.alphas = tuple(float(a) for a in alphas)
        self.bases = tuple(bases)
        self.weight_fn = weight_fn
        finite = all(isinstance(b, DiscreteDistribution) for b in bases)
        support = tuple(itertools.product(*(b.labels for b in bases))) if finite else None
        self.space = SampleSpace(VECTOR, len(bases), support)

    def initial_state(self):
        return MultiState(0, tuple(() for _ in self.bases))

    def update(self, state, obs):
        parts = []
        for j, (pairs, x) in enumerate(zip(state.parts, obs)):
            w = 1.0 if self.weight_fn is None else float(self.weight_fn(j, obs))
            if not w > 0:
                raise ConfigurationError("weights must be strictly positive")
            parts.append(pairs + ((x, w),))
        return MultiState(state.n + 1, tuple(parts))

    def marginal(self, state, j) -> AtomicMixture:
        return pcid_predict(self.alphas[j], self.bases[j], state.parts[j])

    def predict(self, state):
        margs = [to_discrete(self.marginal(state, j), self.bases[j].labels) for j in range(len(self.bases))]
        labels, probs = [], []
        for combo in itertools.product(*(zip(m.labels, m.probs) for m in margs)):
            labels.append(tuple(x for x, _ in combo))
            probs.append(math.prod(p for _, p in combo))
        s = math.fsum(probs)
        return DiscreteDistribution(tuple(labels), tuple(p / s for p in probs), self.space)

    def prob(self, state, obs):
        return math.prod(self.marginal(state, j).mass(x) for j, x in enumerate(obs))


class ProductRule(PredictiveRule):
    """Independent component rules observed jointly, one value each per step."""

    name = "product"

    def __init__(self, rules):
        self.rules = tuple(rules)
        if all(r.space.support is not None for r in self.rules):
            support = tuple(itertools.product(*(r.space.support for r in self.rules)))
        else:
            support = None
        self.space = SampleSpace(VECTOR, len(self.rules), support)

    def initial_state(self):
        return MultiState(0, tuple(r.initial_state() for r in self.rules))

    def update(self, state, obs):
        return MultiState(state.n + 1, tuple(r.update(s, x) for r, s, x in zip(self.rules, state.parts, obs)))

    def prob(self, state, obs):
        return math.prod(r.prob(s, x) for r, s, x in zip(self.rules, state.parts, obs))

    def predict(self, state):
        labels = self.space.support
        probs = [self.prob(state, x) for x in labels]
        s = math.fsum(probs)
        return DiscreteDistribution(labels, tuple(p / s for p in probs), self.space)


def independent_polya(alphas, bases) -> ProductRule:
    return ProductRule([PolyaRule(a, b) for a, b in zip(alphas, bases)])


# ---------------------------------------------------------------------------
# graphons

@dataclass(frozen=True)
class Graphon:
    """A map ``W: [0,1]^2 -> [0,1]``, evaluated on arrays."""

    func: Callable
    symmetric: bool = False
    name: str = "graphon"
    validation_points: int = field(default=33, compare=False)

    def __post_init__(self):
        g = np.linspace(0.0, 1.0, self.validation_points)
        vals = self(g[:, None], g[None, :])
        if np.any(vals < 0.0) or np.any(vals > 1.0) or np.any(~np.isfinite(vals)):
            raise ConfigurationError(f"{self.name}: values must lie in [0, 1]")
        if self.symmetric and not np.allclose(vals, vals.T, atol=1e-12):
            raise ConfigurationError(f"{self.name}: declared symmetric but W(u,v) != W(v,u)")

    def __call__(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        out = np.asarray(self.func(u, v), dtype=float)
        return np.broadcast_to(out, u.shape)


def constant_graphon(p) -> Graphon:
    return Graphon(lambda u, v: np.full(np.broadcast(u, v).shape, float(p)), True, f"const({p})")


def product_graphon() -> Graphon:
    return Graphon(lambda u, v: u * v, True, "product")


def graphon_sample(W: Graphon, n: int, mode: str, rng: RandomSource) -> np.ndarray:
    """Binary ``n x n`` array coded by i.i.d. uniforms.

    ``separate``: row features ``U_i``, column features ``V_j`` and one
    uniform per cell.  ``joint``: one feature per vertex and one uniform
    per unordered pair, giving a symmetric array with zero diagonal.
    """
    g = rng.generator
    if mode == "separate":
        u = g.random(n)
        v = g.random(n)
        cell = g.random((n, n))
        return (cell < W(u[:, None], v[None, :])).astype(np.int8)
    if mode == "joint":
        if not W.symmetric:
            raise ConfigurationError("joint mode needs a symmetric graphon")
        u = g.random(n)
        iu, ju = np.triu_indices(n, k=1)
        pair = g.random(len(iu))
        edges = (pair < W(u[iu], u[ju])).astype(np.int8)
        x = np.zeros((n, n), dtype=np.int8)
        x[iu, ju] = edges
        x[ju, iu] = edges
        return x
    raise ConfigurationError(f"unknown graphon mode {mode!r}")
