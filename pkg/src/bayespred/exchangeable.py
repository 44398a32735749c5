"""Exchangeable and c.i.d. predictive rules.

Pólya (Blackwell-MacQueen) sequences, species sampling driven by an
exchangeable partition probability function (EPPF), the Chinese
restaurant and Pitman-Yor special cases, kernel-based Dirichlet sequences
and the Indian buffet process.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .engine import PredictiveRule
from .errors import ConditioningError, ConfigurationError, DomainError
from .measures import (
    AtomicMixture,
    DiscreteDistribution,
    RandomSource,
    SampleSpace,
    TagBase,
    mixture,
    sample,
)

EPPF_ADDITIVITY_TOL = 1e-10


# ---------------------------------------------------------------------------
# Pólya sequences

@dataclass(frozen=True)
class PolyaState:
    """Concentration, base measure and the multiset of observed points."""

    alpha: float
    base: object
    n: int = 0
    atoms: tuple = ()  # ((point, multiplicity), ...)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError("alpha must be positive")
        if sum(m for _, m in self.atoms) != self.n:
            raise ConfigurationError("n must equal the total multiplicity")

    def multiplicity(self, x):
        for a, m in self.atoms:
            if a == x:
                return m
        return 0


def polya_predict(s: PolyaState) -> AtomicMixture:
    """``alpha/(alpha+n) * P_0 + sum_j m_j/(alpha+n) * delta_{x_j}``."""
    if s.n == 0:
        return AtomicMixture.from_base(s.base)
    tot = s.alpha + s.n
    return AtomicMixture(tuple((x, m / tot) for x, m in s.atoms), s.alpha / tot, s.base, s.base.space)


class PolyaRule(PredictiveRule):
    """Pólya sequence with concentration ``alpha`` and base ``base``.

    On a finite base the rule simulates with one uniform per step and
    supports lockstep batch simulation.
    """

    name = "polya"

    def __init__(self, alpha, base):
        if not alpha > 0:
            raise ConfigurationError("alpha must be positive")
        self.alpha = float(alpha)
        self.base = base
        self.finite = isinstance(base, DiscreteDistribution)
        if self.finite:
            self.labels = base.labels
            self.p0 = np.array(base.probs)
            self.index = {x: i for i, x in enumerate(self.labels)}
            self.space = SampleSpace(base.space.kind, base.space.dim, self.labels)
            self.draws_per_step = 1
        else:
            self.space = base.space

    def params(self):
        return {"rule": self.name, "alpha": self.alpha, "base": self.base.description}

    def initial_state(self):
        return PolyaState(self.alpha, self.base)

    def update(self, state, x):
        atoms = list(state.atoms)
        for i, (a, m) in enumerate(atoms):
            if a == x:
                atoms[i] = (a, m + 1)
                break
        else:
            if self.finite:
                # keep support order so batched and sequential states agree
                pos = sum(1 for a, _ in atoms if self.index[a] < self.index[x])
                atoms.insert(pos, (x, 1))
            else:
                atoms.append((x, 1))
        return PolyaState(state.alpha, state.base, state.n + 1, tuple(atoms))

    def predict(self, state):
        return polya_predict(state)

    def prob(self, state, x):
        p0 = self.base.pmf(x)
        return (self.alpha * p0 + state.multiplicity(x)) / (self.alpha + state.n)

    def _weights(self, state):
        w = self.alpha * self.p0
        for a, m in state.atoms:
            w[self.index[a]] += m
        return w

    def sample_next(self, state, rng):
        if not self.finite:
            return sample(polya_predict(state), rng)
        w = self._weights(state)
        target = rng.uniform() * (self.alpha + state.n)
        acc = 0.0
        for i, wi in enumerate(w.tolist()):
            acc += wi
            if target < acc:
                return self.labels[i]
        return self.labels[int(np.flatnonzero(w > 0)[-1])]

    def cdf(self, state, grid):
        grid = np.asarray(grid, dtype=float)
        base_cdf = np.array([self.base.cdf(t) for t in grid])
        at_or_below = np.array([sum(m for a, m in state.atoms if a <= t) for t in grid], dtype=float)
        return (self.alpha * base_cdf + at_or_below) / (self.alpha + state.n)

    # batch protocol (finite base only) ---------------------------------------
    def batch_pack(self, states):
        counts = np.zeros((len(states), len(self.labels)))
        for r, s in enumerate(states):
            for a, m in s.atoms:
                counts[r, self.index[a]] = m
        return {"counts": counts, "n": np.array([s.n for s in states], dtype=float)}

    def batch_step(self, packed, u):
        counts, n = packed["counts"], packed["n"]
        w = self.alpha * self.p0 + counts
        cum = np.cumsum(w, axis=1)
        target = u[:, 0] * (self.alpha + n)
        hit = target[:, None] < cum
        last_pos = w.shape[1] - 1 - np.argmax((w > 0)[:, ::-1], axis=1)
        k = np.where(hit.any(axis=1), np.argmax(hit, axis=1), last_pos)
        counts[np.arange(len(k)), k] += 1.0
        packed["n"] = n + 1.0
        return packed

    def batch_unpack(self, packed):
        out = []
        for row, n in zip(packed["counts"], packed["n"]):
            atoms = tuple((self.labels[i], int(c)) for i, c in enumerate(row) if c > 0)
            out.append(PolyaState(self.alpha, self.base, int(n), atoms))
        return out

    def _below(self, grid):
        labels = np.asarray(self.labels, dtype=float)
        return (labels[:, None] <= np.asarray(grid, dtype=float)[None, :]).astype(float)

    def batch_cdf(self, packed, grid):
        base_cdf = np.array([self.base.cdf(t) for t in grid])
        num = self.alpha * base_cdf[None, :] + packed["counts"] @ self._below(grid)
        return num / (self.alpha + packed["n"])[:, None]

    def batch_empirical_cdf(self, packed, grid):
        return (packed["counts"] @ self._below(grid)) / packed["n"][:, None]


def dirichlet_predictive(alpha, p0, counts):
    """Conjugate Dirichlet-multinomial predictive ``(alpha*p0_j + n_j)/(alpha+n)``."""
    counts = np.asarray(counts, dtype=float)
    return (alpha * np.asarray(p0, dtype=float) + counts) / (alpha + counts.sum())


# ---------------------------------------------------------------------------
# partitions and EPPFs

@dataclass(frozen=True)
class PartitionCounts:
    """Block sizes ``(n_1, ..., n_k)`` in order of appearance."""

    sizes: tuple = ()

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if any(s < 1 for s in sizes):
            raise ConfigurationError("block sizes must be >= 1")
        object.__setattr__(self, "sizes", sizes)

    @property
    def n(self):
        return sum(self.sizes)

    @property
    def k(self):
        return len(self.sizes)

    def incremented(self, j):
        """Counts with block ``j`` grown by one; ``j == k`` opens a new block."""
        if j == self.k:
            return PartitionCounts(self.sizes + (1,))
        if not 0 <= j < self.k:
            raise ConfigurationError(f"block index {j} out of range")
        s = list(self.sizes)
        s[j] += 1
        return PartitionCounts(tuple(s))


def _counts(c):
    return c if isinstance(c, PartitionCounts) else PartitionCounts(tuple(c))


def log_rising(a, m):
    """log of the rising factorial a(a+1)...(a+m-1), for a > 0."""
    return math.lgamma(a + m) - math.lgamma(a)


def eppf_crp(counts, alpha) -> float:
    """Ewens partition probability ``alpha^k / alpha^[n] * prod (n_j - 1)!``."""
    counts = _counts(counts)
    if counts.n == 0:
        raise DomainError("the EPPF is defined for n >= 1")
    if not alpha > 0:
        raise ConfigurationError("alpha must be positive")
    logp = counts.k * math.log(alpha) + sum(math.lgamma(s) for s in counts.sizes) - log_rising(alpha, counts.n)
    return math.exp(logp)


def _check_py(alpha, theta):
    if not (0.0 <= theta < 1.0 and alpha > -theta):
        raise ConfigurationError("Pitman-Yor needs 0 <= theta < 1 and alpha > -theta")


def eppf_py(counts, alpha, theta) -> float:
    """Pitman-Yor EPPF, the product of the sequential allocation weights."""
    counts = _counts(counts)
    _check_py(alpha, theta)
    if counts.n == 0:
        raise DomainError("the EPPF is defined for n >= 1")
    logp = sum(math.log(alpha + i * theta) for i in range(1, counts.k))
    logp += sum(log_rising(1.0 - theta, s - 1) for s in counts.sizes)
    logp -= log_rising(alpha + 1.0, counts.n - 1)
    return math.exp(logp)


def eppf_finite_dirichlet(counts, alpha, K) -> float:
    """EPPF of the finite (K-category symmetric) Dirichlet process."""
    counts = _counts(counts)
    if counts.n == 0:
        raise DomainError("the EPPF is defined for n >= 1")
    if counts.k > K:
        return 0.0
    a = alpha / K
    logp = math.lgamma(K + 1) - math.lgamma(K - counts.k + 1)
    logp += sum(log_rising(a, s) for s in counts.sizes) - log_rising(alpha, counts.n)
    return math.exp(logp)


@dataclass(frozen=True)
class EppfSpec:
    """A named EPPF evaluator ``p(n_1, ..., n_k)``."""

    evaluator: Callable[[PartitionCounts], float]
    name: str = "eppf"
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, counts) -> float:
        counts = _counts(counts)
        if counts.n == 0:
            return 1.0
        return float(self.evaluator(counts))


def crp_eppf(alpha) -> EppfSpec:
    if not alpha > 0:
        raise ConfigurationError("alpha must be positive")
    return EppfSpec(lambda c: eppf_crp(c, alpha), "crp", {"alpha": alpha})


def py_eppf(alpha, theta) -> EppfSpec:
    _check_py(alpha, theta)
    return EppfSpec(lambda c: eppf_py(c, alpha, theta), "pitman-yor", {"alpha": alpha, "theta": theta})


def finite_dirichlet_eppf(alpha, K) -> EppfSpec:
    if not alpha > 0 or K < 1:
        raise ConfigurationError("finite Dirichlet needs alpha > 0 and K >= 1")
    return EppfSpec(lambda c: eppf_finite_dirichlet(c, alpha, K), "finite-dirichlet", {"alpha": alpha, "K": K})


def eppf_weights(counts, eppf: EppfSpec):
    """Allocation probabilities ``p(n^{j+}) / p(n)`` for ``j = 1..k+1``."""
    counts = _counts(counts)
    pn = eppf(counts)
    if not pn > 0.0:
        raise ConditioningError(f"EPPF vanishes at {counts.sizes}; cannot condition on it")
    w = [eppf(counts.incremented(j)) / pn for j in range(counts.k + 1)]
    total = math.fsum(w)
    if abs(total - 1.0) > EPPF_ADDITIVITY_TOL:
        raise ConfigurationError(f"{eppf.name}: additivity fails at {counts.sizes} (sum {total!r})")
    if any(x < 0 for x in w):
        raise ConfigurationError(f"{eppf.name}: negative allocation probability at {counts.sizes}")
    return [x / total for x in w]


def species_predict(counts, atoms, eppf: EppfSpec, base) -> AtomicMixture:
    """Species-sampling predictive: weighted discovered species plus the base."""
    counts = _counts(counts)
    atoms = tuple(atoms)
    if len(atoms) != counts.k:
        raise ConfigurationError("need one atom per block")
    w = eppf_weights(counts, eppf)
    return AtomicMixture(tuple(zip(atoms, w[:-1])), w[-1], base, base.space)


def py_weights(counts, alpha, theta):
    """Pitman-Yor allocation weights: existing blocks and the new-block weight."""
    counts = _counts(counts)
    _check_py(alpha, theta)
    if counts.n == 0:
        return [], 1.0
    tot = alpha + counts.n
    existing = [(s - theta) / tot for s in counts.sizes]
    new = (alpha + counts.k * theta) / tot
    if any(w < 0 for w in existing) or new < 0:
        raise ConfigurationError("negative Pitman-Yor weight")
    return existing, new


@dataclass(frozen=True)
class SpeciesState:
    n: int = 0
    counts: PartitionCounts = PartitionCounts()
    atoms: tuple = ()


class SpeciesSamplingRule(PredictiveRule):
    """Exchangeable species-sampling sequence driven by an EPPF."""

    name = "species"

    def __init__(self, eppf: EppfSpec, base=None):
        self.eppf = eppf
        self.base = TagBase() if base is None else base
        self.space = self.base.space

    def params(self):
        return {"rule": self.name, "eppf": self.eppf.name, **self.eppf.params, "base": self.base.description}

    def initial_state(self):
        return SpeciesState()

    def update(self, state, x):
        try:
            j = state.atoms.index(x)
        except ValueError:
            return SpeciesState(state.n + 1, state.counts.incremented(state.counts.k), state.atoms + (x,))
        return SpeciesState(state.n + 1, state.counts.incremented(j), state.atoms)

    def weights(self, state):
        return eppf_weights(state.counts, self.eppf)

    def predict(self, state):
        w = self.weights(state)
        return AtomicMixture(tuple(zip(state.atoms, w[:-1])), w[-1], self.base, self.base.space)


class PitmanYorRule(SpeciesSamplingRule):
    """Two-parameter Poisson-Dirichlet species sampling (CRP when theta = 0)."""

    name = "pitman-yor"

    def __init__(self, alpha, theta=0.0, base=None):
        _check_py(alpha, theta)
        self.alpha, self.theta = float(alpha), float(theta)
        super().__init__(py_eppf(alpha, theta), base)

    def params(self):
        return {"rule": self.name, "alpha": self.alpha, "theta": self.theta, "base": self.base.description}

    def weights(self, state):
        existing, new = py_weights(state.counts, self.alpha, self.theta)
        return existing + [new]


def crp_rule(alpha, base=None) -> PitmanYorRule:
    return PitmanYorRule(alpha, 0.0, base)


def set_partitions(n) -> Iterator[tuple]:
    """All set partitions of ``{0..n-1}`` as restricted growth strings."""
    if n == 0:
        yield ()
        return

    def grow(prefix, k):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for b in range(k + 1):
            prefix.append(b)
            yield from grow(prefix, max(k, b + 1))
            prefix.pop()

    yield from grow([0], 1)


def block_sizes(labels) -> PartitionCounts:
    """Block sizes in order of first appearance of each label."""
    order, sizes = [], {}
    for x in labels:
        if x not in sizes:
            order.append(x)
            sizes[x] = 0
        sizes[x] += 1
    return PartitionCounts(tuple(sizes[x] for x in order))


def sequential_partition_prob(labels, weight_fn) -> float:
    """Probability of a label sequence as a product of allocation weights.

    ``weight_fn(counts)`` returns the ``k+1`` allocation probabilities.
    """
    counts, seen, p = PartitionCounts(), {}, 1.0
    for x in labels:
        w = weight_fn(counts)
        if x in seen:
            j = seen[x]
        else:
            j = counts.k
            seen[x] = j
        p *= w[j]
        counts = counts.incremented(j)
    return p


def sample_partition(weight_fn, n, rng: RandomSource) -> tuple:
    """Sequential (Hoppe-urn) draw of block labels for ``n`` items."""
    counts, labels = PartitionCounts(), []
    for _ in range(n):
        w = weight_fn(counts)
        u, acc, j = rng.uniform(), 0.0, len(w) - 1
        for i, wi in enumerate(w):
            acc += wi
            if u < acc:
                j = i
                break
        labels.append(j)
        counts = counts.incremented(j)
    return tuple(labels)


# ---------------------------------------------------------------------------
# kernel-based Dirichlet sequences

def kernel_ds_predict(s: PolyaState, kernel) -> AtomicMixture:
    """``alpha/(alpha+n) P_0 + 1/(alpha+n) sum_i K(. | x_i)``."""
    if s.n == 0:
        return AtomicMixture.from_base(s.base)
    tot = s.alpha + s.n
    comps = [(s.alpha / tot, s.base)]
    for x, m in s.atoms:
        k = kernel(x)
        if isinstance(k, DiscreteDistribution):
            k = k.as_mixture()
        if not isinstance(k, AtomicMixture):
            raise ConfigurationError(f"kernel at {x!r} did not return a measure")
        comps.append((m / tot, k))
    return mixture(comps)


class KernelDirichletRule(PolyaRule):
    """Pólya-type rule that spreads each observation through a kernel."""

    name = "kernel-dirichlet"

    def __init__(self, alpha, base, kernel):
        super().__init__(alpha, base)
        self.kernel = kernel
        self.draws_per_step = None

    def predict(self, state):
        return kernel_ds_predict(state, self.kernel)

    def prob(self, state, x):
        return kernel_ds_predict(state, self.kernel).mass(x)

    def sample_next(self, state, rng):
        return sample(self.predict(state), rng)

    def cdf(self, state, grid):
        return PredictiveRule.cdf(self, state, grid)


# ---------------------------------------------------------------------------
# Indian buffet process

@dataclass(frozen=True)
class IbpState:
    theta: float
    n: int = 0
    dish_counts: tuple = ()  # ((dish id, customers who took it), ...)
    dishes_created: int = 0

    def __post_init__(self):
        if not self.theta > 0:
            raise ConfigurationError("theta must be positive")
        if any(c < 1 for _, c in self.dish_counts):
            raise ConfigurationError("every served dish has at least one customer")


def ibp_next(s: IbpState, rng: RandomSource):
    """Seat customer ``n+1``; returns ``(new_state, chosen dish ids, new dish count)``."""
    denom = s.n + 1
    u = rng.uniforms(len(s.dish_counts))
    chosen, counts = [], []
    for (dish, c), ui in zip(s.dish_counts, u):
        if ui < c / denom:
            chosen.append(dish)
            counts.append((dish, c + 1))
        else:
            counts.append((dish, c))
    n_new = int(rng.generator.poisson(s.theta / denom))
    new_ids = list(range(s.dishes_created + 1, s.dishes_created + n_new + 1))
    chosen.extend(new_ids)
    counts.extend((d, 1) for d in new_ids)
    state = IbpState(s.theta, s.n + 1, tuple(counts), s.dishes_created + n_new)
    return state, tuple(chosen), n_new


def sample_ibp(theta, n_customers, rng: RandomSource) -> np.ndarray:
    """Binary customers-by-dishes matrix from the sequential buffet."""
    s = IbpState(theta)
    rows = []
    for _ in range(n_customers):
        s, chosen, _ = ibp_next(s, rng)
        rows.append(chosen)
    z = np.zeros((n_customers, s.dishes_created), dtype=np.int8)
    for i, row in enumerate(rows):
        z[i, [d - 1 for d in row]] = 1
    return z
