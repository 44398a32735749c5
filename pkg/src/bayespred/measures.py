"""Probability-measure primitives, sample spaces and reproducible randomness.

Points are plain Python values:

* categorical labels are ``int``;
* real scalars are ``float``;
* real vectors are tuples of floats of a fixed dimension;
* atom tags are :class:`AtomTag` instances, used for fresh draws from a
  diffuse base when only the identity of a value matters.

Measures are immutable.  An :class:`AtomicMixture` is a finite set of
weighted atoms plus a weighted diffuse component drawn from a base
measure; a :class:`DiscreteDistribution` is the purely atomic special
case on an explicit list of labels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, UnsupportedOperationError

NORMALIZATION_TOL = 1e-12

CATEGORICAL = "categorical"
REAL = "real"
VECTOR = "vector"
TAG = "tag"
_KINDS = (CATEGORICAL, REAL, VECTOR, TAG)


class AtomTag(NamedTuple):
    """Opaque identity of a value drawn from a diffuse base."""

    branch: tuple
    counter: int

    def __repr__(self):
        path = ".".join(map(str, self.branch)) or "root"
        return f"tag<{path}:{self.counter}>"


@dataclass(frozen=True)
class SampleSpace:
    """The variant of the points a chain takes values in.

    ``support`` lists every point when the space is finite; exact
    enumeration (joint probabilities, diagnostics) needs it.
    """

    kind: str
    dim: int = 1
    support: tuple | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown point kind {self.kind!r}")
        if self.kind == VECTOR and self.dim < 1:
            raise ConfigurationError("vector spaces need dim >= 1")
        if self.support is not None:
            object.__setattr__(self, "support", tuple(self.support))
            for x in self.support:
                self.validate(x)
            if len(set(self.support)) != len(self.support):
                raise ConfigurationError("support labels must be distinct")

    @property
    def is_finite(self):
        return self.support is not None

    @property
    def is_scalar(self):
        return self.kind in (REAL, CATEGORICAL)

    def validate(self, x, position=None):
        """Raise ConfigurationError unless ``x`` is a point of this space."""
        where = "" if position is None else f" at position {position}"
        ok = False
        if self.kind == CATEGORICAL:
            ok = isinstance(x, (int, np.integer)) and not isinstance(x, bool)
        elif self.kind == REAL:
            ok = isinstance(x, (float, int, np.floating, np.integer)) and not isinstance(x, bool)
        elif self.kind == VECTOR:
            ok = isinstance(x, tuple) and len(x) == self.dim
        elif self.kind == TAG:
            ok = isinstance(x, AtomTag)
        if not ok:
            raise ConfigurationError(f"point {x!r}{where} does not belong to a {self.kind} space"
                                     + (f" of dimension {self.dim}" if self.kind == VECTOR else ""))
        if self.support is not None and x not in self.support:
            raise ConfigurationError(f"point {x!r}{where} is outside the finite support")
        return x


def categorical_space(k):
    """Finite categorical space on labels ``0..k-1``."""
    return SampleSpace(CATEGORICAL, support=tuple(range(k)))


class RandomSource:
    """Seeded, splittable randomness.

    A source is identified by ``(seed, branch)`` where ``branch`` is a tuple
    of non-negative integers.  The same identity always yields the same
    stream; distinct branches map to distinct ``SeedSequence`` spawn keys and
    are therefore independent.  A source is stateful once used: hand
    branches to workers, never a shared source.
    """

    def __init__(self, seed: int, branch: tuple = ()):
        if not 0 <= int(seed) < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.branch_path = tuple(int(b) for b in branch)
        self._generator = None
        self._tags = 0

    def branch(self, index: int) -> "RandomSource":
        return RandomSource(self.seed, self.branch_path + (int(index),))

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=self.branch_path)
            self._generator = np.random.Generator(np.random.PCG64(ss))
        return self._generator

    def uniform(self) -> float:
        return float(self.generator.random())

    def uniforms(self, shape) -> np.ndarray:
        return self.generator.random(shape)

    def new_tag(self) -> AtomTag:
        self._tags += 1
        return AtomTag(self.branch_path, self._tags)

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, branch={self.branch_path})"


# ---------------------------------------------------------------------------
# base measures

class BaseMeasure:
    """Interface of the diffuse component of an :class:`AtomicMixture`."""

    space: SampleSpace
    diffuse = True
    description = "base"

    def sample(self, rng: RandomSource):
        raise NotImplementedError

    def cdf(self, t):
        raise UnsupportedOperationError(f"{self.description} has no distribution function")

    def pmf(self, x):
        """Point mass at ``x``; zero for diffuse bases."""
        return 0.0

    @property
    def support(self):
        return None


@dataclass(frozen=True)
class DiscreteDistribution(BaseMeasure):
    """Finite distribution on distinct labels; also usable as a base."""

    labels: tuple
    probs: tuple
    space: SampleSpace = None

    diffuse = False

    def __post_init__(self):
        labels = tuple(self.labels)
        probs = tuple(float(p) for p in self.probs)
        if len(labels) != len(probs):
            raise ConfigurationError("labels and probs differ in length")
        if len(set(labels)) != len(labels):
            raise ConfigurationError("labels must be distinct")
        if any(p < 0.0 or p > 1.0 for p in probs):
            raise ConfigurationError("probabilities must lie in [0, 1]")
        if abs(math.fsum(probs) - 1.0) > NORMALIZATION_TOL:
            raise ConfigurationError(f"probabilities sum to {math.fsum(probs)!r}, not 1")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "probs", probs)
        if self.space is None:
            object.__setattr__(self, "space", _infer_space(labels))

    @property
    def description(self):
        return "discrete(" + ", ".join(f"{x!r}:{p:.6g}" for x, p in zip(self.labels, self.probs)) + ")"

    @property
    def support(self):
        return self.labels

    def pmf(self, x):
        try:
            return self.probs[self.labels.index(x)]
        except ValueError:
            return 0.0

    def cdf(self, t):
        if not self.space.is_scalar:
            raise UnsupportedOperationError("distribution function needs scalar points")
        return min(1.0, math.fsum(p for x, p in zip(self.labels, self.probs) if x <= t))

    def sample(self, rng: RandomSource):
        return _pick(self.labels, self.probs, rng.uniform())

    def as_mixture(self) -> "AtomicMixture":
        return AtomicMixture(tuple(zip(self.labels, self.probs)), 0.0, None, self.space)


def uniform_discrete(labels, space=None) -> DiscreteDistribution:
    labels = tuple(labels)
    return DiscreteDistribution(labels, (1.0 / len(labels),) * len(labels), space)


class ContinuousBase(BaseMeasure):
    """Diffuse real-scalar base backed by a frozen ``scipy.stats`` law."""

    def __init__(self, dist, description=None):
        self.dist = dist
        self.space = SampleSpace(REAL)
        self.description = description or f"{dist.dist.name}{tuple(dist.args)}"

    def sample(self, rng):
        return float(self.dist.ppf(rng.uniform()))

    def cdf(self, t):
        return float(self.dist.cdf(t))

    def __eq__(self, other):
        return isinstance(other, ContinuousBase) and other.description == self.description

    def __hash__(self):
        return hash(self.description)


class TagBase(BaseMeasure):
    """Diffuse base whose draws are fresh atom tags."""

    description = "tags"

    def __init__(self):
        self.space = SampleSpace(TAG)

    def sample(self, rng):
        return rng.new_tag()

    def __eq__(self, other):
        return isinstance(other, TagBase)

    def __hash__(self):
        return hash("TagBase")


class SamplerBase(BaseMeasure):
    """Base given only by a sampling function (and optionally a cdf)."""

    def __init__(self, space, sampler, cdf=None, description="sampler", diffuse=True):
        self.space = space
        self._sampler = sampler
        self._cdf = cdf
        self.description = description
        self.diffuse = diffuse

    def sample(self, rng):
        return self._sampler(rng)

    def cdf(self, t):
        if self._cdf is None:
            return super().cdf(t)
        return float(self._cdf(t))


class MixtureBase(BaseMeasure):
    """Convex combination of several bases, produced by :func:`mix`."""

    def __init__(self, components):
        comps = []
        for w, b in components:
            if w <= 0.0:
                continue
            if isinstance(b, MixtureBase):
                comps.extend((w * cw, cb) for cw, cb in b.components)
            else:
                comps.append((w, b))
        total = math.fsum(w for w, _ in comps)
        self.components = tuple((w / total, b) for w, b in comps)
        self.space = self.components[0][1].space
        self.diffuse = all(b.diffuse for _, b in self.components)
        self.description = " + ".join(f"{w:.6g}*{b.description}" for w, b in self.components)

    def sample(self, rng):
        u = rng.uniform()
        acc = 0.0
        for w, b in self.components:
            acc += w
            if u < acc:
                return b.sample(rng)
        return self.components[-1][1].sample(rng)

    def cdf(self, t):
        return math.fsum(w * b.cdf(t) for w, b in self.components)

    def pmf(self, x):
        return math.fsum(w * b.pmf(x) for w, b in self.components)


# ---------------------------------------------------------------------------
# atomic mixtures

@dataclass(frozen=True)
class AtomicMixture:
    """Weighted atoms plus ``diffuse_weight`` times a base measure."""

    atoms: tuple = ()
    diffuse_weight: float = 0.0
    base: BaseMeasure | None = None
    space: SampleSpace | None = field(default=None, compare=False)

    def __post_init__(self):
        atoms = tuple((x, float(w)) for x, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "diffuse_weight", float(self.diffuse_weight))
        if any(w < 0.0 for _, w in atoms) or self.diffuse_weight < 0.0:
            raise ConfigurationError("mixture weights must be nonnegative")
        total = math.fsum(w for _, w in atoms) + self.diffuse_weight
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ConfigurationError(f"mixture weights sum to {total!r}, not 1")
        if self.diffuse_weight > 0.0 and self.base is None:
            raise ConfigurationError("a positive diffuse weight needs a base measure")
        if len({x for x, _ in atoms}) != len(atoms):
            raise ConfigurationError("atoms must be distinct; merge them first")
        if self.space is None:
            space = self.base.space if self.base is not None else _infer_space([x for x, _ in atoms])
            object.__setattr__(self, "space", space)

    @classmethod
    def point_mass(cls, x, space=None):
        return cls(((x, 1.0),), 0.0, None, space)

    @classmethod
    def from_base(cls, base):
        if isinstance(base, DiscreteDistribution):
            return base.as_mixture()
        return cls((), 1.0, base, base.space)

    def total_mass(self):
        return math.fsum(w for _, w in self.atoms) + self.diffuse_weight

    def mass(self, x):
        """Probability of the singleton ``{x}``."""
        m = math.fsum(w for a, w in self.atoms if a == x)
        if self.diffuse_weight > 0.0:
            m += self.diffuse_weight * self.base.pmf(x)
        return m

    def support(self):
        """All points with positive mass, or None if the base is not finite."""
        pts = [x for x, w in self.atoms if w > 0.0]
        if self.diffuse_weight > 0.0:
            if self.base.support is None:
                return None
            pts += [x for x in self.base.support if x not in pts]
        return tuple(pts)


def _infer_space(labels: Sequence) -> SampleSpace:
    labels = list(labels)
    if not labels:
        return SampleSpace(REAL)
    x = labels[0]
    if isinstance(x, AtomTag):
        return SampleSpace(TAG)
    if isinstance(x, tuple):
        return SampleSpace(VECTOR, dim=len(x))
    if isinstance(x, (int, np.integer)) and all(isinstance(y, (int, np.integer)) for y in labels):
        return SampleSpace(CATEGORICAL)
    return SampleSpace(REAL)


def _pick(labels, probs, u):
    acc = 0.0
    for x, p in zip(labels, probs):
        acc += p
        if u < acc:
            return x
    # round-off: fall back to the last label with positive mass
    for x, p in zip(reversed(labels), reversed(probs)):
        if p > 0.0:
            return x
    raise ConfigurationError("cannot sample from a measure with no mass")


def sample(dist, rng: RandomSource):
    """Draw one point from an AtomicMixture or DiscreteDistribution.

    One uniform selects the component; a diffuse draw then asks the base
    for a value (fresh tags for tag bases).
    """
    if isinstance(dist, DiscreteDistribution):
        return dist.sample(rng)
    if not isinstance(dist, AtomicMixture):
        raise ConfigurationError(f"cannot sample from {type(dist).__name__}")
    u = rng.uniform()
    acc = 0.0
    for x, w in dist.atoms:
        acc += w
        if u < acc:
            return x
    if dist.diffuse_weight > 0.0:
        return dist.base.sample(rng)
    return _pick([x for x, _ in dist.atoms], [w for _, w in dist.atoms], 1.0)


def eval_cdf(m, t):
    """Distribution function of a scalar measure at ``t`` (array ``t`` allowed)."""
    if isinstance(m, DiscreteDistribution):
        m = m.as_mixture()
    if m.space is None or not m.space.is_scalar:
        raise UnsupportedOperationError("eval_cdf needs a real-scalar (or categorical) space")
    if np.ndim(t) > 0:
        return np.array([eval_cdf(m, s) for s in np.asarray(t, dtype=float)])
    val = math.fsum(w for x, w in m.atoms if x <= t)
    if m.diffuse_weight > 0.0:
        val += m.diffuse_weight * m.base.cdf(t)
    return min(1.0, max(0.0, val))


def mix(a: AtomicMixture, b: AtomicMixture, w: float) -> AtomicMixture:
    """The measure ``w*a + (1-w)*b``; coinciding atoms merge."""
    return mixture([(w, a), (1.0 - w, b)])


def mixture(components: Iterable[tuple[float, Any]]) -> AtomicMixture:
    """Convex combination of several measures."""
    components = [(float(w), AtomicMixture.from_base(m) if isinstance(m, BaseMeasure) else m)
                  for w, m in components]
    if any(w < 0.0 or w > 1.0 + NORMALIZATION_TOL for w, _ in components):
        raise ConfigurationError("mixing weights must lie in [0, 1]")
    if abs(math.fsum(w for w, _ in components) - 1.0) > NORMALIZATION_TOL:
        raise ConfigurationError("mixing weights must sum to 1")
    spaces = {(m.space.kind, m.space.dim) for w, m in components if m.space is not None}
    if len(spaces) > 1:
        raise ConfigurationError(f"cannot mix measures on different spaces: {sorted(spaces)}")
    order, weights = [], {}
    diffuse = []
    for w, m in components:
        if w == 0.0:
            continue
        for x, aw in m.atoms:
            if x not in weights:
                order.append(x)
                weights[x] = 0.0
            weights[x] += w * aw
        if m.diffuse_weight > 0.0:
            diffuse.append((w * m.diffuse_weight, m.base))
    atoms = tuple((x, weights[x]) for x in order)
    dw = math.fsum(w for w, _ in diffuse)
    base = None
    if diffuse:
        bases = [b for _, b in diffuse]
        if all(b == bases[0] for b in bases):
            base = bases[0]
        else:
            base = MixtureBase(diffuse)
    # absorb round-off so the result stays normalized
    total = math.fsum(w for _, w in atoms) + dw
    if dw > 0.0:
        dw = max(0.0, dw + (1.0 - total))
    elif atoms:
        x0, w0 = atoms[-1]
        atoms = atoms[:-1] + ((x0, w0 + (1.0 - total)),)
    space = next((m.space for w, m in components if m.space is not None), None)
    return AtomicMixture(atoms, dw, base, space)


def to_discrete(m, support=None) -> DiscreteDistribution:
    """Collapse a measure with finite support into a DiscreteDistribution."""
    if isinstance(m, DiscreteDistribution):
        return m
    pts = support if support is not None else m.support()
    if pts is None:
        raise UnsupportedOperationError("measure has no finite support")
    probs = [m.mass(x) for x in pts]
    s = math.fsum(probs)
    probs = [p / s for p in probs]
    return DiscreteDistribution(tuple(pts), tuple(probs), m.space)


def point_mass_of(m, x) -> float:
    """Mass of ``{x}`` under an AtomicMixture or DiscreteDistribution."""
    if isinstance(m, DiscreteDistribution):
        return m.pmf(x)
    return m.mass(x)
