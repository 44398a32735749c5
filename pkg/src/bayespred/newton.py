"""Newton's recursive estimate of a mixing distribution on a fixed grid.

``G_n = (1 - a_n) G_{n-1} + a_n G_{n-1}(. | x_n)`` where the second term is
the one-step Bayes update of ``G_{n-1}`` under the kernel, and
``a_n = 1/(alpha + n)``.  The induced predictive ``sum_i k(x|theta_i) G_n(i)``
is a c.i.d. predictive rule, although not an exchangeable one.

All updates go through one vectorised routine, so a single chain and a
batch of chains produce identical numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .engine import PredictiveRule
from .errors import ConditioningError, ConfigurationError
from .measures import (
    CATEGORICAL,
    REAL,
    AtomicMixture,
    BaseMeasure,
    DiscreteDistribution,
    SampleSpace,
    NORMALIZATION_TOL,
)

DRIFT_TOL = 1e-13


# ---------------------------------------------------------------------------
# kernels

class Kernel:
    """A family of densities ``k(x | theta)`` evaluated on arrays."""

    name = "kernel"
    space: SampleSpace

    def log_density(self, x, theta):
        raise NotImplementedError

    def ppf(self, u, theta):
        raise NotImplementedError

    def cdf(self, t, theta):
        raise NotImplementedError

    def point(self, v):
        """Convert an array value to a Python point of the kernel's space."""
        return float(v)

    def params(self):
        return {"kernel": self.name}


class BernoulliKernel(Kernel):
    """``k(x | theta) = theta^x (1 - theta)^(1 - x)`` on ``{0, 1}``."""

    name = "bernoulli"

    def __init__(self):
        self.space = SampleSpace(CATEGORICAL, support=(0, 1))

    def validate_theta(self, theta):
        if np.any((theta < 0) | (theta > 1)):
            raise ConfigurationError("Bernoulli parameters must lie in [0, 1]")

    def log_density(self, x, theta):
        x, theta = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(theta, dtype=float))
        with np.errstate(divide="ignore"):
            return np.where(x == 1.0, np.log(theta), np.where(x == 0.0, np.log1p(-theta), -np.inf))

    def ppf(self, u, theta):
        return (np.asarray(u) < np.asarray(theta)).astype(float)

    def cdf(self, t, theta):
        t, theta = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(theta, dtype=float))
        return np.where(t < 0.0, 0.0, np.where(t < 1.0, 1.0 - theta, 1.0))

    def point(self, v):
        return int(v)


class NormalKernel(Kernel):
    """Normal location kernel with fixed scale."""

    name = "normal"

    def __init__(self, sigma=1.0):
        if not sigma > 0:
            raise ConfigurationError("sigma must be positive")
        self.sigma = float(sigma)
        self.space = SampleSpace(REAL)

    def validate_theta(self, theta):
        if not np.all(np.isfinite(theta)):
            raise ConfigurationError("normal locations must be finite")

    def log_density(self, x, theta):
        return stats.norm.logpdf(x, loc=theta, scale=self.sigma)

    def ppf(self, u, theta):
        return theta + self.sigma * stats.norm.ppf(u)

    def cdf(self, t, theta):
        return stats.norm.cdf(t, loc=theta, scale=self.sigma)

    def params(self):
        return {"kernel": self.name, "sigma": self.sigma}


class PoissonKernel(Kernel):
    """Poisson kernel with mean ``theta``."""

    name = "poisson"

    def __init__(self):
        self.space = SampleSpace(CATEGORICAL)

    def validate_theta(self, theta):
        if np.any(np.asarray(theta) <= 0):
            raise ConfigurationError("Poisson means must be positive")

    def log_density(self, x, theta):
        return stats.poisson.logpmf(x, theta)

    def ppf(self, u, theta):
        return stats.poisson.ppf(u, theta)

    def cdf(self, t, theta):
        return stats.poisson.cdf(t, theta)

    def point(self, v):
        return int(v)


KERNELS = {"bernoulli": BernoulliKernel, "normal": NormalKernel, "poisson": PoissonKernel}


def make_kernel(name, **params) -> Kernel:
    try:
        return KERNELS[name](**params)
    except KeyError:
        raise ConfigurationError(f"unknown kernel {name!r}; choose from {sorted(KERNELS)}") from None


# ---------------------------------------------------------------------------
# mixing grid and the recursion

@dataclass(frozen=True)
class MixingGrid:
    """Grid of parameter values with the current mixing probabilities ``G_n``."""

    theta: tuple
    probs: tuple
    kernel: Kernel
    alpha: float = 1.0
    n: int = 0

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta)
        probs = tuple(float(p) for p in self.probs)
        if len(theta) != len(probs) or not theta:
            raise ConfigurationError("need one probability per grid point")
        if len(set(theta)) != len(theta):
            raise ConfigurationError("grid points must be distinct")
        if any(p < 0.0 for p in probs) or abs(math.fsum(probs) - 1.0) > NORMALIZATION_TOL:
            raise ConfigurationError("mixing probabilities must be nonnegative and sum to 1")
        if not self.alpha > 0:
            raise ConfigurationError("alpha must be positive")
        self.kernel.validate_theta(np.array(theta))
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "probs", probs)

    def weight(self, n):
        """Default schedule ``a_n = 1/(alpha + n)``."""
        return 1.0 / (self.alpha + n)

    @property
    def theta_array(self):
        return np.array(self.theta)

    @property
    def prob_array(self):
        return np.array(self.probs)


def uniform_grid(theta, kernel, alpha=1.0) -> MixingGrid:
    theta = tuple(theta)
    return MixingGrid(theta, (1.0 / len(theta),) * len(theta), kernel, alpha)


def newton_rows(G, logk, a):
    """One recursion step for each row of ``G`` given ``log k(x_r | theta_i)``.

    Returns the new rows and a mask of rows whose predictive density at
    ``x_r`` vanished.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        logw = logk + np.log(G)
        top = logw.max(axis=1, keepdims=True)
        null = ~np.isfinite(top[:, 0])
        w = np.exp(logw - np.where(np.isfinite(top), top, 0.0))
        post = w / w.sum(axis=1, keepdims=True)
    a = np.asarray(a, dtype=float).reshape(-1, 1)
    new = (1.0 - a) * G + a * np.where(null[:, None], G, post)
    s = new.sum(axis=1, keepdims=True)
    drift = np.abs(s - 1.0) > DRIFT_TOL
    new = np.where(drift, new / s, new)
    return new, null


def newton_update(g: MixingGrid, x, weight=None) -> MixingGrid:
    """Apply one step of the recursion; ``weight`` forces ``a_n``."""
    n = g.n + 1
    a = g.weight(n) if weight is None else float(weight)
    if not 0.0 <= a <= 1.0:
        raise ConfigurationError("the recursion weight must lie in [0, 1]")
    logk = g.kernel.log_density(np.array([[float(x)]]), g.theta_array[None, :])
    new, null = newton_rows(g.prob_array[None, :], logk, a)
    if null[0]:
        raise ConditioningError(f"predictive density vanishes at x={x!r}")
    return MixingGrid(g.theta, tuple(new[0].tolist()), g.kernel, g.alpha, n)


@dataclass(frozen=True)
class MixturePredictive:
    """``f(x) = sum_i k(x | theta_i) G(theta_i)`` with a sampler and cdf."""

    grid: MixingGrid

    def density(self, x) -> float:
        g = self.grid
        logk = g.kernel.log_density(float(x), g.theta_array)
        with np.errstate(divide="ignore"):
            return float(np.sum(np.exp(logk) * g.prob_array))

    def cdf(self, t):
        g = self.grid
        return float(np.sum(g.kernel.cdf(float(t), g.theta_array) * g.prob_array))

    def sample(self, rng):
        u = rng.uniforms(2)
        return self.grid.kernel.point(_draw_rows(self.grid.prob_array[None, :], self.grid, u[None, :])[0])


def newton_predict(g: MixingGrid) -> MixturePredictive:
    return MixturePredictive(g)


class _MixtureBase(BaseMeasure):
    def __init__(self, pred: MixturePredictive):
        self.pred = pred
        self.space = pred.grid.kernel.space
        self.diffuse = pred.grid.kernel.space.kind == REAL
        self.description = f"newton-mixture(n={pred.grid.n})"

    def sample(self, rng):
        return self.pred.sample(rng)

    def cdf(self, t):
        return self.pred.cdf(t)

    def pmf(self, x):
        return 0.0 if self.diffuse else self.pred.density(x)


def _draw_rows(G, grid: MixingGrid, u):
    cum = np.cumsum(G, axis=1)
    hit = u[:, :1] < cum
    last = G.shape[1] - 1 - np.argmax((G > 0)[:, ::-1], axis=1)
    idx = np.where(hit.any(axis=1), np.argmax(hit, axis=1), last)
    return grid.kernel.ppf(u[:, 1], grid.theta_array[idx])


class NewtonRule(PredictiveRule):
    """Predictive rule whose state is the current mixing grid."""

    name = "newton"
    draws_per_step = 2

    def __init__(self, g0: MixingGrid):
        self.g0 = g0
        self.kernel = g0.kernel
        self.space = g0.kernel.space

    def params(self):
        return {"rule": self.name, **self.kernel.params(), "alpha": self.g0.alpha,
                "theta": list(self.g0.theta), "g0": list(self.g0.probs)}

    def initial_state(self):
        return self.g0

    def update(self, state, x):
        return newton_update(state, x)

    def predict(self, state):
        pred = newton_predict(state)
        if self.space.support is not None:
            probs = np.array([pred.density(x) for x in self.space.support])
            return DiscreteDistribution(self.space.support, tuple((probs / probs.sum()).tolist()), self.space)
        return AtomicMixture.from_base(_MixtureBase(pred))

    def prob(self, state, x):
        return 0.0 if self.space.kind == REAL else newton_predict(state).density(x)

    def sample_next(self, state, rng):
        return newton_predict(state).sample(rng)

    def cdf(self, state, grid):
        g = state
        return g.kernel.cdf(np.asarray(grid, dtype=float)[:, None], g.theta_array[None, :]) @ g.prob_array

    # batch protocol --------------------------------------------------------
    def batch_pack(self, states):
        ns = {s.n for s in states}
        if len(ns) != 1:
            raise ConfigurationError("batched chains must share the step counter")
        return {"G": np.array([s.probs for s in states]), "n": ns.pop()}

    def batch_step(self, packed, u):
        G, n = packed["G"], packed["n"] + 1
        x = _draw_rows(G, self.g0, u)
        logk = self.kernel.log_density(x[:, None], self.g0.theta_array[None, :])
        new, _ = newton_rows(G, logk, self.g0.weight(n))
        return {"G": new, "n": n}

    def batch_unpack(self, packed):
        return [MixingGrid(self.g0.theta, tuple(row.tolist()), self.kernel, self.g0.alpha, packed["n"])
                for row in packed["G"]]

    def batch_cdf(self, packed, grid):
        c = self.kernel.cdf(np.asarray(grid, dtype=float)[:, None], self.g0.theta_array[None, :])
        return packed["G"] @ c.T
