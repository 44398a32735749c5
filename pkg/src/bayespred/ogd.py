"""Online gradient descent for logistic classification as a predictive rule.

``beta_n = beta_{n-1} + (y_n - g(x_n, beta_{n-1})) x_n / (n log 2)`` with the
logistic link ``g``.  Read as a learning rule for the next pair ``(X, Y)``,
it defines a sequence whose ``beta_n`` is a martingale; its scaled update
sizes give ``V_n``, the estimate of the posterior covariance of the limit.

Covariate laws can be finite (one uniform per draw) or a box
``[lo, hi]^d`` (``d`` uniforms per draw); both support batched simulation.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .asymptotics import GaussianApprox, UpdateAccumulator, inverse_sqrt, vn
from .engine import PredictiveRule
from .errors import ConfigurationError, DomainError, UnsupportedOperationError
from .measures import VECTOR, AtomicMixture, DiscreteDistribution, RandomSource, SampleSpace, SamplerBase

LN2 = math.log(2.0)
CROSS_ENTROPY = "cross-entropy"
QUADRATIC = "quadratic"


class UnboundedCovariatesWarning(UserWarning):
    """The covariate law has no declared bounded support."""


def logistic_z(z):
    """``1/(1+exp(-z))`` without overflow, elementwise."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _dot_rows(X, B):
    return (X * B).sum(axis=1)


def logistic(x, beta) -> float:
    x = np.asarray(x, dtype=float).reshape(1, -1)
    beta = np.asarray(beta, dtype=float).reshape(1, -1)
    if x.shape != beta.shape:
        raise ConfigurationError(f"x has dimension {x.shape[1]}, beta has {beta.shape[1]}")
    return float(logistic_z(_dot_rows(x, beta))[0])


# ---------------------------------------------------------------------------
# covariate laws

class CovariateLaw:
    """Law ``P_X`` of the covariates."""

    dim: int
    draws: int | None = None  # uniforms per covariate draw; None = no batching
    bound: float | None = None
    support: tuple | None = None

    def transform(self, u):
        """Covariate rows from an ``(M, draws)`` array of uniforms."""
        raise UnsupportedOperationError("this covariate law cannot be driven by uniforms")

    def sample(self, rng: RandomSource):
        return self.transform(rng.uniforms(self.draws)[None, :])[0]

    def enumerate(self):
        raise UnsupportedOperationError("covariate law has no finite support")

    def describe(self):
        return {"law": type(self).__name__}


class FiniteCovariates(CovariateLaw):
    """Covariates on finitely many points."""

    draws = 1

    def __init__(self, points, probs=None):
        pts = [tuple(float(v) for v in p) for p in points]
        if not pts or len({len(p) for p in pts}) != 1:
            raise ConfigurationError("covariate points must share one dimension")
        probs = [1.0 / len(pts)] * len(pts) if probs is None else [float(p) for p in probs]
        DiscreteDistribution(tuple(pts), tuple(probs))  # validates
        self.points = np.array(pts)
        self.probs = np.array(probs)
        self.dim = self.points.shape[1]
        self.support = tuple(pts)
        self.bound = float(np.abs(self.points).max())
        self._cum = np.cumsum(self.probs)

    def transform(self, u):
        hit = u[:, :1] < self._cum[None, :]
        last = len(self.probs) - 1 - int(np.argmax((self.probs > 0)[::-1]))
        idx = np.where(hit.any(axis=1), np.argmax(hit, axis=1), last)
        return self.points[idx]

    def enumerate(self):
        return list(zip(self.support, self.probs.tolist()))

    def describe(self):
        return {"law": "finite", "points": self.points.tolist(), "probs": self.probs.tolist()}


class BoxCovariates(CovariateLaw):
    """Independent uniform coordinates on ``[lo, hi]^d``."""

    def __init__(self, dim, lo=-1.0, hi=1.0):
        if dim < 1 or not hi > lo:
            raise ConfigurationError("box law needs dim >= 1 and hi > lo")
        self.dim = self.draws = int(dim)
        self.lo, self.hi = float(lo), float(hi)
        self.bound = max(abs(self.lo), abs(self.hi))

    def transform(self, u):
        return self.lo + (self.hi - self.lo) * u

    def describe(self):
        return {"law": "box", "dim": self.dim, "lo": self.lo, "hi": self.hi}


class SamplerCovariates(CovariateLaw):
    """Covariates from a user sampler; optionally bounded."""

    def __init__(self, dim, sampler: Callable[[RandomSource], np.ndarray], bound=None):
        self.dim = int(dim)
        self._sampler = sampler
        self.bound = bound

    def sample(self, rng):
        x = np.asarray(self._sampler(rng), dtype=float).reshape(-1)
        if x.shape != (self.dim,):
            raise ConfigurationError("sampler returned a vector of the wrong dimension")
        return x


def binary_covariates(dim=2) -> FiniteCovariates:
    """Uniform law on ``{0, 1}^dim``."""
    pts = [tuple(float(b) for b in format(i, f"0{dim}b")) for i in range(2**dim)]
    return FiniteCovariates(pts)


# ---------------------------------------------------------------------------
# state and update

@dataclass(frozen=True)
class OgdState:
    """``beta_n``, the step counter and the update accumulator."""

    beta: tuple
    n: int
    acc: UpdateAccumulator
    log_scale: float = LN2
    loss: str = CROSS_ENTROPY

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if self.acc.dim != len(self.beta):
            raise ConfigurationError("accumulator dimension must match beta")
        if self.acc.n != self.n:
            raise ConfigurationError("accumulator must have recorded n updates")
        if not self.log_scale > 0:
            raise ConfigurationError("log_scale must be positive")
        if self.loss not in (CROSS_ENTROPY, QUADRATIC):
            raise ConfigurationError(f"unknown loss {self.loss!r}")

    @property
    def dim(self):
        return len(self.beta)

    @property
    def beta_array(self):
        return np.array(self.beta)

    def to_dict(self):
        return {"beta": list(self.beta), "n": self.n, "accumulator": self.acc.to_dict(),
                "log_scale": self.log_scale, "loss": self.loss}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["beta"]), int(d["n"]), UpdateAccumulator.from_dict(d["accumulator"]),
                   float(d["log_scale"]), d["loss"])


def ogd_start(beta0, log_scale=LN2, loss=CROSS_ENTROPY) -> OgdState:
    beta0 = tuple(float(b) for b in beta0)
    return OgdState(beta0, 0, UpdateAccumulator.start(beta0), log_scale, loss)


def random_beta0(dim, scale, rng: RandomSource):
    """Gaussian initial value ``N(0, scale^2 I)``."""
    return tuple(float(v) for v in scale * stats.norm.ppf(rng.uniforms(dim)))


def ogd_rows(B, X, Y, n, log_scale, loss=CROSS_ENTROPY):
    """``beta_n`` for each row, given ``beta_{n-1}`` rows, covariates and labels."""
    g = logistic_z(_dot_rows(X, B))
    r = Y - g
    if loss == QUADRATIC:
        r = 2.0 * r * g * (1.0 - g)
    return B + (r / (n * log_scale))[:, None] * X


def _check_pair(x, y, d):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (d,):
        raise ConfigurationError(f"covariate vector must have dimension {d}")
    if y not in (0, 1, 0.0, 1.0):
        raise ConfigurationError(f"label must be 0 or 1, got {y!r}")
    return x, float(y)


def ogd_update(s: OgdState, x, y) -> OgdState:
    x, y = _check_pair(x, y, s.dim)
    n = s.n + 1
    new = ogd_rows(s.beta_array[None, :], x[None, :], np.array([y]), n, s.log_scale, s.loss)[0]
    return OgdState(tuple(new.tolist()), n, s.acc.record_update(new), s.log_scale, s.loss)


def expected_update(s: OgdState, law: CovariateLaw) -> np.ndarray:
    """Exact ``E(beta_{n+1} - beta_n | past)`` over a finite covariate law."""
    total = np.zeros(s.dim)
    for x, px in law.enumerate():
        g = logistic(x, s.beta)
        up1 = ogd_update(s, x, 1).beta_array - s.beta_array
        up0 = ogd_update(s, x, 0).beta_array - s.beta_array
        total += px * (g * up1 + (1.0 - g) * up0)
    return total


def ogd_vn(s: OgdState) -> np.ndarray:
    if s.n < 1:
        raise DomainError("V_n needs n >= 1")
    return vn(s.acc)


def ogd_gaussian(s: OgdState) -> GaussianApprox:
    return GaussianApprox(s.beta_array, ogd_vn(s) / s.n, s.n)


def ogd_credible(s: OgdState, level=0.95):
    """Per-coordinate intervals ``beta_n[i] +- z sqrt(V_n[i,i]/n)`` and the whitening ``V_n^{-1/2}``."""
    ga = ogd_gaussian(s)
    lo, hi = ga.intervals(level)
    return lo, hi, inverse_sqrt(ogd_vn(s))


def u_plugin_rows(B, law: FiniteCovariates, log_scale=LN2):
    """Plug-in ``U`` for each row of ``B`` under a finite covariate law."""
    X, p = law.points, law.probs
    g = logistic_z(B @ X.T)  # (M, S)
    w = g * (1.0 - g) * p[None, :]
    return np.einsum("ms,si,sj->mij", w, X, X) / log_scale**2


def ogd_u_plugin(s: OgdState, law: CovariateLaw, draws=None, rng=None):
    """``U = (log 2)^-2 E[x x^T g (1 - g)]`` at ``beta_n``.

    Exact on a finite law; otherwise a Monte Carlo mean over ``draws``
    covariates.  Returns ``(U, standard_error)``.
    """
    if isinstance(law, FiniteCovariates) and draws is None:
        return u_plugin_rows(s.beta_array[None, :], law, s.log_scale)[0], np.zeros((s.dim, s.dim))
    if draws is None or rng is None:
        raise ConfigurationError("Monte Carlo plug-in needs draws and rng")
    X = np.array([law.sample(rng) for _ in range(draws)])
    g = logistic_z(X @ s.beta_array)
    terms = (g * (1.0 - g))[:, None, None] * X[:, :, None] * X[:, None, :] / s.log_scale**2
    return terms.mean(axis=0), terms.std(axis=0, ddof=1) / math.sqrt(draws)


# ---------------------------------------------------------------------------
# the rule

class OgdRule(PredictiveRule):
    """Joint predictive of ``(X, Y)``: ``X ~ P_X`` and ``Y | X ~ Bernoulli(g(X, beta_n))``.

    Points are tuples ``(x_1, ..., x_d, y)``.
    """

    name = "ogd"

    def __init__(self, beta0, law: CovariateLaw, log_scale=LN2, loss=CROSS_ENTROPY):
        self.beta0 = tuple(float(b) for b in beta0)
        if len(self.beta0) != law.dim:
            raise ConfigurationError("beta0 and the covariate law differ in dimension")
        self.law = law
        self.log_scale = float(log_scale)
        self.loss = loss
        self.d = law.dim
        support = None
        if law.support is not None:
            support = tuple(x + (float(y),) for x in law.support for y in (0, 1))
        self.space = SampleSpace(VECTOR, self.d + 1, support)
        self.draws_per_step = None if law.draws is None else law.draws + 1
        if law.bound is None:
            warnings.warn("covariate law has no declared bound; the convergence theory assumes bounded support",
                          UnboundedCovariatesWarning, stacklevel=2)

    def params(self):
        return {"rule": self.name, "beta0": list(self.beta0), "log_scale": self.log_scale, "loss": self.loss,
                "covariates": self.law.describe()}

    def initial_state(self):
        return ogd_start(self.beta0, self.log_scale, self.loss)

    def update(self, state, point):
        return ogd_update(state, point[:-1], point[-1])

    def prob(self, state, point):
        px = dict(self.law.enumerate()).get(tuple(float(v) for v in point[:-1]), 0.0)
        g = logistic(point[:-1], state.beta)
        return px * (g if point[-1] == 1 else 1.0 - g)

    def predict(self, state):
        if self.space.support is not None:
            probs = [self.prob(state, p) for p in self.space.support]
            return DiscreteDistribution(self.space.support, probs, self.space)
        return AtomicMixture.from_base(SamplerBase(self.space, lambda rng: self.sample_next(state, rng),
                                                   description="ogd-joint"))

    def sample_next(self, state, rng):
        if self.draws_per_step is None:
            x = self.law.sample(rng)
            y = 1.0 if rng.uniform() < logistic(x, state.beta) else 0.0
            return tuple(x.tolist()) + (y,)
        u = rng.uniforms(self.draws_per_step)[None, :]
        X, Y = self._draw(state.beta_array[None, :], u)
        return tuple(X[0].tolist()) + (float(Y[0]),)

    def _draw(self, B, u):
        X = self.law.transform(u[:, :-1])
        g = logistic_z(_dot_rows(X, B))
        return X, (u[:, -1] < g).astype(float)

    # batch protocol --------------------------------------------------------
    def batch_pack(self, states):
        ns = {s.n for s in states}
        if len(ns) != 1:
            raise ConfigurationError("batched chains must share the step counter")
        return {"beta": np.array([s.beta for s in states]), "n": ns.pop(),
                "acc": np.array([s.acc.total for s in states])}

    def batch_step(self, packed, u):
        B, n = packed["beta"], packed["n"] + 1
        X, Y = self._draw(B, u)
        new = ogd_rows(B, X, Y, n, self.log_scale, self.loss)
        d = new - B
        acc = packed["acc"] + (n * n) * (d[:, :, None] * d[:, None, :])
        return {"beta": new, "n": n, "acc": acc}

    def batch_unpack(self, packed):
        n = packed["n"]
        return [OgdState(tuple(b.tolist()), n, UpdateAccumulator(n, b, a), self.log_scale, self.loss)
                for b, a in zip(packed["beta"], packed["acc"])]


def beta_of(state: OgdState):
    """Extractor returning ``beta_n``."""
    return state.beta_array
