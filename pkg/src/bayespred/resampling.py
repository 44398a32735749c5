"""Sampling from the future.

Every replicate starts from the same (prior or conditioned) state, imagines
the missing observations up to a horizon ``N`` by drawing from the
predictive rule, and records a terminal summary: the predictive ``P_N`` or
the empirical ``F_N`` on a grid, or any functional of the terminal state.
The replicates form a Monte Carlo sample from the prior or posterior law
of the directing random measure.

Replicate ``r`` always draws from branch ``r`` of the root source, and
replicates are split into fixed-size chunks, so results do not depend on
the number of workers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .engine import PredictiveRule, condition, simulate_chain
from .errors import ConfigurationError, ReplicateError
from .io import digest, write_csv, write_json
from .measures import RandomSource

PREDICTIVE = "predictive"
EMPIRICAL = "empirical"
DEFAULT_FUTURE = 5000
DEFAULT_REPLICATES = 2000
CHUNK = 256  # replicates per work unit
BLOCK = 1024  # steps per block of pre-drawn uniforms


@dataclass(frozen=True)
class ResamplingPlan:
    """Horizon, replicate count, evaluation grid, terminal estimator and seed."""

    horizon: int
    replicates: int = DEFAULT_REPLICATES
    grid: tuple = ()
    estimator: str = PREDICTIVE
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(t) for t in self.grid))
        if self.horizon < 0:
            raise ConfigurationError("horizon must be >= 0")
        if self.replicates < 1:
            raise ConfigurationError("need at least one replicate")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigurationError("grid must be strictly increasing")
        if self.estimator not in (PREDICTIVE, EMPIRICAL):
            raise ConfigurationError(f"unknown terminal estimator {self.estimator!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    @classmethod
    def default(cls, n_data, grid, seed=0, **kw):
        return cls(n_data + DEFAULT_FUTURE, DEFAULT_REPLICATES, tuple(grid), seed=seed, **kw)

    def as_dict(self):
        return {"horizon": self.horizon, "replicates": self.replicates, "grid": list(self.grid),
                "estimator": self.estimator, "seed": self.seed}


@dataclass(frozen=True)
class PosteriorSample:
    """``M x k`` matrix of terminal values plus run metadata."""

    values: np.ndarray
    columns: tuple
    metadata: dict = field(default_factory=dict)

    @property
    def replicates(self):
        return self.values.shape[0]

    def mean(self):
        return self.values.mean(axis=0)

    def std(self):
        return self.values.std(axis=0, ddof=1) if self.replicates > 1 else np.zeros(self.values.shape[1])

    def write(self, csv_path):
        """Write the matrix as CSV and the metadata as a JSON sidecar."""
        csv_path = Path(csv_path)
        write_csv(csv_path, list(self.columns), self.values.tolist())
        write_json(csv_path.with_suffix(".json"), self.metadata)


def advance_batch(rule: PredictiveRule, packed, sources, steps, on_step=None, first_step=1):
    """Advance a packed batch ``steps`` times in lockstep.

    Replicate ``i`` consumes uniforms only from ``sources[i]``, in the same
    order as single-chain simulation would, so batched and sequential runs
    give identical chains.  ``on_step(packed, m)`` is called after step ``m``.
    """
    d = rule.draws_per_step
    done = 0
    while done < steps:
        b = min(BLOCK, steps - done)
        u = np.stack([s.generator.random((b, d)) for s in sources])
        for i in range(b):
            packed = rule.batch_step(packed, u[:, i, :])
            if on_step is not None:
                on_step(packed, first_step + done + i)
        done += b
    return packed


def _chunks(m):
    return [range(a, min(a + CHUNK, m)) for a in range(0, m, CHUNK)]


def _empirical(obs, grid):
    x = np.asarray(obs, dtype=float)
    return (x[:, None] <= np.asarray(grid)[None, :]).mean(axis=0)


def run_replicates(rule, state0, data, plan: ResamplingPlan, record=None, workers=1):
    """Simulate ``plan.horizon - n`` future steps per replicate and record a summary.

    ``record(state) -> vector`` overrides the grid estimator.
    """
    n = state0.n
    future = plan.horizon - n
    if future < 0:
        raise ConfigurationError(f"horizon {plan.horizon} is shorter than the data ({n})")
    if record is None and plan.estimator == EMPIRICAL and plan.horizon == 0:
        raise ConfigurationError("the empirical estimator needs horizon >= 1")
    grid = np.asarray(plan.grid)
    root = RandomSource(plan.seed)

    def run(reps):
        if rule.supports_batch:
            packed = rule.batch_pack([state0] * len(reps))
            packed = advance_batch(rule, packed, [root.branch(r) for r in reps], future)
            if record is not None:
                return _extract(record, rule.batch_unpack(packed), reps)
            if plan.estimator == PREDICTIVE:
                return rule.batch_cdf(packed, grid)
            return rule.batch_empirical_cdf(packed, grid)
        rows = []
        for r in reps:
            path = simulate_chain(rule, future, root.branch(r), state=state0)
            if record is not None:
                rows.append(_extract(record, [path.final_state], [r])[0])
            elif plan.estimator == PREDICTIVE:
                rows.append(rule.cdf(path.final_state, grid))
            else:
                rows.append(_empirical(list(data) + list(path.observations), grid))
        return np.array(rows, dtype=float).reshape(len(reps), -1)

    chunks = _chunks(plan.replicates)
    if workers <= 1 or len(chunks) == 1:
        parts = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    values = np.vstack(parts)
    if record is None:
        values = np.clip(values, 0.0, 1.0)
    return values


def _extract(record, states, reps):
    out = []
    for s, r in zip(states, reps):
        try:
            out.append(np.atleast_1d(np.asarray(record(s), dtype=float)))
        except Exception as exc:
            raise ReplicateError(r, exc) from exc
    return np.array(out)


def _metadata(rule, plan, data, mode, extra=None):
    meta = {"rule": rule.params(), "mode": mode, **plan.as_dict(),
            "n_data": len(data), "data_digest": digest(data)}
    meta.update(extra or {})
    return meta


def sample_prior(rule: PredictiveRule, plan: ResamplingPlan, workers=1) -> PosteriorSample:
    """Draws of the directing measure on the grid under the prior."""
    values = run_replicates(rule, rule.initial_state(), [], plan, workers=workers)
    return PosteriorSample(values, tuple(f"t={t!r}" for t in plan.grid), _metadata(rule, plan, [], "prior"))


def sample_posterior(rule: PredictiveRule, data, plan: ResamplingPlan, workers=1) -> PosteriorSample:
    """Draws of the directing measure on the grid given ``data``."""
    data = list(data)
    if plan.horizon < len(data):
        raise ConfigurationError(f"horizon {plan.horizon} is shorter than the data ({len(data)})")
    state = condition(rule, data)
    values = run_replicates(rule, state, data, plan, workers=workers)
    return PosteriorSample(values, tuple(f"t={t!r}" for t in plan.grid), _metadata(rule, plan, data, "posterior"))


def functional_posterior(rule: PredictiveRule, data, plan: ResamplingPlan, extractor, names=None,
                         workers=1) -> PosteriorSample:
    """Draws of ``extractor(terminal state)`` given ``data``."""
    data = list(data)
    if plan.horizon < len(data):
        raise ConfigurationError(f"horizon {plan.horizon} is shorter than the data ({len(data)})")
    state = condition(rule, data)
    values = run_replicates(rule, state, data, plan, record=extractor, workers=workers)
    cols = tuple(names) if names is not None else tuple(f"f{i}" for i in range(values.shape[1]))
    if len(cols) != values.shape[1]:
        raise ConfigurationError("one name per extracted coordinate")
    return PosteriorSample(values, cols, _metadata(rule, plan, data, "functional"))


def horizon_stability(rule, data, plan: ResamplingPlan, workers=1) -> dict:
    """Compare the sample mean at horizon ``N`` with the one at doubled future length.

    Returns the per-grid-point shift in units of the Monte Carlo standard
    error of the difference, and whether all shifts are below 3.
    """
    data = list(data)
    doubled = ResamplingPlan(len(data) + 2 * (plan.horizon - len(data)), plan.replicates, plan.grid,
                             plan.estimator, plan.seed)
    a = sample_posterior(rule, data, plan, workers)
    b = sample_posterior(rule, data, doubled, workers)
    diff = b.values - a.values
    m = a.replicates
    se = diff.std(axis=0, ddof=1) / np.sqrt(m) if m > 1 else np.zeros(diff.shape[1])
    shift = np.abs(diff.mean(axis=0))
    z = np.where(se > 0, shift / np.where(se > 0, se, 1.0), np.where(shift > 0, np.inf, 0.0))
    return {"horizons": [plan.horizon, doubled.horizon], "shift": shift.tolist(), "z": z.tolist(),
            "stable": bool(np.all(z < 3.0))}


def beta_ks(column, a, b):
    """Kolmogorov-Smirnov distance (and p-value) of a sample against Beta(a, b)."""
    res = stats.kstest(np.asarray(column, dtype=float), stats.beta(a, b).cdf)
    return float(res.statistic), float(res.pvalue)


def polya_beta_parameters(alpha, p1, data, one=1):
    """Beta parameters of the limit frequency of ``one`` for a binary Pólya rule."""
    n1 = sum(1 for x in data if x == one)
    return alpha * p1 + n1, alpha * (1.0 - p1) + len(data) - n1

