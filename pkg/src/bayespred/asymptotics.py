"""Predictive updates and Gaussian approximations of the posterior.

The accumulator keeps ``sum_m m^2 Delta_m Delta_m^T`` where ``Delta_m`` is
the change of a tracked vector (the predictive on a grid, or a parameter
estimate) when observation ``m`` arrives.  Divided by ``n`` it gives the
matrix ``V_n`` whose ratio ``V_n / n`` approximates the posterior
covariance of the limit.
"""
from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ConfigurationError, DomainError
from .measures import RandomSource
from .resampling import CHUNK, advance_batch

EIGEN_FLOOR = 1e-14


class DegenerateCovarianceWarning(UserWarning):
    """Zero variance entries or a singular covariance matrix."""


@dataclass(frozen=True)
class UpdateAccumulator:
    """Running ``sum m^2 Delta Delta^T`` with the last tracked vector."""

    n: int
    previous: np.ndarray
    total: np.ndarray

    def __post_init__(self):
        prev = np.array(self.previous, dtype=float).reshape(-1)
        tot = np.array(self.total, dtype=float).reshape(len(prev), len(prev))
        prev.flags.writeable = False
        tot.flags.writeable = False
        object.__setattr__(self, "previous", prev)
        object.__setattr__(self, "total", tot)
        if self.n < 0:
            raise ConfigurationError("n must be >= 0")

    @classmethod
    def start(cls, initial):
        initial = np.asarray(initial, dtype=float).reshape(-1)
        return cls(0, initial, np.zeros((len(initial), len(initial))))

    @property
    def dim(self):
        return len(self.previous)

    def record_update(self, new_values) -> "UpdateAccumulator":
        new = np.asarray(new_values, dtype=float).reshape(-1)
        if new.shape != self.previous.shape:
            raise ConfigurationError(f"expected a vector of length {self.dim}, got {new.size}")
        m = self.n + 1
        d = new - self.previous
        return UpdateAccumulator(m, new, self.total + (m * m) * (d[:, None] * d[None, :]))

    @classmethod
    def from_path(cls, values) -> "UpdateAccumulator":
        """Accumulate a whole trajectory ``values[0..n]`` (row 0 is the prior) at once."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        acc = cls.start(values[0])
        for row in values[1:]:
            acc = acc.record_update(row)
        return acc

    def to_dict(self):
        return {"n": self.n, "previous": self.previous.tolist(), "total": self.total.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["n"]), d["previous"], d["total"])


def symmetrize(a):
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def vn(acc: UpdateAccumulator) -> np.ndarray:
    """``V_n = (1/n) sum_{m<=n} m^2 Delta_m Delta_m^T``."""
    if acc.n < 1:
        raise DomainError("V_n needs at least one recorded update")
    return symmetrize(acc.total / acc.n)


def normal_quantile(level):
    """Two-sided standard normal quantile ``z_{1-(1-level)/2}``."""
    if not 0.0 < level < 1.0:
        raise ConfigurationError("level must lie in (0, 1)")
    return float(stats.norm.ppf(0.5 + level / 2.0))


def credible_interval(acc: UpdateAccumulator, center, index=0, level=0.95, clip=True):
    """``center +- z sqrt(V[i,i] / n)``, clipped to [0, 1] by default."""
    v = vn(acc)[index, index]
    if v <= 0.0:
        warnings.warn(f"zero variance at coordinate {index}: zero-width interval", DegenerateCovarianceWarning,
                      stacklevel=2)
        v = 0.0
    half = normal_quantile(level) * np.sqrt(v / acc.n)
    lo, hi = float(center) - half, float(center) + half
    if clip:
        lo, hi = max(0.0, lo), min(1.0, hi)
    return lo, hi


def inverse_sqrt(cov):
    """Symmetric ``cov^{-1/2}`` with eigenvalues below the floor treated as zero."""
    w, q = np.linalg.eigh(symmetrize(cov))
    keep = w > EIGEN_FLOOR
    if not np.all(keep):
        warnings.warn("singular covariance: using the pseudo-inverse square root", DegenerateCovarianceWarning,
                      stacklevel=2)
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / np.sqrt(w[keep])
    return (q * inv) @ q.T


@dataclass(frozen=True)
class GaussianApprox:
    """``N(center, covariance)`` with ``covariance = V_n / n``."""

    center: np.ndarray
    covariance: np.ndarray
    n: int

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        cov = symmetrize(np.array(self.covariance, dtype=float).reshape(len(c), len(c)))
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "covariance", cov)

    def intervals(self, level=0.95, clip=False):
        z = normal_quantile(level)
        half = z * np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))
        lo, hi = self.center - half, self.center + half
        if clip:
            lo, hi = np.clip(lo, 0.0, 1.0), np.clip(hi, 0.0, 1.0)
        return lo, hi

    def whitening(self):
        return inverse_sqrt(self.covariance)

    def whiten(self, target):
        """``covariance^{-1/2} (target - center)``, approximately standard normal."""
        return self.whitening() @ (np.asarray(target, dtype=float) - self.center)

    def to_json(self):
        return json.dumps({"center": self.center.tolist(), "covariance": self.covariance.tolist(), "n": self.n},
                          sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["center"], d["covariance"], int(d["n"]))


def gaussian_posterior(acc: UpdateAccumulator, center) -> GaussianApprox:
    return GaussianApprox(center, vn(acc) / acc.n, acc.n)


def validate_grid(grid, base):
    """Reject grid points carrying base mass (the asymptotics need a null grid)."""
    bad = [t for t in grid if base.pmf(float(t)) > 0.0]
    if bad:
        raise ConfigurationError(f"grid points {bad} are atoms of the base measure")
    return tuple(float(t) for t in grid)


# ---------------------------------------------------------------------------
# replicated coverage experiments

@dataclass(frozen=True)
class CoverageRun:
    """Per-replicate centres at ``n``, ``V_n`` matrices and limit proxies at ``N``."""

    n: int
    horizon: int
    centers: np.ndarray  # (R, k)
    targets: np.ndarray  # (R, k)
    vmats: np.ndarray  # (R, k, k)

    def covered(self, level):
        z = normal_quantile(level)
        half = z * np.sqrt(np.clip(np.diagonal(self.vmats, axis1=1, axis2=2), 0.0, None) / self.n)
        return np.abs(self.targets - self.centers) <= half

    def coverage(self, level):
        """Fraction of replicates covered, per coordinate."""
        return self.covered(level).mean(axis=0)

    def whitened(self):
        """``sqrt(n) V_n^{-1/2} (target - center)`` per replicate."""
        out = np.empty_like(self.centers)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateCovarianceWarning)
            for r in range(len(out)):
                out[r] = np.sqrt(self.n) * inverse_sqrt(self.vmats[r]) @ (self.targets[r] - self.centers[r])
        return out

    def normality_pvalues(self):
        """Per-coordinate KS p-values of the whitened residuals against N(0, 1)."""
        w = self.whitened()
        return [float(stats.kstest(w[:, j], "norm").pvalue) for j in range(w.shape[1])]


def coverage_experiment(rule, n, horizon, replicates, summary, seed=0, workers=1) -> CoverageRun:
    """Run ``replicates`` batched chains from the prior.

    ``summary(packed) -> (M, k)`` is the tracked vector (predictive on a grid,
    parameter estimate).  Its updates over the first ``n`` steps feed ``V_n``;
    its value at ``horizon`` proxies the limit.
    """
    if not rule.supports_batch:
        raise ConfigurationError(f"{rule.name} has no batch simulation")
    if not 1 <= n <= horizon:
        raise ConfigurationError("need 1 <= n <= horizon")
    root = RandomSource(seed)

    def run(reps):
        packed = rule.batch_pack([rule.initial_state()] * len(reps))
        sources = [root.branch(r) for r in reps]
        prev = np.array(summary(packed), dtype=float)
        total = np.zeros((len(reps), prev.shape[1], prev.shape[1]))

        def on_step(p, m):
            nonlocal prev, total
            cur = np.array(summary(p), dtype=float)
            d = cur - prev
            total += (m * m) * (d[:, :, None] * d[:, None, :])
            prev = cur

        packed = advance_batch(rule, packed, sources, n, on_step=on_step)
        centers = prev.copy()
        packed = advance_batch(rule, packed, sources, horizon - n)
        targets = np.array(summary(packed), dtype=float)
        vm = total / n
        return centers, targets, 0.5 * (vm + np.transpose(vm, (0, 2, 1)))

    chunks = [range(a, min(a + CHUNK, replicates)) for a in range(0, replicates, CHUNK)]
    if workers <= 1 or len(chunks) == 1:
        parts = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    return CoverageRun(n, horizon, np.vstack([p[0] for p in parts]), np.vstack([p[1] for p in parts]),
                       np.concatenate([p[2] for p in parts]))
