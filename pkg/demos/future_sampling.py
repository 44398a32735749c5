"""Posterior uncertainty by imputing the future.

A binary Pólya urn with alpha = 2 is conditioned on ten observations and run
forward 5000 steps, 2000 times.  The terminal frequency of ones is compared
with its closed-form Beta law.
"""
import numpy as np

from bayespred import PolyaRule, ResamplingPlan, sample_posterior, uniform_discrete
from bayespred.resampling import beta_ks, polya_beta_parameters

data = [1, 1, 0, 1, 0, 1, 1, 1, 0, 1]
rule = PolyaRule(2.0, uniform_discrete((0, 1)))
plan = ResamplingPlan(len(data) + 5000, 2000, (0.5,), seed=11)
sample = sample_posterior(rule, data, plan, workers=4)

ones = 1.0 - sample.values[:, 0]  # the grid point 0.5 records F({0})
a, b = polya_beta_parameters(2.0, 0.5, data)
ks, p = beta_ks(ones, a, b)
print(f"imputed limit frequency: mean {ones.mean():.4f}, sd {ones.std():.4f}")
print(f"Beta({a:g}, {b:g}):          mean {a / (a + b):.4f}, sd {np.sqrt(a * b / (a + b) ** 2 / (a + b + 1)):.4f}")
print(f"KS distance {ks:.4f} (p = {p:.3f})")
