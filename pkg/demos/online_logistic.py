"""Online gradient descent as a predictive rule.

Simulate 3000 steps from the prior of the OGD logistic rule on binary
covariates, then read off per-coordinate credible intervals for the limit.
"""
from bayespred import RandomSource, simulate_chain
from bayespred.ogd import OgdRule, binary_covariates, ogd_credible

rule = OgdRule((0.5, -0.5), binary_covariates(2))
state = simulate_chain(rule, 3000, RandomSource(5)).final_state
lo, hi, _ = ogd_credible(state, 0.95)
for i, b in enumerate(state.beta):
    print(f"beta[{i}] = {b:+.4f}   95% interval [{lo[i]:+.4f}, {hi[i]:+.4f}]")
