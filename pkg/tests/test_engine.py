import itertools
import math

import numpy as np
import pytest
from scipy import stats

from bayespred.engine import (
    IidRule,
    condition,
    enumerate_joint,
    joint_prob,
    log_joint_prob,
    simulate_chain,
)
from bayespred.errors import ConfigurationError, DomainError, RuleUpdateError, UnsupportedOperationError
from bayespred.exchangeable import PolyaRule
from bayespred.measures import ContinuousBase, DiscreteDistribution, RandomSource, uniform_discrete
from bayespred.resampling import advance_batch

BINARY = uniform_discrete((0, 1))
TERNARY = uniform_discrete((1, 2, 3))


def test_zero_steps_gives_prior_snapshot_only():
    rule = PolyaRule(1.0, BINARY)
    path = simulate_chain(rule, 0, RandomSource(0), grid=[0.5])
    assert len(path) == 0
    assert path.snapshots.shape == (1, 1)
    assert path.snapshots[0, 0] == 0.5


def test_iid_rule_never_learns():
    rule = IidRule(DiscreteDistribution((0, 1), (0.3, 0.7)))
    path = simulate_chain(rule, 25, RandomSource(1), grid=[0.0, 0.5, 1.0])
    assert np.all(path.snapshots == path.snapshots[0])


def test_first_draw_of_polya_is_fair():
    rule = PolyaRule(1.0, BINARY)
    root = RandomSource(11)
    ones = sum(simulate_chain(rule, 1, root.branch(r)).observations[0] for r in range(10_000))
    assert abs(ones / 10_000 - 0.5) <= 0.015


def test_condition_examples():
    rule = PolyaRule(1.0, BINARY)
    assert condition(rule, []) == rule.initial_state()
    assert rule.prob(condition(rule, [1]), 1) == 0.75
    rule3 = PolyaRule(2.0, TERNARY)
    assert rule3.prob(condition(rule3, [1, 1, 2]), 1) == pytest.approx((2 / 3 + 2) / 5, abs=1e-15)


def test_condition_names_the_bad_position():
    rule = PolyaRule(1.0, BINARY)
    with pytest.raises(ConfigurationError, match="position 2"):
        condition(rule, [0, 1, 5])


def test_joint_prob_examples():
    rule = PolyaRule(1.0, BINARY)
    assert joint_prob(rule, [1]) == 0.5
    assert joint_prob(rule, [1, 1]) == pytest.approx(0.375, abs=1e-15)
    law = enumerate_joint(rule, 4)
    assert len(law) == 16
    assert abs(math.fsum(law.values()) - 1.0) <= 1e-12


def test_joint_prob_needs_finite_space():
    rule = PolyaRule(1.0, ContinuousBase(stats.uniform()))
    with pytest.raises(UnsupportedOperationError):
        joint_prob(rule, [0.3])


def test_joint_prob_needs_a_sequence():
    with pytest.raises(ConfigurationError):
        joint_prob(PolyaRule(1.0, BINARY), [])


@pytest.mark.parametrize("base", [BINARY, TERNARY])
def test_factorization_sums_to_one(base):
    rule = PolyaRule(1.5, base)
    top = 6 if len(base.labels) == 2 else 5
    for n in range(1, top + 1):
        assert abs(math.fsum(enumerate_joint(rule, n).values()) - 1.0) <= 1e-12


def test_marginal_consistency():
    rule = PolyaRule(0.7, TERNARY)
    short, long = enumerate_joint(rule, 3), enumerate_joint(rule, 4)
    for seq, p in short.items():
        assert math.fsum(long[seq + (x,)] for x in TERNARY.labels) == pytest.approx(p, abs=1e-15)


def test_snapshots_match_conditioned_predictive():
    rule = PolyaRule(2.0, TERNARY)
    grid = [1.5, 2.5]
    path = simulate_chain(rule, 30, RandomSource(8), grid=grid)
    for m in (0, 1, 7, 30):
        state = condition(rule, path.observations[:m])
        assert np.allclose(path.snapshots[m], rule.cdf(state, grid), atol=0, rtol=0)


def test_long_chains_do_not_underflow():
    rule = PolyaRule(1.0, TERNARY)
    seq = list(simulate_chain(rule, 400, RandomSource(3)).observations)
    lp = log_joint_prob(rule, seq)
    assert math.isfinite(lp) and lp < -100
    assert joint_prob(rule, seq) == 0.0 or joint_prob(rule, seq) == math.exp(lp)


def test_update_failure_reports_step():
    class Failing(PolyaRule):
        def update(self, state, x):
            if state.n == 3:
                raise DomainError("bad state")
            return super().update(state, x)

    rule = Failing(1.0, BINARY)
    with pytest.raises(RuleUpdateError) as info:
        simulate_chain(rule, 10, RandomSource(0))
    assert info.value.step == 3
    with pytest.raises(RuleUpdateError) as info:
        condition(rule, [0, 1, 0, 1, 1])
    assert info.value.step == 3


def test_counter_discipline_is_enforced():
    class Skipping(PolyaRule):
        def update(self, state, x):
            s = super().update(state, x)
            return super().update(s, x)

    with pytest.raises(ConfigurationError, match="exactly one"):
        condition(Skipping(1.0, BINARY), [0])


def test_batched_and_single_chains_agree():
    rule = PolyaRule(1.3, TERNARY)
    root = RandomSource(21)
    packed = rule.batch_pack([rule.initial_state()] * 4)
    packed = advance_batch(rule, packed, [root.branch(r) for r in range(4)], 300)
    batched = rule.batch_unpack(packed)
    for r in range(4):
        single = simulate_chain(rule, 300, root.branch(r)).final_state
        assert single == batched[r]


def test_states_are_values():
    rule = PolyaRule(1.0, BINARY)
    s1 = condition(rule, [1, 0])
    s2 = rule.update(s1, 1)
    assert s1.n == 2 and s2.n == 3
    assert condition(rule, [1, 0]) == s1


def test_enumeration_handles_zero_mass_prefixes():
    rule = IidRule(DiscreteDistribution((0, 1), (1.0, 0.0)))
    law = enumerate_joint(rule, 2)
    assert law[(0, 0)] == 1.0 and law[(1, 1)] == 0.0 and len(law) == 4


def test_all_sequences_enumerated():
    law = enumerate_joint(PolyaRule(1.0, TERNARY), 3)
    assert set(law) == set(itertools.product((1, 2, 3), repeat=3))
