import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayespred.asymptotics import UpdateAccumulator
from bayespred.engine import condition, simulate_chain
from bayespred.errors import ConfigurationError, DomainError
from bayespred.measures import RandomSource
from bayespred.ogd import (
    LN2,
    QUADRATIC,
    BoxCovariates,
    FiniteCovariates,
    OgdRule,
    OgdState,
    SamplerCovariates,
    UnboundedCovariatesWarning,
    binary_covariates,
    expected_update,
    logistic,
    logistic_z,
    ogd_credible,
    ogd_start,
    ogd_u_plugin,
    ogd_update,
    ogd_vn,
    random_beta0,
)
from bayespred.resampling import advance_batch


def test_first_update_frozen_value():
    s = ogd_update(ogd_start((0.0, 0.0)), (1.0, 1.0), 1)
    assert s.beta == pytest.approx((0.7213475204444817, 0.7213475204444817), abs=1e-15)
    assert s.n == 1


def test_logistic_does_not_overflow():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        v = logistic_z(np.array([-1000.0, 0.0, 1000.0]))
    assert v.tolist() == [0.0, 0.5, 1.0]
    assert logistic((1.0, 2.0), (0.5, -0.25)) == 0.5


def test_label_and_dimension_validation():
    s = ogd_start((0.0, 0.0))
    with pytest.raises(ConfigurationError):
        ogd_update(s, (1.0, 0.0), 2)
    with pytest.raises(ConfigurationError):
        ogd_update(s, (1.0,), 1)
    with pytest.raises(ConfigurationError):
        OgdRule((0.0,), binary_covariates(2))


def test_expected_update_vanishes_on_frozen_state():
    s = OgdState((0.3, -1.2), 0, ogd_start((0.3, -1.2)).acc)
    law = FiniteCovariates([(1.0, 0.0), (1.0, 1.0), (0.5, -2.0)], [0.2, 0.5, 0.3])
    assert np.max(np.abs(expected_update(s, law))) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-4, 4), min_size=3, max_size=3), st.integers(0, 500),
       st.sampled_from(["cross-entropy", QUADRATIC]))
def test_beta_is_a_martingale(beta, n, loss):
    law = FiniteCovariates([(1.0, 0.0, 1.0), (1.0, 1.0, -1.0), (1.0, -0.5, 0.5)], [0.3, 0.3, 0.4])
    s = ogd_start(beta, loss=loss)
    s = OgdState(s.beta, n, UpdateAccumulator(n, s.acc.previous, s.acc.total), s.log_scale, loss)
    assert np.max(np.abs(expected_update(s, law))) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2), st.lists(st.floats(-3, 3), min_size=2, max_size=2),
       st.integers(0, 1), st.integers(0, 1000))
def test_update_size_is_bounded(beta, x, y, n):
    s = ogd_start(beta)
    s = OgdState(s.beta, n, UpdateAccumulator(n, s.acc.previous, s.acc.total))
    new = ogd_update(s, x, y)
    step = np.abs(new.beta_array - s.beta_array)
    assert np.all(step <= np.abs(x) / ((n + 1) * LN2) * (1 + 1e-12))


def test_batched_and_sequential_agree_exactly():
    rule = OgdRule((0.1, -0.2, 0.3), BoxCovariates(3))
    root = RandomSource(6)
    packed = advance_batch(rule, rule.batch_pack([rule.initial_state()] * 3), [root.branch(r) for r in range(3)],
                           500)
    batched = rule.batch_unpack(packed)
    for r in range(3):
        single = simulate_chain(rule, 500, root.branch(r)).final_state
        assert single.beta == batched[r].beta
        assert np.array_equal(single.acc.total, batched[r].acc.total)


def test_finite_law_batch_matches_sequence():
    rule = OgdRule((0.0, 0.0), binary_covariates(2))
    root = RandomSource(8)
    packed = advance_batch(rule, rule.batch_pack([rule.initial_state()]), [root.branch(0)], 200)
    single = simulate_chain(rule, 200, root.branch(0)).final_state
    assert rule.batch_unpack(packed)[0].beta == single.beta


def test_joint_predictive_on_finite_law():
    rule = OgdRule((0.0, 1.0), FiniteCovariates([(1.0, 0.0), (1.0, 1.0)]))
    s = rule.initial_state()
    assert rule.prob(s, (1.0, 1.0, 1)) == pytest.approx(0.5 * logistic((1.0, 1.0), (0.0, 1.0)))
    assert abs(sum(rule.predict(s).probs) - 1.0) <= 1e-12


def test_state_round_trip():
    rule = OgdRule((0.0, 0.0), binary_covariates(2))
    s = simulate_chain(rule, 30, RandomSource(2)).final_state
    back = OgdState.from_dict(s.to_dict())
    assert back.beta == s.beta and np.array_equal(back.acc.total, s.acc.total)


def test_unbounded_law_warns():
    law = SamplerCovariates(2, lambda rng: rng.generator.standard_normal(2))
    with pytest.warns(UnboundedCovariatesWarning):
        rule = OgdRule((0.0, 0.0), law)
    s = simulate_chain(rule, 20, RandomSource(1)).final_state
    assert s.n == 20 and rule.draws_per_step is None


def test_vn_needs_updates():
    with pytest.raises(DomainError):
        ogd_vn(ogd_start((0.0,)))


def test_credible_intervals_contain_estimate():
    rule = OgdRule((0.0, 0.0), BoxCovariates(2))
    s = condition(rule, simulate_chain(rule, 300, RandomSource(4)).observations)
    lo, hi, w = ogd_credible(s, 0.9)
    assert np.all(lo < s.beta_array) and np.all(s.beta_array < hi)
    assert np.allclose(w @ ogd_vn(s) @ w, np.eye(2), atol=1e-9)


def test_u_plugin_exact_and_monte_carlo_agree():
    law = FiniteCovariates([(1.0, -1.0), (1.0, 0.5), (1.0, 2.0)], [0.2, 0.5, 0.3])
    s = ogd_start((0.4, -0.3))
    exact, _ = ogd_u_plugin(s, law)
    mc, se = ogd_u_plugin(s, law, draws=20_000, rng=RandomSource(3))
    assert np.all(np.abs(mc - exact) <= 4 * se + 1e-12)
    g = [logistic(x, s.beta) for x in law.support]
    want = sum(p * gi * (1 - gi) * np.outer(x, x) for x, p, gi in zip(law.points, law.probs, g)) / LN2**2
    assert np.allclose(exact, want, atol=1e-14)


def test_random_beta0_scale():
    root = RandomSource(11)
    draws = np.array([random_beta0(2, 0.5, root.branch(r)) for r in range(4000)])
    assert abs(draws.std() - 0.5) < 0.02


def test_box_law_validation():
    with pytest.raises(ConfigurationError):
        BoxCovariates(0)
    with pytest.raises(ConfigurationError):
        BoxCovariates(2, 1.0, 1.0)
    assert binary_covariates(3).support[5] == (1.0, 0.0, 1.0)
    assert math.isclose(BoxCovariates(2, -3.0, 1.0).bound, 3.0)
