"""End-to-end acceptance checks, one test per target.

Each test prints a single PASS/FAIL line with the measured quantities and
its runtime.  Oracles are computed here, independently of the library.
"""
import itertools
import math
import time
from collections import Counter
from fractions import Fraction

import numpy as np
from scipy import stats

from bayespred.asymptotics import UpdateAccumulator, coverage_experiment
from bayespred.cli import main
from bayespred.diagnostics import check_cid, check_exchangeable
from bayespred.engine import condition, joint_prob
from bayespred.exchangeable import (
    PolyaRule,
    block_sizes,
    eppf_crp,
    eppf_py,
    set_partitions,
)
from bayespred.measures import DiscreteDistribution, RandomSource, uniform_discrete
from bayespred.newton import BernoulliKernel, NewtonRule, uniform_grid
from bayespred.ogd import (
    LN2,
    OgdRule,
    OgdState,
    binary_covariates,
    expected_update,
    ogd_start,
    u_plugin_rows,
)
from bayespred.resampling import (
    ResamplingPlan,
    advance_batch,
    beta_ks,
    sample_posterior,
    sample_prior,
)
from bayespred.structured import (
    Graphon,
    ReinforcedUrnRule,
    constant_graphon,
    graphon_sample,
    markov_swap_check,
    successor_states,
)

BELL = [1, 1, 2, 5, 15, 52, 203]


def verdict(capsys, label, ok, detail, seconds, limit):
    ok = ok and seconds < limit
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} [{label}] {detail} ({seconds:.1f}s, limit {limit:g}s)")
    assert ok, detail


# ---------------------------------------------------------------------------

def exact_dirichlet(alpha, p0, data, labels):
    alpha = Fraction(alpha)
    return [(alpha * p + data.count(x)) / (alpha + len(data)) for x, p in zip(labels, p0)]


def test_1_polya_matches_dirichlet_posterior(capsys):
    t0 = time.perf_counter()
    worst, checked = 0.0, 0
    cases = [((0, 1), (Fraction(1, 2), Fraction(1, 2)), 1.0),
             ((0, 1), (Fraction(1, 5), Fraction(4, 5)), 2.5),
             ((0, 1, 2), (Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)), 0.75),
             ((0, 1, 2), (Fraction(1, 3),) * 3, 3.0)]
    for labels, p0, alpha in cases:
        rule = PolyaRule(alpha, DiscreteDistribution(labels, tuple(float(p) for p in p0)))
        for n in range(7):
            for data in itertools.product(labels, repeat=n):
                s = condition(rule, data)
                want = exact_dirichlet(alpha, p0, list(data), labels)
                worst = max(worst, max(abs(rule.prob(s, x) - float(w)) for x, w in zip(labels, want)))
                checked += 1
    verdict(capsys, "conjugate oracle", worst <= 1e-12, f"max gap {worst:.2e} over {checked} data sets",
            time.perf_counter() - t0, 1.0)


def test_2_exchangeability_brute_force(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    for labels in ((0, 1), (0, 1, 2)):
        rule = PolyaRule(1.7, uniform_discrete(labels))
        for n in range(1, 5):
            for seq in itertools.product(labels, repeat=n):
                p = joint_prob(rule, seq)
                for perm in set(itertools.permutations(seq)):
                    worst = max(worst, abs(p - joint_prob(rule, perm)))
    newton = NewtonRule(uniform_grid((0.2, 0.8), BernoulliKernel()))
    direct, witness = 0.0, None
    for seq in itertools.product((0, 1), repeat=3):
        p = joint_prob(newton, seq)
        for perm in set(itertools.permutations(seq)):
            gap = abs(p - joint_prob(newton, perm))
            if gap > direct:
                direct, witness = gap, (seq, perm)
    report = check_exchangeable(newton, 3)
    cid = check_cid(newton, 4).worst
    ok = worst <= 1e-12 and direct > 1e-6 and report.verdict == "fail" and cid <= 1e-12
    verdict(capsys, "exchangeability", ok,
            f"polya gap {worst:.2e}; newton witness {witness[0]}~{witness[1]} gap {direct:.3e}; "
            f"newton c.i.d. gap {cid:.2e}", time.perf_counter() - t0, 5.0)


def crp_sequential(labels, alpha):
    p, counts = Fraction(1), {}
    alpha = Fraction(alpha)
    for i, b in enumerate(labels):
        if b in counts:
            p *= Fraction(counts[b]) / (alpha + i)
        else:
            p *= alpha / (alpha + i) if i else Fraction(1)
        counts[b] = counts.get(b, 0) + 1
    return p


def py_sequential(labels, alpha, theta):
    p, counts = 1.0, {}
    for i, b in enumerate(labels):
        if b in counts:
            p *= (counts[b] - theta) / (alpha + i)
        elif i:
            p *= (alpha + len(counts) * theta) / (alpha + i)
        counts[b] = counts.get(b, 0) + 1
    return p


def test_3_eppf_mass_and_sequential_products(capsys):
    t0 = time.perf_counter()
    mass_gap, seq_gap = 0.0, 0.0
    for n in range(1, 7):
        parts = list(set_partitions(n))
        assert len(parts) == BELL[n]
        for alpha in (0.5, 1.0, 3.0):
            mass_gap = max(mass_gap, abs(math.fsum(eppf_crp(block_sizes(p), alpha) for p in parts) - 1.0))
            for p in parts:
                seq_gap = max(seq_gap, abs(eppf_crp(block_sizes(p), alpha) - float(crp_sequential(p, alpha))))
        for alpha, theta in ((1.0, 0.5), (0.3, 0.25), (-0.2, 0.6)):
            mass_gap = max(mass_gap, abs(math.fsum(eppf_py(block_sizes(p), alpha, theta) for p in parts) - 1.0))
            for p in parts:
                seq_gap = max(seq_gap, abs(eppf_py(block_sizes(p), alpha, theta) - py_sequential(p, alpha, theta)))
    verdict(capsys, "EPPF mass", mass_gap <= 1e-10 and seq_gap <= 1e-12,
            f"mass gap {mass_gap:.2e}, sequential gap {seq_gap:.2e}", time.perf_counter() - t0, 5.0)


def test_4_future_sampling_reproduces_beta_posterior(capsys):
    t0 = time.perf_counter()
    alpha = 2.0
    rule = PolyaRule(alpha, uniform_discrete((0, 1)))
    data = [1, 1, 0, 1, 0, 1, 1, 1, 0, 1]
    prior = sample_prior(rule, ResamplingPlan(5000, 2000, (0.5,), seed=7), workers=4)
    post = sample_posterior(rule, data, ResamplingPlan(len(data) + 5000, 2000, (0.5,), seed=8), workers=4)
    n1 = sum(data)
    # the grid value 0.5 records F({0}), so F({1}) = 1 - column
    ks_prior, _ = beta_ks(1.0 - prior.values[:, 0], alpha * 0.5, alpha * 0.5)
    ks_post, _ = beta_ks(1.0 - post.values[:, 0], alpha * 0.5 + n1, alpha * 0.5 + len(data) - n1)
    verdict(capsys, "future sampling", ks_prior < 0.05 and ks_post < 0.05,
            f"KS prior {ks_prior:.4f}, posterior {ks_post:.4f} (M=2000, N=n+5000)", time.perf_counter() - t0,
            60.0)


def test_5_polya_credible_coverage_and_whitening(capsys):
    t0 = time.perf_counter()
    rule = PolyaRule(2.0, uniform_discrete((0, 1, 2, 3)))
    grid = [0.5, 1.5, 2.5]
    run = coverage_experiment(rule, 2000, 200_000, 500, lambda p: rule.batch_cdf(p, grid), seed=4, workers=8)
    cov = run.coverage(0.90)
    pvals = run.normality_pvalues()
    ok = bool(np.all((cov >= 0.85) & (cov <= 0.95))) and min(pvals) > 0.05
    verdict(capsys, "predictive credible sets", ok,
            f"90% coverage {np.round(cov, 3).tolist()}, whitened KS p-values {np.round(pvals, 3).tolist()}",
            time.perf_counter() - t0, 600.0)


def test_6_ogd_martingale_and_step_bound(capsys):
    t0 = time.perf_counter()
    law = binary_covariates(3)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        s = ogd_start(rng.normal(0.0, 2.0, 3))
        n = int(rng.integers(0, 10_000))
        s = OgdState(s.beta, n, UpdateAccumulator(n, s.acc.previous, s.acc.total))
        worst = max(worst, float(np.max(np.abs(expected_update(s, law)))))
    rule = OgdRule((0.5, -0.5, 0.0), law)
    root = RandomSource(3)
    replicates, steps = 16, 2000
    packed = rule.batch_pack([rule.initial_state()] * replicates)
    excess, prev = [], packed["beta"].copy()

    def watch(p, m):
        nonlocal prev
        step = np.linalg.norm(p["beta"] - prev, axis=1)
        excess.append(float(np.max(step - math.sqrt(3) / (m * LN2))))
        prev = p["beta"].copy()

    advance_batch(rule, packed, [root.branch(r) for r in range(replicates)], steps, on_step=watch)
    bound_ok = max(excess) <= 1e-15
    verdict(capsys, "OGD martingale", worst <= 1e-12 and bound_ok and len(excess) == steps,
            f"max expected update {worst:.2e}; step bound slack {-max(excess):.2e} over "
            f"{replicates * steps} steps", time.perf_counter() - t0, 5.0)


def test_7_ogd_coverage(capsys):
    t0 = time.perf_counter()
    law = binary_covariates(2)
    rule = OgdRule((0.0, 0.0), law)
    run = coverage_experiment(rule, 5000, 50_000, 500, lambda p: p["beta"], seed=1, workers=8)
    cov = run.coverage(0.95)
    ratio = run.vmats / u_plugin_rows(run.centers, law)
    in_band = float(np.mean(np.all((ratio >= 0.5) & (ratio <= 2.0), axis=(1, 2))))
    ok = bool(np.all((cov >= 0.92) & (cov <= 0.98))) and in_band >= 0.90
    verdict(capsys, "OGD coverage", ok,
            f"95% coverage {np.round(cov, 3).tolist()}, V/U in [0.5, 2] on {in_band:.1%} of runs",
            time.perf_counter() - t0, 600.0)


def exact_polya_joint(alpha, q, seq):
    alpha = Fraction(alpha)
    p, seen = Fraction(1), Counter()
    for i, y in enumerate(seq):
        p *= (alpha * q[y] + seen[y]) / (alpha + i)
        seen[y] += 1
    return p


def test_8_markov_exchangeability(capsys):
    t0 = time.perf_counter()
    states = (0, 1, 2)
    qs = {0: (Fraction(1, 5), Fraction(1, 2), Fraction(3, 10)), 1: (Fraction(1, 3),) * 3,
          2: (Fraction(3, 5), Fraction(1, 10), Fraction(3, 10))}
    alphas = {0: 1.0, 1: 2.5, 2: 0.5}
    rule = ReinforcedUrnRule(0, {x: (alphas[x], DiscreteDistribution(states, tuple(float(v) for v in qs[x])))
                                 for x in states})
    violations = markov_swap_check(rule.swap_predictive, states, 4, tol=0.0)
    swap_worst = max((v[-1] for v in violations), default=0.0)
    oracle_worst = 0.0
    for n in range(1, 7):
        for seq in itertools.product(states, repeat=n):
            table = successor_states((0,) + seq)
            want = math.prod(exact_polya_joint(alphas[x], dict(zip(states, qs[x])), ys) for x, ys in table.items())
            oracle_worst = max(oracle_worst, abs(joint_prob(rule, seq) - float(want)))
    verdict(capsys, "Markov exchangeability", swap_worst <= 1e-10 and oracle_worst <= 1e-12,
            f"swap identity gap {swap_worst:.2e}; successor Pólya gap {oracle_worst:.2e}",
            time.perf_counter() - t0, 10.0)


def test_9_graphon_sanity(capsys):
    t0 = time.perf_counter()
    p, n = 0.3, 300
    x = graphon_sample(constant_graphon(p), n, "separate", RandomSource(5))
    z_const = abs(x.mean() - p) / math.sqrt(p * (1 - p) / x.size)

    W = Graphon(lambda u, v: 0.1 + 0.8 * u * (1 - v) ** 2, False, "skewed")
    root = RandomSource(6)
    reps = 20_000
    original, permuted = Counter(), Counter()
    for r in range(reps):
        a = graphon_sample(W, 2, "separate", root.branch(2 * r))
        b = graphon_sample(W, 2, "separate", root.branch(2 * r + 1))[::-1, :]
        original[a.tobytes()] += 1
        permuted[b.tobytes()] += 1
    keys = sorted(set(original) | set(permuted))
    table = np.array([[original[k] for k in keys], [permuted[k] for k in keys]])
    chi2 = stats.chi2_contingency(table)
    ok = z_const <= 3.0 and chi2.pvalue > 0.01
    verdict(capsys, "graphon sanity", ok,
            f"constant graphon z={z_const:.2f}; permutation chi2 p={chi2.pvalue:.3f} over {len(keys)} patterns",
            time.perf_counter() - t0, 60.0)


CLI_RUNS = [
    ("simulate", ["--rule", "polya", "--base", "uniform3", "--steps", "200", "--grid", "0.5,1.5", "--seed", "3"]),
    ("resample", ["--mode", "prior", "--base", "uniform2", "--future", "500", "--replicates", "600",
                 "--histogram-bins", "5", "--seed", "4"]),
    ("credible", ["--rule", "ogd", "--steps", "800", "--covariates", "box2", "--seed", "5"]),
    ("newton", ["--kernel", "normal", "--theta-grid=-1,0,1", "--steps", "60", "--seed", "6"]),
    ("ogd", ["--steps", "300", "--covariates", "binary2", "--seed", "7"]),
    ("diagnose", ["--rule", "newton", "--n-max", "3", "--depth", "3", "--seed", "8"]),
    ("graphon", ["--graphon", "product", "--n", "20", "--replicates", "4", "--mode", "joint", "--seed", "9"]),
    ("ogd", ["--experiment", "coverage", "--n", "100", "--horizon", "400", "--replicates", "300", "--seed", "2"]),
]


def test_10_cli_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    mismatched = []

    def snapshot(out):
        return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "timing.json"}

    for i, (cmd, args) in enumerate(CLI_RUNS):
        first = tmp_path / f"{i}-{cmd}-1"
        codes = [main([cmd, *args, "--workers", "1", "--out-dir", str(first)])]
        ref = snapshot(first)
        for w in (1, 8):
            again = tmp_path / f"{i}-{cmd}-cfg-{w}"
            codes.append(main([cmd, "--config", str(first / "config.ini"), "--workers", str(w),
                               "--out-dir", str(again)]))
            if snapshot(again) != ref:
                mismatched.append(f"{cmd}@{w}")
        if any(codes):
            mismatched.append(f"{cmd}: exit {codes}")
    capsys.readouterr()
    verdict(capsys, "CLI determinism", not mismatched,
            f"{len(CLI_RUNS)} commands rerun from echoed config at 1 and 8 workers; mismatches {mismatched}",
            time.perf_counter() - t0, 600.0)
