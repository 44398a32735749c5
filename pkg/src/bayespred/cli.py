"""Command-line interface.

Each subcommand reads its parameters from an optional INI file (section
named after the command) and from flags; flags win.  Every run writes
``config.ini`` with the fully resolved parameters, so
``bayespred <cmd> --config out/config.ini`` reproduces all numeric outputs.
Wall-clock time and worker count go to ``timing.json``, the only output
that may differ between reruns.

Exit codes: 0 success, 2 configuration or I/O error, 3 computation error.
"""
from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .asymptotics import UpdateAccumulator, coverage_experiment, gaussian_posterior, validate_grid
from .diagnostics import (
    check_cid,
    check_eppf,
    check_exchangeable,
    check_markov_exch,
    check_partial_cid,
    check_partial_exch,
)
from .engine import IidRule, RecencyRule, condition, simulate_chain
from .errors import BayesPredError, ConfigurationError, UnsupportedOperationError
from .exchangeable import PitmanYorRule, PolyaRule, crp_eppf, py_eppf
from .io import read_observations, write_csv, write_json
from .measures import AtomTag, ContinuousBase, DiscreteDistribution, RandomSource, uniform_discrete
from .newton import MixingGrid, NewtonRule, make_kernel
from .ogd import (
    LN2,
    BoxCovariates,
    FiniteCovariates,
    OgdRule,
    OgdState,
    binary_covariates,
    ogd_credible,
    ogd_gaussian,
    ogd_start,
    ogd_update,
    ogd_vn,
    u_plugin_rows,
)
from .resampling import (
    ResamplingPlan,
    beta_ks,
    polya_beta_parameters,
    sample_posterior,
    sample_prior,
)
from .structured import (
    Graphon,
    PcidRule,
    ReinforcedUrnRule,
    constant_graphon,
    graphon_sample,
    independent_polya,
    product_graphon,
)

WORKERS_ENV = "BAYESPRED_WORKERS"
EXIT_CONFIG, EXIT_COMPUTE = 2, 3


# ---------------------------------------------------------------------------
# parameter plumbing

def _floats(s):
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    s = str(s).strip()
    return [float(v) for v in s.split(",")] if s else []


def _ints(s):
    return [int(v) for v in _floats(s)]


def _seed(s):
    v = int(s)
    if not 0 <= v < 2**64:
        raise ConfigurationError("seed must be a 64-bit unsigned integer")
    return v


COMMON = [
    ("seed", _seed, 0, "64-bit seed"),
]

PARAMS = {
    "simulate": [
        ("rule", str, "polya", "polya | iid | pitman-yor | newton | ogd | reinforced | recency"),
        ("alpha", float, 1.0, "concentration"),
        ("theta", float, 0.0, "Pitman-Yor discount"),
        ("base", str, "uniform2", "uniformK | probs:p0,p1,... | uniform01 | normal"),
        ("steps", int, 100, "number of observations"),
        ("grid", _floats, "", "grid for predictive snapshots"),
        ("kernel", str, "bernoulli", "Newton kernel"),
        ("theta_grid", _floats, "0.2,0.8", "Newton parameter grid"),
        ("g0", _floats, "", "Newton initial mixing probabilities (default uniform)"),
        ("sigma", float, 1.0, "normal kernel scale"),
        ("covariates", str, "binary2", "OGD covariate law: binaryD | boxD"),
        ("beta0", _floats, "", "OGD initial beta (default zero)"),
        ("weight", float, 0.5, "recency rule weight"),
    ],
    "resample": [
        ("rule", str, "polya", "polya | iid | newton"),
        ("alpha", float, 1.0, "concentration"),
        ("base", str, "uniform2", "base measure"),
        ("mode", str, "posterior", "prior | posterior"),
        ("data", str, "", "CSV/JSONL data file (posterior mode)"),
        ("future", int, 5000, "future steps beyond the data (ignored when horizon is set)"),
        ("horizon", int, -1, "total horizon N (default n + future)"),
        ("replicates", int, 2000, "Monte Carlo replicates M"),
        ("grid", _floats, "0.5", "evaluation grid"),
        ("estimator", str, "predictive", "predictive | empirical"),
        ("histogram_bins", int, 0, "write a histogram table with this many bins"),
        ("kernel", str, "bernoulli", "Newton kernel"),
        ("theta_grid", _floats, "0.2,0.8", "Newton parameter grid"),
        ("g0", _floats, "", "Newton initial mixing probabilities"),
        ("sigma", float, 1.0, "normal kernel scale"),
    ],
    "credible": [
        ("rule", str, "polya", "polya | ogd"),
        ("alpha", float, 1.0, "concentration"),
        ("base", str, "uniform2", "base measure (Pólya)"),
        ("data", str, "", "data file; without it a chain is simulated from the prior"),
        ("steps", int, 2000, "simulated chain length when no data is given"),
        ("grid", _floats, "0.5", "evaluation grid (Pólya)"),
        ("level", float, 0.95, "credible level"),
        ("covariates", str, "binary2", "OGD covariate law when simulating"),
    ],
    "newton": [
        ("kernel", str, "bernoulli", "bernoulli | normal | poisson"),
        ("theta_grid", _floats, "0.2,0.8", "parameter grid"),
        ("g0", _floats, "", "initial mixing probabilities (default uniform)"),
        ("alpha", float, 1.0, "weight schedule a_n = 1/(alpha+n)"),
        ("sigma", float, 1.0, "normal kernel scale"),
        ("data", str, "", "data file; without it a chain is simulated"),
        ("steps", int, 100, "simulated length when no data is given"),
    ],
    "ogd": [
        ("data", str, "", "CSV/JSONL stream of (x, y) records; without it a chain is simulated"),
        ("checkpoint", str, "", "resume from this checkpoint JSON"),
        ("steps", int, 1000, "simulated length when no data is given"),
        ("covariates", str, "binary2", "covariate law when simulating: binaryD | boxD"),
        ("beta0", _floats, "", "initial beta (default zero)"),
        ("log_scale", float, LN2, "step constant (log 2 for bits, 1 for nats)"),
        ("loss", str, "cross-entropy", "cross-entropy | quadratic"),
        ("level", float, 0.95, "credible level"),
        ("experiment", str, "none", "none | coverage"),
        ("n", int, 5000, "coverage experiment: sample size"),
        ("horizon", int, 50000, "coverage experiment: limit proxy horizon"),
        ("replicates", int, 500, "coverage experiment: replicates"),
    ],
    "diagnose": [
        ("check", str, "all", "exchangeable | cid | partial | partial-cid | markov | eppf | all"),
        ("rule", str, "polya", "polya | iid | newton | recency | product | pcid"),
        ("alpha", float, 1.0, "concentration"),
        ("theta", float, 0.0, "Pitman-Yor discount (eppf check)"),
        ("eppf", str, "crp", "crp | pitman-yor"),
        ("base", str, "uniform2", "base measure"),
        ("n_max", int, 4, "enumeration bound"),
        ("depth", int, 4, "Markov check depth"),
        ("states", int, 3, "Markov check state count"),
        ("sequences", int, 2, "sequences for partial checks"),
        ("cross_weight", float, 2.0, "pcid: weight multiplier when the other sequence shows 1"),
        ("kernel", str, "bernoulli", "Newton kernel"),
        ("theta_grid", _floats, "0.2,0.8", "Newton parameter grid"),
        ("g0", _floats, "", "Newton initial mixing probabilities"),
        ("weight", float, 0.5, "recency rule weight"),
    ],
    "graphon": [
        ("graphon", str, "constant", "constant | product | threshold"),
        ("p", float, 0.3, "edge probability (constant) or threshold level"),
        ("n", int, 30, "array size"),
        ("mode", str, "separate", "separate | joint"),
        ("replicates", int, 1, "number of arrays"),
    ],
}


def _resolve(cmd, args):
    """Merge defaults, config file and flags (in increasing priority)."""
    spec = COMMON + PARAMS[cmd]
    values = {name: default for name, _, default, _ in spec}
    if args.config:
        cp = configparser.ConfigParser()
        path = Path(args.config)
        if not path.exists():
            raise ConfigurationError(f"config file {path} does not exist")
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigurationError(f"malformed config file: {exc}") from None
        if cp.has_section(cmd):
            known = {name for name, *_ in spec}
            for key, val in cp.items(cmd):
                if key not in known:
                    raise ConfigurationError(f"unknown key {key!r} in section [{cmd}]")
                values[key] = val
    for name, *_ in spec:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    out = {}
    for name, conv, _, _ in spec:
        try:
            out[name] = conv(values[name])
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad value for {name}: {values[name]!r} ({exc})") from None
    return out


def _echo(cmd, params, out_dir):
    cp = configparser.ConfigParser()
    def text(v):
        return repr(v) if isinstance(v, float) else str(v)

    cp[cmd] = {k: (",".join(text(x) for x in v) if isinstance(v, list) else text(v)) for k, v in params.items()}
    with (out_dir / "config.ini").open("w") as fh:
        cp.write(fh)


def _workers(args):
    if args.workers is not None:
        w = args.workers
    else:
        env = os.environ.get(WORKERS_ENV, "1")
        try:
            w = int(env)
        except ValueError:
            raise ConfigurationError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    if w < 1:
        raise ConfigurationError("workers must be >= 1")
    return w


# ---------------------------------------------------------------------------
# rule construction

def parse_base(spec: str):
    spec = spec.strip()
    if spec.startswith("uniform") and spec[7:].isdigit():
        k = int(spec[7:])
        if k < 1:
            raise ConfigurationError("uniformK needs K >= 1")
        return uniform_discrete(tuple(range(k)))
    if spec.startswith("probs:"):
        probs = _floats(spec[6:])
        return DiscreteDistribution(tuple(range(len(probs))), tuple(probs))
    if spec == "uniform01":
        return ContinuousBase(stats.uniform(), "uniform(0,1)")
    if spec == "normal":
        return ContinuousBase(stats.norm(), "normal(0,1)")
    raise ConfigurationError(f"unknown base {spec!r}")


def _newton_grid(p):
    kw = {"sigma": p["sigma"]} if p["kernel"] == "normal" else {}
    kernel = make_kernel(p["kernel"], **kw)
    theta = p["theta_grid"]
    g0 = p["g0"] or [1.0 / len(theta)] * len(theta)
    g0 = [v / sum(g0) for v in g0]
    return MixingGrid(tuple(theta), tuple(g0), kernel, p["alpha"])


def parse_covariates(spec: str):
    for prefix, make in (("binary", binary_covariates), ("box", BoxCovariates)):
        if spec.startswith(prefix) and spec[len(prefix):].isdigit():
            return make(int(spec[len(prefix):]))
    raise ConfigurationError(f"unknown covariate law {spec!r}")


def _ogd_rule(p, law):
    beta0 = p.get("beta0") or [0.0] * law.dim
    return OgdRule(tuple(beta0), law, p.get("log_scale", LN2), p.get("loss", "cross-entropy"))


def build_rule(p):
    name = p["rule"]
    if name == "polya":
        return PolyaRule(p["alpha"], parse_base(p["base"]))
    if name == "iid":
        return IidRule(parse_base(p["base"]))
    if name == "pitman-yor":
        return PitmanYorRule(p["alpha"], p.get("theta", 0.0))
    if name == "newton":
        return NewtonRule(_newton_grid(p))
    if name == "ogd":
        return _ogd_rule(p, parse_covariates(p["covariates"]))
    if name == "recency":
        base = parse_base(p["base"])
        if not isinstance(base, DiscreteDistribution):
            raise ConfigurationError("recency rule needs a finite base")
        return RecencyRule(base, p["weight"])
    if name == "reinforced":
        base = parse_base(p["base"])
        if not isinstance(base, DiscreteDistribution):
            raise ConfigurationError("reinforced urn needs a finite base")
        return ReinforcedUrnRule(base.labels[0], {x: (p["alpha"], base) for x in base.labels})
    raise ConfigurationError(f"unknown rule {name!r}")


def _data_kind(rule):
    kind = rule.space.kind
    return "categorical" if kind == "categorical" else ("vector" if kind == "vector" else "real")


def _load(rule, path):
    xs, _ = read_observations(path, _data_kind(rule))
    return xs


def _point_row(x, tags):
    if isinstance(x, AtomTag):
        return [tags.setdefault(x, len(tags))]
    if isinstance(x, tuple):
        return list(x)
    return [x]


def _header(rule):
    if rule.space.kind == "vector":
        if isinstance(rule, OgdRule):
            return [f"x{i + 1}" for i in range(rule.d)] + ["y"]
        return [f"x{i + 1}" for i in range(rule.space.dim)]
    return ["x"]


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(p, out, workers):
    rule = build_rule(p)
    grid = p["grid"] or None
    path = simulate_chain(rule, p["steps"], RandomSource(p["seed"]), grid=grid)
    tags = {}
    write_csv(out / "chain.csv", _header(rule), [_point_row(x, tags) for x in path.observations])
    meta = {"rule": rule.params(), "seed": p["seed"], "steps": p["steps"], "version": __version__}
    if grid is not None:
        meta["grid"] = grid
        meta["prior_on_grid"] = path.snapshots[0].tolist()
        write_csv(out / "snapshots.csv", ["step"] + [f"t={t!r}" for t in grid],
                  [[m] + row for m, row in enumerate(path.snapshots.tolist())])
    write_json(out / "metadata.json", meta)


def _finite_base_binary(rule):
    return isinstance(rule, PolyaRule) and isinstance(rule.base, DiscreteDistribution) and len(rule.base.labels) == 2


def cmd_resample(p, out, workers):
    rule = build_rule(p)
    if p["mode"] not in ("prior", "posterior"):
        raise ConfigurationError("mode must be prior or posterior")
    data = []
    if p["mode"] == "posterior":
        if not p["data"]:
            raise ConfigurationError("posterior mode needs --data")
        data = _load(rule, p["data"])
    horizon = p["horizon"] if p["horizon"] >= 0 else len(data) + p["future"]
    plan = ResamplingPlan(horizon, p["replicates"], tuple(p["grid"]), p["estimator"], p["seed"])
    if p["mode"] == "prior":
        sample = sample_prior(rule, plan, workers)
    else:
        sample = sample_posterior(rule, data, plan, workers)
    sample.write(out / "sample.csv")
    report = {"mean": sample.mean().tolist(), "sd": sample.std().tolist(), "version": __version__,
              "seed": p["seed"]}
    if _finite_base_binary(rule):
        lo, hi = rule.base.labels
        cols = [j for j, t in enumerate(plan.grid) if lo <= t < hi]
        if cols:
            a, b = polya_beta_parameters(rule.alpha, rule.base.pmf(hi), data, one=hi)
            ks, pv = beta_ks(1.0 - sample.values[:, cols[0]], a, b)
            report["beta_oracle"] = {"a": a, "b": b, "ks": ks, "pvalue": pv, "target": f"F({{{hi}}})"}
    bins = p["histogram_bins"]
    if bins > 0:
        edges = np.linspace(0.0, 1.0, bins + 1)
        rows = []
        for j, t in enumerate(plan.grid):
            counts, _ = np.histogram(sample.values[:, j], bins=edges)
            rows += [[t, edges[i], edges[i + 1], int(c)] for i, c in enumerate(counts)]
        write_csv(out / "histogram.csv", ["t", "lo", "hi", "count"], rows)
    write_json(out / "report.json", report)


def _credible_rows(center, lo, hi, vdiag, labels):
    return [[lab, c, a, b, v] for lab, c, a, b, v in zip(labels, center, lo, hi, vdiag)]


def cmd_credible(p, out, workers):
    if p["rule"] == "polya":
        rule = PolyaRule(p["alpha"], parse_base(p["base"]))
        grid = validate_grid(p["grid"], rule.base)
        data = _load(rule, p["data"]) if p["data"] else list(
            simulate_chain(rule, p["steps"], RandomSource(p["seed"])).observations)
        state = rule.initial_state()
        acc = UpdateAccumulator.start(rule.cdf(state, grid))
        for x in data:
            state = rule.update(state, x)
            acc = acc.record_update(rule.cdf(state, grid))
        ga = gaussian_posterior(acc, rule.cdf(state, grid))
        lo, hi = ga.intervals(p["level"], clip=True)
        rows = _credible_rows(ga.center, lo, hi, np.diag(ga.covariance) * acc.n, grid)
        write_csv(out / "credible.csv", ["t", "center", "lo", "hi", "V"], rows)
    elif p["rule"] == "ogd":
        if p["data"]:
            xs, ys = read_observations(p["data"], "vector", with_y=True)
            if not xs:
                raise ConfigurationError("data file holds no records")
            s = ogd_start([0.0] * len(xs[0]))
            for x, y in zip(xs, ys):
                s = ogd_update(s, x, y)
        else:
            rule = _ogd_rule({}, parse_covariates(p["covariates"]))
            s = simulate_chain(rule, p["steps"], RandomSource(p["seed"])).final_state
        lo, hi, _ = ogd_credible(s, p["level"])
        ga = ogd_gaussian(s)
        rows = _credible_rows(ga.center, lo, hi, np.diag(ogd_vn(s)), [f"beta{i + 1}" for i in range(s.dim)])
        write_csv(out / "credible.csv", ["coordinate", "center", "lo", "hi", "V"], rows)
    else:
        raise ConfigurationError("credible supports rules polya and ogd")
    (out / "gaussian.json").write_text(ga.to_json() + "\n")


def cmd_newton(p, out, workers):
    g = _newton_grid(p)
    rule = NewtonRule(g)
    data = _load(rule, p["data"]) if p["data"] else list(
        simulate_chain(rule, p["steps"], RandomSource(p["seed"])).observations)
    rows = [[0, ""] + list(g.probs)]
    state = g
    for i, x in enumerate(data):
        state = condition(rule, [x], state)
        rows.append([i + 1, x] + list(state.probs))
    write_csv(out / "trajectory.csv", ["n", "x"] + [f"G(theta={t!r})" for t in g.theta], rows)
    write_json(out / "checkpoint.json", {"theta": list(state.theta), "probs": list(state.probs), "n": state.n,
                                         "alpha": state.alpha, **state.kernel.params()})


def _ogd_coverage(p, out, workers):
    law = parse_covariates(p["covariates"])
    if not isinstance(law, FiniteCovariates):
        raise ConfigurationError("the coverage experiment needs finite covariates")
    rule = _ogd_rule(p, law)
    run = coverage_experiment(rule, p["n"], p["horizon"], p["replicates"], lambda pk: pk["beta"], p["seed"],
                              workers)
    ratio = run.vmats / u_plugin_rows(run.centers, law, p["log_scale"])
    ratio_ok = float(np.mean(np.all((ratio >= 0.5) & (ratio <= 2.0), axis=(1, 2))))
    report = {"coverage": run.coverage(p["level"]).tolist(), "level": p["level"],
              "whitened_ks_pvalues": run.normality_pvalues(), "vn_over_plugin_in_band": ratio_ok,
              "n": p["n"], "horizon": p["horizon"], "replicates": p["replicates"], "seed": p["seed"]}
    write_json(out / "coverage.json", report)


def cmd_ogd(p, out, workers):
    if p["experiment"] == "coverage":
        return _ogd_coverage(p, out, workers)
    if p["experiment"] != "none":
        raise ConfigurationError("experiment must be none or coverage")
    if p["checkpoint"]:
        try:
            s = OgdState.from_dict(json.loads(Path(p["checkpoint"]).read_text()))
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigurationError(f"cannot read checkpoint: {exc}") from None
    else:
        s = None
    if p["data"]:
        xs, ys = read_observations(p["data"], "vector", with_y=True)
        if s is None:
            d = len(xs[0]) if xs else len(p["beta0"])
            s = ogd_start(p["beta0"] or [0.0] * d, p["log_scale"], p["loss"])
        pairs = list(zip(xs, ys))
    else:
        law = parse_covariates(p["covariates"])
        rule = _ogd_rule(p, law)
        path = simulate_chain(rule, p["steps"], RandomSource(p["seed"]), state=s)
        if s is None:
            s = rule.initial_state()
        pairs = [(pt[:-1], pt[-1]) for pt in path.observations]
    rows = [[s.n] + list(s.beta)]
    for x, y in pairs:
        s = ogd_update(s, x, y)
        rows.append([s.n] + list(s.beta))
    write_csv(out / "trajectory.csv", ["n"] + [f"beta{i + 1}" for i in range(s.dim)], rows)
    write_json(out / "checkpoint.json", s.to_dict())
    if s.n >= 1:
        lo, hi, _ = ogd_credible(s, p["level"])
        write_csv(out / "credible.csv", ["coordinate", "center", "lo", "hi", "V"],
                  _credible_rows(s.beta, lo, hi, np.diag(ogd_vn(s)), [f"beta{i + 1}" for i in range(s.dim)]))


def _diag_rule(p):
    name = p["rule"]
    if name == "product":
        base = parse_base(p["base"])
        return independent_polya([p["alpha"]] * p["sequences"], [base] * p["sequences"])
    if name == "pcid":
        base = parse_base(p["base"])
        w = p["cross_weight"]
        return PcidRule([p["alpha"]] * p["sequences"], [base] * p["sequences"],
                        lambda j, obs: w if obs[(j + 1) % len(obs)] == 1 else 1.0)
    return build_rule(p)


def _reinforced_pred(alpha, k):
    def pred(y, x, row):
        return (alpha / k + row.get(y, 0)) / (alpha + sum(row.values()))
    return pred


def cmd_diagnose(p, out, workers):
    checks = ["exchangeable", "cid", "partial", "partial-cid", "markov", "eppf"] if p["check"] == "all" \
        else [p["check"]]
    reports = []
    for c in checks:
        if c in ("exchangeable", "cid"):
            rule = build_rule(p)
            reports.append((check_exchangeable if c == "exchangeable" else check_cid)(rule, p["n_max"]))
        elif c in ("partial", "partial-cid"):
            rule = _diag_rule({**p, "rule": p["rule"] if p["rule"] in ("product", "pcid") else "product"})
            n = min(p["n_max"], 3)
            reports.append((check_partial_exch if c == "partial" else check_partial_cid)(rule, n))
        elif c == "markov":
            reports.append(check_markov_exch(_reinforced_pred(p["alpha"], p["states"]), range(p["states"]),
                                             p["depth"]))
        elif c == "eppf":
            eppf = crp_eppf(p["alpha"]) if p["eppf"] == "crp" else py_eppf(p["alpha"], p["theta"])
            reports.append(check_eppf(eppf, min(p["n_max"], 7)))
        else:
            raise ConfigurationError(f"unknown check {c!r}")
    write_json(out / "report.json", [r.to_dict() for r in reports])
    print(f"{'check':<28}{'verdict':<10}{'worst':>12}")
    for r in reports:
        print(f"{r.name:<28}{r.verdict:<10}{r.worst:>12.3e}")


GRAPHONS = {
    "constant": lambda p: constant_graphon(p),
    "product": lambda p: product_graphon(),
    "threshold": lambda p: Graphon(lambda u, v: (u + v <= 2 * p).astype(float), True, f"threshold({p})"),
}


def cmd_graphon(p, out, workers):
    if p["graphon"] not in GRAPHONS:
        raise ConfigurationError(f"unknown graphon {p['graphon']!r}")
    if p["n"] < 1 or p["replicates"] < 1:
        raise ConfigurationError("n and replicates must be >= 1")
    W = GRAPHONS[p["graphon"]](p["p"])
    root = RandomSource(p["seed"])
    freqs = []
    for r in range(p["replicates"]):
        x = graphon_sample(W, p["n"], p["mode"], root.branch(r))
        if r == 0:
            write_csv(out / "array.csv", [f"c{j}" for j in range(p["n"])], x.tolist())
        cells = p["n"] * (p["n"] - 1) if p["mode"] == "joint" else p["n"] ** 2
        freqs.append(float(x.sum()) / cells)
    write_csv(out / "edge_frequency.csv", ["replicate", "frequency"], list(enumerate(freqs)))
    write_json(out / "summary.json", {"graphon": W.name, "mode": p["mode"], "n": p["n"],
                                      "replicates": p["replicates"], "mean_frequency": float(np.mean(freqs)),
                                      "seed": p["seed"]})


COMMANDS = {"simulate": cmd_simulate, "resample": cmd_resample, "credible": cmd_credible, "newton": cmd_newton,
            "ogd": cmd_ogd, "diagnose": cmd_diagnose, "graphon": cmd_graphon}


def build_parser():
    parser = argparse.ArgumentParser(prog="bayespred", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", help="INI file; section [%s]" % cmd)
        sp.add_argument("--workers", type=int, help=f"worker threads (default ${WORKERS_ENV} or 1)")
        sp.add_argument("--out-dir", default="bayespred-out", help="output directory")
        for name, conv, default, help_ in COMMON + PARAMS[cmd]:
            sp.add_argument("--" + name.replace("_", "-"), dest=name, default=None, help=f"{help_} [{default}]")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        params = _resolve(args.command, args)
        workers = _workers(args)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _echo(args.command, params, out)
        t0 = time.perf_counter()
        COMMANDS[args.command](params, out, workers)
        write_json(out / "timing.json", {"seconds": time.perf_counter() - t0, "workers": workers})
    except (ConfigurationError, UnsupportedOperationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BayesPredError as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except Exception as exc:  # never let a traceback escape to the user
        print(f"computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return 0


if __name__ == "__main__":
    sys.exit(main())
