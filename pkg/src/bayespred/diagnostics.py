"""Exact, enumeration-based checks of predictive characterizations.

Every check works on a finite sample space, enumerates all configurations
up to a bound, and returns a :class:`DiagnosticReport`.  A finite bound
can only refute a property: a pass means no violation was found among
the configurations visited.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

from .engine import PredictiveRule, condition, enumerate_joint, joint_prob
from .errors import ConfigurationError
from .exchangeable import EppfSpec, PartitionCounts, block_sizes, set_partitions
from .structured import markov_swap_check

EXACT_TOL = 1e-12
LOG_TOL = 1e-10
MAX_EVALUATIONS = 10**7
PASS, FAIL, REFUSED = "pass", "fail", "refused"
NECESSARY_ONLY = ("finite enumeration: a pass is a necessary-condition check only; "
                  "the property quantifies over every n")


@dataclass
class DiagnosticReport:
    name: str
    verdict: str
    worst: float = 0.0
    witness: dict | None = None
    bounds: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return self.verdict == PASS

    def to_dict(self):
        return asdict(self)


def _report(name, worst, witness, tol, bounds, notes=()):
    verdict = FAIL if worst > tol else PASS
    return DiagnosticReport(name, verdict, worst, witness if verdict == FAIL else None,
                            {**bounds, "tolerance": tol}, [NECESSARY_ONLY, *notes])


def _refuse(name, cost, bounds):
    return DiagnosticReport(name, REFUSED, math.nan, None, {**bounds, "evaluations": cost},
                            [f"enumeration needs about {cost:.3g} evaluations (limit {MAX_EVALUATIONS:.0e})"])


class _Track:
    def __init__(self):
        self.worst, self.witness = 0.0, None

    def see(self, gap, witness):
        if gap > self.worst:
            self.worst, self.witness = gap, witness


def _distinct_perms(seq):
    return set(itertools.permutations(seq))


# ---------------------------------------------------------------------------
# exchangeability

def exchangeability_gap(rule, seq, other):
    """``|p(seq) - p(other)|`` from the chain factorisation."""
    return abs(joint_prob(rule, tuple(seq)) - joint_prob(rule, tuple(other)))


def two_step_gap(rule, prefix, a, b):
    """``|P_n({a}) P_{n+1}({b} | a) - P_n({b}) P_{n+1}({a} | b)|`` after ``prefix``."""
    s = condition(rule, prefix)
    pa, pb = rule.prob(s, a), rule.prob(s, b)
    lhs = pa * rule.prob(rule.update(s, a), b) if pa > 0 else 0.0
    rhs = pb * rule.prob(rule.update(s, b), a) if pb > 0 else 0.0
    return abs(lhs - rhs)


def symmetry_gap(rule, prefix, other):
    """Largest difference between the predictives after two orderings of the data."""
    s1, s2 = condition(rule, prefix), condition(rule, other)
    return max(abs(rule.prob(s1, x) - rule.prob(s2, x)) for x in rule.space.support)


def check_exchangeable(rule: PredictiveRule, n_max=4) -> DiagnosticReport:
    """Permutation invariance of the joint law plus both predictive conditions."""
    name = "exchangeable"
    support = rule.space.support
    if support is None:
        raise ConfigurationError("exchangeability check needs a finite space")
    S = len(support)
    bounds = {"n_max": n_max, "support_size": S}
    cost = sum(S**n * math.factorial(n) for n in range(1, n_max + 1))
    if cost > MAX_EVALUATIONS:
        return _refuse(name, cost, bounds)
    t = _Track()
    for n in range(1, n_max + 1):
        law = enumerate_joint(rule, n)
        for seq, p in law.items():
            for other in _distinct_perms(seq):
                t.see(abs(p - law[other]), {"kind": "joint", "sequence": list(seq), "permuted": list(other)})
    for n in range(0, n_max):
        law = enumerate_joint(rule, n) if n else {(): 1.0}
        for prefix, p in law.items():
            if p <= 0.0:
                continue
            for other in _distinct_perms(prefix):
                if other != prefix and law.get(other, 0.0) > 0.0:
                    t.see(symmetry_gap(rule, prefix, other),
                          {"kind": "symmetric-predictive", "sequence": list(prefix), "permuted": list(other)})
            for a, b in itertools.combinations(support, 2):
                t.see(two_step_gap(rule, prefix, a, b), {"kind": "two-step", "prefix": list(prefix), "a": a, "b": b})
    return _report(name, t.worst, t.witness, EXACT_TOL, bounds,
                   ["two-step condition checked on singleton pairs"])


# ---------------------------------------------------------------------------
# c.i.d.

def cid_gap(rule, prefix, a):
    """``|sum_x P_n({x}) P_{n+1}({a} | x) - P_n({a})|`` after ``prefix``."""
    s = condition(rule, prefix)
    total = 0.0
    for x in rule.space.support:
        px = rule.prob(s, x)
        if px > 0.0:
            total += px * rule.prob(rule.update(s, x), a)
    return abs(total - rule.prob(s, a))


def check_cid(rule: PredictiveRule, n_max=4) -> DiagnosticReport:
    """Martingale identity of the predictive for every prefix and singleton."""
    name = "cid"
    support = rule.space.support
    if support is None:
        raise ConfigurationError("c.i.d. check needs a finite space")
    S = len(support)
    bounds = {"n_max": n_max, "support_size": S}
    cost = sum(S**n for n in range(n_max + 1)) * S * S
    if cost > MAX_EVALUATIONS:
        return _refuse(name, cost, bounds)
    t = _Track()
    for n in range(0, n_max + 1):
        law = enumerate_joint(rule, n) if n else {(): 1.0}
        for prefix, p in law.items():
            if p <= 0.0:
                continue
            for a in support:
                t.see(cid_gap(rule, prefix, a), {"kind": "cid", "prefix": list(prefix), "a": a})
    return _report(name, t.worst, t.witness, EXACT_TOL, bounds)


# ---------------------------------------------------------------------------
# several sequences observed jointly

def _columns(seq, k):
    return [tuple(row[j] for row in seq) for j in range(k)]


def _rows(cols):
    return tuple(tuple(c[i] for c in cols) for i in range(len(cols[0])))


def partial_swap_gap(rule, prefix, a, b, i):
    """Condition ii) gap: swapping the ``i``-th coordinates of ``a`` and ``b``."""
    s = condition(rule, prefix)

    def f(x, y):
        px = rule.prob(s, x)
        return px * rule.prob(rule.update(s, x), y) if px > 0.0 else 0.0

    a2 = a[:i] + (b[i],) + a[i + 1:]
    b2 = b[:i] + (a[i],) + b[i + 1:]
    return abs(f(a, b) - f(a2, b2))


def check_partial_exch(rule: PredictiveRule, n_max=3) -> DiagnosticReport:
    """Invariance under separate permutations within each sequence.

    ``rule`` emits one tuple per step (one value per sequence); its space
    must list every tuple.
    """
    name = "partially-exchangeable"
    support = rule.space.support
    if support is None:
        raise ConfigurationError("partial exchangeability check needs a finite space")
    k = rule.space.dim
    if k > 3 or n_max > 3:
        raise ConfigurationError("partial exchangeability check supports k <= 3 and n_max <= 3")
    S = len(support)
    bounds = {"n_max": n_max, "sequences": k, "support_size": S}
    cost = sum(S**n * math.factorial(n) ** k for n in range(1, n_max + 1)) + S**n_max * S * S * k
    if cost > MAX_EVALUATIONS:
        return _refuse(name, cost, bounds)
    t = _Track()
    for n in range(1, n_max + 1):
        law = enumerate_joint(rule, n)
        for seq, p in law.items():
            cols = _columns(seq, k)
            for perms in itertools.product(*(list(_distinct_perms(c)) for c in cols)):
                other = _rows(list(perms))
                t.see(abs(p - law[other]), {"kind": "joint", "array": [list(r) for r in seq],
                                            "permuted": [list(r) for r in other]})
    for n in range(0, n_max):
        law = enumerate_joint(rule, n) if n else {(): 1.0}
        for prefix, p in law.items():
            if p <= 0.0:
                continue
            if n:
                cols = _columns(prefix, k)
                for i in range(k):
                    for perm in _distinct_perms(cols[i]):
                        other = _rows(cols[:i] + [perm] + cols[i + 1:])
                        if other != prefix and law.get(other, 0.0) > 0.0:
                            t.see(symmetry_gap(rule, prefix, other),
                                  {"kind": "symmetric-predictive", "array": [list(r) for r in prefix],
                                   "permuted": [list(r) for r in other]})
            for a, b in itertools.combinations(support, 2):
                for i in range(k):
                    t.see(partial_swap_gap(rule, prefix, a, b, i),
                          {"kind": "swap", "prefix": [list(r) for r in prefix], "a": list(a), "b": list(b),
                           "coordinate": i})
    return _report(name, t.worst, t.witness, EXACT_TOL, bounds,
                   [f"checked for the configured {k} sequences only"])


def marginal_prob(rule, state, j, a):
    """``P_{n,j}({a})``: predictive mass of value ``a`` in sequence ``j``."""
    return math.fsum(rule.prob(state, x) for x in rule.space.support if x[j] == a)


def partial_cid_gap(rule, prefix, j, a):
    s = condition(rule, prefix)
    total = 0.0
    for x in rule.space.support:
        px = rule.prob(s, x)
        if px > 0.0:
            total += px * marginal_prob(rule, rule.update(s, x), j, a)
    return abs(total - marginal_prob(rule, s, j, a))


def check_partial_cid(rule: PredictiveRule, n_max=3) -> DiagnosticReport:
    """Martingale identity of every sequence's marginal predictive."""
    name = "partially-cid"
    support = rule.space.support
    if support is None:
        raise ConfigurationError("partial c.i.d. check needs a finite space")
    k = rule.space.dim
    S = len(support)
    values = [sorted({x[j] for x in support}) for j in range(k)]
    bounds = {"n_max": n_max, "sequences": k, "support_size": S}
    cost = sum(S**n for n in range(n_max + 1)) * S * S * sum(len(v) for v in values)
    if cost > MAX_EVALUATIONS:
        return _refuse(name, cost, bounds)
    t = _Track()
    for n in range(0, n_max + 1):
        law = enumerate_joint(rule, n) if n else {(): 1.0}
        for prefix, p in law.items():
            if p <= 0.0:
                continue
            for j in range(k):
                for a in values[j]:
                    t.see(partial_cid_gap(rule, prefix, j, a),
                          {"kind": "partial-cid", "prefix": [list(r) for r in prefix], "sequence": j, "a": a})
    return _report(name, t.worst, t.witness, EXACT_TOL, bounds)


# ---------------------------------------------------------------------------
# Markov exchangeability

def check_markov_exch(pred, states, depth=4) -> DiagnosticReport:
    """Pairwise-swap identity of a predictive that reads the current state's count row."""
    name = "markov-exchangeable"
    states = list(states)
    S = len(states)
    rows = math.comb(depth + S, S)
    bounds = {"depth": depth, "states": S}
    cost = rows * S * S * S
    if cost > MAX_EVALUATIONS:
        return _refuse(name, cost, bounds)
    violations = markov_swap_check(pred, states, depth, tol=0.0)
    worst, witness = 0.0, None
    for x, y, z, row, mag in violations:
        if mag > worst:
            worst, witness = mag, {"kind": "swap", "x": x, "y": y, "z": z, "row": row}
    return _report(name, worst, witness, LOG_TOL, bounds,
                   ["only the row-wise swap identity is checked; the general string-symmetry condition is not"])


def markov_gap(pred, x, y, z, row):
    ry, rz = dict(row), dict(row)
    ry[y] = ry.get(y, 0) + 1
    rz[z] = rz.get(z, 0) + 1
    return abs(pred(y, x, row) * pred(z, x, ry) - pred(z, x, row) * pred(y, x, rz))


# ---------------------------------------------------------------------------
# EPPFs

def _compositions_upto(n_max):
    """All count vectors (in order of appearance) with total 1..n_max."""
    out = []
    frontier = [PartitionCounts((1,))]
    while frontier:
        c = frontier.pop()
        out.append(c)
        if c.n < n_max:
            frontier.extend(c.incremented(j) for j in range(c.k + 1))
    return sorted(set(out), key=lambda c: (c.n, c.sizes))


def additivity_gap(eppf, sizes):
    c = PartitionCounts(tuple(sizes))
    return abs(eppf(c) - math.fsum(eppf(c.incremented(j)) for j in range(c.k + 1)))


def symmetry_gap_eppf(eppf, sizes, other):
    return abs(eppf(PartitionCounts(tuple(sizes))) - eppf(PartitionCounts(tuple(other))))


def mass_gap(eppf, n):
    return abs(math.fsum(eppf(block_sizes(p)) for p in set_partitions(n)) - 1.0)


def check_eppf(eppf: EppfSpec, n_max=6) -> DiagnosticReport:
    """Unit base case, additivity, symmetry in block sizes and total mass."""
    name = f"eppf:{eppf.name}"
    if n_max > 7:
        raise ConfigurationError("EPPF check supports n_max <= 7")
    bounds = {"n_max": n_max}
    t = _Track()
    t.see(abs(eppf(PartitionCounts((1,))) - 1.0), {"kind": "unit", "sizes": [1]})
    for c in _compositions_upto(n_max):
        if c.n < n_max:
            t.see(additivity_gap(eppf, c.sizes), {"kind": "additivity", "sizes": list(c.sizes)})
        for other in set(itertools.permutations(c.sizes)):
            t.see(symmetry_gap_eppf(eppf, c.sizes, other),
                  {"kind": "symmetry", "sizes": list(c.sizes), "permuted": list(other)})
    for n in range(1, n_max + 1):
        t.see(mass_gap(eppf, n), {"kind": "mass", "n": n})
    return _report(name, t.worst, t.witness, LOG_TOL, bounds)


# ---------------------------------------------------------------------------
# replay

def replay(report: DiagnosticReport, target, states=None) -> float:
    """Recompute the violation stored in a failing report's witness.

    ``target`` is the rule (or predictive function, or EPPF) the report was
    produced for; ``states`` is needed for Markov reports.
    """
    w = report.witness
    if w is None:
        raise ConfigurationError("report carries no witness")
    kind = w["kind"]
    tup = (lambda v: tuple(tuple(r) for r in v)) if report.name.startswith("partially") else tuple
    if kind == "joint":
        key = "array" if "array" in w else "sequence"
        return exchangeability_gap(target, tup(w[key]), tup(w["permuted"]))
    if kind == "symmetric-predictive":
        key = "array" if "array" in w else "sequence"
        return symmetry_gap(target, tup(w[key]), tup(w["permuted"]))
    if kind == "two-step":
        return two_step_gap(target, tuple(w["prefix"]), w["a"], w["b"])
    if kind == "cid":
        return cid_gap(target, tuple(w["prefix"]), w["a"])
    if kind == "swap" and "coordinate" in w:
        return partial_swap_gap(target, tup(w["prefix"]), tuple(w["a"]), tuple(w["b"]), w["coordinate"])
    if kind == "partial-cid":
        return partial_cid_gap(target, tup(w["prefix"]), w["sequence"], w["a"])
    if kind == "swap":
        return markov_gap(target, w["x"], w["y"], w["z"], w["row"])
    if kind == "unit":
        return abs(target(PartitionCounts((1,))) - 1.0)
    if kind == "additivity":
        return additivity_gap(target, w["sizes"])
    if kind == "symmetry":
        return symmetry_gap_eppf(target, w["sizes"], w["permuted"])
    if kind == "mass":
        return mass_gap(target, w["n"])
    raise ConfigurationError(f"unknown witness kind {kind!r}")
