"""Newton's recursive estimate is c.i.d. but not exchangeable.

Exhaustive checks over short binary sequences make the difference concrete,
and the reported witness can be replayed against the rule.
"""
from bayespred import NewtonRule, PolyaRule, uniform_discrete
from bayespred.diagnostics import check_cid, check_exchangeable, replay
from bayespred.newton import BernoulliKernel, uniform_grid

newton = NewtonRule(uniform_grid((0.2, 0.8), BernoulliKernel()))
polya = PolyaRule(1.0, uniform_discrete((0, 1)))

for label, rule in (("polya", polya), ("newton", newton)):
    for report in (check_exchangeable(rule, 3), check_cid(rule, 4)):
        print(f"{label:7s} {report.name:13s} {report.verdict:5s} worst gap {report.worst:.3e}")

report = check_exchangeable(newton, 3)
print("witness:", report.witness)
print(f"replayed gap: {replay(report, newton):.3e}")
