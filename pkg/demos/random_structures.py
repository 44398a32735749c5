"""Partitions, feature matrices and graphon arrays from sequential rules."""
from collections import Counter

from bayespred import RandomSource
from bayespred.exchangeable import (
    block_sizes,
    crp_eppf,
    eppf_weights,
    sample_ibp,
    sample_partition,
)
from bayespred.structured import graphon_sample, product_graphon

rng = RandomSource(2)

sizes = Counter()
for r in range(2000):
    labels = sample_partition(lambda c: eppf_weights(c, crp_eppf(1.0)), 6, rng.branch(r))
    sizes[len(block_sizes(labels).sizes)] += 1
print("CRP(1) block counts for n = 6:", dict(sorted(sizes.items())))

Z = sample_ibp(2.0, 10, rng.branch(9999))
print(f"IBP(2) with 10 customers: {Z.shape[1]} dishes, {int(Z.sum())} servings")

A = graphon_sample(product_graphon(), 40, "joint", rng.branch(10_000))
print(f"product graphon, 40 nodes: edge density {A.mean():.3f} (expected 0.25)")
