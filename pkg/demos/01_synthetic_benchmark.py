"""Build a synthetic cross-network benchmark and look at what came out.

Two graphs grown from one latent edge set, partially overlapping, with the
target side relabeled by a hidden permutation. The anchor file is the
ground truth a linking method is judged against.
"""

import numpy as np

from seqlink.graphs import SyntheticSpec, generate_synthetic, split_anchors

spec = SyntheticSpec(node_count=60, base_edge_prob=0.1, edge_overlap=0.9,
                     anchor_fraction=1.0, seed=42)
g_original, g_target, anchors = generate_synthetic(spec)

print(f"original: {g_original.node_count} nodes, {g_original.edge_count} edges")
print(f"target:   {g_target.node_count} nodes, {g_target.edge_count} edges")
print(f"anchors:  {len(anchors)} ground-truth pairs, e.g. {anchors.pairs[:3]}")

# how much edge structure the two copies actually share
mapping = {o: t for o, t in anchors.pairs}
edges_t = {tuple(sorted((g_target.index_of[mapping[g_original.node_ids[i]]],
                         g_target.index_of[mapping[g_original.node_ids[j]]])))
           for i, j in g_original.edges()}
shared = len(edges_t & {tuple(sorted(e)) for e in g_target.edges()})
union = g_original.edge_count + g_target.edge_count - shared
print(f"shared-edge fraction (Jaccard under the anchor map): {shared / union:.3f}")

deg_o = g_original.degrees()
print(f"degrees: mean {deg_o.mean():.2f}, min {deg_o.min()}, max {deg_o.max()}")

train, test = split_anchors(anchors, 0.6)
print(f"split at r = 0.6: {len(train)} training pairs, {len(test)} held out")
print("training originals start at:", train.originals()[:5])

# determinism: the same spec always produces the same benchmark
g2, _, _ = generate_synthetic(spec)
assert g2.edges() == g_original.edges()
print("re-running the generator reproduced the graph exactly")

rng = np.random.default_rng(0)
print("a random anchor to eyeball:", anchors.pairs[rng.integers(len(anchors))])
