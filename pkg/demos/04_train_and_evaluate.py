"""Train the linking agent on a small benchmark and compare it to baselines.

A compact version of the full pipeline: generate, embed, train, evaluate,
with the greedy-cosine and random baselines for context. Takes around a
minute; shrink `episodes` for a quicker look.
"""

import numpy as np

from seqlink.ddpg import TrainConfig, evaluate_policy, train
from seqlink.embedding import WalkConfig, pretrain_embeddings
from seqlink.evaluation import (
    MetricsReport,
    RankedCandidates,
    greedy_cosine_baseline,
    random_baseline,
)
from seqlink.graphs import SyntheticSpec, generate_synthetic, split_anchors

g_o, g_t, anchors = generate_synthetic(
    SyntheticSpec(node_count=50, base_edge_prob=0.12, edge_overlap=0.95,
                  anchor_fraction=1.0, seed=8))
walk_cfg = WalkConfig(dim=32, walks_per_node=6, walk_length=20, epochs=3)
m_o = pretrain_embeddings(g_o, walk_cfg)
m_t = pretrain_embeddings(g_t, walk_cfg)
train_anchors, test_anchors = split_anchors(anchors, 0.6)

cfg = TrainConfig(episodes=60, batch_size=32, actor_window=4, seed=5)
result = train(g_o, g_t, m_o, m_t, train_anchors, cfg)

rewards = [row.total_reward for row in result.log]
decile = max(len(rewards) // 10, 1)
print(f"episode reward: first decile {np.mean(rewards[:decile]):+.3f} "
      f"-> last decile {np.mean(rewards[-decile:]):+.3f}")

linkage = evaluate_policy(result.actor, g_o, g_t, m_o, m_t, test_anchors)
agent = MetricsReport.from_ranks(
    "agent", cfg.seed,
    RankedCandidates(linkage.ranks, linkage.n_test, linkage.candidate_count),
    (1, 5, 9), matched_correct=linkage.correct)

_, greedy_ranks = greedy_cosine_baseline(m_o, m_t, test_anchors)
greedy = MetricsReport.from_ranks("greedy", cfg.seed, greedy_ranks, (1, 5, 9))
chance = random_baseline(test_anchors, g_t.node_count, seed=0)
rand = MetricsReport.from_ranks("random", cfg.seed, chance, (1, 5, 9))

print(f"{'method':<8} {'P@1':>6} {'P@5':>6} {'P@9':>6} {'MAP':>6} {'recall':>6}")
for rep in (agent, greedy, rand):
    print(f"{rep.method:<8} {rep.p_at[1]:6.3f} {rep.p_at[5]:6.3f} "
          f"{rep.p_at[9]:6.3f} {rep.map:6.3f} {rep.recall:6.3f}")
print(f"(chance P@1 for {g_t.node_count} candidates is {1 / g_t.node_count:.3f})")
