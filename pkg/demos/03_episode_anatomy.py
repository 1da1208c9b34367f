"""Walk through one linking episode by hand: states, actions, rewards, masks.

Shows the moving parts the trainer wires together: the state embedding
(network summary plus encoded history), the decoded proto-action, its
projection onto real identities, and the 1/t-discounted reward feedback.
"""

import numpy as np

from seqlink.actor import ActorNetwork, HistoryRecord, IncrementalEncoder
from seqlink.ddpg import select_action
from seqlink.embedding import WalkConfig, combined_network_embedding, pretrain_embeddings
from seqlink.environment import LinkEnv
from seqlink.graphs import SyntheticSpec, generate_synthetic

g_o, g_t, anchors = generate_synthetic(
    SyntheticSpec(node_count=30, base_edge_prob=0.15, edge_overlap=0.95,
                  anchor_fraction=1.0, seed=3))
cfg = WalkConfig(dim=16, walks_per_node=4, walk_length=12, epochs=2)
m_o = pretrain_embeddings(g_o, cfg)
m_t = pretrain_embeddings(g_t, cfg)

env = LinkEnv(g_o, g_t, anchors, max_steps=6)
actor = ActorNetwork(d=16, feedback_dim=6, rng=np.random.default_rng(1))
s_net = combined_network_embedding(m_o, g_o, m_t, g_t).s_net
encoder = IncrementalEncoder(actor, s_net)
noise_rng = np.random.default_rng(2)

state = env.reset()
proposed: dict[int, set[int]] = {}
print(f"t=1 state equals the network summary: "
      f"{np.array_equal(encoder.state(), s_net)}")

done = False
while not done:
    s = encoder.state()
    proto = actor.decode(s, noise_scale=0.1, rng=noise_rng)
    masked_o = np.zeros(g_o.node_count, bool)
    masked_o[sorted(state.masked_original)] = True
    masked_t = np.zeros(g_t.node_count, bool)
    masked_t[sorted(state.masked_target)] = True
    action = select_action(proto, m_o, m_t, masked_o, masked_t, proposed)
    t = state.t
    reward, state, done = env.step(state, action.v_original, action.v_target)
    proposed.setdefault(action.v_original, set()).add(action.v_target)

    outcome = state.history[-1]
    feedback = np.zeros(6)
    feedback[t - 1] = outcome.reward_raw
    encoder.append(HistoryRecord(action.u_original, action.u_target, feedback))
    verdict = "correct" if outcome.reward_raw > 0 else "wrong"
    print(f"t={t}: proposed ({g_o.node_ids[action.v_original]}, "
          f"{g_t.node_ids[action.v_target]}) -> {verdict}, reward {reward:+.3f}")

print(f"masked after the episode: {len(state.masked_original)} originals, "
      f"{len(state.masked_target)} targets")
print(f"episode return: {sum(s.reward for s in state.history):+.3f}")
print("reward magnitudes decay as 1/t:",
      [f"{abs(s.reward):.3f}" for s in state.history])
