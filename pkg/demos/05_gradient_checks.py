"""Verify every hand-written backward pass against central differences.

The same machinery the test suite relies on, shown in the open: each layer
reports the worst relative error between its analytic gradients and a
finite-difference probe of the same scalar objective.
"""

import numpy as np

from seqlink import nn
from seqlink.actor import ActorNetwork, HistoryRecord
from seqlink.critic import CriticNetwork

rng = np.random.default_rng(0)


def check(name, func, params):
    err = nn.grad_check(func, params, eps=1e-5)
    print(f"{name:<28} max relative error {err:.2e}")
    assert err < 1e-4


# dense layer
dense = nn.Dense(5, 4, activation="tanh", rng=rng)
x = rng.normal(size=(3, 5))
v = rng.normal(size=(3, 4))


def dense_obj(params):
    y, cache = dense.forward(x)
    grads, _ = dense.backward(cache, v)
    return float(np.sum(y * v)), grads


check("dense + tanh", dense_obj, dense.params())

# LSTM over a short sequence
lstm = nn.LSTMCell(4, 6, rng=rng)
xs = rng.normal(size=(2, 3, 4))
lengths = np.array([3, 2])
w = rng.normal(size=(2, 3, 6))


def lstm_obj(params):
    hs, cache = lstm.forward_seq(xs, lengths)
    grads, _ = lstm.backward_seq(cache, w)
    return float(np.sum(hs * w)), grads


check("lstm, 3-step bptt", lstm_obj, lstm.params())

# attention pool
attn = nn.AttentionScorer(6, rng=rng)
hs = rng.normal(size=(2, 4, 6))
mask = np.array([[1, 1, 1, 0], [1, 1, 0, 0]], dtype=float)
u = rng.normal(size=(2, 6))


def attn_obj(params):
    pooled, _, cache = attn.pool(hs, mask)
    grads, _ = attn.pool_backward(cache, u)
    return float(np.sum(pooled * u)), grads


check("attention pool", attn_obj, attn.params())

# critic, including the action gradient
critic = CriticNetwork(2, widths=(6, 5, 4, 3), rng=rng)
s = rng.normal(size=(2, 4))
a = rng.normal(size=(2, 4))


def critic_obj(params):
    q, caches = critic.forward(s, a)
    grads, _ = critic.backward(caches, np.ones(2))
    return float(np.sum(q)), grads


check("critic q-network", critic_obj, critic.params())

# the full actor-through-critic composite used by the policy update
actor = ActorNetwork(2, 3, rng=rng)
s_net = rng.normal(size=4)
histories = [[HistoryRecord(rng.normal(size=2), rng.normal(size=2),
                            np.eye(3)[i % 3]) for i in range(2)], []]
stored_s = rng.normal(size=(2, 4))


def composite_obj(params):
    protos, cache = actor.forward_batch([list(h) for h in histories], s_net)
    q, qcaches = critic.forward(stored_s, protos)
    _, (_, da) = critic.backward(qcaches, np.full(2, 0.5))
    return float(np.mean(q)), actor.backward_batch(cache, da)


check("actor-through-critic", composite_obj, actor.params())

print("all analytic gradients agree with finite differences")
