"""Deterministic actor-critic training loop with replay and target networks.

Each environment step appends a transition to the replay buffer; once the
buffer can fill a batch, every step also runs one critic regression toward
r + rho * Q'(s', f'(s')), one policy-gradient ascent step on Q(s, f(s)),
and a soft synchronization of both target networks. Training is bitwise
reproducible for a fixed seed.

Stored transitions keep the 2d state vectors the critic consumes, plus the
raw history prefix behind each state so the policy update can push gradients
through the history encoder, not just the decoder. Those encodings are
truncated to the most recent `actor_window` records to bound the per-step
backpropagation-through-time cost.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .actor import (
    Action,
    ActorNetwork,
    HistoryRecord,
    IncrementalEncoder,
    NoCandidatesError,
)
from .critic import CriticNetwork
from .embedding import EmbeddingMatrix, combined_network_embedding
from .environment import LinkEnv, StepOutcome, episode_return
from .graphs import AnchorSet, Graph
from .seeding import derive_rng


@dataclass
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool
    history: tuple[HistoryRecord, ...] = ()
    # masks at the next state, so bootstrap targets can project the target
    # actor's proto-action onto a legal identity pair
    masked_original_next: np.ndarray | None = None
    masked_target_next: np.ndarray | None = None

    def validate(self) -> None:
        for name, arr in (("s", self.s), ("a", self.a), ("s_next", self.s_next)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite transition field {name}")
        if not np.isfinite(self.r):
            raise ValueError("non-finite transition reward")


class ReplayBuffer:
    """Bounded FIFO store with seeded uniform sampling (with replacement)."""

    def __init__(self, capacity: int = 10_000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._items)

    def store(self, transition: Transition) -> None:
        transition.validate()
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._next] = transition
        self._next = (self._next + 1) % self.capacity

    def snapshot(self) -> list[Transition]:
        """Contents oldest-first."""
        return self._items[self._next:] + self._items[:self._next] \
            if len(self._items) == self.capacity else list(self._items)

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        if len(self._items) < n:
            raise ValueError(f"buffer holds {len(self._items)} < {n} transitions")
        idx = rng.integers(0, len(self._items), size=n)
        return [self._items[int(i)] for i in idx]


@dataclass
class TrainConfig:
    episodes: int = 200
    batch_size: int = 64
    discount: float = 0.9
    tau: float = 0.001
    learning_rate: float = 0.001
    buffer_capacity: int = 10_000
    noise_start: float = 0.2
    noise_end: float = 0.01
    actor_window: int = 4
    clip_norm: float | None = 5.0
    zeta: float = 1e-3
    max_steps: int | None = None   # None: one step per training anchor
    checkpoint_every: int = 0      # 0: no periodic snapshots
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if self.batch_size < 1 or self.episodes < 0 or self.buffer_capacity < 1:
            raise ValueError("episodes, batch_size, buffer_capacity must be positive")
        if self.actor_window < 1:
            raise ValueError("actor_window must be >= 1")

    def sgd(self) -> nn.SGDConfig:
        return nn.SGDConfig(self.learning_rate, self.clip_norm)


@dataclass
class TargetNets:
    actor: ActorNetwork
    critic: CriticNetwork

    @classmethod
    def from_live(cls, actor: ActorNetwork, critic: CriticNetwork) -> "TargetNets":
        return cls(actor.copy(), critic.copy())


def soft_update(live: nn.Params, target: nn.Params, tau: float) -> None:
    """target <- tau * live + (1 - tau) * target, elementwise, in place."""
    if set(live) != set(target):
        raise nn.ShapeError("parameter block names differ between live and target")
    for name, src in live.items():
        dst = target[name]
        if dst.shape != src.shape:
            raise nn.ShapeError(f"shape mismatch in block {name!r}")
        dst *= 1.0 - tau
        dst += tau * src


# ---------------------------------------------------------------------------
# update rules
# ---------------------------------------------------------------------------

def critic_update(critic: CriticNetwork, targets: TargetNets,
                  batch: list[Transition], cfg: TrainConfig,
                  projection: tuple[EmbeddingMatrix, EmbeddingMatrix] | None = None) -> float:
    """One SGD step on mean squared error against the frozen target value.

    y = r + rho * Q'(s', f'(s')) with the target actor's noise-free action
    at the stored next state; terminal transitions regress on y = r alone.
    When `projection` supplies the embedding matrices, the target action is
    the proto-action projected onto a legal identity pair (next-state
    masks), keeping bootstrap queries on the manifold the critic is trained
    on; raw proto-actions there let the known overestimation spiral run.
    Returns the pre-update loss.
    """
    if not batch:
        raise ValueError("empty batch")
    s = np.stack([tr.s for tr in batch])
    a = np.stack([tr.a for tr in batch])
    r = np.array([tr.r for tr in batch])
    s_next = np.stack([tr.s_next for tr in batch])
    live = np.array([0.0 if tr.done else 1.0 for tr in batch])

    a_next = targets.actor.decoder(s_next)
    if projection is not None:
        m_original, m_target = projection
        a_next = _project_batch(a_next, m_original, m_target, batch)
    q_next, _ = targets.critic.forward(s_next, a_next)
    y = r + cfg.discount * live * q_next

    q, caches = critic.forward(s, a)
    diff = q - y
    loss = float(np.mean(diff * diff))
    if not np.isfinite(loss):
        raise nn.TrainingError(f"critic loss is non-finite ({loss})")
    grads, _ = critic.backward(caches, 2.0 * diff / len(batch))
    nn.sgd_update(critic.params(), grads, cfg.sgd())
    return loss


def _project_batch(protos: np.ndarray, m_original: EmbeddingMatrix,
                   m_target: EmbeddingMatrix, batch: list[Transition]) -> np.ndarray:
    """Cosine-project each proto half onto its side's unmasked rows."""
    d = m_original.dim
    scores_o = protos[:, :d] @ m_original.norm_rows.T    # (B, N_O)
    scores_t = protos[:, d:] @ m_target.norm_rows.T      # (B, N_T)
    for b, tr in enumerate(batch):
        if tr.masked_original_next is not None and not tr.masked_original_next.all():
            scores_o[b, tr.masked_original_next] = -np.inf
        if tr.masked_target_next is not None and not tr.masked_target_next.all():
            scores_t[b, tr.masked_target_next] = -np.inf
    v_o = np.argmax(scores_o, axis=1)
    v_t = np.argmax(scores_t, axis=1)
    return np.concatenate([m_original.rows[v_o], m_target.rows[v_t]], axis=1)


def actor_update(actor: ActorNetwork, critic: CriticNetwork,
                 batch: list[Transition], cfg: TrainConfig,
                 s_net: np.ndarray) -> float:
    """Ascend mean Q(s, f(s)) through the decoder and the history encoder.

    The proto-action is re-derived from each transition's stored history
    (windowed); the critic's state input is the stored vector and is held
    constant, so the gradient is exactly dQ/da chained through the policy.
    Returns the pre-update mean Q.
    """
    if not batch:
        raise ValueError("empty batch")
    histories = [list(tr.history) for tr in batch]
    protos, cache = actor.forward_batch(histories, s_net, window=cfg.actor_window)
    s = np.stack([tr.s for tr in batch])
    q, qcaches = critic.forward(s, protos)
    objective = float(np.mean(q))
    _, (_, d_action) = critic.backward(qcaches, np.full(len(batch), 1.0 / len(batch)))
    grads = actor.backward_batch(cache, d_action)
    nn.sgd_update(actor.params(), {k: -g for k, g in grads.items()}, cfg.sgd())
    return objective


# ---------------------------------------------------------------------------
# action selection
# ---------------------------------------------------------------------------

def select_action(proto: np.ndarray, m_original: EmbeddingMatrix,
                  m_target: EmbeddingMatrix, masked_original: np.ndarray,
                  masked_target: np.ndarray,
                  proposed_by_original: dict[int, set[int]]) -> Action:
    """Projection that also honors the no-repeated-pair rule.

    Original candidates are tried in descending cosine order (ties to the
    lowest index); for each, the best target not already proposed with it is
    taken. Raises NoCandidatesError when no legal pair remains.
    """
    d = m_original.dim
    scores_o = m_original.norm_rows @ proto[:d]
    scores_o[masked_original] = -np.inf
    scores_t_base = m_target.norm_rows @ proto[d:]
    order = np.argsort(-scores_o, kind="stable")
    for v_o in order:
        v_o = int(v_o)
        if scores_o[v_o] == -np.inf:
            break
        scores_t = scores_t_base.copy()
        scores_t[masked_target] = -np.inf
        for t in proposed_by_original.get(v_o, ()):
            scores_t[t] = -np.inf
        v_t = int(np.argmax(scores_t))
        if scores_t[v_t] == -np.inf:
            continue
        return Action(v_o, v_t, m_original.rows[v_o].copy(), m_target.rows[v_t].copy())
    raise NoCandidatesError("no legal identity pair remains this episode")


def _feedback_vector(dim: int, t: int, raw_reward: float) -> np.ndarray:
    g = np.zeros(dim)
    g[min(t, dim) - 1] = raw_reward  # steps beyond dim share the last slot
    return g


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class EpisodeLog:
    episode: int
    total_reward: float
    critic_loss_mean: float
    actor_objective_mean: float


@dataclass
class TrainResult:
    actor: ActorNetwork
    critic: CriticNetwork
    targets: TargetNets
    log: list[EpisodeLog]
    traces: list[list[StepOutcome]]
    s_net: np.ndarray


def train(g_original: Graph, g_target: Graph, m_original: EmbeddingMatrix,
          m_target: EmbeddingMatrix, train_anchors: AnchorSet,
          cfg: TrainConfig, checkpoint_dir=None) -> TrainResult:
    """Run the full training loop over the training anchors.

    Per step: encode state, decode with exploration noise, project onto a
    legal pair, take the environment step, store the transition, then (once
    the buffer can fill a batch) run the critic and actor updates and softly
    sync both targets.

    Candidate pools during training are the training anchors' own node sets
    (rewards are only defined there; nodes outside them are uniformly wrong
    and would starve the buffer of positive signal).
    """
    cfg.validate()
    m_original.check_aligned(g_original)
    m_target.check_aligned(g_target)
    d = m_original.dim
    if m_target.dim != d:
        raise nn.ShapeError("embedding dimensions differ between sides")

    max_steps = cfg.max_steps if cfg.max_steps is not None else max(len(train_anchors), 1)
    env = LinkEnv(g_original, g_target, train_anchors, max_steps=max_steps)
    s_net = combined_network_embedding(m_original, g_original,
                                       m_target, g_target, cfg.zeta).s_net

    actor = ActorNetwork(d, max_steps, rng=derive_rng(cfg.seed, "init:actor"))
    critic = CriticNetwork(d, rng=derive_rng(cfg.seed, "init:critic"))
    targets = TargetNets.from_live(actor, critic)
    buffer = ReplayBuffer(cfg.buffer_capacity)
    noise_rng = derive_rng(cfg.seed, "noise")
    sample_rng = derive_rng(cfg.seed, "replay")

    total_steps = max(cfg.episodes * max_steps, 1)
    step_no = 0
    log: list[EpisodeLog] = []
    traces: list[list[StepOutcome]] = []

    base_masked_o = np.ones(g_original.node_count, dtype=bool)
    base_masked_o[[g_original.index_of[o] for o, _ in train_anchors.pairs]] = False
    base_masked_t = np.ones(g_target.node_count, dtype=bool)
    base_masked_t[[g_target.index_of[t] for _, t in train_anchors.pairs]] = False

    for episode in range(cfg.episodes):
        state = env.reset()
        encoder = IncrementalEncoder(actor, s_net)
        records: list[HistoryRecord] = []
        proposed: dict[int, set[int]] = {}
        critic_losses: list[float] = []
        actor_objectives: list[float] = []
        done = False
        while not done:
            s = encoder.state()
            frac = step_no / max(total_steps - 1, 1)
            sigma = cfg.noise_start + (cfg.noise_end - cfg.noise_start) * min(frac, 1.0)
            proto = actor.decode(s, noise_scale=sigma, rng=noise_rng)
            masked_o = base_masked_o.copy()
            masked_t = base_masked_t.copy()
            if state.masked_original:
                masked_o[sorted(state.masked_original)] = True
            if state.masked_target:
                masked_t[sorted(state.masked_target)] = True
            try:
                action = select_action(proto, m_original, m_target,
                                       masked_o, masked_t, proposed)
            except NoCandidatesError:
                break
            t_now = state.t
            reward, state, done = env.step(state, action.v_original, action.v_target)
            proposed.setdefault(action.v_original, set()).add(action.v_target)
            raw = state.history[-1].reward_raw
            record = HistoryRecord(action.u_original, action.u_target,
                                   _feedback_vector(max_steps, t_now, raw))
            history_before = tuple(records)
            records.append(record)
            encoder.append(record)
            s_next = encoder.state()
            if raw > 0:  # masks only change on a correct match
                masked_o = masked_o.copy()
                masked_o[action.v_original] = True
                masked_t = masked_t.copy()
                masked_t[action.v_target] = True
            buffer.store(Transition(s, action.pair_embedding, reward, s_next,
                                    done, history_before, masked_o, masked_t))
            step_no += 1

            if len(buffer) >= cfg.batch_size:
                batch = buffer.sample(cfg.batch_size, sample_rng)
                critic_losses.append(critic_update(critic, targets, batch, cfg,
                                                   projection=(m_original, m_target)))
                actor_objectives.append(actor_update(actor, critic, batch, cfg, s_net))
                soft_update(actor.params(), targets.actor.params(), cfg.tau)
                soft_update(critic.params(), targets.critic.params(), cfg.tau)

        log.append(EpisodeLog(
            episode,
            episode_return(state.history),
            float(np.mean(critic_losses)) if critic_losses else 0.0,
            float(np.mean(actor_objectives)) if actor_objectives else 0.0,
        ))
        traces.append(state.history)
        if (checkpoint_dir is not None and cfg.checkpoint_every > 0
                and (episode + 1) % cfg.checkpoint_every == 0):
            snapshot = TrainResult(actor, critic, targets, log, traces, s_net)
            save_checkpoint(snapshot,
                            Path(checkpoint_dir) / f"checkpoint_ep{episode + 1:04d}.ckpt")

    return TrainResult(actor, critic, targets, log, traces, s_net)


def write_training_log(path, log: list[EpisodeLog]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "total_reward", "critic_loss_mean",
                         "actor_objective_mean"])
        for row in log:
            writer.writerow([row.episode, repr(row.total_reward),
                             repr(row.critic_loss_mean), repr(row.actor_objective_mean)])


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------

def checkpoint_params(result: TrainResult) -> tuple[nn.Params, dict]:
    params: nn.Params = {}
    for prefix, net in (("actor", result.actor), ("critic", result.critic),
                        ("target_actor", result.targets.actor),
                        ("target_critic", result.targets.critic)):
        for name, arr in net.params().items():
            params[f"{prefix}.{name}"] = arr
    meta = {
        "d": result.actor.d,
        "feedback_dim": result.actor.feedback_dim,
        "critic_widths": list(result.critic.widths),
    }
    return params, meta


def save_checkpoint(result: TrainResult, path) -> None:
    params, meta = checkpoint_params(result)
    nn.save_checkpoint(params, path, meta=meta)


def load_actor(path) -> ActorNetwork:
    params, meta = nn.load_checkpoint(path)
    actor = ActorNetwork(int(meta["d"]), int(meta["feedback_dim"]))
    actor.set_params({name.split(".", 1)[1]: arr for name, arr in params.items()
                      if name.startswith("actor.")})
    return actor


# ---------------------------------------------------------------------------
# online evaluation
# ---------------------------------------------------------------------------

@dataclass
class LinkageResult:
    """Outcome of one noise-free evaluation episode over the test anchors.

    ranks maps each attempted test original label to the 1-based rank of its
    true partner in that step's cosine-ordered candidate list; originals the
    episode never reached are absent. candidate_count is the target-side
    pool size at the first step (for chance-level comparisons).
    """

    ranks: dict[str, int] = field(default_factory=dict)
    history: list[StepOutcome] = field(default_factory=list)
    n_test: int = 0
    candidate_count: int = 0
    correct: int = 0

    @property
    def precision_at_1(self) -> float:
        return sum(1 for r in self.ranks.values() if r == 1) / self.n_test


def evaluate_policy(actor: ActorNetwork, g_original: Graph, g_target: Graph,
                    m_original: EmbeddingMatrix, m_target: EmbeddingMatrix,
                    test_anchors: AnchorSet, zeta: float = 1e-3) -> LinkageResult:
    """Online test: one noise-free episode against the held-out anchors.

    Each step proposes a pair whose original side is drawn from the not yet
    attempted test originals (so every test anchor is attempted once), the
    environment feeds the reward back into the state, and the true partner's
    rank within the step's candidate pool is recorded.
    """
    m_original.check_aligned(g_original)
    m_target.check_aligned(g_target)
    d = m_original.dim
    n_test = len(test_anchors)
    if n_test == 0:
        return LinkageResult(n_test=0, candidate_count=g_target.node_count)
    env = LinkEnv(g_original, g_target, test_anchors, max_steps=n_test)
    s_net = combined_network_embedding(m_original, g_original,
                                       m_target, g_target, zeta).s_net
    encoder = IncrementalEncoder(actor, s_net)

    test_originals = {g_original.index_of[o] for o, _ in test_anchors.pairs}
    truth_idx = {g_original.index_of[o]: g_target.index_of[t]
                 for o, t in test_anchors.pairs}
    attempted: set[int] = set()
    proposed: dict[int, set[int]] = {}
    ranks: dict[str, int] = {}
    state = env.reset()
    done = False
    while not done:
        s = encoder.state()
        proto = actor.decode(s)
        masked_o = np.ones(g_original.node_count, dtype=bool)
        masked_o[sorted(test_originals - attempted - state.masked_original)] = False
        masked_t = np.zeros(g_target.node_count, dtype=bool)
        if state.masked_target:
            masked_t[sorted(state.masked_target)] = True
        try:
            action = select_action(proto, m_original, m_target,
                                   masked_o, masked_t, proposed)
        except NoCandidatesError:
            break
        v_o, v_t = action.v_original, action.v_target
        # rank of the true partner within this step's candidate pool,
        # ordered by descending cosine, ties to the lower index
        scores = m_target.norm_rows @ proto[d:]
        pool = ~masked_t
        for t in proposed.get(v_o, ()):
            pool[t] = False
        true_t = truth_idx[v_o]
        s_true = scores[true_t]
        better = int(np.sum(pool & ((scores > s_true)
                                    | ((scores == s_true) & (np.arange(scores.size) < true_t)))))
        ranks[g_original.node_ids[v_o]] = better + 1

        t_now = state.t
        reward, state, done = env.step(state, v_o, v_t)
        attempted.add(v_o)
        proposed.setdefault(v_o, set()).add(v_t)
        raw = state.history[-1].reward_raw
        encoder.append(HistoryRecord(action.u_original, action.u_target,
                                     _feedback_vector(actor.feedback_dim, t_now, raw)))

    correct = sum(1 for step in state.history if step.reward_raw > 0)
    return LinkageResult(ranks=ranks, history=state.history, n_test=n_test,
                         candidate_count=g_target.node_count, correct=correct)
