"""Ranking metrics and reference baselines for linkage results.

All metrics work off RankedCandidates: for each test anchor, the 1-based
rank of the true partner in some candidate ordering, or absence when the
method never ranked that anchor (absent anchors count against precision and
contribute zero to the mean reciprocal rank).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .embedding import EmbeddingMatrix
from .graphs import AnchorSet
from .seeding import derive_rng


class MetricsError(ValueError):
    """Metric requested over an empty or inconsistent result set."""


@dataclass
class RankedCandidates:
    """True-partner ranks keyed by test-original label; unranked are absent."""

    ranks: dict[str, int]
    n: int
    candidate_count: int
    train_loss: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if any(r < 1 for r in self.ranks.values()):
            raise MetricsError("ranks are 1-based and must be >= 1")
        if len(self.ranks) > self.n:
            raise MetricsError("more ranked anchors than test anchors")


def precision_at_k(ranked: RankedCandidates, k: int) -> float:
    """Fraction of test anchors whose true partner sits in the top k."""
    if k < 1:
        raise MetricsError("k must be >= 1")
    if ranked.n == 0:
        raise MetricsError("precision undefined for zero test anchors")
    hits = sum(1 for r in ranked.ranks.values() if r <= k)
    return hits / ranked.n


def mean_average_precision(ranked: RankedCandidates) -> float:
    """Mean reciprocal rank of the true partner; unranked anchors add zero."""
    if ranked.n == 0:
        raise MetricsError("MAP undefined for zero test anchors")
    return sum(1.0 / r for r in ranked.ranks.values()) / ranked.n


def recall(matched_correct: int, total_truth: int) -> float:
    """Fraction of ground-truth pairs actually recovered."""
    if total_truth < 1:
        raise MetricsError("recall needs at least one ground-truth pair")
    if matched_correct < 0 or matched_correct > total_truth:
        raise MetricsError("matched_correct must lie in [0, total_truth]")
    return matched_correct / total_truth


@dataclass
class MetricsReport:
    method: str
    seed: int
    n: int
    p_at: dict[int, float]
    map: float
    recall: float

    def __post_init__(self):
        values = [*self.p_at.values(), self.map, self.recall]
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise MetricsError("metric values must lie in [0, 1]")
        ks = sorted(self.p_at)
        if any(self.p_at[a] > self.p_at[b] for a, b in zip(ks, ks[1:])):
            raise MetricsError("precision@k must be non-decreasing in k")

    @classmethod
    def from_ranks(cls, method: str, seed: int, ranked: RankedCandidates,
                   k_list: tuple[int, ...], matched_correct: int | None = None) -> "MetricsReport":
        if matched_correct is None:
            matched_correct = sum(1 for r in ranked.ranks.values() if r == 1)
        return cls(
            method=method,
            seed=seed,
            n=ranked.n,
            p_at={k: precision_at_k(ranked, k) for k in k_list},
            map=mean_average_precision(ranked),
            recall=recall(matched_correct, ranked.n),
        )

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "n": self.n,
            "p_at": {str(k): self.p_at[k] for k in sorted(self.p_at)},
            "map": self.map,
            "recall": self.recall,
        }


def rank_by_cosine(prediction: np.ndarray, norm_rows: np.ndarray, true_index: int) -> int:
    """1-based rank of true_index when rows are ordered by descending cosine
    with the prediction; exact ties go to the lower index."""
    scores = norm_rows @ (prediction / np.linalg.norm(prediction))
    s_true = scores[true_index]
    better = np.sum((scores > s_true)
                    | ((scores == s_true) & (np.arange(scores.size) < true_index)))
    return int(better) + 1


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

def greedy_cosine_baseline(m_original: EmbeddingMatrix, m_target: EmbeddingMatrix,
                           test_anchors: AnchorSet) -> tuple[dict[str, str], RankedCandidates]:
    """One-shot greedy matching on the raw cross-network cosine matrix.

    Repeatedly commits the globally best remaining pair, one-to-one, until a
    side is exhausted. A prediction method: each test anchor either ranks 1
    (matched to its true partner) or is absent.
    """
    cos = m_original.norm_rows @ m_target.norm_rows.T
    work = cos.copy()
    n_o, n_t = work.shape
    matching_idx: dict[int, int] = {}
    for _ in range(min(n_o, n_t)):
        flat = int(np.argmax(work))  # ties resolve to the lowest flat index
        i, j = divmod(flat, n_t)
        if work[i, j] == -np.inf:
            break
        matching_idx[i] = j
        work[i, :] = -np.inf
        work[:, j] = -np.inf
    o_index = {label: i for i, label in enumerate(m_original.labels)}
    t_index = {label: j for j, label in enumerate(m_target.labels)}
    matching = {m_original.labels[i]: m_target.labels[j] for i, j in matching_idx.items()}
    ranks = {o: 1 for o, t in test_anchors.pairs
             if matching_idx.get(o_index[o]) == t_index[t]}
    return matching, RankedCandidates(ranks, len(test_anchors), n_t)


def random_baseline(test_anchors: AnchorSet, candidate_count: int,
                    seed: int) -> RankedCandidates:
    """Chance floor: the true partner lands uniformly in the candidate list."""
    if candidate_count < 1:
        raise MetricsError("candidate_count must be >= 1")
    rng = derive_rng(seed, "random-baseline")
    ranks = {o: int(rng.integers(1, candidate_count + 1))
             for o, _ in test_anchors.pairs}
    return RankedCandidates(ranks, len(test_anchors), candidate_count)


@dataclass
class SdmConfig:
    hidden: int = 128
    epochs: int = 200
    learning_rate: float = 0.01
    clip_norm: float | None = 5.0
    seed: int = 0


def _similarity_order(pairs, m_original, m_target):
    """Anchors ordered by how confidently the original matches anything on
    the target side (descending best cosine), labels breaking ties."""
    o_index = {label: i for i, label in enumerate(m_original.labels)}
    best = m_original.norm_rows @ m_target.norm_rows.T
    score = best.max(axis=1)
    return sorted(pairs, key=lambda p: (-score[o_index[p[0]]], p[0]))


def sdm_baseline(m_original: EmbeddingMatrix, m_target: EmbeddingMatrix,
                 train_anchors: AnchorSet, test_anchors: AnchorSet,
                 cfg: SdmConfig | None = None) -> RankedCandidates:
    """Sequence-matching baseline: an LSTM reads original-side vectors in
    similarity order and regresses each true partner's vector under squared
    error; test anchors are ranked by cosine against the prediction, with
    the hidden state carried over from the training sequence.
    """
    cfg = cfg or SdmConfig()
    d = m_original.dim
    rng = derive_rng(cfg.seed, "sdm-init")
    lstm = nn.LSTMCell(d, cfg.hidden, rng=rng)
    head = nn.Dense(cfg.hidden, d, activation="identity", rng=rng)

    o_index = {label: i for i, label in enumerate(m_original.labels)}
    t_index = {label: j for j, label in enumerate(m_target.labels)}
    train_seq = _similarity_order(train_anchors.pairs, m_original, m_target)
    test_seq = _similarity_order(test_anchors.pairs, m_original, m_target)

    sgd_cfg = nn.SGDConfig(cfg.learning_rate, cfg.clip_norm)
    losses: list[float] = []
    if train_seq:
        xs = np.stack([m_original.rows[o_index[o]] for o, _ in train_seq])[None, :, :]
        ys = np.stack([m_target.rows[t_index[t]] for _, t in train_seq])
        lengths = np.array([len(train_seq)])
        for _ in range(cfg.epochs):
            hs, cache = lstm.forward_seq(xs, lengths)
            preds, head_cache = head.forward(hs[0])
            err = preds - ys
            losses.append(float(np.mean(err * err)))
            head_grads, dhs = head.backward(head_cache, 2.0 * err / err.size)
            lstm_grads, _ = lstm.backward_seq(cache, dhs[None, :, :])
            params = {f"lstm.{k}": v for k, v in lstm.params().items()}
            params.update({f"head.{k}": v for k, v in head.params().items()})
            grads = {f"lstm.{k}": v for k, v in lstm_grads.items()}
            grads.update({f"head.{k}": v for k, v in head_grads.items()})
            nn.sgd_update(params, grads, sgd_cfg)

    ranks: dict[str, int] = {}
    if test_seq:
        h = np.zeros((1, cfg.hidden))
        c = np.zeros((1, cfg.hidden))
        for o, _ in train_seq:
            h, c = lstm.step(m_original.rows[o_index[o]][None, :], h, c)
        for o, t in test_seq:
            h, c = lstm.step(m_original.rows[o_index[o]][None, :], h, c)
            pred = head(h)[0]
            ranks[o] = rank_by_cosine(pred, m_target.norm_rows, t_index[t])

    result = RankedCandidates(ranks, len(test_anchors), m_target.node_count)
    result.train_loss = losses
    return result
