"""Policy network: encode the linking state, decode a pair proposal.

The state embedding sums a constant whole-network summary with an
attention-pooled LSTM encoding of the matched-pair history (each record is
both identities' vectors plus an encoded feedback vector). The decoder is a
single tanh layer whose output splits into two halves; each half is mapped
onto a concrete identity by cosine argmax against that side's normalized
embedding rows, skipping masked identities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .embedding import EmbeddingMatrix


class NoCandidatesError(RuntimeError):
    """Every identity on one side is masked; the episode is exhausted."""


@dataclass
class HistoryRecord:
    """One past proposal: both embedding rows plus the raw feedback vector.

    The feedback vector has one slot per episode step; slot i holds the
    signed immediate reward of step i and every other slot is zero.
    """

    u_original: np.ndarray
    u_target: np.ndarray
    feedback: np.ndarray


@dataclass
class Action:
    """A concrete identity pair with the embedding rows that back it."""

    v_original: int
    v_target: int
    u_original: np.ndarray
    u_target: np.ndarray

    @property
    def pair_embedding(self) -> np.ndarray:
        return np.concatenate([self.u_original, self.u_target])


class ActorNetwork:
    """Encoder-decoder policy over d-dimensional identity embeddings.

    Dimensions are all tied to d: the feedback encoding is d wide, history
    inputs are 3d wide, the LSTM hidden state and the state embedding are 2d
    wide, and the decoded proto-action is 2d wide (two d-halves).
    """

    def __init__(self, d: int, feedback_dim: int, rng: np.random.Generator | None = None):
        self.d = d
        self.feedback_dim = feedback_dim
        self.hidden = 2 * d
        self.feedback = nn.Dense(feedback_dim, d, activation="tanh", rng=rng)
        self.lstm = nn.LSTMCell(3 * d, 2 * d, rng=rng)
        self.attention = nn.AttentionScorer(2 * d, rng=rng)
        self.decoder = nn.Dense(2 * d, 2 * d, activation="tanh", rng=rng)

    # -- parameter plumbing -------------------------------------------------

    def params(self) -> nn.Params:
        out: nn.Params = {}
        for prefix, layer in (("feedback", self.feedback), ("lstm", self.lstm),
                              ("attention", self.attention), ("decoder", self.decoder)):
            for name, arr in layer.params().items():
                out[f"{prefix}.{name}"] = arr
        return out

    def set_params(self, params: nn.Params) -> None:
        for prefix, layer in (("feedback", self.feedback), ("lstm", self.lstm),
                              ("attention", self.attention), ("decoder", self.decoder)):
            layer.set_params({name.split(".", 1)[1]: arr for name, arr in params.items()
                              if name.startswith(prefix + ".")})

    def copy(self) -> "ActorNetwork":
        clone = ActorNetwork(self.d, self.feedback_dim)
        clone.set_params({k: v.copy() for k, v in self.params().items()})
        return clone

    # -- encoding -----------------------------------------------------------

    def encode_feedback(self, g: np.ndarray) -> np.ndarray:
        if g.shape[-1] != self.feedback_dim:
            raise nn.ShapeError(
                f"feedback vector length {g.shape[-1]} != episode length {self.feedback_dim}")
        return self.feedback(g)

    def record_input(self, record: HistoryRecord) -> np.ndarray:
        return np.concatenate([record.u_original, record.u_target,
                               self.encode_feedback(record.feedback)])

    def encode_history(self, records: list[HistoryRecord]) -> np.ndarray:
        """Attention-pooled LSTM encoding; empty history encodes to zeros."""
        if not records:
            return np.zeros(self.hidden)
        h = np.zeros(self.hidden)
        c = np.zeros(self.hidden)
        hs = np.empty((len(records), self.hidden))
        for i, rec in enumerate(records):
            h, c = self.lstm.step(self.record_input(rec), h, c)
            hs[i] = h
        gamma = self.attention.weights(hs)
        return gamma @ hs

    def encode_state(self, s_net: np.ndarray, records: list[HistoryRecord]) -> np.ndarray:
        if s_net.shape != (self.hidden,):
            raise nn.ShapeError(f"network embedding must have shape ({self.hidden},)")
        return self.encode_history(records) + s_net

    # -- decoding -----------------------------------------------------------

    def decode(self, s: np.ndarray, noise_scale: float = 0.0,
               rng: np.random.Generator | None = None) -> np.ndarray:
        """Proto-action in [-1, 1]^2d, plus optional Gaussian exploration."""
        proto = self.decoder(s)
        if noise_scale > 0.0:
            if rng is None:
                raise ValueError("exploration noise requires a generator")
            proto = proto + rng.normal(0.0, noise_scale, size=proto.shape)
        return proto

    # -- batched training path ----------------------------------------------

    def forward_batch(self, histories: list[list[HistoryRecord]], s_net: np.ndarray,
                      window: int | None = None):
        """Noise-free proto-actions for a batch of raw histories.

        Histories longer than `window` are truncated before encoding (the
        acting path never truncates): half the window keeps the most recent
        confirmed matches, since the trained attention concentrates on
        positive-feedback records, and the rest keeps the most recent
        records overall. Returns (protos (B, 2d), cache for backward_batch).
        """
        if window is not None:
            histories = [truncate_history(h, window) for h in histories]
        B = len(histories)
        lengths = np.array([len(h) for h in histories], dtype=np.int64)
        T = int(lengths.max(initial=0))
        d = self.d
        if T == 0:
            s_tilde = np.tile(s_net, (B, 1))
            protos, dec_cache = self.decoder.forward(s_tilde)
            return protos, (None, None, None, dec_cache, lengths, None)
        g_in = np.zeros((B, T, self.feedback_dim))
        uu = np.zeros((B, T, 2 * d))
        for b, hist in enumerate(histories):
            for t, rec in enumerate(hist):
                g_in[b, t] = rec.feedback
                uu[b, t, :d] = rec.u_original
                uu[b, t, d:] = rec.u_target
        g_enc, fb_cache = self.feedback.forward(g_in)
        xs = np.concatenate([uu, g_enc], axis=2)
        hs, lstm_cache = self.lstm.forward_seq(xs, lengths)
        mask = (np.arange(T)[None, :] < lengths[:, None]).astype(np.float64)
        s_pair, _, attn_cache = self.attention.pool(hs, mask)
        s_tilde = s_pair + s_net[None, :]
        protos, dec_cache = self.decoder.forward(s_tilde)
        return protos, (fb_cache, lstm_cache, attn_cache, dec_cache, lengths, mask)

    def backward_batch(self, cache, d_proto: np.ndarray) -> nn.Params:
        """Gradients of sum(d_proto * proto) wrt every actor parameter."""
        fb_cache, lstm_cache, attn_cache, dec_cache, lengths, mask = cache
        dec_grads, d_s_tilde = self.decoder.backward(dec_cache, d_proto)
        grads = {f"decoder.{k}": v for k, v in dec_grads.items()}
        if attn_cache is None:
            zero = {name: np.zeros_like(arr) for name, arr in self.params().items()
                    if not name.startswith("decoder.")}
            grads.update(zero)
            return grads
        attn_grads, dhs = self.attention.pool_backward(attn_cache, d_s_tilde)
        grads.update({f"attention.{k}": v for k, v in attn_grads.items()})
        # identity-embedding inputs are constants; only the feedback slice
        # of the input gradient is consumed
        lstm_grads, dxs = self.lstm.backward_seq(lstm_cache, dhs,
                                                 dx_columns=slice(2 * self.d, 3 * self.d))
        grads.update({f"lstm.{k}": v for k, v in lstm_grads.items()})
        d_g_enc = dxs[:, :, 2 * self.d:]
        fb_grads, _ = self.feedback.backward(fb_cache, d_g_enc)
        grads.update({f"feedback.{k}": v for k, v in fb_grads.items()})
        return grads


def truncate_history(records: list[HistoryRecord], window: int) -> list[HistoryRecord]:
    """Keep at most `window` records: the most recent positive-feedback ones
    (up to half the window) plus the most recent remainder, in step order."""
    if len(records) <= window:
        return records
    positives = [i for i, rec in enumerate(records) if rec.feedback.max() > 0.0]
    keep = set(positives[-(window // 2):] if window // 2 else [])
    for i in range(len(records) - 1, -1, -1):
        if len(keep) >= window:
            break
        keep.add(i)
    return [records[i] for i in sorted(keep)]


class IncrementalEncoder:
    """Streaming version of encode_state for the acting loop.

    Appending a record costs one LSTM step; the attention pool over the
    stored hidden states is recomputed on demand (it is tiny). Produces
    exactly the same state vectors as ActorNetwork.encode_state.
    """

    def __init__(self, actor: ActorNetwork, s_net: np.ndarray):
        self.actor = actor
        self.s_net = s_net
        self.h = np.zeros(actor.hidden)
        self.c = np.zeros(actor.hidden)
        self.hs: list[np.ndarray] = []

    def append(self, record: HistoryRecord) -> None:
        self.h, self.c = self.actor.lstm.step(self.actor.record_input(record),
                                              self.h, self.c)
        self.hs.append(self.h)

    def state(self) -> np.ndarray:
        if not self.hs:
            return self.s_net.copy()
        hs = np.stack(self.hs)
        gamma = self.actor.attention.weights(hs)
        return gamma @ hs + self.s_net


# ---------------------------------------------------------------------------
# projection onto valid identities
# ---------------------------------------------------------------------------

def project_half(proto_half: np.ndarray, norm_rows: np.ndarray,
                 masked: np.ndarray) -> int:
    """Cosine argmax of one proto half over unmasked embedding rows.

    `masked` is boolean, True = excluded. Ties break to the lowest index.
    Raises NoCandidatesError when everything is masked.
    """
    if masked.all():
        raise NoCandidatesError("all identities on one side are masked")
    scores = norm_rows @ proto_half
    scores[masked] = -np.inf
    return int(np.argmax(scores))


def project_action(proto: np.ndarray, m_original: EmbeddingMatrix,
                   m_target: EmbeddingMatrix, masked_original: np.ndarray,
                   masked_target: np.ndarray) -> Action:
    """Map a 2d proto-action onto the closest valid identity pair.

    Each half is projected independently by cosine similarity against the
    precomputed normalized rows of its own side.
    """
    d = m_original.dim
    if proto.shape != (2 * d,):
        raise nn.ShapeError(f"proto-action must have shape ({2 * d},)")
    v_o = project_half(proto[:d], m_original.norm_rows, masked_original)
    v_t = project_half(proto[d:], m_target.norm_rows, masked_target)
    return Action(v_o, v_t, m_original.rows[v_o].copy(), m_target.rows[v_t].copy())
