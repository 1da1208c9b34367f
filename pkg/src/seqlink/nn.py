"""Minimal differentiable building blocks on float64 numpy arrays.

Everything here is hand-rolled and exact: dense layers, an LSTM cell with
batched masked backpropagation through time, a location-based attention
pool, plain SGD with global-norm clipping, a central-difference gradient
checker, and a deterministic checkpoint format. Parameters live in flat
``dict[str, ndarray]`` blocks so optimizers, soft updates, and checkpoints
can treat every network uniformly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

Params = dict[str, np.ndarray]


class ShapeError(ValueError):
    """Input shape incompatible with a layer's parameters."""


class TrainingError(RuntimeError):
    """Non-finite values encountered while updating parameters."""


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

def sigmoid(z):
    # tanh form: overflow-free and branch-free
    return 0.5 * (np.tanh(0.5 * z) + 1.0)


def _act_forward(name: str, z):
    if name == "identity":
        return z
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return sigmoid(z)
    raise ValueError(f"unknown activation {name!r}")


def _act_backward(name: str, z, y, grad_y):
    if name == "identity":
        return grad_y
    if name == "tanh":
        return grad_y * (1.0 - y * y)
    if name == "relu":
        return grad_y * (z > 0.0)
    if name == "sigmoid":
        return grad_y * y * (1.0 - y)
    raise ValueError(f"unknown activation {name!r}")


def xavier_uniform(rng: np.random.Generator, shape: tuple[int, int], fan_in: int, fan_out: int):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# dense layer
# ---------------------------------------------------------------------------

class Dense:
    """Affine map y = act(x @ W.T + b) with W of shape (out, in)."""

    def __init__(self, in_dim: int, out_dim: int, activation: str = "identity",
                 rng: np.random.Generator | None = None):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        if rng is None:
            self.W = np.zeros((out_dim, in_dim))
        else:
            self.W = xavier_uniform(rng, (out_dim, in_dim), in_dim, out_dim)
        self.b = np.zeros(out_dim)

    def forward(self, x: np.ndarray):
        """x: (..., in_dim). Returns (y, cache)."""
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"dense expects input dim {self.in_dim}, got {x.shape[-1]}")
        z = x @ self.W.T + self.b
        y = _act_forward(self.activation, z)
        return y, (x, z, y)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, grad_y: np.ndarray):
        """Returns ({'W','b'} gradients, grad wrt x). Exact for any leading shape."""
        x, z, y = cache
        dz = _act_backward(self.activation, z, y, grad_y)
        dz2 = dz.reshape(-1, self.out_dim)
        x2 = x.reshape(-1, self.in_dim)
        grads = {"W": dz2.T @ x2, "b": dz2.sum(axis=0)}
        grad_x = (dz2 @ self.W).reshape(x.shape)
        return grads, grad_x

    def params(self) -> Params:
        return {"W": self.W, "b": self.b}

    def set_params(self, p: Params) -> None:
        self.W = p["W"]
        self.b = p["b"]


# ---------------------------------------------------------------------------
# LSTM cell
# ---------------------------------------------------------------------------

class LSTMCell:
    """Standard LSTM with stacked gate weights W: (4H, in+H), order [i, f, o, g].

    Sigmoid input/forget/output gates, tanh candidate and state squash.
    The forget-gate bias slice starts at 1.0.
    """

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator | None = None):
        self.in_dim = in_dim
        self.hidden = hidden
        if rng is None:
            self.W = np.zeros((4 * hidden, in_dim + hidden))
        else:
            blocks = [xavier_uniform(rng, (hidden, in_dim + hidden), in_dim + hidden, hidden)
                      for _ in range(4)]
            self.W = np.concatenate(blocks, axis=0)
        self.b = np.zeros(4 * hidden)
        self.b[hidden:2 * hidden] = 1.0

    def params(self) -> Params:
        return {"W": self.W, "b": self.b}

    def set_params(self, p: Params) -> None:
        self.W = p["W"]
        self.b = p["b"]

    def _split_weights(self):
        return self.W[:, : self.in_dim], self.W[:, self.in_dim:]

    @staticmethod
    def _nonlin(pre, H):
        i = sigmoid(pre[..., 0:H])
        f = sigmoid(pre[..., H:2 * H])
        o = sigmoid(pre[..., 2 * H:3 * H])
        g = np.tanh(pre[..., 3 * H:4 * H])
        return i, f, o, g

    def step(self, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray):
        """Single step. x: (..., in_dim); h_prev, c_prev: (..., hidden)."""
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"lstm expects input dim {self.in_dim}, got {x.shape[-1]}")
        if h_prev.shape[-1] != self.hidden or c_prev.shape[-1] != self.hidden:
            raise ShapeError("lstm state dim mismatch")
        Wx, Wh = self._split_weights()
        pre = x @ Wx.T + h_prev @ Wh.T + self.b
        i, f, o, g = self._nonlin(pre, self.hidden)
        c = f * c_prev + i * g
        h = o * np.tanh(c)
        return h, c

    def forward_seq(self, xs: np.ndarray, lengths: np.ndarray):
        """Masked batched forward. xs: (B, T, in_dim); lengths: (B,).

        Positions t >= lengths[b] are padding: the state is carried through
        unchanged. The input-side gate products for every position are one
        large matmul; the loop only adds the recurrent part.
        Returns (hs (B, T, hidden), cache for backward_seq).
        """
        B, T, Din = xs.shape
        H = self.hidden
        Wx, Wh = self._split_weights()
        pre_x = (xs.reshape(B * T, Din) @ Wx.T + self.b).reshape(B, T, 4 * H)
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        hs = np.zeros((B, T, H))
        h_prevs = np.zeros((B, T, H))
        steps = []
        for t in range(T):
            m = (t < lengths).astype(np.float64)[:, None]
            h_prevs[:, t, :] = h
            pre = pre_x[:, t, :] + h @ Wh.T
            i, f, o, g = self._nonlin(pre, H)
            c_hat = f * c + i * g
            tanh_c = np.tanh(c_hat)
            steps.append((i, f, o, g, c, tanh_c, m))
            h = m * (o * tanh_c) + (1.0 - m) * h
            c = m * c_hat + (1.0 - m) * c
            hs[:, t, :] = h
        return hs, (steps, xs, h_prevs)

    def backward_seq(self, cache, dhs: np.ndarray, dx_columns: slice | None = None):
        """BPTT through forward_seq. dhs: per-position gradients on hs.

        Returns ({'W','b'} gradients, gradient wrt xs). Padding positions
        receive zero input gradient by construction. Weight gradients are
        accumulated as two large matmuls after the time loop. When only a
        column slice of the input gradient is needed, dx_columns restricts
        that matmul (the returned array still has full input width, with
        zeros outside the slice).
        """
        steps, xs, h_prevs = cache
        B, T, Din = xs.shape
        H = self.hidden
        Wx, Wh = self._split_weights()
        dpre_all = np.zeros((B, T, 4 * H))
        dh = np.zeros((B, H))
        dc = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            i, f, o, g, c_prev, tanh_c, m = steps[t]
            dh_total = dhs[:, t, :] + dh
            dh_hat = m * dh_total
            do = dh_hat * tanh_c
            dc_hat = dh_hat * o * (1.0 - tanh_c * tanh_c) + m * dc
            dpre = dpre_all[:, t, :]
            dpre[:, 0:H] = (dc_hat * g) * i * (1.0 - i)
            dpre[:, H:2 * H] = (dc_hat * c_prev) * f * (1.0 - f)
            dpre[:, 2 * H:3 * H] = do * o * (1.0 - o)
            dpre[:, 3 * H:4 * H] = (dc_hat * i) * (1.0 - g * g)
            dh = (1.0 - m) * dh_total + dpre @ Wh
            dc = (1.0 - m) * dc + dc_hat * f
        dpre_flat = dpre_all.reshape(B * T, 4 * H)
        dW = np.concatenate([dpre_flat.T @ xs.reshape(B * T, Din),
                             dpre_flat.T @ h_prevs.reshape(B * T, H)], axis=1)
        db = dpre_flat.sum(axis=0)
        if dx_columns is None:
            dxs = (dpre_flat @ Wx).reshape(B, T, Din)
        else:
            dxs = np.zeros((B, T, Din))
            dxs[:, :, dx_columns] = (dpre_flat @ Wx[:, dx_columns]).reshape(B, T, -1)
        return {"W": dW, "b": db}, dxs


# ---------------------------------------------------------------------------
# location-based attention
# ---------------------------------------------------------------------------

class AttentionScorer:
    """Scores hidden states with w.h + b and normalizes with a stable softmax.

    The bias b lives in a length-1 array so optimizers and soft updates can
    write through the params() view.
    """

    def __init__(self, hidden: int, rng: np.random.Generator | None = None):
        self.hidden = hidden
        if rng is None:
            self.w = np.zeros(hidden)
        else:
            self.w = xavier_uniform(rng, (hidden,), hidden, 1)
        self.b = np.zeros(1)

    def params(self) -> Params:
        return {"w": self.w, "b": self.b}

    def set_params(self, p: Params) -> None:
        self.w = p["w"]
        self.b = p["b"]

    def weights(self, hs: np.ndarray) -> np.ndarray:
        """Attention weights for one sequence hs: (T, hidden), T >= 1."""
        if hs.ndim != 2 or hs.shape[0] == 0:
            raise ShapeError("attention needs a non-empty (T, hidden) sequence")
        logits = hs @ self.w + self.b[0]
        logits -= logits.max()
        e = np.exp(logits)
        return e / e.sum()

    def pool(self, hs: np.ndarray, mask: np.ndarray):
        """Weighted sum over valid positions. hs: (B, T, H); mask: (B, T) in {0,1}.

        Rows with no valid position pool to the zero vector. Returns
        (pooled (B, H), gammas (B, T), cache).
        """
        logits = hs @ self.w + self.b[0]
        neg = np.full_like(logits, -np.inf)
        masked = np.where(mask > 0, logits, neg)
        row_max = masked.max(axis=1, keepdims=True)
        any_valid = mask.any(axis=1)
        row_max = np.where(any_valid[:, None], row_max, 0.0)
        e = np.where(mask > 0, np.exp(masked - row_max), 0.0)
        denom = e.sum(axis=1, keepdims=True)
        gamma = np.divide(e, denom, out=np.zeros_like(e), where=denom > 0)
        pooled = np.einsum("bt,bth->bh", gamma, hs)
        return pooled, gamma, (hs, gamma)

    def pool_backward(self, cache, d_pooled: np.ndarray):
        """Returns ({'w','b'} gradients, gradient wrt hs)."""
        hs, gamma = cache
        dgamma = np.einsum("bh,bth->bt", d_pooled, hs)
        dhs = gamma[:, :, None] * d_pooled[:, None, :]
        # softmax backward per row; all-padding rows have gamma == 0 everywhere
        inner = (gamma * dgamma).sum(axis=1, keepdims=True)
        dlogits = gamma * (dgamma - inner)
        dw = np.einsum("bt,bth->h", dlogits, hs)
        db = dlogits.sum()
        dhs += dlogits[:, :, None] * self.w[None, None, :]
        return {"w": dw, "b": np.array([db])}, dhs


# ---------------------------------------------------------------------------
# SGD
# ---------------------------------------------------------------------------

@dataclass
class SGDConfig:
    learning_rate: float = 0.001
    clip_norm: float | None = 5.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def _squared_sum(arr: np.ndarray) -> float:
    flat = arr.ravel()
    return float(flat @ flat)


def global_norm(grads: Params) -> float:
    return float(np.sqrt(sum(_squared_sum(g) for g in grads.values())))


def sgd_update(params: Params, grads: Params, cfg: SGDConfig) -> None:
    """In-place p <- p - lr * g, after optional global-norm clipping.

    A non-finite squared sum flags any NaN/Inf entry, so gradient and
    post-update parameter blocks are verified in one BLAS pass each.
    """
    total = 0.0
    for name, g in grads.items():
        if params[name].shape != g.shape:
            raise ShapeError(f"gradient shape mismatch for block {name!r}")
        sq = _squared_sum(g)
        if not np.isfinite(sq):
            raise TrainingError(f"non-finite gradient in block {name!r}")
        total += sq
    scale = 1.0
    if cfg.clip_norm is not None:
        gn = np.sqrt(total)
        if gn > cfg.clip_norm:
            scale = cfg.clip_norm / gn
    for name, g in grads.items():
        p = params[name]
        p -= cfg.learning_rate * scale * g
        if not np.isfinite(_squared_sum(p)):
            raise TrainingError(f"non-finite parameter in block {name!r} after update")


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

def grad_check(func, params: Params, eps: float = 1e-5) -> float:
    """Compare func's reported gradients against central differences.

    func(params) must return (scalar value, {name: gradient}) and be
    deterministic. Every parameter entry is perturbed by +/- eps. Returns
    the worst blockwise error max|analytic - fd| / max(|analytic|_inf,
    |fd|_inf); blocks whose gradients sit at machine-noise scale on both
    routes are compared absolutely instead.
    """
    _, analytic = func(params)
    worst = 0.0
    for name, p in params.items():
        fd = np.zeros_like(p)
        flat_fd = fd.ravel()
        for k in range(p.size):
            orig = p.flat[k]
            p.flat[k] = orig + eps
            f_plus, _ = func(params)
            p.flat[k] = orig - eps
            f_minus, _ = func(params)
            p.flat[k] = orig
            flat_fd[k] = (f_plus - f_minus) / (2.0 * eps)
        a = analytic[name]
        scale = max(np.abs(a).max(initial=0.0), np.abs(fd).max(initial=0.0))
        diff = float(np.abs(a - fd).max(initial=0.0))
        worst = max(worst, diff / scale if scale > 1e-8 else diff)
    return worst


# ---------------------------------------------------------------------------
# checkpoint format
# ---------------------------------------------------------------------------
#
# Layout (all bytes deterministic for a given parameter dict):
#   line 1: b"SLNC1\n"                         magic + format version
#   line 2: canonical JSON manifest + b"\n"    {"blocks": [{"name", "shape"}...],
#                                               "meta": {...}, "version": 1}
#   then:   raw little-endian float64 data, C order, blocks concatenated in
#           manifest order.

_CKPT_MAGIC = b"SLNC1\n"


class CheckpointError(ValueError):
    """Corrupt or incompatible checkpoint file."""


def save_checkpoint(params: Params, path, meta: dict | None = None) -> None:
    names = sorted(params)
    manifest = {
        "version": 1,
        "blocks": [{"name": n, "shape": list(params[n].shape)} for n in names],
        "meta": meta or {},
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(blob)
        fh.write(b"\n")
        for n in names:
            fh.write(np.ascontiguousarray(params[n], dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[Params, dict]:
    with open(path, "rb") as fh:
        magic = fh.read(len(_CKPT_MAGIC))
        if magic != _CKPT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
        manifest = json.loads(fh.readline().decode("utf-8"))
        if manifest.get("version") != 1:
            raise CheckpointError(f"{path}: unsupported checkpoint version")
        params: Params = {}
        for block in manifest["blocks"]:
            shape = tuple(block["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise CheckpointError(f"{path}: truncated block {block['name']!r}")
            params[block["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        if fh.read(1):
            raise CheckpointError(f"{path}: trailing bytes after last block")
    return params, manifest.get("meta", {})
