"""Q-value network scoring (state embedding, action-pair embedding) inputs."""

from __future__ import annotations

import numpy as np

from . import nn


class CriticNetwork:
    """Four relu hidden layers in a funnel, scalar head.

    Input is the 2d state embedding concatenated with the 2d action
    embedding. Hidden widths default to (512, 256, 128, 64), matching the
    4d = 512 input of d = 128 embeddings.
    """

    def __init__(self, d: int, widths: tuple[int, ...] = (512, 256, 128, 64),
                 rng: np.random.Generator | None = None):
        if len(widths) != 4:
            raise ValueError("critic uses exactly 4 hidden layers")
        self.d = d
        self.widths = tuple(widths)
        dims = [4 * d, *widths]
        self.hidden_layers = [nn.Dense(dims[i], dims[i + 1], activation="relu", rng=rng)
                              for i in range(4)]
        self.head = nn.Dense(widths[-1], 1, activation="identity", rng=rng)

    def params(self) -> nn.Params:
        out: nn.Params = {}
        for i, layer in enumerate(self.hidden_layers):
            for name, arr in layer.params().items():
                out[f"hidden{i}.{name}"] = arr
        for name, arr in self.head.params().items():
            out[f"head.{name}"] = arr
        return out

    def set_params(self, params: nn.Params) -> None:
        for i, layer in enumerate(self.hidden_layers):
            layer.set_params({n.split(".", 1)[1]: a for n, a in params.items()
                              if n.startswith(f"hidden{i}.")})
        self.head.set_params({n.split(".", 1)[1]: a for n, a in params.items()
                              if n.startswith("head.")})

    def copy(self) -> "CriticNetwork":
        clone = CriticNetwork(self.d, self.widths)
        clone.set_params({k: v.copy() for k, v in self.params().items()})
        return clone

    # -- forward / backward ---------------------------------------------------

    def forward(self, s: np.ndarray, a: np.ndarray):
        """Batched Q-values. s, a: (B, 2d). Returns (q (B,), cache)."""
        if s.ndim != 2 or a.ndim != 2 or s.shape[1] != 2 * self.d or a.shape[1] != 2 * self.d:
            raise nn.ShapeError(f"critic expects (B, {2 * self.d}) state and action")
        x = np.concatenate([s, a], axis=1)
        caches = []
        for layer in self.hidden_layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        q, head_cache = self.head.forward(x)
        caches.append(head_cache)
        return q[:, 0], caches

    def q_value(self, s: np.ndarray, a: np.ndarray) -> float:
        q, _ = self.forward(s[None, :], a[None, :])
        return float(q[0])

    def backward(self, caches, dq: np.ndarray):
        """Gradients for sum(dq * q). Returns (param grads, (ds, da))."""
        grad = dq[:, None]
        head_grads, grad = self.head.backward(caches[-1], grad)
        grads = {f"head.{k}": v for k, v in head_grads.items()}
        for i in range(3, -1, -1):
            layer_grads, grad = self.hidden_layers[i].backward(caches[i], grad)
            grads.update({f"hidden{i}.{k}": v for k, v in layer_grads.items()})
        return grads, (grad[:, :2 * self.d], grad[:, 2 * self.d:])

    def q_gradient_wrt_action(self, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Exact dQ/da at a single (s, a) pair."""
        _, caches = self.forward(s[None, :], a[None, :])
        _, (_, da) = self.backward(caches, np.ones(1))
        return da[0]
