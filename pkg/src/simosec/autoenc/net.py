"""Small dense networks with hand-written backprop, plus an Adam optimizer."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "identity")


@dataclass(frozen=True)
class LayerSpec:
    fan_in: int
    fan_out: int
    activation: str = "relu"

    def __post_init__(self):
        if self.fan_in < 1 or self.fan_out < 1:
            raise ValueError("layer dimensions must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


def layer_specs(sizes, final: str = "identity") -> list[LayerSpec]:
    n = len(sizes) - 1
    return [LayerSpec(sizes[i], sizes[i + 1], "relu" if i < n - 1 else final) for i in range(n)]


class Mlp:
    """Fully connected network acting on row-batched inputs ``(batch, fan_in)``.

    Gradients accumulate into ``grads`` (same layout as ``params``:
    ``[W0, b0, W1, b1, ...]``) until :meth:`zero_grad` is called.
    """

    def __init__(self, specs: list[LayerSpec], rng: np.random.Generator | None = None, params=None):
        self.specs = list(specs)
        if params is None:
            if rng is None:
                raise ValueError("need an rng to initialise weights")
            params = []
            for s in self.specs:
                # Glorot uniform: an untrained decoder starts out nearly uninformative
                lim = np.sqrt(6.0 / (s.fan_in + s.fan_out))
                params.append(rng.uniform(-lim, lim, (s.fan_in, s.fan_out)))
                params.append(np.zeros(s.fan_out))
        self.params = [np.array(p, dtype=np.float64) for p in params]
        for s, w, b in zip(self.specs, self.params[::2], self.params[1::2]):
            if w.shape != (s.fan_in, s.fan_out) or b.shape != (s.fan_out,):
                raise ValueError("parameter shapes do not match layer specs")
        self.grads = [np.zeros_like(p) for p in self.params]

    @property
    def n_in(self) -> int:
        return self.specs[0].fan_in

    @property
    def n_out(self) -> int:
        return self.specs[-1].fan_out

    def zero_grad(self):
        for g in self.grads:
            g.fill(0.0)

    def copy(self) -> "Mlp":
        return Mlp(self.specs, params=[p.copy() for p in self.params])

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_in:
            raise ValueError(f"expected {self.n_in} input features, got {x.shape[-1]}")
        cache = []
        a = x
        for s, w, b in zip(self.specs, self.params[::2], self.params[1::2]):
            z = a @ w + b
            cache.append((a, z))
            a = np.maximum(z, 0.0) if s.activation == "relu" else z
        return a, cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, dout):
        """Accumulate parameter gradients for upstream ``dout`` and return
        the gradient with respect to the network input."""
        d = dout
        for i in range(len(self.specs) - 1, -1, -1):
            a, z = cache[i]
            if self.specs[i].activation == "relu":
                d = d * (z > 0)
            self.grads[2 * i] += a.T @ d
            self.grads[2 * i + 1] += d.sum(axis=0)
            d = d @ self.params[2 * i].T
        return d


class Adam:
    def __init__(self, params, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
