"""Central finite-difference check of :func:`backward_batch`."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .system import NetParams, backward_batch, batch_losses, forward_batch


@dataclass(frozen=True)
class GradSample:
    network: str
    tensor: int
    index: tuple
    numeric: float
    analytic: float
    kink: bool = False

    @property
    def rel_error(self) -> float:
        scale = max(abs(self.numeric), abs(self.analytic), 1e-8)
        return abs(self.numeric - self.analytic) / scale


def gradient_check(params: NetParams, messages, imp, ch, rng: np.random.Generator, *, alpha: float = 0.5,
                   n_params: int = 50, eps: float = 1e-5, snr_db=(0.0, 18.0)) -> list[GradSample]:
    """Compare analytic and numeric gradients on ``n_params`` random weights.

    Channels, noise and oscillator draws are frozen after the first forward
    pass so both sides see the same realisation. Picks cycle over every
    weight and bias tensor of every network. A central difference whose
    two probes put some ReLU in different states straddles a kink and says
    nothing about the derivative; such picks are returned flagged ``kink``
    and replaced by a fresh pick, so the result holds ``n_params`` valid
    samples plus the flagged ones.
    """
    _, _, cache = forward_batch(messages, params, imp, ch, rng, snr_db)
    links = cache.links

    def total():
        c = forward_batch(messages, params, imp, ch, links=links)[2]
        nets = (params.encoder, params.legit, getattr(params, c.eve_net))
        masks = [z > 0 for net, cc in zip(nets, (c.enc_cache, c.cache_r, c.cache_e))
                 for spec, (_, z) in zip(net.specs, cc) if spec.activation == "relu"]
        return batch_losses(c, alpha)[2], masks

    params.zero_grad()
    backward_batch(cache, params, alpha)
    tensors = [(name, i, p, g) for name, net in params.networks().items()
               for i, (p, g) in enumerate(zip(net.params, net.grads))]
    out = []
    valid = j = 0
    while valid < n_params:
        name, i, p, g = tensors[j % len(tensors)]
        j += 1
        idx = tuple(int(rng.integers(0, s)) for s in p.shape)
        old = p[idx]
        p[idx] = old + eps
        lp, mp = total()
        p[idx] = old - eps
        lm, mm = total()
        p[idx] = old
        kink = any(np.any(a != b) for a, b in zip(mp, mm))
        out.append(GradSample(name, i, idx, (lp - lm) / (2 * eps), float(g[idx]), kink))
        valid += not kink
    return out
