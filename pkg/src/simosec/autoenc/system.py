"""The end-to-end wiretap autoencoder: encoder, two decoders, forward/backward.

Message -> one-hot -> encoder MLP -> complex symbol -> power normalisation
-> (optional) RF impairment chain -> two independent SIMO links -> decoder
MLPs fed with [Re y, Im y, Re h, Im h] -> softmax.

Channels, receiver noise and oscillator realizations are sampled in the
forward pass and stored in the cache; the backward pass treats them as
constants.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..channel import ChannelConfig, complex_normal, gen_channel, snr_to_sigma2
from ..impair import ChainNoise, ImpairmentConfig, apply_chain, draw_chain_noise
from .losses import (
    loss_e,
    loss_e_grad_logits,
    loss_r,
    loss_r_grad_logits,
    loss_total,
    softmax,
)
from .net import Mlp, layer_specs

ENCODER_HIDDEN = (64, 64)
DECODER_HIDDEN = (128, 128)
POWER_FLOOR = 1e-12


@dataclass
class NetParams:
    """Encoder and decoder weights.

    ``eve_br`` optionally holds a best-response eavesdropper decoder trained
    afterwards against the frozen encoder. ``power_scale`` is the frozen
    normalisation constant used outside training.
    """

    encoder: Mlp
    legit: Mlp
    eve: Mlp
    power_limit: float = 1.0
    power_scale: float | None = None
    eve_br: Mlp | None = None

    @classmethod
    def init(cls, n_messages: int, n_rx: int, rng: np.random.Generator, power_limit: float = 1.0) -> "NetParams":
        enc = Mlp(layer_specs((n_messages, *ENCODER_HIDDEN, 2)), rng)
        dec_sizes = (4 * n_rx, *DECODER_HIDDEN, n_messages)
        return cls(
            encoder=enc,
            legit=Mlp(layer_specs(dec_sizes), rng),
            eve=Mlp(layer_specs(dec_sizes), rng),
            power_limit=power_limit,
        )

    @property
    def n_messages(self) -> int:
        return self.encoder.n_in

    @property
    def n_rx(self) -> int:
        return self.legit.n_in // 4

    def networks(self) -> dict[str, Mlp]:
        nets = {"encoder": self.encoder, "legit": self.legit, "eve": self.eve}
        if self.eve_br is not None:
            nets["eve_br"] = self.eve_br
        return nets

    def zero_grad(self):
        for net in self.networks().values():
            net.zero_grad()

    def calibrate_power(self) -> float:
        """Freeze the normalisation so the uniform message mix has power P_T.

        The encoder is deterministic per message, so averaging over all M
        messages gives the expectation exactly.
        """
        z = self._raw_symbols(np.arange(self.n_messages))
        self.power_scale = float(np.sqrt(self.power_limit / max(np.mean(np.abs(z) ** 2), POWER_FLOOR)))
        return self.power_scale

    def _raw_symbols(self, messages):
        out = self.encoder(one_hot(messages, self.n_messages))
        return out[:, 0] + 1j * out[:, 1]

    def constellation(self) -> np.ndarray:
        """Evaluation-mode encoder output for every message."""
        return encode(np.arange(self.n_messages), self)


def one_hot(messages, m: int) -> np.ndarray:
    messages = np.asarray(messages, dtype=np.int64)
    if np.any((messages < 0) | (messages >= m)):
        raise ValueError("message index out of range")
    out = np.zeros((messages.size, m))
    out[np.arange(messages.size), messages] = 1.0
    return out


def decoder_input(y, h) -> np.ndarray:
    y = np.atleast_2d(y)
    h = np.atleast_2d(h)
    if y.shape != h.shape:
        raise ValueError(f"y and h shapes differ: {y.shape} vs {h.shape}")
    return np.concatenate([y.real, y.imag, h.real, h.imag], axis=-1)


def encode(messages, params: NetParams, batch_norm: bool = False) -> np.ndarray:
    """Complex symbols for ``messages``.

    With ``batch_norm`` the batch itself is scaled to mean power P_T (the
    training behaviour); otherwise the frozen constant is used.
    """
    scalar = np.ndim(messages) == 0
    z = params._raw_symbols(np.atleast_1d(messages))
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("encoder produced non-finite activations")
    if batch_norm:
        k = np.sqrt(params.power_limit / max(np.mean(np.abs(z) ** 2), POWER_FLOOR))
    else:
        k = params.power_scale if params.power_scale is not None else params.calibrate_power()
    x = k * z
    return x[0] if scalar else x


def decode(y, h, net: Mlp) -> np.ndarray:
    """Softmax probabilities over messages, one row per observation."""
    x = decoder_input(y, h)
    if x.shape[-1] != net.n_in:
        raise ValueError(f"decoder expects {net.n_in // 4} antennas, got {x.shape[-1] // 4}")
    return softmax(net(x))


@dataclass
class LinkDraw:
    """Per-sample randomness for one batch, frozen for backprop."""

    h_r: np.ndarray
    h_e: np.ndarray
    noise_r: np.ndarray
    noise_e: np.ndarray
    sigma2: np.ndarray
    chain: ChainNoise | None = None

    def take(self, idx) -> "LinkDraw":
        chain = None
        if self.chain is not None:
            chain = ChainNoise(self.chain.mixer_phase[idx], self.chain.vco_phase[idx])
        return LinkDraw(self.h_r[idx], self.h_e[idx], self.noise_r[idx], self.noise_e[idx], self.sigma2[idx], chain)


def draw_links(batch: int, ch: ChannelConfig, rng: np.random.Generator, snr_db, imp: ImpairmentConfig | None) -> LinkDraw:
    """Sample channels, SNRs and noise for ``batch`` symbols.

    ``snr_db`` is either a scalar or a ``(low, high)`` range drawn uniformly
    per sample. Draw order is fixed so results replay from a seed.
    """
    h_r = gen_channel(ch, rng, batch).h
    h_e = gen_channel(ch, rng, batch).h
    if np.ndim(snr_db) == 0:
        snr = np.full(batch, float(snr_db))
    else:
        lo, hi = snr_db
        snr = rng.uniform(lo, hi, batch)
    sigma2 = snr_to_sigma2(snr)
    noise_r = complex_normal(rng, (batch, ch.n_rx), sigma2[:, None])
    noise_e = complex_normal(rng, (batch, ch.n_rx), sigma2[:, None])
    chain = draw_chain_noise(batch, imp, rng) if imp is not None and imp.active else None
    return LinkDraw(h_r, h_e, noise_r, noise_e, sigma2, chain)


@dataclass
class ForwardCache:
    messages: np.ndarray
    links: LinkDraw
    enc_cache: list
    z: np.ndarray
    k: float
    clamped: bool
    x: np.ndarray
    tx: np.ndarray
    jac: np.ndarray | None
    y_r: np.ndarray
    y_e: np.ndarray
    cache_r: list
    cache_e: list
    probs_r: np.ndarray
    probs_e: np.ndarray
    eve_net: str = "eve"
    extra: dict = field(default_factory=dict)


def forward_batch(messages, params: NetParams, imp: ImpairmentConfig | None, ch: ChannelConfig,
                  rng: np.random.Generator | None = None, snr_db=(0.0, 18.0), *, links: LinkDraw | None = None,
                  batch_norm: bool = True, eve_net: str = "eve"):
    """Run a batch through the whole system.

    Returns ``(legit_probs, eve_probs, cache)``. Pass ``links`` to replay a
    previous draw exactly (finite-difference checks do this).
    """
    messages = np.asarray(messages, dtype=np.int64)
    b = messages.size
    if links is None:
        links = draw_links(b, ch, rng, snr_db, imp)
    enc = params.encoder
    zr, enc_cache = enc.forward(one_hot(messages, params.n_messages))
    z = zr[:, 0] + 1j * zr[:, 1]
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("encoder produced non-finite activations")
    if batch_norm:
        m = float(np.mean(np.abs(z) ** 2))
        clamped = m <= POWER_FLOOR
        k = float(np.sqrt(params.power_limit / max(m, POWER_FLOOR)))
    else:
        clamped = True  # frozen constant: no gradient through k
        k = params.power_scale if params.power_scale is not None else params.calibrate_power()
    x = k * z
    jac = None
    if links.chain is not None:
        tx, jac = apply_chain(x, imp, links.chain, jacobian=True)
    else:
        tx = x
    y_r = links.h_r * tx[:, None] + links.noise_r
    y_e = links.h_e * tx[:, None] + links.noise_e
    dec_e = getattr(params, eve_net)
    logits_r, cache_r = params.legit.forward(decoder_input(y_r, links.h_r))
    logits_e, cache_e = dec_e.forward(decoder_input(y_e, links.h_e))
    probs_r = softmax(logits_r)
    probs_e = softmax(logits_e)
    cache = ForwardCache(messages, links, enc_cache, z, k, clamped, x, tx, jac, y_r, y_e,
                         cache_r, cache_e, probs_r, probs_e, eve_net)
    return probs_r, probs_e, cache


def batch_losses(cache: ForwardCache, alpha: float) -> tuple[float, float, float]:
    lr = loss_r(cache.probs_r, cache.messages)
    le = loss_e(cache.probs_e)
    return lr, le, loss_total(lr, le, alpha)


def _signal_grad(d_input: np.ndarray, n_rx: int) -> np.ndarray:
    """Complex gradient w.r.t. y from the gradient w.r.t. the decoder input."""
    return d_input[:, :n_rx] + 1j * d_input[:, n_rx:2 * n_rx]


def backward_batch(cache: ForwardCache, params: NetParams, alpha: float, *, train_encoder: bool = True,
                   legit_weight: float | None = None, eve_objective: str = "entropy") -> None:
    """Accumulate d L_total / d params into every network's ``grads``.

    ``eve_objective="crossentropy"`` swaps the eavesdropper term for its own
    cross-entropy, which is how a best-response eavesdropper is trained.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    n_rx = params.n_rx
    w_r = alpha if legit_weight is None else legit_weight
    d_r = w_r * loss_r_grad_logits(cache.probs_r, cache.messages)
    if eve_objective == "entropy":
        d_e = (1.0 - alpha) * loss_e_grad_logits(cache.probs_e)
    elif eve_objective == "crossentropy":
        d_e = loss_r_grad_logits(cache.probs_e, cache.messages)
    else:
        raise ValueError(f"unknown eve objective {eve_objective!r}")
    dec_e = getattr(params, cache.eve_net)
    din_r = params.legit.backward(cache.cache_r, d_r)
    din_e = dec_e.backward(cache.cache_e, d_e)
    if not train_encoder:
        return
    links = cache.links
    g_tx = np.sum(np.conj(links.h_r) * _signal_grad(din_r, n_rx), axis=1)
    g_tx += np.sum(np.conj(links.h_e) * _signal_grad(din_e, n_rx), axis=1)
    if cache.jac is not None:
        g2 = np.stack([g_tx.real, g_tx.imag], -1)
        g2 = np.einsum("nij,ni->nj", cache.jac, g2)
        g_x = g2[:, 0] + 1j * g2[:, 1]
    else:
        g_x = g_tx
    k, z = cache.k, cache.z
    if cache.clamped:
        g_z = k * g_x
    else:
        # x = k z with k = sqrt(P / mean|z|^2)
        m = np.mean(np.abs(z) ** 2)
        proj = np.sum(g_x.real * z.real + g_x.imag * z.imag)
        g_z = k * (g_x - z * proj / (z.size * m))
    g = np.stack([g_z.real, g_z.imag], -1)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite gradient reached the encoder")
    params.encoder.backward(cache.enc_cache, g)
