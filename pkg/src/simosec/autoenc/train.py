"""Training loops for the joint wiretap objective and the best-response
eavesdropper, plus Monte Carlo BER evaluation of trained decoders."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..channel import ChannelConfig
from ..impair import ImpairmentConfig, apply_chain
from ..modem import bit_errors
from .losses import hard_decision, loss_r
from .net import Adam
from .system import NetParams, backward_batch, batch_losses, decode, draw_links, encode, forward_batch

log = logging.getLogger(__name__)


# fresh: new channel/noise/SNR/oscillator draws every epoch; fixed: one draw per
# training sample, reused every epoch
LINK_MODES = ("fresh", "fixed")


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.5
    batch_size: int = 256
    epochs: int = 100
    lr0: float = 3e-4
    lr_decay: float = 0.65
    plateau_patience: int = 3
    snr_train_range_db: tuple = (0.0, 18.0)
    power_limit: float = 1.0
    n_messages: int = 16
    val_snr_db: float = 18.0
    val_size: int = 4096
    seed: int = 0
    link_mode: str = "fixed"

    def __post_init__(self):
        object.__setattr__(self, "snr_train_range_db", tuple(float(v) for v in self.snr_train_range_db))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        for name in ("batch_size", "epochs", "lr0", "lr_decay", "power_limit", "val_size", "plateau_patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.link_mode not in LINK_MODES:
            raise ValueError(f"link_mode must be one of {LINK_MODES}")
        lo, hi = self.snr_train_range_db
        if hi < lo:
            raise ValueError("snr_train_range_db must be (low, high)")


@dataclass
class History:
    loss_total: list = field(default_factory=list)
    loss_r: list = field(default_factory=list)
    loss_e: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    val_ber_legit: list = field(default_factory=list)
    val_ber_eve: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {k: list(v) for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class BerCount:
    bit_errors: int
    bits: int
    symbol_errors: int
    symbols: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits

    @property
    def ser(self) -> float:
        return self.symbol_errors / self.symbols


def _bits_per_message(m: int) -> int:
    return int(np.log2(m))


def evaluate(params: NetParams, messages, snr_db: float, imp: ImpairmentConfig | None, ch: ChannelConfig,
             rng: np.random.Generator, decoders=("legit", "eve"), chunk: int = 4096) -> dict[str, BerCount]:
    """Hard-decision error counts for each named decoder at one SNR.

    The encoder runs in evaluation mode (frozen power constant). Every
    decoder sees the same transmitted symbols and link realizations.
    """
    messages = np.asarray(messages, dtype=np.int64)
    k = _bits_per_message(params.n_messages)
    counts = {d: [0, 0] for d in decoders}
    for lo in range(0, messages.size, chunk):
        msg = messages[lo:lo + chunk]
        links = draw_links(msg.size, ch, rng, snr_db, imp)
        x = encode(msg, params)
        tx = apply_chain(x, imp, links.chain) if links.chain is not None else x
        for name in decoders:
            h, noise = (links.h_r, links.noise_r) if name == "legit" else (links.h_e, links.noise_e)
            probs = decode(h * tx[:, None] + noise, h, getattr(params, name))
            decided = hard_decision(probs)
            counts[name][0] += bit_errors(msg, decided, k)
            counts[name][1] += int(np.count_nonzero(decided != msg))
    n = messages.size
    return {d: BerCount(c[0], n * k, c[1], n) for d, c in counts.items()}


def _check_finite(value, epoch, step):
    if not np.isfinite(value):
        raise TrainingDiverged(f"loss became non-finite at epoch {epoch}, step {step}")


def train(messages, cfg: TrainConfig, imp: ImpairmentConfig | None, ch: ChannelConfig,
          params: NetParams | None = None, progress=None) -> tuple[NetParams, History]:
    """Minimise alpha L_r + (1 - alpha) L_e with Adam over minibatches.

    The learning rate is multiplied by ``lr_decay`` whenever the epoch-mean
    loss has not improved for ``plateau_patience`` consecutive epochs.
    """
    rng = np.random.default_rng(cfg.seed)
    init_rng, data_rng, link_rng, val_rng = rng.spawn(4)
    messages = np.asarray(messages, dtype=np.int64)
    if params is None:
        params = NetParams.init(cfg.n_messages, ch.n_rx, init_rng, cfg.power_limit)
    nets = [params.encoder, params.legit, params.eve]
    flat = [p for n in nets for p in n.params]
    opt = Adam(flat, lr=cfg.lr0)
    val_msgs = val_rng.integers(0, cfg.n_messages, cfg.val_size)
    hist = History()
    best, stale = np.inf, 0
    frozen = None
    if cfg.link_mode != "fresh":
        frozen = draw_links(messages.size, ch, link_rng, cfg.snr_train_range_db, imp)
    for epoch in range(cfg.epochs):
        order = data_rng.permutation(messages.size)
        tot = [0.0, 0.0, 0.0]
        n_batches = 0
        for step, lo in enumerate(range(0, messages.size, cfg.batch_size)):
            idx = order[lo:lo + cfg.batch_size]
            batch = messages[idx]
            params.zero_grad()
            links = frozen.take(idx) if frozen is not None else None
            _, _, cache = forward_batch(batch, params, imp, ch, link_rng, cfg.snr_train_range_db, links=links)
            lr_val, le_val, lt = batch_losses(cache, cfg.alpha)
            _check_finite(lt, epoch, step)
            backward_batch(cache, params, cfg.alpha)
            opt.step([g for n in nets for g in n.grads])
            tot[0] += lt
            tot[1] += lr_val
            tot[2] += le_val
            n_batches += 1
        mean_total = tot[0] / n_batches
        hist.loss_total.append(mean_total)
        hist.loss_r.append(tot[1] / n_batches)
        hist.loss_e.append(tot[2] / n_batches)
        hist.lr.append(opt.lr)
        params.calibrate_power()
        res = evaluate(params, val_msgs, cfg.val_snr_db, imp, ch, np.random.default_rng([cfg.seed, epoch]))
        hist.val_ber_legit.append(res["legit"].ber)
        hist.val_ber_eve.append(res["eve"].ber)
        if mean_total < best:
            best, stale = mean_total, 0
        else:
            stale += 1
            if stale >= cfg.plateau_patience:
                opt.lr *= cfg.lr_decay
                stale = 0
        log.info("epoch %d: L_total=%.4f L_r=%.4f L_e=%.4f val BER legit=%.4g eve=%.4g lr=%.3g", epoch,
                 mean_total, hist.loss_r[-1], hist.loss_e[-1], res["legit"].ber, res["eve"].ber, opt.lr)
        if progress is not None:
            progress(epoch, hist)
    params.calibrate_power()
    return params, hist


def eve_best_response(params: NetParams, messages, cfg: TrainConfig, imp: ImpairmentConfig | None,
                      ch: ChannelConfig, progress=None) -> tuple[NetParams, History]:
    """Train a fresh eavesdropper decoder by plain cross-entropy against the
    frozen encoder; the result is stored in ``params.eve_br``."""
    rng = np.random.default_rng([cfg.seed, 0xE5E])
    init_rng, data_rng, link_rng, val_rng = rng.spawn(4)
    messages = np.asarray(messages, dtype=np.int64)
    if params.power_scale is None:
        params.calibrate_power()
    fresh = NetParams.init(params.n_messages, params.n_rx, init_rng, params.power_limit).eve
    params.eve_br = fresh
    opt = Adam(fresh.params, lr=cfg.lr0)
    val_msgs = val_rng.integers(0, params.n_messages, cfg.val_size)
    hist = History()
    best, stale = np.inf, 0
    frozen = None
    if cfg.link_mode != "fresh":
        frozen = draw_links(messages.size, ch, link_rng, cfg.snr_train_range_db, imp)
    for epoch in range(cfg.epochs):
        order = data_rng.permutation(messages.size)
        total, n_batches = 0.0, 0
        for step, lo in enumerate(range(0, messages.size, cfg.batch_size)):
            idx = order[lo:lo + cfg.batch_size]
            batch = messages[idx]
            fresh.zero_grad()
            links = frozen.take(idx) if frozen is not None else None
            _, probs_e, cache = forward_batch(batch, params, imp, ch, link_rng, cfg.snr_train_range_db,
                                              batch_norm=False, eve_net="eve_br", links=links)
            ce = loss_r(probs_e, batch)
            _check_finite(ce, epoch, step)
            backward_batch(cache, params, 1.0, train_encoder=False, legit_weight=0.0,
                           eve_objective="crossentropy")
            params.legit.zero_grad()
            opt.step(fresh.grads)
            total += ce
            n_batches += 1
        mean = total / n_batches
        hist.loss_r.append(mean)
        hist.loss_total.append(mean)
        hist.lr.append(opt.lr)
        res = evaluate(params, val_msgs, cfg.val_snr_db, imp, ch, np.random.default_rng([cfg.seed, epoch, 1]),
                       decoders=("eve_br",))
        hist.val_ber_eve.append(res["eve_br"].ber)
        if mean < best:
            best, stale = mean, 0
        else:
            stale += 1
            if stale >= cfg.plateau_patience:
                opt.lr *= cfg.lr_decay
                stale = 0
        log.info("eve best-response epoch %d: CE=%.4f val BER=%.4g", epoch, mean, res["eve_br"].ber)
        if progress is not None:
            progress(epoch, hist)
    return params, hist


def ber_curve(params: NetParams, messages, snr_grid, imp, ch, seed: int, decoders=("legit", "eve")) -> dict:
    """BER per decoder over an SNR grid, ``{decoder: [BerCount, ...]}``."""
    out = {d: [] for d in decoders}
    for i, snr in enumerate(snr_grid):
        res = evaluate(params, messages, snr, imp, ch, np.random.default_rng([seed, i]), decoders)
        for d in decoders:
            out[d].append(res[d])
    return out
