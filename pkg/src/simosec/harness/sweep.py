"""BER-vs-SNR Monte Carlo sweeps over scenarios and decoders."""
from __future__ import annotations

import csv
import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from ..autoenc.checkpoint import load_checkpoint
from ..autoenc.system import NetParams
from ..autoenc.train import evaluate
from ..channel import gen_channel, snr_to_sigma2, transmit
from ..equalize import detect
from ..impair import rf_chain
from ..modem import bit_errors, build_qam
from .config import AE_DECODERS, DECODERS, SCENARIOS, ExperimentConfig
from .data import generate_dataset

log = logging.getLogger(__name__)

CSV_HEADER = ["scenario", "decoder", "snr_db", "bit_errors", "bits_total", "ber", "ser", "ci_low", "ci_high"]
AE_NETS = {"AE-legit": "legit", "AE-eve": "eve", "AE-eve-br": "eve_br"}


class MissingCheckpoint(ValueError):
    pass


@dataclass(frozen=True)
class BerRecord:
    scenario: str
    decoder: str
    snr_db: float
    bit_errors: int
    bits_total: int
    ber: float
    ser: float
    ci_low: float
    ci_high: float

    def __post_init__(self):
        if self.bits_total <= 0 or not 0 <= self.bit_errors <= self.bits_total:
            raise ValueError("inconsistent bit counts")
        if not np.isfinite(self.ber) or self.ber != self.bit_errors / self.bits_total:
            raise ValueError("ber must equal bit_errors / bits_total")

    @classmethod
    def from_counts(cls, scenario, decoder, snr_db, bit_err, bits, sym_err, symbols) -> "BerRecord":
        lo, hi = proportion_confint(bit_err, bits, alpha=0.05, method="wilson")
        return cls(scenario, decoder, float(snr_db), int(bit_err), int(bits), bit_err / bits,
                   sym_err / symbols, float(lo), float(hi))

    def sort_key(self):
        return (SCENARIOS.index(self.scenario), DECODERS.index(self.decoder), self.snr_db)

    def row(self) -> list[str]:
        return [self.scenario, self.decoder, repr(self.snr_db), str(self.bit_errors), str(self.bits_total),
                repr(self.ber), repr(self.ser), repr(self.ci_low), repr(self.ci_high)]


def job_seed(master_seed: int, scenario: str, decoder: str, snr_db: float) -> int:
    key = f"{master_seed}|{scenario}|{decoder}|{float(snr_db)!r}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def _classical_counts(decoder, msgs, snr_db, imp, ch, rng, constellation):
    x = constellation.points[msgs]
    h = gen_channel(ch, rng, msgs.size).h
    sigma2 = float(snr_to_sigma2(snr_db))
    tx = rf_chain(x, imp, rng)[0] if imp is not None and imp.active else x
    y = transmit(tx, h, sigma2, rng)
    decided = detect(decoder, y, h, constellation, sigma2=sigma2)
    return bit_errors(msgs, decided, constellation.bits_per_symbol), int(np.count_nonzero(decided != msgs))


def run_point(cfg: ExperimentConfig, scenario: str, decoder: str, snr_db: float, test_msgs,
              params: NetParams | None = None) -> BerRecord:
    """One sweep point: the test set first, then fresh symbols until the
    error floor or the symbol cap is reached."""
    rng = np.random.default_rng(job_seed(cfg.master_seed, scenario, decoder, snr_db))
    imp = cfg.scenario_impairments(scenario)
    c = build_qam(16)
    k = c.bits_per_symbol
    bit_err = sym_err = symbols = 0
    msgs = np.asarray(test_msgs, dtype=np.int64)
    while True:
        if decoder in AE_NETS:
            res = evaluate(params, msgs, snr_db, imp, cfg.channel, rng, decoders=(AE_NETS[decoder],))
            count = res[AE_NETS[decoder]]
            b, s = count.bit_errors, count.symbol_errors
        else:
            b, s = _classical_counts(decoder, msgs, snr_db, imp, cfg.channel, rng, c)
        bit_err += b
        sym_err += s
        symbols += msgs.size
        if bit_err >= cfg.min_bit_errors or symbols >= cfg.max_symbols:
            break
        msgs = rng.integers(0, 16, min(cfg.n_test, cfg.max_symbols - symbols))
    rec = BerRecord.from_counts(scenario, decoder, snr_db, bit_err, symbols * k, sym_err, symbols)
    log.info("%s %s %.1f dB: BER=%.3g (%d bits)", scenario, decoder, snr_db, rec.ber, rec.bits_total)
    return rec


def _run_job(args):
    return run_point(*args)


def _resolve_checkpoints(checkpoints) -> dict[str, NetParams]:
    out = {}
    for scenario, ck in (checkpoints or {}).items():
        out[scenario] = load_checkpoint(ck)[0] if not isinstance(ck, NetParams) else ck
    return out


def run_ber_sweep(cfg: ExperimentConfig, checkpoints=None, decoders=None, scenarios=None,
                  workers: int | None = None) -> list[BerRecord]:
    """Evaluate every (scenario, decoder, SNR) point.

    ``checkpoints`` maps a scenario to a trained :class:`NetParams` or a
    checkpoint path; it is required for every scenario that asks for an AE
    decoder.
    """
    decoders = tuple(decoders or cfg.decoders)
    scenarios = tuple(scenarios or cfg.scenarios)
    models = _resolve_checkpoints(checkpoints)
    for scenario in scenarios:
        wanted = [d for d in decoders if d in AE_DECODERS]
        if wanted and scenario not in models:
            raise MissingCheckpoint(f"AE decoders {wanted} need a checkpoint for scenario '{scenario}'")
        if "AE-eve-br" in wanted and models[scenario].eve_br is None:
            raise MissingCheckpoint(f"checkpoint for '{scenario}' has no best-response eavesdropper")
    _, test = generate_dataset(cfg)
    jobs = [
        (cfg, s, d, snr, test, models.get(s) if d in AE_DECODERS else None)
        for s in scenarios for d in decoders for snr in cfg.test_snr_grid_db
    ]
    workers = workers or cfg.workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_job, jobs))
    else:
        records = [_run_job(j) for j in jobs]
    return sorted(records, key=BerRecord.sort_key)


def write_csv(records, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in sorted(records, key=BerRecord.sort_key):
            w.writerow(r.row())


def read_csv(path) -> list[BerRecord]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return [
        BerRecord(r["scenario"], r["decoder"], float(r["snr_db"]), int(r["bit_errors"]), int(r["bits_total"]),
                  float(r["ber"]), float(r["ser"]), float(r["ci_low"]), float(r["ci_high"]))
        for r in rows
    ]
