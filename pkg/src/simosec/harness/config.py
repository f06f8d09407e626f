"""Experiment configuration and its flat ``key = value`` file format.

Every key is dotted by section (``pa.alpha_a = 2.1587``). Lists are
comma-separated, booleans are ``true``/``false``. Unknown keys are errors.
Imbalance keys left out of a file are drawn from ``experiment.device_seed`` so a
config always resolves to one concrete transmitter; :func:`dump_config`
writes the resolved values back out.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

from ..autoenc.train import TrainConfig
from ..channel import ChannelConfig
from ..impair import DacConfig, ImpairmentConfig, MixerConfig, SalehConfig, StageSwitches, VcoConfig

OUTPUT_DIR_ENV = "SIMOSEC_OUTPUT_DIR"
SCENARIOS = ("clean", "impaired")
CLASSICAL = ("ZF", "LMMSE", "ML")
AE_DECODERS = ("AE-legit", "AE-eve", "AE-eve-br")
DECODERS = CLASSICAL + AE_DECODERS


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n_train: int = 35_000
    n_test: int = 15_000
    test_snr_grid_db: tuple = tuple(float(s) for s in range(0, 23, 2))
    scenarios: tuple = SCENARIOS
    decoders: tuple = ("ZF", "LMMSE", "ML", "AE-legit", "AE-eve")
    master_seed: int = 2024
    output_dir: str = "results"
    min_bit_errors: int = 100
    max_symbols: int = 150_000
    workers: int = 1
    device_seed: int = 7
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    impairments: ImpairmentConfig = field(
        default_factory=lambda: ImpairmentConfig.draw_device(np.random.default_rng(7))
    )

    def __post_init__(self):
        object.__setattr__(self, "test_snr_grid_db", tuple(float(s) for s in self.test_snr_grid_db))
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "decoders", tuple(self.decoders))
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigError("dataset sizes must be positive")
        if not self.test_snr_grid_db:
            raise ConfigError("empty SNR grid")
        if min(self.test_snr_grid_db) < 0 or max(self.test_snr_grid_db) > 22:
            raise ConfigError("test SNR grid must lie within [0, 22] dB")
        bad = set(self.scenarios) - set(SCENARIOS)
        if bad:
            raise ConfigError(f"unknown scenarios {sorted(bad)}")
        bad = set(self.decoders) - set(DECODERS)
        if bad:
            raise ConfigError(f"unknown decoders {sorted(bad)}")
        if self.min_bit_errors < 0 or self.max_symbols < self.n_test or self.workers < 1:
            raise ConfigError("need min_bit_errors >= 0, max_symbols >= n_test, workers >= 1")

    def scenario_impairments(self, scenario: str) -> ImpairmentConfig | None:
        return self.impairments if scenario == "impaired" else None

    def resolve_output_dir(self, override: str | None = None) -> str:
        return override or os.environ.get(OUTPUT_DIR_ENV) or self.output_dir


# --- flat key schema --------------------------------------------------------
# key -> (object path, attribute)

_SECTIONS = {
    "channel": ("channel", ChannelConfig),
    "train": ("train", TrainConfig),
    "dac": ("impairments.dac", DacConfig),
    "mixer": ("impairments.mixer", MixerConfig),
    "vco": ("impairments.vco", VcoConfig),
    "pa": ("impairments.pa", SalehConfig),
    "stages": ("impairments.enabled", StageSwitches),
}
_TOP = [f.name for f in fields(ExperimentConfig) if f.name not in ("channel", "train", "impairments")]
_IMPAIR_TOP = ("sample_rate_hz", "frame_len")
IMBALANCE_KEYS = ("mixer.gain_imbalance_db", "mixer.phase_error_deg", "vco.gain_imbalance_db", "vco.phase_error_deg")


def _get(obj, path):
    for part in path.split("."):
        obj = getattr(obj, part)
    return obj


def to_flat(cfg: ExperimentConfig) -> dict:
    flat = {f"experiment.{k}": getattr(cfg, k) for k in _TOP}
    for k in _IMPAIR_TOP:
        flat[f"impair.{k}"] = getattr(cfg.impairments, k)
    for section, (path, cls) in _SECTIONS.items():
        obj = _get(cfg, path)
        for f in fields(cls):
            flat[f"{section}.{f.name}"] = getattr(obj, f.name)
    return flat


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = [f"{k} = {_format(v)}" for k, v in to_flat(cfg).items()]
    return "\n".join(lines) + "\n"


def _coerce(key: str, text: str, template):
    text = text.strip()
    try:
        if isinstance(template, bool):
            low = text.lower()
            if low not in ("true", "false"):
                raise ValueError(text)
            return low == "true"
        if isinstance(template, int):
            return int(float(text)) if float(text).is_integer() else int(text)
        if isinstance(template, float):
            return float(text)
        if isinstance(template, tuple):
            items = [t.strip() for t in text.split(",") if t.strip()]
            if template and isinstance(template[0], (int, float)) and not isinstance(template[0], bool):
                return tuple(float(t) for t in items)
            if not template and key in ("dac.rho", "experiment.test_snr_grid_db", "train.snr_train_range_db"):
                return tuple(float(t) for t in items)
            return tuple(items)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc


def parse_flat(text: str) -> dict[str, str]:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {n}: duplicate key {key}")
        out[key] = value
    return out


def from_flat(values: dict[str, str], base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Overlay textual ``values`` onto ``base`` (defaults if omitted)."""
    base = base or ExperimentConfig()
    template = to_flat(base)
    unknown = set(values) - set(template)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    merged = dict(template)
    for k, v in values.items():
        merged[k] = _coerce(k, v, template[k])

    device_seed = merged["experiment.device_seed"]
    if any(k not in values for k in IMBALANCE_KEYS) and device_seed != base.device_seed:
        drawn = ImpairmentConfig.draw_device(np.random.default_rng(device_seed))
        for k in IMBALANCE_KEYS:
            if k not in values:
                stage, attr = k.split(".")
                merged[k] = getattr(getattr(drawn, stage), attr)

    def section(name, cls):
        kw = {f.name: merged[f"{name}.{f.name}"] for f in fields(cls)}
        return cls(**kw)

    try:
        imp = ImpairmentConfig(
            dac=section("dac", DacConfig),
            mixer=section("mixer", MixerConfig),
            vco=section("vco", VcoConfig),
            pa=section("pa", SalehConfig),
            enabled=section("stages", StageSwitches),
            sample_rate_hz=merged["impair.sample_rate_hz"],
            frame_len=merged["impair.frame_len"],
        )
        top = {k: merged[f"experiment.{k}"] for k in _TOP}
        return ExperimentConfig(
            **top,
            channel=section("channel", ChannelConfig),
            train=section("train", TrainConfig),
            impairments=imp,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | os.PathLike | None = None, seed: int | None = None) -> ExperimentConfig:
    values = {}
    if path is not None:
        with open(path) as f:
            values = parse_flat(f.read())
    cfg = from_flat(values)
    if seed is not None:
        cfg = replace(cfg, master_seed=seed, train=replace(cfg.train, seed=seed))
    return cfg
