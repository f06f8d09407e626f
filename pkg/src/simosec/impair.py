"""Transmitter RF impairment chain in complex baseband.

Stages run in hardware order: DAC polynomial nonlinearity, IQ-imbalanced
first mixer with carrier frequency offset and phase noise, second (VCO)
up-conversion with its own imbalance and phase noise, and a memoryless
Saleh power amplifier. Deterministic carriers are removed; only the
residual CFO and the oscillator phase noise survive as rotations.

Random oscillator behaviour is drawn once into a :class:`ChainNoise`
realization so that the chain itself is a deterministic, differentiable
map. :func:`chain_jacobian` returns the exact 2x2 real Jacobian per sample,
which the autoencoder uses to backpropagate through the hardware.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * np.pi

GAIN_IMBALANCE_RANGE_DB = (-1.0, 1.0)
PHASE_ERROR_RANGE_DEG = (-5.0, 5.0)


def db_to_amplitude(db: float) -> float:
    return 10.0 ** (db / 20.0)


def cfo_bound(f_ppm: float, f_c0_hz: float) -> float:
    """Largest carrier offset magnitude allowed by a crystal's ppm rating."""
    if f_ppm < 0 or f_c0_hz < 0:
        raise ValueError("f_ppm and f_c0_hz must be non-negative")
    return f_ppm * f_c0_hz / 1e6


def _check_range(name, value, lo, hi):
    if not lo <= value <= hi:
        raise ValueError(f"{name}={value} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class DacConfig:
    rho: tuple = (1.0, 0.0, -0.05)

    def __post_init__(self):
        object.__setattr__(self, "rho", tuple(float(r) for r in self.rho))
        if not self.rho:
            raise ValueError("DAC needs at least one coefficient")
        if self.rho[0] == 0.0:
            raise ValueError("first-order DAC gain rho_1 must be non-zero")

    @property
    def k_max(self) -> int:
        return len(self.rho)


@dataclass(frozen=True)
class MixerConfig:
    gain_imbalance_db: float = 0.0
    phase_error_deg: float = 0.0
    cfo_hz: float = 1000.0
    f_ppm: float = 10.0
    f_c0_hz: float = 2e9
    pn_variance_per_sample: float = 1e-4

    def __post_init__(self):
        _check_range("gain_imbalance_db", self.gain_imbalance_db, *GAIN_IMBALANCE_RANGE_DB)
        _check_range("phase_error_deg", self.phase_error_deg, *PHASE_ERROR_RANGE_DEG)
        bound = cfo_bound(self.f_ppm, self.f_c0_hz)
        if abs(self.cfo_hz) > bound:
            raise ValueError(f"|cfo_hz|={abs(self.cfo_hz)} exceeds the {self.f_ppm} ppm bound {bound} Hz")
        if self.pn_variance_per_sample < 0:
            raise ValueError("phase-noise variance must be non-negative")

    @property
    def gain(self) -> float:
        return db_to_amplitude(self.gain_imbalance_db)

    @property
    def theta(self) -> float:
        return np.deg2rad(self.phase_error_deg)


@dataclass(frozen=True)
class VcoConfig:
    gain_imbalance_db: float = 0.0
    phase_error_deg: float = 0.0
    k_vco: float = 100.0
    v_vco: float = 0.1
    f_vco0_hz: float = 2e9
    pn_variance_per_sample: float = 1e-4

    def __post_init__(self):
        if self.pn_variance_per_sample < 0:
            raise ValueError("phase-noise variance must be non-negative")

    @property
    def gain(self) -> float:
        return db_to_amplitude(self.gain_imbalance_db)

    @property
    def theta(self) -> float:
        return np.deg2rad(self.phase_error_deg)

    @property
    def omega(self) -> float:
        # carrier is stripped in baseband; kept for reference only
        return TWO_PI * (self.k_vco * self.v_vco + self.f_vco0_hz)


@dataclass(frozen=True)
class SalehConfig:
    alpha_a: float = 2.1587
    beta_a: float = 1.1517
    alpha_p: float = 4.0033
    beta_p: float = 9.1040
    input_backoff: float = 1.0

    def __post_init__(self):
        if self.alpha_a <= 0 or self.beta_a <= 0 or self.beta_p <= 0:
            raise ValueError("Saleh model needs alpha_a, beta_a, beta_p > 0")
        if self.input_backoff <= 0:
            raise ValueError("input_backoff must be positive")

    def am_am(self, r):
        r = np.asarray(r, dtype=float)
        return self.alpha_a * r / (1.0 + self.beta_a * r**2)

    def am_pm(self, r):
        r = np.asarray(r, dtype=float)
        return self.alpha_p * r**2 / (1.0 + self.beta_p * r**2)

    @property
    def peak_input(self) -> float:
        return 1.0 / np.sqrt(self.beta_a)

    @property
    def peak_output(self) -> float:
        return self.alpha_a / (2.0 * np.sqrt(self.beta_a))


@dataclass(frozen=True)
class StageSwitches:
    dac: bool = True
    mixer: bool = True
    vco: bool = True
    pa: bool = True

    @classmethod
    def none(cls) -> "StageSwitches":
        return cls(False, False, False, False)


@dataclass(frozen=True)
class ImpairmentConfig:
    dac: DacConfig = field(default_factory=DacConfig)
    mixer: MixerConfig = field(default_factory=MixerConfig)
    vco: VcoConfig = field(default_factory=VcoConfig)
    pa: SalehConfig = field(default_factory=SalehConfig)
    enabled: StageSwitches = field(default_factory=StageSwitches)
    sample_rate_hz: float = 1e6
    # oscillator time index and phase noise restart at every burst of this length
    frame_len: int = 16

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.frame_len < 1:
            raise ValueError("frame_len must be >= 1")

    @classmethod
    def disabled(cls, **kw) -> "ImpairmentConfig":
        return cls(enabled=StageSwitches.none(), **kw)

    @classmethod
    def identity(cls) -> "ImpairmentConfig":
        """Every stage enabled with parameters that make it a no-op (PA off)."""
        return cls(
            dac=DacConfig((1.0,)),
            mixer=MixerConfig(cfo_hz=0.0, pn_variance_per_sample=0.0),
            vco=VcoConfig(pn_variance_per_sample=0.0),
            enabled=StageSwitches(pa=False),
        )

    @classmethod
    def draw_device(cls, rng: np.random.Generator, **kw) -> "ImpairmentConfig":
        """Draw one transmitter's mixer and VCO imbalances from the uniform
        gain/phase ranges; everything else takes the defaults or ``kw``."""
        g = rng.uniform(*GAIN_IMBALANCE_RANGE_DB, size=2)
        p = rng.uniform(*PHASE_ERROR_RANGE_DEG, size=2)
        mixer = replace(kw.pop("mixer", MixerConfig()), gain_imbalance_db=float(g[0]), phase_error_deg=float(p[0]))
        vco = replace(kw.pop("vco", VcoConfig()), gain_imbalance_db=float(g[1]), phase_error_deg=float(p[1]))
        return cls(mixer=mixer, vco=vco, **kw)

    @property
    def active(self) -> bool:
        e = self.enabled
        return e.dac or e.mixer or e.vco or e.pa


@dataclass(frozen=True)
class ChainNoise:
    """Frozen oscillator realization: total rotation angle per sample."""

    mixer_phase: np.ndarray
    vco_phase: np.ndarray

    def __len__(self):
        return len(self.mixer_phase)

    @classmethod
    def zeros(cls, n: int) -> "ChainNoise":
        return cls(np.zeros(n), np.zeros(n))


def sample_phase_noise(n: int, variance: float, rng: np.random.Generator) -> np.ndarray:
    """Discrete Wiener phase: psi[0] = 0 and Gaussian increments after."""
    if variance < 0:
        raise ValueError("phase-noise variance must be non-negative")
    psi = np.zeros(n)
    if n > 1 and variance > 0:
        psi[1:] = np.cumsum(rng.normal(0.0, np.sqrt(variance), n - 1))
    return psi


def _framed_phase_noise(n: int, variance: float, frame_len: int, rng) -> np.ndarray:
    if variance < 0:
        raise ValueError("phase-noise variance must be non-negative")
    n_frames = -(-n // frame_len)
    psi = np.zeros((n_frames, frame_len))
    # always consume the same number of draws so streams stay aligned
    steps = rng.standard_normal((n_frames, frame_len - 1))
    psi[:, 1:] = np.cumsum(np.sqrt(variance) * steps, axis=1)
    return psi.ravel()[:n]


def _time_index(n: int, frame_len: int | None) -> np.ndarray:
    t = np.arange(n)
    return t if frame_len is None else t % frame_len


def draw_chain_noise(n: int, cfg: ImpairmentConfig, rng: np.random.Generator) -> ChainNoise:
    """Sample the CFO/phase-noise rotations for ``n`` consecutive samples.

    The mixer stream is drawn before the VCO stream so a given seed always
    yields the same pair regardless of which stages are enabled.
    """
    t = _time_index(n, cfg.frame_len)
    psi_mix = _framed_phase_noise(n, cfg.mixer.pn_variance_per_sample, cfg.frame_len, rng)
    psi_vco = _framed_phase_noise(n, cfg.vco.pn_variance_per_sample, cfg.frame_len, rng)
    cfo = TWO_PI * cfg.mixer.cfo_hz * t / cfg.sample_rate_hz
    return ChainNoise(mixer_phase=cfo + psi_mix, vco_phase=psi_vco)


# --- individual stages ------------------------------------------------------

def _dac_poly(v: np.ndarray, rho) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate sum_k rho_k v**k and its derivative by Horner's rule."""
    out = np.zeros_like(v)
    der = np.zeros_like(v)
    for k in range(len(rho), 0, -1):
        der = der * v + out
        out = out * v + rho[k - 1]
    der = der * v + out
    out = out * v
    return out, der


def dac_convert(x, cfg: DacConfig) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    xi, _ = _dac_poly(x.real, cfg.rho)
    xq, _ = _dac_poly(x.imag, cfg.rho)
    out = xi + 1j * xq
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out.ravel()))[0])
        raise FloatingPointError(f"DAC output is non-finite at sample {bad}")
    return out


def iq_imbalance(x, gain: float, theta: float) -> np.ndarray:
    """x_I e^{j theta} + j g x_Q e^{-j theta}."""
    x = np.asarray(x, dtype=complex)
    return x.real * np.exp(1j * theta) + 1j * gain * x.imag * np.exp(-1j * theta)


def mixer_upconvert(x, cfg: MixerConfig, rng=None, sample_rate_hz: float = 1e6, phase=None) -> np.ndarray:
    """First up-conversion on a continuous stream starting at n = 0.

    ``phase`` overrides the CFO + phase-noise rotation with a frozen one.
    """
    x = np.asarray(x, dtype=complex)
    if phase is None:
        n = x.shape[-1] if x.ndim else 1
        if cfg.pn_variance_per_sample > 0 and rng is None:
            raise ValueError("an rng is required when phase noise is enabled")
        psi = sample_phase_noise(n, cfg.pn_variance_per_sample, rng) if rng is not None else np.zeros(n)
        phase = TWO_PI * cfg.cfo_hz * np.arange(n) / sample_rate_hz + psi
        if x.ndim == 0:
            phase = phase[0]
    return iq_imbalance(x, cfg.gain, cfg.theta) * np.exp(1j * np.asarray(phase))


def vco_upconvert(x, cfg: VcoConfig, rng=None, phase=None) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if phase is None:
        n = x.shape[-1] if x.ndim else 1
        if cfg.pn_variance_per_sample > 0 and rng is None:
            raise ValueError("an rng is required when phase noise is enabled")
        phase = sample_phase_noise(n, cfg.pn_variance_per_sample, rng) if rng is not None else np.zeros(n)
        if x.ndim == 0:
            phase = phase[0]
    return iq_imbalance(x, cfg.gain, cfg.theta) * np.exp(1j * np.asarray(phase))


def _saleh_gain(s, cfg: SalehConfig):
    """Complex gain c(s) = A(r)/r * e^{j Phi(r)} as a function of s = r**2."""
    g = cfg.alpha_a / (1.0 + cfg.beta_a * s)
    phi = cfg.alpha_p * s / (1.0 + cfg.beta_p * s)
    c = g * np.exp(1j * phi)
    dg = -cfg.alpha_a * cfg.beta_a / (1.0 + cfg.beta_a * s) ** 2
    dphi = cfg.alpha_p / (1.0 + cfg.beta_p * s) ** 2
    dc = (dg + 1j * g * dphi) * np.exp(1j * phi)
    return c, dc


def saleh_pa(x, cfg: SalehConfig) -> np.ndarray:
    x = cfg.input_backoff * np.asarray(x, dtype=complex)
    c, _ = _saleh_gain(np.abs(x) ** 2, cfg)
    return c * x


# --- composed chain ---------------------------------------------------------

STAGES = ("digital", "dac", "mixer", "vco", "pa")


def _as_matrix(a, b, c, d):
    """Stack per-sample 2x2 real matrices [[a, b], [c, d]]."""
    return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)


def _imbalance_matrix(gain, theta):
    return np.array([[np.cos(theta), gain * np.sin(theta)], [np.sin(theta), gain * np.cos(theta)]])


def _rotation_matrices(phase):
    cos, sin = np.cos(phase), np.sin(phase)
    return _as_matrix(cos, -sin, sin, cos)


def apply_chain(x, cfg: ImpairmentConfig, noise: ChainNoise, *, taps: bool = False, jacobian: bool = False):
    """Run the chain with a frozen oscillator realization.

    Returns the output; with ``taps`` also a dict of per-stage outputs, with
    ``jacobian`` also the ``(n, 2, 2)`` Jacobian d(out_I, out_Q)/d(in_I, in_Q).
    """
    x = np.asarray(x, dtype=complex).ravel()
    n = x.size
    if len(noise) != n:
        raise ValueError(f"noise realization has {len(noise)} samples, signal has {n}")
    e = cfg.enabled
    tap = {"digital": x}
    J = np.broadcast_to(np.eye(2), (n, 2, 2)).copy() if jacobian else None

    cur = x
    if e.dac:
        xi, di = _dac_poly(cur.real, cfg.dac.rho)
        xq, dq = _dac_poly(cur.imag, cfg.dac.rho)
        cur = xi + 1j * xq
        if not np.all(np.isfinite(cur)):
            bad = int(np.flatnonzero(~np.isfinite(cur))[0])
            raise FloatingPointError(f"DAC output is non-finite at sample {bad}")
        if jacobian:
            J = np.stack([di, dq], -1)[:, :, None] * J
    tap["dac"] = cur

    for stage, sub, phase in (("mixer", cfg.mixer, noise.mixer_phase), ("vco", cfg.vco, noise.vco_phase)):
        if getattr(e, stage):
            cur = iq_imbalance(cur, sub.gain, sub.theta) * np.exp(1j * phase)
            if jacobian:
                step = _rotation_matrices(phase) @ _imbalance_matrix(sub.gain, sub.theta)
                J = step @ J
        tap[stage] = cur

    if e.pa:
        b = cfg.pa.input_backoff
        v = b * cur
        c, dc = _saleh_gain(np.abs(v) ** 2, cfg.pa)
        out = c * v
        if jacobian:
            # d out / d v_I = c + v dc 2 v_I ; d out / d v_Q = j c + v dc 2 v_Q
            col_i = b * (c + v * dc * 2.0 * v.real)
            col_q = b * (1j * c + v * dc * 2.0 * v.imag)
            step = _as_matrix(col_i.real, col_q.real, col_i.imag, col_q.imag)
            J = step @ J
        cur = out
    tap["pa"] = cur

    result = [cur]
    if taps:
        result.append(tap)
    if jacobian:
        result.append(J)
    return cur if len(result) == 1 else tuple(result)


def rf_chain(x_digital, cfg: ImpairmentConfig, rng: np.random.Generator, *, taps: bool = False):
    """Draw an oscillator realization and push ``x_digital`` through the chain.

    Returns ``(output, noise)`` or ``(output, noise, taps)``.
    """
    x = np.asarray(x_digital, dtype=complex).ravel()
    noise = draw_chain_noise(x.size, cfg, rng)
    if taps:
        out, tap = apply_chain(x, cfg, noise, taps=True)
        return out, noise, tap
    return apply_chain(x, cfg, noise), noise


def chain_jacobian(x, cfg: ImpairmentConfig, noise: ChainNoise) -> np.ndarray:
    """Per-sample real Jacobian of the chain; a scalar input gives a 2x2."""
    scalar = np.ndim(x) == 0
    _, J = apply_chain(np.atleast_1d(x), cfg, noise, jacobian=True)
    return J[0] if scalar else J
