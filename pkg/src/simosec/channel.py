"""Geometric multipath SIMO channels and the AWGN receive model.

A channel to an ``n_rx``-element uniform linear array is the sum of
``n_paths`` plane waves, each with a CN(0, 1) gain and an angle of arrival
uniform on (-pi/2, pi/2). The single transmit antenna contributes a unit
steering factor. Everything here is vectorized over a leading batch axis so
the Monte Carlo loops can draw one channel per symbol.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelConfig:
    n_rx: int = 6
    n_paths: int = 3
    spacing_ratio: float = 0.5

    def __post_init__(self):
        if self.n_rx < 1 or self.n_paths < 1:
            raise ValueError("n_rx and n_paths must be >= 1")
        if self.spacing_ratio <= 0:
            raise ValueError("spacing_ratio must be positive")


@dataclass(frozen=True)
class SimoChannel:
    """Channel vector(s) ``h`` plus the paths that generated them.

    ``h`` has shape ``(..., n_rx)``; ``gains`` and ``aoa`` have shape
    ``(..., n_paths)``.
    """

    h: np.ndarray
    gains: np.ndarray
    aoa: np.ndarray
    spacing_ratio: float = 0.5

    @property
    def paths(self) -> list[tuple[complex, float]]:
        return list(zip(np.ravel(self.gains).tolist(), np.ravel(self.aoa).tolist()))

    def reconstruct(self) -> np.ndarray:
        n_rx = self.h.shape[-1]
        g = steering(n_rx, self.aoa, self.spacing_ratio)
        return np.einsum("...l,...ln->...n", self.gains, g)


@dataclass(frozen=True)
class NoiseConfig:
    sigma2: float

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("noise variance must be non-negative")


def steering(n: int, phi, spacing_ratio: float = 0.5) -> np.ndarray:
    """ULA response (1/sqrt(n)) exp(-j 2 pi k (d/lambda) sin(phi)), k = 0..n-1.

    ``phi`` may be an array; the antenna axis is appended last.
    """
    if n < 1:
        raise ValueError("array needs at least one element")
    phi = np.asarray(phi, dtype=float)
    k = np.arange(n)
    return np.exp(-2j * np.pi * spacing_ratio * np.sin(phi)[..., None] * k) / np.sqrt(n)


def complex_normal(rng: np.random.Generator, size, variance: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian with E|z|^2 = variance."""
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def gen_channel(cfg: ChannelConfig, rng: np.random.Generator, size: int | None = None) -> SimoChannel:
    """Draw one channel, or ``size`` independent channels stacked on axis 0."""
    shape = (cfg.n_paths,) if size is None else (size, cfg.n_paths)
    gains = complex_normal(rng, shape)
    aoa = rng.uniform(-np.pi / 2, np.pi / 2, shape)
    g = steering(cfg.n_rx, aoa, cfg.spacing_ratio)
    h = np.einsum("...l,...ln->...n", gains, g)
    return SimoChannel(h=h, gains=gains, aoa=aoa, spacing_ratio=cfg.spacing_ratio)


def rayleigh_channel(n_rx: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """i.i.d. CN(0, 1) channel entries (rich-scattering reference model)."""
    shape = (n_rx,) if size is None else (size, n_rx)
    return complex_normal(rng, shape)


def snr_to_sigma2(snr_db, symbol_energy: float = 1.0):
    """Per-antenna noise variance for a given per-antenna Es/N0 in dB."""
    if symbol_energy <= 0:
        raise ValueError("symbol energy must be positive")
    return symbol_energy / 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)


def transmit(x, h, sigma2, rng: np.random.Generator) -> np.ndarray:
    """y = h x + n with E|n_i|^2 = sigma2.

    ``x`` has shape ``(batch,)`` or is scalar, ``h`` has shape
    ``(batch, n_rx)`` or ``(n_rx,)``; ``sigma2`` may be per-sample.
    """
    x = np.asarray(x, dtype=complex)
    h = np.asarray(h, dtype=complex)
    clean = h * x[..., None]
    s2 = np.asarray(sigma2, dtype=float)
    if np.any(s2 < 0):
        raise ValueError("noise variance must be non-negative")
    if s2.ndim:
        s2 = s2[..., None]
    return clean + complex_normal(rng, clean.shape, s2)


def write_channels_csv(path, channels: dict[str, np.ndarray]) -> None:
    """Dump channel vectors as rows ``link,antenna,re,im``."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["link", "antenna", "re", "im"])
        for link, h in channels.items():
            for i, v in enumerate(np.ravel(h)):
                w.writerow([link, i, repr(float(v.real)), repr(float(v.imag))])
