"""Classical single-stream SIMO detectors and the analytic BER reference.

All detectors assume perfect CSI and the nominal constellation. Inputs are
batched: ``y`` and ``h`` have shape ``(batch, n_rx)`` (or ``(n_rx,)`` for a
single observation).
"""
from __future__ import annotations

from enum import Enum

import numpy as np
from scipy import integrate, special, stats

from .modem import Constellation, argmin_lowest, demap_nearest


class DecoderKind(str, Enum):
    ZF = "ZF"
    LMMSE = "LMMSE"
    ML = "ML"


def _matched(y, h):
    y = np.asarray(y, dtype=complex)
    h = np.asarray(h, dtype=complex)
    return np.sum(np.conj(h) * y, axis=-1), np.sum(np.abs(h) ** 2, axis=-1)


def zf_equalize(y, h):
    """h^H y / ||h||^2."""
    hy, hh = _matched(y, h)
    if np.any(hh == 0):
        raise ZeroDivisionError("zero-forcing needs a non-zero channel vector")
    return hy / hh


def lmmse_equalize(y, h, sigma2, es: float = 1.0):
    """es h^H y / (es ||h||^2 + sigma2), without bias removal."""
    if np.any(np.asarray(sigma2) < 0):
        raise ValueError("sigma2 must be non-negative")
    hy, hh = _matched(y, h)
    return es * hy / (es * hh + sigma2)


def ml_decode(y, h, c: Constellation):
    """Exhaustive search over ||y - h s||^2; ties go to the lowest index."""
    y = np.asarray(y, dtype=complex)
    h = np.asarray(h, dtype=complex)
    scalar = y.ndim == 1
    y2 = np.atleast_2d(y)
    h2 = np.atleast_2d(h)
    out = np.empty(len(y2), dtype=np.int64)
    chunk = 8192
    for lo in range(0, len(y2), chunk):
        yb, hb = y2[lo:lo + chunk], h2[lo:lo + chunk]
        resid = yb[:, None, :] - hb[:, None, :] * c.points[None, :, None]
        d = np.sum(resid.real**2 + resid.imag**2, axis=-1)
        out[lo:lo + chunk] = argmin_lowest(d)
    return int(out[0]) if scalar else out


def detect(kind: DecoderKind | str, y, h, c: Constellation, sigma2=0.0, es: float = 1.0):
    kind = DecoderKind(kind)
    if kind is DecoderKind.ZF:
        return demap_nearest(zf_equalize(y, h), c)
    if kind is DecoderKind.LMMSE:
        return demap_nearest(lmmse_equalize(y, h, sigma2, es), c)
    return ml_decode(y, h, c)


# --- analytic reference -----------------------------------------------------

def qfunc(x):
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def _pam_gray_ber(d_over_sigma, side: int):
    """Exact per-axis bit error rate of Gray-labelled ``side``-PAM.

    Levels sit at odd multiples of the half-spacing d; the noise per axis has
    standard deviation sigma. Sums the probability mass of every wrong-label
    decision region, bit by bit.
    """
    ratio = np.asarray(d_over_sigma, dtype=float)
    bits = int(np.log2(side))
    levels = np.arange(side)
    labels = levels ^ (levels >> 1)
    # region j spans [2j - side, 2j - side + 2] in units of d, outer ones open
    edges = np.concatenate(([-np.inf], 2.0 * np.arange(1, side) - side, [np.inf]))
    centers = 2.0 * levels - (side - 1)
    total = np.zeros_like(ratio)
    for i in range(side):
        # P(land in region j | level i) = Q(lo - c) - Q(hi - c) in units of sigma
        lo = (edges[:-1] - centers[i])[:, None] * ratio.ravel()[None, :]
        hi = (edges[1:] - centers[i])[:, None] * ratio.ravel()[None, :]
        p_region = qfunc(lo) - qfunc(hi)
        wrong_bits = np.array([bin(labels[i] ^ labels[j]).count("1") for j in range(side)])
        total = total + (wrong_bits[:, None] * p_region).sum(axis=0).reshape(ratio.shape)
    return total / (side * bits)


def qam_ber_awgn(snr_linear, M: int):
    """Exact BER of unit-energy Gray square M-QAM at Es/N0 = ``snr_linear``."""
    side = int(round(np.sqrt(M)))
    if side * side != M or side < 2 or side & (side - 1):
        raise ValueError(f"{M} is not a square QAM order")
    snr = np.asarray(snr_linear, dtype=float)
    # half spacing d = sqrt(3 Es / (2 (M - 1))), per-axis sigma^2 = N0 / 2
    ratio = np.sqrt(3.0 * snr / (M - 1))
    return _pam_gray_ber(ratio, side)


def mrc_qam_ber_oracle(snr_db_effective, M: int):
    """BER of Gray M-QAM at a post-combining SNR ||h||^2 Es / sigma^2 (dB)."""
    return qam_ber_awgn(10.0 ** (np.asarray(snr_db_effective, dtype=float) / 10.0), M)


def rayleigh_mrc_ber(snr_db, M: int, n_rx: int):
    """Average MRC BER over i.i.d. CN(0, 1) fading on ``n_rx`` antennas.

    ``snr_db`` is the per-antenna Es/sigma^2; ||h||^2 is Gamma(n_rx, 1) and
    the conditional BER is integrated against that density.
    """
    snr = 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)
    gamma = stats.gamma(n_rx)

    def avg(s):
        val, _ = integrate.quad(lambda g: qam_ber_awgn(g * s, M) * gamma.pdf(g), 0.0, np.inf, limit=200, epsabs=1e-14)
        return val

    return np.vectorize(avg, otypes=[float])(snr)
