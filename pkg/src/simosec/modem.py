"""Gray-coded square QAM: bit/symbol conversion and hard slicing.

Symbol indices double as bit labels: index ``s`` carries the bits of ``s``
written MSB first, and ``points[s]`` is the grid point holding that label.
The upper half of the label selects the in-phase level and the lower half
the quadrature level, each through a reflected Gray code.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SUPPORTED_ORDERS = (4, 16, 64)


@dataclass(frozen=True)
class Constellation:
    points: np.ndarray
    bits_per_symbol: int
    # row s holds the bit pattern of symbol index s
    gray_map: np.ndarray = field(repr=False)

    @property
    def order(self) -> int:
        return len(self.points)

    @property
    def side(self) -> int:
        return int(round(np.sqrt(self.order)))

    def min_distance(self) -> float:
        d = np.abs(self.points[:, None] - self.points[None, :])
        return float(d[~np.eye(self.order, dtype=bool)].min())


def _gray_decode(g: np.ndarray) -> np.ndarray:
    b = g.copy()
    shift = g >> 1
    while np.any(shift):
        b ^= shift
        shift >>= 1
    return b


def index_to_bits(indices, bits_per_symbol: int) -> np.ndarray:
    """Expand integer labels into an ``(..., bits_per_symbol)`` array of 0/1."""
    indices = np.asarray(indices, dtype=np.int64)
    shifts = np.arange(bits_per_symbol - 1, -1, -1)
    return ((indices[..., None] >> shifts) & 1).astype(np.uint8)


def build_qam(M: int) -> Constellation:
    """Build a unit-energy Gray-coded square M-QAM constellation."""
    if M not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported QAM order {M}; expected one of {SUPPORTED_ORDERS}")
    k = int(np.log2(M))
    half = k // 2
    side = 1 << half
    labels = np.arange(M)
    i_level = _gray_decode(labels >> half)
    q_level = _gray_decode(labels & (side - 1))
    amp_i = 2 * i_level - (side - 1)
    amp_q = 2 * q_level - (side - 1)
    raw = amp_i + 1j * amp_q
    scale = np.sqrt(np.mean(np.abs(raw) ** 2))
    points = raw / scale
    points.setflags(write=False)
    gray_map = index_to_bits(labels, k)
    gray_map.setflags(write=False)
    return Constellation(points=points, bits_per_symbol=k, gray_map=gray_map)


def bits_to_symbols(bits, c: Constellation) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64).ravel()
    k = c.bits_per_symbol
    if bits.size % k:
        raise ValueError(f"bit count {bits.size} is not a multiple of {k}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    weights = 1 << np.arange(k - 1, -1, -1)
    return bits.reshape(-1, k) @ weights


def symbols_to_bits(symbols, c: Constellation) -> np.ndarray:
    symbols = np.asarray(symbols, dtype=np.int64)
    if np.any((symbols < 0) | (symbols >= c.order)):
        raise ValueError("symbol index out of range")
    return c.gray_map[symbols.ravel()].ravel()


def map_symbols(c: Constellation, symbols) -> np.ndarray:
    """Return the constellation points for an index or array of indices."""
    s = np.asarray(symbols)
    if not np.issubdtype(s.dtype, np.integer):
        raise TypeError("symbol indices must be integers")
    if np.any((s < 0) | (s >= c.order)):
        raise ValueError("symbol index out of range")
    return c.points[s]


def argmin_lowest(distances: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Row-wise argmin where values within ``rtol`` of the minimum tie and
    the lowest column index wins."""
    d = np.atleast_2d(distances)
    dmin = d.min(axis=1, keepdims=True)
    near = d <= dmin + rtol * np.abs(dmin)
    return near.argmax(axis=1)


def demap_nearest(y_eq, c: Constellation) -> np.ndarray:
    """Minimum-distance slicer. Scalar input gives a scalar index."""
    y = np.asarray(y_eq, dtype=complex)
    if not np.all(np.isfinite(y)):
        bad = np.flatnonzero(~np.isfinite(y.ravel()))
        raise ValueError(f"non-finite equalized sample at index {int(bad[0])}")
    d = np.abs(y.reshape(-1, 1) - c.points[None, :]) ** 2
    idx = argmin_lowest(d)
    if y.ndim == 0:
        return int(idx[0])
    return idx.reshape(y.shape)


def bit_errors(sent, decided, bits_per_symbol: int) -> int:
    """Hamming distance between the labels of two index arrays."""
    diff = np.bitwise_xor(np.asarray(sent, dtype=np.int64), np.asarray(decided, dtype=np.int64))
    return int(index_to_bits(diff, bits_per_symbol).sum())
