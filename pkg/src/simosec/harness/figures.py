"""Per-stage constellation dumps and BER-vs-SNR SVG charts."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..impair import STAGES, ImpairmentConfig, rf_chain  # noqa: E402
from ..modem import build_qam  # noqa: E402
from .config import DECODERS, SCENARIOS  # noqa: E402

BER_FLOOR = 1e-6


def dump_constellations(imp: ImpairmentConfig, n: int, rng: np.random.Generator, out_dir=None):
    """Push ``n`` random 16-QAM symbols through the chain and record every tap.

    Returns ``(symbols, taps)``; with ``out_dir`` also writes one
    ``constellation_<stage>.csv`` per stage (columns stage, sample_index, i, q).
    """
    if n < 1:
        raise ValueError("need at least one symbol")
    c = build_qam(16)
    symbols = rng.integers(0, 16, n)
    _, _, taps = rf_chain(c.points[symbols], imp, rng, taps=True)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for stage in STAGES:
            with open(os.path.join(out_dir, f"constellation_{stage}.csv"), "w", newline="") as f:
                w = csv.writer(f, lineterminator="\n")
                w.writerow(["stage", "sample_index", "i", "q"])
                for i, v in enumerate(taps[stage]):
                    w.writerow([stage, i, repr(float(v.real)), repr(float(v.imag))])
    return symbols, taps


@dataclass(frozen=True)
class ScatterStats:
    outer_compression: float
    axis_rotation_i: float
    axis_rotation_q: float

    @property
    def skew(self) -> float:
        """Half the angle between the rotated I and Q axes (IQ phase error)."""
        return 0.5 * (self.axis_rotation_i - self.axis_rotation_q)

    @property
    def common_rotation(self) -> float:
        return 0.5 * (self.axis_rotation_i + self.axis_rotation_q)


def axis_rotations(before, after) -> tuple[float, float]:
    """Least-squares fit ``after ~ A [Re before, Im before]`` and return how
    far the images of the I and Q axes are rotated, in radians."""
    X = np.stack([before.real, before.imag], 1)
    Y = np.stack([after.real, after.imag], 1)
    A = np.linalg.lstsq(X, Y, rcond=None)[0].T
    rot_i = np.arctan2(A[1, 0], A[0, 0])
    rot_q = np.arctan2(-A[0, 1], A[1, 1])
    return float(rot_i), float(rot_q)


def scatter_stats(taps: dict, stage_in: str = "dac", stage_out: str = "mixer") -> ScatterStats:
    """Summary numbers for a dump.

    ``outer_compression`` is the outer-to-inner modulus ratio after the PA
    divided by the same ratio on the ideal grid (< 1 means compression).
    Axis rotations compare ``stage_out`` against ``stage_in``.
    """
    x = taps["digital"]
    r = np.abs(x)
    outer = r > r.max() - 1e-9
    inner = r < r.min() + 1e-9
    pa = np.abs(taps["pa"])
    ratio_out = pa[outer].mean() / pa[inner].mean()
    ratio_in = r[outer].mean() / r[inner].mean()
    rot_i, rot_q = axis_rotations(taps[stage_in], taps[stage_out])
    return ScatterStats(float(ratio_out / ratio_in), rot_i, rot_q)


def emit_plots(records, out_dir) -> list[str]:
    """One log-scale BER chart per scenario; returns the written paths.

    Zero-error points are drawn at the floor and marked as such.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to plot")
    os.makedirs(out_dir, exist_ok=True)
    plt.rcParams["svg.hashsalt"] = "simosec"
    paths = []
    scenarios = [s for s in SCENARIOS if any(r.scenario == s for r in records)]
    for scenario in scenarios:
        rows = [r for r in records if r.scenario == scenario]
        fig, ax = plt.subplots(figsize=(6, 4.5))
        floor_hit = False
        for dec in [d for d in DECODERS if any(r.decoder == d for r in rows)]:
            pts = sorted((r.snr_db, r.ber) for r in rows if r.decoder == dec)
            snr = [p[0] for p in pts]
            ber = [max(p[1], BER_FLOOR) for p in pts]
            floor_hit |= any(p[1] < BER_FLOOR for p in pts)
            ax.semilogy(snr, ber, marker="o", label=dec)
        if floor_hit:
            ax.axhline(BER_FLOOR, color="grey", linestyle=":", linewidth=1)
            ax.annotate("error floor (no errors observed)", (0.02, 0.02), xycoords="axes fraction", fontsize=8)
        ax.set_ylim(BER_FLOOR / 2, 1.0)
        ax.set_xlabel("SNR per antenna [dB]")
        ax.set_ylabel("BER")
        ax.set_title(f"BER vs SNR ({scenario})")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        path = os.path.join(out_dir, f"ber_{scenario}.svg")
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths
