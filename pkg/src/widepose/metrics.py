"""Error metrics: MAWE for yaw, MAE for pitch/roll, and yaw-banded profiles."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .angles import awe, exact_mean, wrap_angle
from .records import AnnotationRecord, DataError, PredictionRecord

ANGLE_NAMES = ("pitch", "yaw", "roll")


@dataclass(frozen=True)
class BandStat:
    lo: float
    hi: float
    count: int
    pitch: float
    yaw: float
    roll: float


@dataclass
class MetricsReport:
    count: int
    pitch: float  # MAE
    yaw: float  # MAWE
    roll: float  # MAE
    combined: float
    bands: list[BandStat] = field(default_factory=list)
    band_width: float = 30.0
    unmatched: int = 0

    def band(self, lo: float) -> BandStat | None:
        for b in self.bands:
            if b.lo == lo:
                return b
        return None


def check_band_width(width: float) -> int:
    if not (math.isfinite(width) and width > 0):
        raise ValueError(f"band width must be positive, got {width}")
    n = 360.0 / width
    if abs(n - round(n)) > 1e-9:
        raise ValueError(f"band width {width} does not divide 360")
    return int(round(n))


def angle_errors(true, pred) -> np.ndarray:
    """(n, 3) per-sample errors: |d pitch|, AWE yaw, |d roll|."""
    t = np.asarray(true, dtype=float).reshape(-1, 3)
    p = np.asarray(pred, dtype=float).reshape(-1, 3)
    err = np.abs(p - t)
    err[:, 1] = awe(p[:, 1], t[:, 1])
    return err


def band_index(true_yaw, width: float) -> np.ndarray:
    """0-based band of each true yaw; band k covers (-180 + k*w, -180 + (k+1)*w]."""
    n = check_band_width(width)
    y = np.atleast_1d(wrap_angle(np.asarray(true_yaw, dtype=float)))
    k = np.ceil((y + 180.0) / width).astype(int) - 1
    return np.clip(k, 0, n - 1)


def band_means(true_yaw, errors, width: float = 30.0) -> list[BandStat]:
    """Mean error per populated yaw band (empty bands are left out)."""
    n = check_band_width(width)
    err = np.asarray(errors, dtype=float).reshape(-1, 3)
    k = band_index(true_yaw, width)
    out = []
    for b in range(n):
        sel = err[k == b]
        if len(sel) == 0:
            continue
        m = [exact_mean(sel[:, j]) for j in range(3)]
        out.append(BandStat(-180.0 + b * width, -180.0 + (b + 1) * width, len(sel), *m))
    return out


def summarize(true, pred, band_width: float = 30.0, unmatched: int = 0) -> MetricsReport:
    t = np.asarray(true, dtype=float).reshape(-1, 3)
    if len(t) == 0:
        raise DataError("no matched samples to evaluate")
    err = angle_errors(t, pred)
    n = len(err)
    pitch, yaw, roll = (exact_mean(err[:, j]) for j in range(3))
    return MetricsReport(
        count=n,
        pitch=pitch,
        yaw=yaw,
        roll=roll,
        combined=(pitch + yaw + roll) / 3.0,
        bands=band_means(t[:, 1], err, band_width),
        band_width=band_width,
        unmatched=unmatched,
    )


def match_records(annotations: Iterable[AnnotationRecord], predictions: Iterable[PredictionRecord]):
    """Pair predictions with annotations by (frame, subject, camera).

    Returns (true (n, 3), pred (n, 3), unmatched prediction count).
    """
    truth = {}
    for a in annotations:
        truth[a.key] = a.pose
    true, pred, unmatched = [], [], 0
    for p in predictions:
        pose = truth.get(p.key)
        if pose is None:
            unmatched += 1
            continue
        true.append((pose.pitch, pose.yaw, pose.roll))
        pred.append((p.pose.pitch, p.pose.yaw, p.pose.roll))
    return np.array(true, dtype=float).reshape(-1, 3), np.array(pred, dtype=float).reshape(-1, 3), unmatched


def compute_report(annotations, predictions, band_width: float = 30.0) -> MetricsReport:
    true, pred, unmatched = match_records(annotations, predictions)
    if len(true) == 0:
        raise DataError(f"no prediction matches an annotation ({unmatched} unmatched)")
    return summarize(true, pred, band_width, unmatched)


def yaw_binned_histogram(annotations, predictions, band_width: float = 30.0) -> list[BandStat]:
    check_band_width(band_width)
    return compute_report(annotations, predictions, band_width).bands


# -- rendering -------------------------------------------------------------------


def format_report(report: MetricsReport, title: str = "") -> str:
    lines = []
    if title:
        lines.append(title)
    lines.append(f"{'samples':>8} {'Yaw':>8} {'Pitch':>8} {'Roll':>8} {'MAWE':>8}")
    lines.append(
        f"{report.count:>8d} {report.yaw:>8.3f} {report.pitch:>8.3f} {report.roll:>8.3f} {report.combined:>8.3f}"
    )
    if report.unmatched:
        lines.append(f"unmatched predictions: {report.unmatched}")
    if report.bands:
        lines.append("")
        lines.append(f"{'true yaw band':>16} {'n':>6} {'Yaw':>8} {'Pitch':>8} {'Roll':>8}")
        for b in report.bands:
            band = f"({b.lo:g}, {b.hi:g}]"
            lines.append(f"{band:>16} {b.count:>6d} {b.yaw:>8.3f} {b.pitch:>8.3f} {b.roll:>8.3f}")
    return "\n".join(lines)


def write_bands_csv(bands: Iterable[BandStat], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["band_lo", "band_hi", "count", "yaw", "pitch", "roll"])
        for b in bands:
            w.writerow([repr(b.lo), repr(b.hi), b.count, repr(b.yaw), repr(b.pitch), repr(b.roll)])


def bands_svg(bands: list[BandStat], width: int = 720, height: int = 320) -> str:
    """Grouped bar chart of per-band mean errors (yaw, pitch, roll)."""
    colors = {"yaw": "#2a9d3a", "pitch": "#c0392b", "roll": "#2c5fb8"}
    pad_l, pad_b, pad_t = 48, 40, 16
    plot_w, plot_h = width - pad_l - 12, height - pad_b - pad_t
    top = max([max(b.yaw, b.pitch, b.roll) for b in bands] + [1e-9])
    slot = plot_w / max(len(bands), 1)
    bar = slot / 4.0
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="10">',
        f'<line x1="{pad_l}" y1="{pad_t + plot_h}" x2="{pad_l + plot_w}" y2="{pad_t + plot_h}" stroke="black"/>',
        f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{pad_t + plot_h}" stroke="black"/>',
        f'<text x="4" y="{pad_t + 8}">{top:.1f}&#176;</text>',
    ]
    for i, b in enumerate(bands):
        x0 = pad_l + i * slot + bar / 2
        for j, name in enumerate(("yaw", "pitch", "roll")):
            v = getattr(b, name)
            h = plot_h * v / top
            out.append(
                f'<rect x="{x0 + j * bar:.2f}" y="{pad_t + plot_h - h:.2f}" width="{bar:.2f}" '
                f'height="{h:.2f}" fill="{colors[name]}"><title>{name} {v:.2f}</title></rect>'
            )
        out.append(
            f'<text x="{pad_l + (i + 0.5) * slot:.2f}" y="{pad_t + plot_h + 14}" '
            f'text-anchor="middle">{b.hi:g}</text>'
        )
    out.append(f'<text x="{pad_l + plot_w / 2:.0f}" y="{height - 6}" text-anchor="middle">true yaw band (upper edge, deg)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
