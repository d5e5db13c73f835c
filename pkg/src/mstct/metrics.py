"""RMSE / PSNR against a reference image and region statistics."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyMask, EmptyRegion, ZeroReference


def _masked(img, ref, mask):
    img = np.asarray(img, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if img.shape != ref.shape:
        raise ValueError(f"shape mismatch: {img.shape} vs {ref.shape}")
    if mask is None:
        mask = np.ones(img.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMask("mask selects no pixels")
    return img[mask], ref[mask]


def rmse(img, ref, mask=None) -> float:
    a, b = _masked(img, ref, mask)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def psnr(img, ref, mask=None) -> float:
    """``20 log10(peak / rmse)`` with peak = max of ``ref`` inside the mask; +inf when rmse is 0."""
    a, b = _masked(img, ref, mask)
    peak = float(b.max())
    if peak <= 0.0:
        raise ZeroReference("reference peak inside the mask is not positive")
    err = float(np.sqrt(np.mean((a - b) ** 2)))
    if err == 0.0:
        return math.inf
    return 20.0 * math.log10(peak / err)


def region_std(img, region) -> float:
    """Sample standard deviation (ddof = 1) over a boolean region."""
    img = np.asarray(img, dtype=float)
    region = np.asarray(region, dtype=bool)
    vals = img[region]
    if vals.size < 2:
        raise EmptyRegion(f"region has {vals.size} pixels, need at least 2")
    return float(np.std(vals, ddof=1))


@dataclass
class MetricReport:
    rmse: float
    psnr: float
    n_pixels: int
    mask: str = "all"


def evaluate(img, ref, mask=None, mask_name: str = "all") -> MetricReport:
    n = int(np.count_nonzero(mask)) if mask is not None else int(np.size(img))
    return MetricReport(rmse(img, ref, mask), psnr(img, ref, mask), n, mask_name)


def disc_mask(size: int, pitch: float, radius: float, rim: int = 0) -> np.ndarray:
    """Pixels whose centre lies within ``radius - rim * pitch`` of the grid centre."""
    c = (np.arange(size) - (size - 1) / 2.0) * pitch
    return np.hypot(c[None, :], c[:, None]) <= radius - rim * pitch


def write_reports(path, rows: list[dict]) -> Path:
    """Write dict rows (e.g. from :func:`dataclasses.asdict`) as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = list(rows[0].keys()) if rows else ["rmse", "psnr", "n_pixels", "mask"]
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path


def report_row(report: MetricReport, **extra) -> dict:
    return {**extra, **asdict(report)}
