"""Analytic mSTCT projection synthesis, noise injection and sinogram files."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rawio
from .errors import FormatError, GeometryMismatch, NegativeProjection
from .geometry import ScanGeometry, ray_of
from .phantom import Phantom, line_integrals, line_integrals_3d


@dataclass
class Sinogram:
    """Projection data shaped [T][N][M] (2D) or [T][N][Mv][M] (3D).

    ``rows``/``row_pitch`` describe the detector rows of 3D data and are
    ``None`` for fan-beam (2D) data.
    """

    data: np.ndarray
    geometry: ScanGeometry
    rows: int | None = None
    row_pitch: float | None = None

    def __post_init__(self):
        g = self.geometry
        expected = (g.stct_count, g.sources_per_stct)
        if self.rows is not None:
            expected += (self.rows,)
        expected += (g.detector_count,)
        if tuple(self.data.shape) != expected:
            raise GeometryMismatch(f"sinogram shape {self.data.shape} does not match geometry {expected}")

    @property
    def is_3d(self) -> bool:
        return self.rows is not None

    def vs(self) -> np.ndarray:
        if self.rows is None:
            return np.zeros(1)
        return (np.arange(self.rows) - (self.rows - 1) / 2.0) * self.row_pitch

    def mid_plane(self) -> "Sinogram":
        """2D sinogram made of the v = 0 detector row (interpolated for even row counts)."""
        if not self.is_3d:
            return self
        k = (self.rows - 1) / 2.0
        lo, hi = int(math.floor(k)), int(math.ceil(k))
        data = 0.5 * (self.data[:, :, lo, :] + self.data[:, :, hi, :])
        return Sinogram(data, self.geometry)

    def scaled(self, factor: float) -> "Sinogram":
        return Sinogram(self.data * factor, self.geometry, self.rows, self.row_pitch)


def simulate_stct_2d(phantom: Phantom, theta: float, geom: ScanGeometry) -> np.ndarray:
    """[N][M] line integrals for one STCT at translation angle ``theta``."""
    lam = geom.lambdas()[:, None]
    u = geom.us()[None, :]
    phi, r = ray_of(lam, u, theta, geom)
    return line_integrals(phantom, phi, r)


def simulate_stct_3d(phantom: Phantom, theta: float, geom: ScanGeometry, rows: int, row_pitch: float) -> np.ndarray:
    """[N][Mv][M] cone-beam line integrals; sources lie in the z = 0 plane."""
    c, s = math.cos(theta), math.sin(theta)
    e_t = np.array([c, s, 0.0])
    e_n = np.array([-s, c, 0.0])
    e_z = np.array([0.0, 0.0, 1.0])
    lam = geom.lambdas()
    u = geom.us()
    v = (np.arange(rows) - (rows - 1) / 2.0) * row_pitch
    out = np.empty((lam.size, rows, u.size))
    det = u[None, :, None] * e_t + geom.h * e_n + v[:, None, None] * e_z  # (Mv, M, 3)
    for j, lj in enumerate(lam):
        src = lj * e_t - geom.l * e_n
        ray = det - src
        ray /= np.linalg.norm(ray, axis=-1, keepdims=True)
        out[j] = line_integrals_3d(phantom, src, ray)
    return out


def simulate(phantom: Phantom, geom: ScanGeometry, rows: int | None = None, row_pitch: float | None = None) -> Sinogram:
    """Full mSTCT acquisition of an analytic phantom."""
    thetas = geom.thetas()
    if rows is None:
        if phantom.ndim == 3:
            raise ValueError("3D phantom requires detector rows")
        data = np.stack([simulate_stct_2d(phantom, t, geom) for t in thetas])
        return Sinogram(data, geom)
    if row_pitch is None or row_pitch <= 0:
        raise ValueError("3D simulation needs a positive row_pitch")
    data = np.stack([simulate_stct_3d(phantom, t, geom, rows, row_pitch) for t in thetas])
    return Sinogram(data, geom, int(rows), float(row_pitch))


def add_poisson_noise(sino: Sinogram, i0: float, seed: int) -> Sinogram:
    """Post-log Poisson noise: p -> -ln(k / I0), k ~ Poisson(I0 exp(-p)), k >= 1.

    Draws come from a Philox counter-based stream keyed by ``seed``, so the
    result depends only on (data, i0, seed).
    """
    if not i0 > 0:
        raise ValueError("I0 must be positive")
    p = np.asarray(sino.data, dtype=float)
    if np.any(p < -1e-9):
        raise NegativeProjection(f"projection values below zero (min {p.min():.3g})")
    rng = np.random.Generator(np.random.Philox(seed))
    counts = rng.poisson(i0 * np.exp(-np.maximum(p, 0.0)))
    counts = np.maximum(counts, 1)
    noisy = -np.log(counts / i0)
    return Sinogram(noisy, sino.geometry, sino.rows, sino.row_pitch)


# -- files ---------------------------------------------------------------------


def export_sinogram(sino: Sinogram, path):
    order = "t,lambda,v,u" if sino.is_3d else "t,lambda,u"
    extra = {"geometry": sino.geometry.to_dict()}
    if sino.is_3d:
        extra.update(rows=sino.rows, row_pitch_mm=sino.row_pitch)
    return rawio.write_raw(path, sino.data, "sinogram", order, **extra)


def import_sinogram(path, geometry: ScanGeometry | None = None) -> Sinogram:
    data, hdr = rawio.read_raw(path, kind="sinogram")
    try:
        geom = ScanGeometry.from_dict(hdr["geometry"])
    except Exception as exc:
        raise FormatError(f"{path}: bad geometry block ({exc})") from exc
    rows = hdr.get("rows")
    pitch = hdr.get("row_pitch_mm")
    expected_order = "t,lambda,v,u" if rows is not None else "t,lambda,u"
    if hdr["order"] != expected_order:
        raise FormatError(f"{path}: unexpected axis order {hdr['order']!r}")
    if geometry is not None and not geometry.close_to(geom):
        raise GeometryMismatch(f"{path}: header geometry {geom.to_dict()} differs from expected {geometry.to_dict()}")
    try:
        return Sinogram(data, geom, rows, pitch)
    except GeometryMismatch as exc:
        raise GeometryMismatch(f"{path}: {exc}") from exc
