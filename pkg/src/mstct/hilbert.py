"""Finite Hilbert transform tools and the per-STCT inversion.

Convention: ``H f(t) = (1/pi) p.v. int f(t') / (t - t') dt'``. The singular
kernel is integrated exactly over each sample cell, which gives the
scale-free log kernel ``(1/pi) ln|(m + 1/2) / (m - 1/2)|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.signal import fftconvolve

from .errors import NoZeroRows, SupportViolation

MIN_ZERO_ROWS = 4
_SNAP_TOL = 1e-12


def default_p0(size: int) -> int:
    """Border wide enough for a 45 degree rotation of the I x I region plus margin."""
    return int(math.ceil(0.21 * size)) + 8


def hilbert_kernel(n: int) -> np.ndarray:
    """Kernel taps for offsets ``-(n-1) .. n-1``."""
    m = np.arange(-(n - 1), n, dtype=float)
    return np.log(np.abs((m + 0.5) / (m - 0.5))) / np.pi


def _hilbert_conv(f: np.ndarray, axis: int = -1) -> np.ndarray:
    f = np.moveaxis(np.asarray(f, dtype=float), axis, -1)
    n = f.shape[-1]
    k = hilbert_kernel(n).reshape((1,) * (f.ndim - 1) + (-1,))
    full = fftconvolve(f, k, mode="full", axes=-1)
    return np.moveaxis(full[..., n - 1 : 2 * n - 1], -1, axis)


def hilbert_forward_row(f, pitch: float = 1.0) -> np.ndarray:
    """Discrete Hilbert transform of one sampled row.

    ``pitch`` is accepted for symmetry with the inverse; the cell-integrated
    kernel does not depend on it.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[-1] < 4:
        raise ValueError("need at least 4 samples")
    return _hilbert_conv(f)


@dataclass(frozen=True)
class HilbertRowContext:
    """Sample layout and support interval of one inversion line.

    Samples sit at pixel centres ``(i - (n-1)/2) * pitch``. ``lower``/``upper``
    default to the outer pixel edges. ``epsilon`` is the width, in samples, of
    the known-zero margin at each end.
    """

    n: int
    pitch: float = 1.0
    lower: float | None = None
    upper: float | None = None
    epsilon: int = 2

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("need at least 4 samples")
        if self.epsilon < 1 or 2 * self.epsilon >= self.n:
            raise ValueError("epsilon must be >= 1 and leave interior samples")
        if self.bounds[0] >= self.bounds[1]:
            raise ValueError("lower bound must be below upper bound")

    @property
    def bounds(self) -> tuple[float, float]:
        half = self.n * self.pitch / 2.0
        lo = -half if self.lower is None else self.lower
        hi = half if self.upper is None else self.upper
        return lo, hi

    def t(self) -> np.ndarray:
        return (np.arange(self.n) - (self.n - 1) / 2.0) * self.pitch

    def sqrt_weight(self) -> np.ndarray:
        lo, hi = self.bounds
        t = self.t()
        if t[0] <= lo or t[-1] >= hi:
            raise SupportViolation(f"samples span [{t[0]:.6g}, {t[-1]:.6g}], not inside ({lo:.6g}, {hi:.6g})")
        return np.sqrt((t - lo) * (hi - t))

    def margin(self) -> np.ndarray:
        e = self.epsilon
        return np.r_[0:e, self.n - e : self.n]


def finite_hilbert_inverse_row(g, ctx: HilbertRowContext, constant: float | None = None) -> np.ndarray:
    """Recover f on the support interval from its Hilbert transform ``g``.

    ``f = -(H[sqrt(w) g] + C) / sqrt(w)`` with ``w = (t - L)(U - t)``. Without an
    explicit ``constant`` C is fitted so that f vanishes on average over the
    known-zero margin.
    """
    g = np.asarray(g, dtype=float)
    if g.shape[-1] != ctx.n:
        raise ValueError(f"row has {g.shape[-1]} samples, context expects {ctx.n}")
    sw = ctx.sqrt_weight()
    conv = _hilbert_conv(sw * g)
    if constant is None:
        constant = -float(np.mean(conv[ctx.margin()]))
    return -(conv + constant) / sw


def margin_constant(conv_row, index: int) -> float:
    """Single-point constant estimate at a known-zero sample ``index``."""
    return -float(np.asarray(conv_row)[index])


# -- rotation ------------------------------------------------------------------------


def _rotate_plane(img: np.ndarray, angle: float) -> np.ndarray:
    quarter = angle / (math.pi / 2)
    k = round(quarter)
    if abs(quarter - k) < _SNAP_TOL:
        return np.ascontiguousarray(np.rot90(img, -k))
    ny, nx = img.shape
    if ny != nx:
        raise ValueError("rotation needs a square image")
    c = (nx - 1) / 2.0
    p = np.arange(nx) - c
    x = p[None, :]
    y = p[:, None]
    ca, sa = math.cos(angle), math.sin(angle)
    qx = ca * x + sa * y
    qy = -sa * x + ca * y
    coords = np.stack([np.broadcast_to(qy + c, img.shape), np.broadcast_to(qx + c, img.shape)])
    # rounding can push edge samples a hair outside the grid; pull them back
    clipped = np.clip(coords, 0.0, nx - 1.0)
    coords = np.where(np.abs(coords - clipped) < 1e-6, clipped, coords)
    return map_coordinates(img, coords, order=1, mode="constant", cval=0.0)


def rotate_image(img, angle: float) -> np.ndarray:
    """Rotate image content counter-clockwise by ``angle`` about the grid centre.

    Bilinear resampling, zero outside the grid. Multiples of pi/2 are exact
    index permutations. 3D input is rotated slice by slice (axes y, x).
    """
    img = np.asarray(img, dtype=float)
    angle = math.remainder(angle, 2.0 * math.pi)
    if img.ndim == 3:
        return np.stack([_rotate_plane(s, angle) for s in img])
    return _rotate_plane(img, angle)


def find_zero_rows(img, tol: float | None = None) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    peak = np.abs(img).max(initial=0.0)
    if tol is None:
        tol = 1e-12 * peak
    rows = np.flatnonzero(np.abs(img).max(axis=1) <= tol)
    if rows.size < MIN_ZERO_ROWS:
        raise NoZeroRows(f"found {rows.size} zero rows, need at least {MIN_ZERO_ROWS}; increase p0")
    return rows


def support_zero_rows(size: int, p0: int, eta: float) -> np.ndarray:
    """Rows of the rotated extended grid that lie entirely outside the I x I region."""
    ind = np.zeros((size + 2 * p0,) * 2)
    ind[p0 : p0 + size, p0 : p0 + size] = 1.0
    return find_zero_rows(rotate_image(ind, -eta))


def _invert_plane(g: np.ndarray, eta: float, zero_rows: np.ndarray) -> np.ndarray:
    # after rotating by -eta the Hilbert lines run along axis 0
    gr = rotate_image(g, -eta)
    ctx = HilbertRowContext(gr.shape[0])
    sw = ctx.sqrt_weight()[:, None]
    conv = _hilbert_conv(sw * gr, axis=0)
    constant = -conv[zero_rows].mean(axis=0, keepdims=True)
    fr = -(conv + constant) / sw
    return rotate_image(fr, eta)


def invert_dbp_per_stct(dbp, size: int, p0: int | None = None) -> np.ndarray:
    """One STCT's partial image on the central ``size x size`` region (per slice in 3D)."""
    p0 = dbp.p0 if p0 is None else p0
    vals = np.asarray(dbp.values, dtype=float)
    if vals.shape[-1] != size + 2 * p0:
        raise ValueError(f"DBP grid {vals.shape[-1]} does not match size {size} + 2*{p0}")
    zero_rows = support_zero_rows(size, p0, dbp.eta)
    g = vals / (-2.0 * math.pi)
    crop = slice(p0, p0 + size)
    if vals.ndim == 3:
        return np.stack([_invert_plane(s, dbp.eta, zero_rows)[crop, crop] for s in g])
    return _invert_plane(g, dbp.eta, zero_rows)[crop, crop]
