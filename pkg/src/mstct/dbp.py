"""Differentiated backprojection (DBP) for one STCT.

The per-STCT chain is: redundancy weight -> pre-weight -> derivative along u
(D-DBP) or lambda (S-DBP) -> weighted backprojection onto a zero-padded grid.
The Hilbert direction is fixed to ``eta = theta - pi/2`` so the boundary term
vanishes; :func:`st_term` evaluates it for other directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, rawio
from .errors import AxisTooShort, DegenerateRay
from .geometry import DEGENERATE_TOL, ScanGeometry, coverage_interval
from .phantom import ImageGrid, VoxelGrid
from .projector import Sinogram

# Leading constant of the discretised lambda/u integral. One STCT sweeps rays
# over an angular range of pi (not 2 pi), so a unit factor is what makes the
# DBP equal -2 pi H f.
INTEGRAL_FACTOR = 1.0


@dataclass
class DbpImage:
    """DBP values on the p0-extended grid; 3D values are indexed (z, y, x)."""

    values: np.ndarray
    eta: float
    theta: float
    kind: str
    p0: int
    pitch: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_3d(self) -> bool:
        return self.values.ndim == 3

    def export(self, path):
        order = "z,y,x" if self.is_3d else "y,x"
        return rawio.write_raw(
            path,
            self.values,
            "dbp",
            order,
            eta_rad=self.eta,
            theta_rad=self.theta,
            dbp_kind=self.kind,
            p0=self.p0,
            pitch_mm=self.pitch,
        )


# -- redundancy weights ------------------------------------------------------------


def _ramp(x):
    x = np.clip(x, 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * x))


def feather_width(geom: ScanGeometry) -> float:
    if geom.stct_count == 1:
        return 0.0
    return abs(geom.delta_theta) / 4.0


def _coverage_weight(alpha, r, geom: ScanGeometry, tau: float):
    lo, hi = coverage_interval(r, geom)
    if tau <= 0.0:
        return ((alpha >= lo) & (alpha <= hi)).astype(float)
    return _ramp((alpha - lo) / tau) * _ramp((hi - alpha) / tau)


def redundancy_weight_at(phi, r, stct_index: int, geom: ScanGeometry):
    """Weight of STCT ``stct_index`` for the parallel rays ``(phi, r)``.

    Each STCT's coverage is feathered with a raised cosine at its angular edges
    and the result is normalised over all STCTs that see the ray (conjugate
    rays identified), so the weights of any measured ray sum to one.
    """
    phi = np.asarray(phi, dtype=float)
    r = np.asarray(r, dtype=float)
    thetas = geom.thetas()
    tau = feather_width(geom)
    own = None
    total = np.zeros(np.broadcast(phi, r).shape)
    for j, th in enumerate(thetas):
        a = phi - th
        k = np.floor((a + np.pi / 2) / np.pi)
        a = a - k * np.pi
        rj = np.where(np.mod(k, 2) == 0, r, -r)
        c = _coverage_weight(a, rj, geom, tau)
        total += c
        if j == stct_index:
            own = c
    safe = total > 0.0
    return np.where(safe, own / np.where(safe, total, 1.0), 1.0)


def redundancy_weights(geom: ScanGeometry, stct_index: int) -> np.ndarray:
    """[N][M] table of weights in [0, 1] for one STCT."""
    if not 0 <= stct_index < geom.stct_count:
        raise IndexError(f"STCT index {stct_index} out of range")
    if geom.stct_count == 1:
        return np.ones((geom.sources_per_stct, geom.detector_count))
    D = geom.l + geom.h
    lam = geom.lambdas()[:, None]
    u = geom.us()[None, :]
    diff = lam - u
    r = (lam * geom.h + u * geom.l) / np.sqrt(D * D + diff * diff)
    phi = geom.theta(stct_index) + np.arctan(diff / D)
    return redundancy_weight_at(phi, r, stct_index, geom)


# -- pre-weighting and derivatives -------------------------------------------------


def preweight(slice_, geom: ScanGeometry, weights=None, vs=None) -> np.ndarray:
    """``w (l+h)^2 / sqrt((l+h)^2 + (lam-u)^2 [+ v^2]) p`` for a [N][M] or [N][Mv][M] slice."""
    p = np.asarray(slice_, dtype=float)
    D = geom.l + geom.h
    diff = geom.lambdas()[:, None] - geom.us()[None, :]
    if p.ndim == 2:
        fac = D * D / np.sqrt(D * D + diff * diff)
    else:
        v = np.zeros(p.shape[1]) if vs is None else np.asarray(vs, dtype=float)
        fac = D * D / np.sqrt(D * D + diff[:, None, :] ** 2 + v[None, :, None] ** 2)
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        fac = fac * (w if p.ndim == 2 else w[:, None, :])
    return fac * p


def _derivative(arr, step: float, axis: int) -> np.ndarray:
    a = np.asarray(arr, dtype=float)
    if a.shape[axis] < 3:
        raise AxisTooShort(f"need at least 3 samples along axis {axis}, got {a.shape[axis]}")
    a = np.moveaxis(a, axis, 0)
    padded = np.concatenate([a[:1], a, a[-1:]], axis=0)
    out = (padded[2:] - padded[:-2]) / (2.0 * step)
    out[0] = 0.0
    out[-1] = 0.0
    return np.moveaxis(out, 0, axis)


def derivative_u(slice_, du: float) -> np.ndarray:
    """Central difference along the last (u) axis; outermost samples zeroed."""
    return _derivative(slice_, du, -1)


def derivative_lambda(slice_, dlam: float) -> np.ndarray:
    """Central difference along the first (lambda) axis; outermost samples zeroed."""
    return _derivative(slice_, dlam, 0)


# -- backprojection ----------------------------------------------------------------


def _slice(sino: Sinogram, stct_index: int) -> np.ndarray:
    if not 0 <= stct_index < sino.geometry.stct_count:
        raise IndexError(f"STCT index {stct_index} out of range")
    return np.asarray(sino.data[stct_index], dtype=float)


def _dbp_2d(kind, sino, stct_index, geom, grid, p0, weights, backend):
    theta = geom.theta(stct_index)
    w = redundancy_weights(geom, stct_index) if weights is None else weights
    q = preweight(_slice(sino, stct_index), geom, w)
    xs = grid.extended(p0).coords()
    ct, st = math.cos(theta), math.sin(theta)
    if kind == "D":
        G = derivative_u(q, geom.detector_pitch)
        lam = geom.lambdas()
        img, bad = _kernels.bp_d_2d(G, lam, geom.us()[0], geom.detector_pitch, xs, xs, ct, st, geom.l, geom.h, backend=backend)
        img *= INTEGRAL_FACTOR * geom.source_step
    else:
        G = derivative_lambda(q, geom.source_step)
        img, bad = _kernels.bp_s_2d(G, -geom.s, geom.source_step, geom.us(), xs, xs, ct, st, geom.l, geom.h, backend=backend)
        img *= INTEGRAL_FACTOR * geom.detector_pitch
    return DbpImage(img, theta - math.pi / 2, theta, kind, p0, grid.pitch, {"degenerate_pixels": bad})


def d_dbp_2d(sino: Sinogram, stct_index: int, geom: ScanGeometry, grid: ImageGrid, p0: int, weights=None, backend=None) -> DbpImage:
    """D-DBP: derivative along u, backprojected with weight 1/L^2."""
    return _dbp_2d("D", sino, stct_index, geom, grid, p0, weights, backend)


def s_dbp_2d(sino: Sinogram, stct_index: int, geom: ScanGeometry, grid: ImageGrid, p0: int, weights=None, backend=None) -> DbpImage:
    """S-DBP: derivative along lambda, backprojected with weight 1/H^2."""
    return _dbp_2d("S", sino, stct_index, geom, grid, p0, weights, backend)


def _dbp_3d(kind, sino, stct_index, geom, grid, p0, backend):
    if not sino.is_3d:
        raise ValueError("3D DBP needs a sinogram with detector rows")
    theta = geom.theta(stct_index)
    vs = sino.vs()
    q = preweight(_slice(sino, stct_index), geom, redundancy_weights(geom, stct_index), vs)
    xs = ImageGrid(grid.size, grid.pitch).extended(p0).coords()
    zs = grid.z_coords()
    ct, st = math.cos(theta), math.sin(theta)
    v0, dv = float(vs[0]), float(sino.row_pitch)
    if kind == "D":
        G = derivative_u(q, geom.detector_pitch)
        vol, bad = _kernels.bp_d_3d(
            G, geom.lambdas(), geom.us()[0], geom.detector_pitch, v0, dv, xs, xs, zs, ct, st, geom.l, geom.h, backend=backend
        )
        vol *= INTEGRAL_FACTOR * geom.source_step
    else:
        G = derivative_lambda(q, geom.source_step)
        vol, bad = _kernels.bp_s_3d(
            G, -geom.s, geom.source_step, geom.us(), v0, dv, xs, xs, zs, ct, st, geom.l, geom.h, backend=backend
        )
        vol *= INTEGRAL_FACTOR * geom.detector_pitch
    return DbpImage(vol, theta - math.pi / 2, theta, kind, p0, grid.pitch, {"degenerate_pixels": bad})


def d_dbp_3d(sino: Sinogram, stct_index: int, geom: ScanGeometry, grid: VoxelGrid, p0: int, backend=None) -> DbpImage:
    return _dbp_3d("D", sino, stct_index, geom, grid, p0, backend)


def s_dbp_3d(sino: Sinogram, stct_index: int, geom: ScanGeometry, grid: VoxelGrid, p0: int, backend=None) -> DbpImage:
    return _dbp_3d("S", sino, stct_index, geom, grid, p0, backend)


# -- boundary term -------------------------------------------------------------------


def _bilinear(table, lam0, dlam, u0, du, lam, u):
    n, m = table.shape
    fl = (lam - lam0) / dlam
    fu = (u - u0) / du
    if not (0.0 <= fl <= n - 1 and 0.0 <= fu <= m - 1):
        return 0.0
    i = min(int(fl), n - 2)
    j = min(int(fu), m - 2)
    wl, wu = fl - i, fu - j
    top = table[i, j] * (1 - wu) + table[i, j + 1] * wu
    bot = table[i + 1, j] * (1 - wu) + table[i + 1, j + 1] * wu
    return float(top * (1 - wl) + bot * wl)


def st_term(x: float, y: float, theta: float, eta: float, geom: ScanGeometry, sino_slice) -> float:
    """Boundary term of the general-direction D-DBP at one point; zero unless |theta - eta| < pi/2."""
    c, s = math.cos(theta), math.sin(theta)
    a = x * c + y * s
    b = -x * s + y * c
    L, H = b + geom.l, geom.h - b
    if abs(L) < DEGENERATE_TOL or abs(H) < DEGENERATE_TOL:
        raise DegenerateRay("point lies on the source or detector line")
    delta = theta - eta
    if not -math.pi / 2 < delta < math.pi / 2:
        return 0.0
    t = math.tan(delta)
    lam1 = a - L * t
    u1 = a + H * t
    D = geom.l + geom.h
    p = _bilinear(np.asarray(sino_slice, dtype=float), -geom.s, geom.source_step, geom.us()[0], geom.detector_pitch, lam1, u1)
    return D * p / (2.0 * abs(L) * math.sqrt(D * D + (lam1 - u1) ** 2))
