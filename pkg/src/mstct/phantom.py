"""Analytic ellipse (2D) and ellipsoid (3D) phantoms.

Densities compose additively, so negative densities carve holes as in the
Shepp-Logan tables. Line integrals are exact chord lengths.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import FormatError

FIELDS_2D = ("cx_mm", "cy_mm", "a_mm", "b_mm", "angle_deg", "density")
FIELDS_3D = ("cx_mm", "cy_mm", "cz_mm", "a_mm", "b_mm", "c_mm", "angle_deg", "angle2_deg", "density")


@dataclass(frozen=True)
class Ellipse:
    cx: float
    cy: float
    a: float
    b: float
    angle: float  # rad, rotation of the a-axis from +x
    density: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("semi-axes must be positive")


@dataclass(frozen=True)
class Ellipsoid:
    cx: float
    cy: float
    cz: float
    a: float
    b: float
    c: float
    angle: float  # rad, about z
    angle2: float = 0.0  # rad, tilt about the (rotated) y axis
    density: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.c > 0):
            raise ValueError("semi-axes must be positive")

    def rotation(self) -> np.ndarray:
        """Columns are the ellipsoid's a, b, c axes in world coordinates."""
        cz, sz = math.cos(self.angle), math.sin(self.angle)
        cy, sy = math.cos(self.angle2), math.sin(self.angle2)
        rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
        ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
        return rz @ ry

    def equator(self) -> Ellipse:
        """Cross-section with the z = 0 plane for an untilted ellipsoid."""
        if self.angle2 != 0.0:
            raise ValueError("equatorial section only defined for untilted ellipsoids")
        if abs(self.cz) >= self.c:
            raise ValueError("ellipsoid does not cut z = 0")
        k = math.sqrt(1.0 - (self.cz / self.c) ** 2)
        return Ellipse(self.cx, self.cy, self.a * k, self.b * k, self.angle, self.density)


@dataclass(frozen=True)
class Phantom:
    components: tuple = ()

    @property
    def ndim(self) -> int:
        if self.components and isinstance(self.components[0], Ellipsoid):
            return 3
        return 2

    def scaled(self, factor: float) -> "Phantom":
        from dataclasses import replace

        return Phantom(tuple(replace(c, density=c.density * factor) for c in self.components))

    def equator(self) -> "Phantom":
        return Phantom(tuple(c.equator() for c in self.components if abs(c.cz) < c.c))


def disc(radius: float, density: float = 1.0, cx: float = 0.0, cy: float = 0.0) -> Phantom:
    return Phantom((Ellipse(cx, cy, radius, radius, 0.0, density),))


def ball(radius: float, density: float = 1.0) -> Phantom:
    return Phantom((Ellipsoid(0.0, 0.0, 0.0, radius, radius, radius, 0.0, 0.0, density),))


# -- line integrals -----------------------------------------------------------


def _ellipse_chord(e: Ellipse, cos_phi, sin_phi, r):
    # line {x : x . n = r}, n = (cos phi, sin phi); rotate n into the ellipse frame
    ca, sa = math.cos(e.angle), math.sin(e.angle)
    n1 = cos_phi * ca + sin_phi * sa
    n2 = -cos_phi * sa + sin_phi * ca
    rp = r - (e.cx * cos_phi + e.cy * sin_phi)
    s2 = (e.a * n1) ** 2 + (e.b * n2) ** 2
    disc_ = s2 - rp * rp
    return np.where(disc_ > 0.0, 2.0 * e.a * e.b * np.sqrt(np.maximum(disc_, 0.0)) / s2, 0.0)


def line_integrals(phantom: Phantom, phi, r) -> np.ndarray:
    """Vectorised line integrals along the lines ``x cos(phi) + y sin(phi) = r``."""
    phi = np.asarray(phi, dtype=float)
    r = np.asarray(r, dtype=float)
    cos_phi, sin_phi = np.cos(phi), np.sin(phi)
    out = np.zeros(np.broadcast(phi, r).shape)
    for e in phantom.components:
        out += e.density * _ellipse_chord(e, cos_phi, sin_phi, r)
    return out


def line_integral(phantom: Phantom, ray) -> float:
    return float(line_integrals(phantom, ray.phi, ray.r))


def line_integrals_3d(phantom: Phantom, points, directions) -> np.ndarray:
    """Line integrals along ``points + t * directions`` (unit directions, shape (..., 3))."""
    P = np.asarray(points, dtype=float)
    d = np.asarray(directions, dtype=float)
    shape = np.broadcast_shapes(P.shape, d.shape)[:-1]
    out = np.zeros(shape)
    for e in phantom.components:
        R = e.rotation()
        scale = np.array([e.a, e.b, e.c])
        q = ((P - np.array([e.cx, e.cy, e.cz])) @ R) / scale
        v = (d @ R) / scale
        vv = np.einsum("...i,...i->...", v, v)
        qv = np.einsum("...i,...i->...", q, v)
        qq = np.einsum("...i,...i->...", q, q)
        disc_ = qv * qv - vv * (qq - 1.0)
        out += e.density * np.where(disc_ > 0.0, 2.0 * np.sqrt(np.maximum(disc_, 0.0)) / vv, 0.0)
    return out


def line_integral_3d(phantom: Phantom, point, direction) -> float:
    return float(line_integrals_3d(phantom, point, direction))


# -- grids and rasterisation --------------------------------------------------


@dataclass(frozen=True)
class ImageGrid:
    """Square pixel grid centred on the isocentre; pixel (i, j) is (y_i, x_j)."""

    size: int
    pitch: float

    def __post_init__(self):
        if self.size < 2 or not self.pitch > 0:
            raise ValueError("grid needs size >= 2 and positive pitch")

    def coords(self) -> np.ndarray:
        return (np.arange(self.size) - (self.size - 1) / 2.0) * self.pitch

    def extended(self, p0: int) -> "ImageGrid":
        return ImageGrid(self.size + 2 * p0, self.pitch)

    @property
    def extent(self) -> float:
        return self.size * self.pitch


@dataclass(frozen=True)
class VoxelGrid:
    """Cubic voxel grid, volume indexed (z, y, x); ``nz`` defaults to ``size``."""

    size: int
    pitch: float
    nz: int | None = None

    def __post_init__(self):
        if self.size < 2 or not self.pitch > 0:
            raise ValueError("grid needs size >= 2 and positive pitch")

    @property
    def depth(self) -> int:
        return self.size if self.nz is None else self.nz

    def coords(self) -> np.ndarray:
        return (np.arange(self.size) - (self.size - 1) / 2.0) * self.pitch

    def z_coords(self) -> np.ndarray:
        return (np.arange(self.depth) - (self.depth - 1) / 2.0) * self.pitch

    def plane(self) -> ImageGrid:
        return ImageGrid(self.size, self.pitch)


def rasterize(phantom: Phantom, grid) -> np.ndarray:
    """Sum of component densities at each pixel/voxel centre."""
    if isinstance(grid, VoxelGrid):
        z = grid.z_coords()[:, None, None]
        y = grid.coords()[None, :, None]
        x = grid.coords()[None, None, :]
        img = np.zeros((grid.depth, grid.size, grid.size))
        for e in phantom.components:
            R = e.rotation()
            dx, dy, dz = x - e.cx, y - e.cy, z - e.cz
            q0 = (dx * R[0, 0] + dy * R[1, 0] + dz * R[2, 0]) / e.a
            q1 = (dx * R[0, 1] + dy * R[1, 1] + dz * R[2, 1]) / e.b
            q2 = (dx * R[0, 2] + dy * R[1, 2] + dz * R[2, 2]) / e.c
            img += np.where(q0 * q0 + q1 * q1 + q2 * q2 <= 1.0, e.density, 0.0)
        return img

    y = grid.coords()[:, None]
    x = grid.coords()[None, :]
    img = np.zeros((grid.size, grid.size))
    for e in phantom.components:
        ca, sa = math.cos(e.angle), math.sin(e.angle)
        dx, dy = x - e.cx, y - e.cy
        p = (dx * ca + dy * sa) / e.a
        q = (-dx * sa + dy * ca) / e.b
        img += np.where(p * p + q * q <= 1.0, e.density, 0.0)
    return img


# -- files ---------------------------------------------------------------------


def _parse(text: str, source: str) -> Phantom:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        return Phantom(())
    reader = csv.DictReader(io.StringIO("\n".join(lines)))
    header = tuple(h.strip() for h in (reader.fieldnames or ()))
    if header == FIELDS_2D:
        make = lambda row: Ellipse(
            row["cx_mm"], row["cy_mm"], row["a_mm"], row["b_mm"], math.radians(row["angle_deg"]), row["density"]
        )
    elif header == FIELDS_3D:
        make = lambda row: Ellipsoid(
            row["cx_mm"],
            row["cy_mm"],
            row["cz_mm"],
            row["a_mm"],
            row["b_mm"],
            row["c_mm"],
            math.radians(row["angle_deg"]),
            math.radians(row["angle2_deg"]),
            row["density"],
        )
    else:
        raise FormatError(f"{source}: unrecognised phantom header {header}")
    comps = []
    for n, raw in enumerate(reader, start=2):
        try:
            row = {k.strip(): float(v) for k, v in raw.items()}
            comps.append(make(row))
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{source}: bad component on data line {n}: {exc}") from exc
    return Phantom(tuple(comps))


def load_phantom(path) -> Phantom:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"phantom file not found: {path}")
    return _parse(path.read_text(), str(path))


def save_phantom(phantom: Phantom, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if phantom.ndim == 3:
        w.writerow(FIELDS_3D)
        for e in phantom.components:
            w.writerow([e.cx, e.cy, e.cz, e.a, e.b, e.c, math.degrees(e.angle), math.degrees(e.angle2), e.density])
    else:
        w.writerow(FIELDS_2D)
        for e in phantom.components:
            w.writerow([e.cx, e.cy, e.a, e.b, math.degrees(e.angle), e.density])
    Path(path).write_text(buf.getvalue())


BUILTIN = ("shepp_logan", "shepp_logan_3d", "forbild_lite")


def builtin_phantom(name: str) -> Phantom:
    """Shipped phantoms sized for the 4.2 mm field of view of the reference geometry."""
    if name not in BUILTIN:
        raise KeyError(f"unknown builtin phantom {name!r}; choose from {BUILTIN}")
    text = resources.files("mstct").joinpath("data").joinpath(f"{name}.csv").read_text()
    return _parse(text, name)
