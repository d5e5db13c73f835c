"""mSTCT scan geometry and the fan-beam <-> parallel-beam coordinate maps.

Frame convention (per STCT with translation angle ``theta``)::

    e_t = ( cos theta, sin theta)     translation direction (lambda and u grow along it)
    e_n = (-sin theta, cos theta)     source -> detector direction

    source   S(lambda) = lambda * e_t - l * e_n
    detector D(u)      = u * e_t + h * e_n

For a point ``x`` with ``a = x . e_t`` and ``b = x . e_n`` the distance to the
source line is ``L = b + l`` and to the detector line ``H = h - b``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateRay

DEGENERATE_TOL = 1e-9  # mm

GEOMETRY_KEYS = (
    "l_mm",
    "h_mm",
    "s_mm",
    "detector_count",
    "detector_pitch_mm",
    "sources_per_stct",
    "stct_count",
    "theta0_deg",
    "delta_theta_deg",
)


@dataclass(frozen=True)
class ScanGeometry:
    """All geometric parameters of an mSTCT acquisition (lengths in mm, angles in rad)."""

    l: float
    h: float
    s: float
    detector_count: int
    detector_pitch: float
    sources_per_stct: int
    stct_count: int = 1
    theta_0: float = 0.0
    delta_theta: float = 0.0

    def __post_init__(self):
        if not (self.l > 0 and self.h > 0 and self.s > 0 and self.detector_pitch > 0):
            raise ValueError("l, h, s and detector_pitch must be positive")
        if self.detector_count < 2 or self.sources_per_stct < 2 or self.stct_count < 1:
            raise ValueError("need detector_count >= 2, sources_per_stct >= 2, stct_count >= 1")
        for name in ("l", "h", "s", "detector_pitch", "theta_0", "delta_theta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    # derived quantities -------------------------------------------------

    @property
    def d(self) -> float:
        """Half detector length."""
        return self.detector_count * self.detector_pitch / 2.0

    @property
    def source_step(self) -> float:
        return 2.0 * self.s / (self.sources_per_stct - 1)

    @property
    def magnification(self) -> float:
        return (self.l + self.h) / self.l

    @property
    def fan_half_angle(self) -> float:
        """Largest deviation of a measured ray from e_n, arctan((s+d)/(l+h))."""
        return math.atan((self.s + self.d) / (self.l + self.h))

    def thetas(self) -> np.ndarray:
        i = np.arange(self.stct_count)
        return np.mod(self.theta_0 + i * self.delta_theta, 2.0 * np.pi)

    def theta(self, index: int) -> float:
        if not 0 <= index < self.stct_count:
            raise IndexError(f"STCT index {index} out of range [0, {self.stct_count})")
        return float(self.thetas()[index])

    def lambdas(self) -> np.ndarray:
        """Source positions, endpoints included."""
        return np.linspace(-self.s, self.s, self.sources_per_stct)

    def us(self) -> np.ndarray:
        """Detector cell centres."""
        k = np.arange(self.detector_count)
        return (k - (self.detector_count - 1) / 2.0) * self.detector_pitch

    def with_sources(self, n: int) -> "ScanGeometry":
        return replace(self, sources_per_stct=int(n))

    # serialisation ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "l_mm": self.l,
            "h_mm": self.h,
            "s_mm": self.s,
            "detector_count": self.detector_count,
            "detector_pitch_mm": self.detector_pitch,
            "sources_per_stct": self.sources_per_stct,
            "stct_count": self.stct_count,
            "theta0_deg": math.degrees(self.theta_0),
            "delta_theta_deg": math.degrees(self.delta_theta),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScanGeometry":
        missing = [k for k in GEOMETRY_KEYS if k not in doc]
        if missing:
            raise ConfigError(f"geometry is missing keys: {', '.join(missing)}")
        try:
            return cls(
                l=float(doc["l_mm"]),
                h=float(doc["h_mm"]),
                s=float(doc["s_mm"]),
                detector_count=int(doc["detector_count"]),
                detector_pitch=float(doc["detector_pitch_mm"]),
                sources_per_stct=int(doc["sources_per_stct"]),
                stct_count=int(doc["stct_count"]),
                theta_0=float(doc["theta0_deg"]) * math.pi / 180.0,
                delta_theta=float(doc["delta_theta_deg"]) * math.pi / 180.0,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid geometry: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ScanGeometry":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def close_to(self, other: "ScanGeometry", rtol: float = 1e-9) -> bool:
        a, b = self.to_dict(), other.to_dict()
        return all(math.isclose(float(a[k]), float(b[k]), rel_tol=rtol, abs_tol=1e-9) for k in GEOMETRY_KEYS)


def reference_geometry(sources_per_stct: int = 2001) -> ScanGeometry:
    """Desk-scale reference configuration: 1024 x 0.127 mm detector, l=15, h=190, 2s=20, T=5, 36.5 deg."""
    return ScanGeometry(
        l=15.0,
        h=190.0,
        s=10.0,
        detector_count=1024,
        detector_pitch=0.127,
        sources_per_stct=sources_per_stct,
        stct_count=5,
        theta_0=0.0,
        delta_theta=36.5 * math.pi / 180.0,
    )


@dataclass(frozen=True)
class Ray:
    phi: float
    r: float


def ray_of(lam, u, theta, geom: ScanGeometry):
    """Parallel-beam coordinates of the ray from source ``lam`` to detector cell ``u``.

    Works elementwise on arrays; returns ``(phi, r)`` with phi reduced to [0, 2 pi).
    """
    D = geom.l + geom.h
    diff = np.subtract(lam, u)
    r = (np.multiply(lam, geom.h) + np.multiply(u, geom.l)) / np.sqrt(D * D + diff * diff)
    phi = np.mod(theta + np.arctan(diff / D), 2.0 * np.pi)
    if np.ndim(r) == 0:
        return Ray(float(phi), float(r))
    return phi, r


def source_detector_of(phi, r, theta, geom: ScanGeometry):
    """Inverse of :func:`ray_of` for a ray whose angle lies within pi/2 of ``theta``.

    Returns ``(lam, u)`` of the source/detector positions on the STCT's lines.
    """
    alpha = np.asarray(phi, dtype=float) - theta
    k = np.floor((alpha + np.pi / 2) / np.pi)
    alpha = alpha - k * np.pi
    r = np.where(np.mod(k, 2) == 0, r, np.negative(r))  # (phi + pi, -r) is the same line
    cos_a = np.cos(alpha)
    tan_a = np.tan(alpha)
    lam = r / cos_a + geom.l * tan_a
    u = r / cos_a - geom.h * tan_a
    return lam, u


def fov_radius(geom: ScanGeometry) -> float:
    """Radius of the region with complete angular coverage; <= 0 means empty."""
    D = geom.l + geom.h
    return (geom.s * geom.h - geom.d * geom.l) / math.hypot(D, geom.s + geom.d)


def jacobian(lam, u, geom: ScanGeometry):
    """|d(phi, r) / d(lam, u)| of the fan -> parallel change of variables."""
    D = geom.l + geom.h
    diff = np.subtract(lam, u)
    return D * D / (D * D + diff * diff) ** 1.5


def _frame(x, y, theta):
    c, s = math.cos(theta), math.sin(theta)
    a = np.multiply(x, c) + np.multiply(y, s)
    b = -np.multiply(x, s) + np.multiply(y, c)
    return a, b


def u_star(x, y, lam, theta, geom: ScanGeometry):
    """Detector position hit by the ray from source ``lam`` through (x, y)."""
    a, b = _frame(x, y, theta)
    L = b + geom.l
    H = geom.h - b
    if np.any(np.abs(L) < DEGENERATE_TOL):
        raise DegenerateRay("point lies on the source trajectory (L = 0)")
    return ((geom.l + geom.h) * a - np.multiply(lam, H)) / L


def lambda_star(x, y, u, theta, geom: ScanGeometry):
    """Source position whose ray through (x, y) reaches detector cell ``u``."""
    a, b = _frame(x, y, theta)
    L = b + geom.l
    H = geom.h - b
    if np.any(np.abs(H) < DEGENERATE_TOL):
        raise DegenerateRay("point lies on the detector line (H = 0)")
    return ((geom.l + geom.h) * a - np.multiply(u, L)) / H


def sampling_resolutions(geom: ScanGeometry):
    """(source-limited, detector-limited) resolution at the isocentre in mm."""
    D = geom.l + geom.h
    return geom.source_step * geom.h / D, geom.detector_pitch * geom.l / D


def coverage_interval(r, geom: ScanGeometry):
    """Range ``[alpha_lo, alpha_hi]`` of ray angles (relative to theta) at which one STCT
    measures lines with signed offset ``r``.

    Empty where ``alpha_lo > alpha_hi``. Derived from ``|lambda| <= s`` and ``|u| <= d``
    with ``lambda = r/cos(a) + l tan(a)`` and ``u = r/cos(a) - h tan(a)``.
    """
    l, h, s, d = geom.l, geom.h, geom.s, geom.d
    r = np.asarray(r, dtype=float)
    rs = np.hypot(l, s)
    rd = np.hypot(h, d)
    src_off = np.arcsin(np.clip(r / rs, -1.0, 1.0))
    det_off = np.arcsin(np.clip(r / rd, -1.0, 1.0))
    a_s = math.atan2(s, l)
    a_d = math.atan2(d, h)
    lo = np.maximum(-a_s - src_off, -a_d + det_off)
    hi = np.minimum(a_s - src_off, a_d + det_off)
    bad = np.abs(r) >= np.minimum(rs, rd)
    lo = np.where(bad, np.inf, lo)
    hi = np.where(bad, -np.inf, hi)
    return lo, hi
