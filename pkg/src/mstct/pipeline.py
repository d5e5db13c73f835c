"""Full BPF reconstructions: per-STCT DBP, finite Hilbert inversion, sum over STCTs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import dbp as _dbp
from . import rawio
from .errors import ConfigError, GeometryMismatch
from .geometry import ScanGeometry, fov_radius
from .hilbert import default_p0, invert_dbp_per_stct
from .metrics import disc_mask, psnr, rmse
from .phantom import ImageGrid, Phantom, VoxelGrid, rasterize
from .projector import Sinogram, add_poisson_noise, simulate

ALGORITHMS = {"d": "D", "d-bpf": "D", "s": "S", "s-bpf": "S"}


def normalize_algo(algo: str) -> str:
    try:
        return ALGORITHMS[str(algo).strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown algorithm {algo!r}; use d-bpf or s-bpf") from None


@dataclass
class ReconImage:
    """Reconstruction on a centred grid; 3D values are indexed (z, y, x)."""

    values: np.ndarray
    pitch: float
    algo: str
    diagnostics: dict

    def export(self, path):
        order = "z,y,x" if self.values.ndim == 3 else "y,x"
        return rawio.write_raw(path, self.values, "recon", order, pitch_mm=self.pitch, algo=self.algo)


def load_recon(path) -> ReconImage:
    data, hdr = rawio.read_raw(path, kind="recon")
    return ReconImage(data.astype(float), float(hdr.get("pitch_mm", 1.0)), str(hdr.get("algo", "?")), {})


def desk_grid(geom: ScanGeometry, size: int = 256) -> ImageGrid:
    """Grid whose side equals the FOV diameter."""
    rf = fov_radius(geom)
    if rf <= 0:
        raise ConfigError("geometry has an empty field of view; give the grid pitch explicitly")
    return ImageGrid(size, 2.0 * rf / size)


def _check(sino: Sinogram, geom: ScanGeometry | None) -> ScanGeometry:
    if geom is not None and not geom.close_to(sino.geometry):
        raise GeometryMismatch("sinogram geometry differs from the requested geometry")
    return sino.geometry


def reconstruct_2d(
    sino: Sinogram,
    geom: ScanGeometry | None = None,
    algo: str = "D",
    grid: ImageGrid | None = None,
    p0: int | None = None,
    backend: str | None = None,
) -> ReconImage:
    kind = normalize_algo(algo)
    geom = _check(sino, geom)
    if sino.is_3d:
        raise ValueError("reconstruct_2d needs a 2D sinogram; use mid_plane() or reconstruct_3d")
    grid = desk_grid(geom) if grid is None else grid
    p0 = default_p0(grid.size) if p0 is None else int(p0)
    run = _dbp.d_dbp_2d if kind == "D" else _dbp.s_dbp_2d
    parts = []
    bad = 0
    for i in range(geom.stct_count):
        img = run(sino, i, geom, grid, p0, backend=backend)
        bad += img.diagnostics["degenerate_pixels"]
        parts.append(invert_dbp_per_stct(img, grid.size, p0))
    total = np.zeros((grid.size, grid.size))
    for part in parts:  # fixed index order
        total += part
    return ReconImage(total, grid.pitch, kind, {"degenerate_pixels": bad, "p0": p0})


def reconstruct_3d(
    sino: Sinogram,
    geom: ScanGeometry | None = None,
    algo: str = "D",
    grid: VoxelGrid | None = None,
    p0: int | None = None,
    backend: str | None = None,
) -> ReconImage:
    kind = normalize_algo(algo)
    geom = _check(sino, geom)
    if not sino.is_3d:
        raise ValueError("reconstruct_3d needs a sinogram with detector rows")
    if grid is None:
        g2 = desk_grid(geom, 64)
        grid = VoxelGrid(g2.size, g2.pitch)
    p0 = default_p0(grid.size) if p0 is None else int(p0)
    run = _dbp.d_dbp_3d if kind == "D" else _dbp.s_dbp_3d
    total = np.zeros((grid.depth, grid.size, grid.size))
    bad = 0
    for i in range(geom.stct_count):
        vol = run(sino, i, geom, grid, p0, backend=backend)
        bad += vol.diagnostics["degenerate_pixels"]
        total += invert_dbp_per_stct(vol, grid.size, p0)
    return ReconImage(total, grid.pitch, kind, {"degenerate_pixels": bad, "p0": p0})


# -- jobs and sweeps ---------------------------------------------------------------


@dataclass
class ReconJob:
    geometry: ScanGeometry
    phantom: Phantom
    algo: str = "D"
    size: int = 256
    pitch: float | None = None
    p0: int | None = None
    i0: float | None = None
    seed: int = 0
    rows: int | None = None
    row_pitch: float | None = None

    def grid(self) -> ImageGrid:
        if self.pitch is None:
            return desk_grid(self.geometry, self.size)
        return ImageGrid(self.size, self.pitch)

    def mask(self) -> np.ndarray:
        g = self.grid()
        return disc_mask(g.size, g.pitch, min(fov_radius(self.geometry), g.size * g.pitch / 2))

    def acquire(self) -> Sinogram:
        sino = simulate(self.phantom, self.geometry, self.rows, self.row_pitch)
        if self.i0 is not None:
            sino = add_poisson_noise(sino, self.i0, self.seed)
        return sino

    def run(self, sino: Sinogram | None = None, backend: str | None = None) -> ReconImage:
        sino = self.acquire() if sino is None else sino
        if self.rows is not None:
            g = self.grid()
            return reconstruct_3d(sino, self.geometry, self.algo, VoxelGrid(g.size, g.pitch), self.p0, backend)
        return reconstruct_2d(sino, self.geometry, self.algo, self.grid(), self.p0, backend)


SWEEP_FIELDS = ("algo", "N", "RMSE", "PSNR")


def run_sweep(job: ReconJob, n_values, algos=None, backend: str | None = None) -> list[dict]:
    """Simulate, reconstruct and score ``job`` for every N (and algorithm)."""
    n_values = [int(n) for n in n_values]
    if any(n < 2 for n in n_values):
        raise ConfigError("every N must be >= 2")
    algos = [job.algo] if algos is None else list(algos)
    grid = job.grid()
    ref = rasterize(job.phantom, grid)
    mask = job.mask()
    rows = []
    for algo in algos:
        kind = normalize_algo(algo)
        for n in n_values:
            j = replace(job, geometry=job.geometry.with_sources(n), algo=kind)
            img = j.run(backend=backend).values
            rows.append({"algo": f"{kind}-BPF", "N": n, "RMSE": rmse(img, ref, mask), "PSNR": psnr(img, ref, mask)})
    return rows


def write_sweep(path, rows: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path


# -- profiles ----------------------------------------------------------------------


def extract_profile(img, spec: str) -> np.ndarray:
    """Samples along ``row:i``, ``col:j`` or ``line:r0,c0,r1,c1`` (nearest pixel, unit steps).

    3D volumes are profiled on their central z slice unless the text starts with ``z:k;``.
    """
    img = np.asarray(img, dtype=float)
    spec = spec.strip()
    if img.ndim == 3:
        k = img.shape[0] // 2
        if spec.startswith("z:"):
            head, _, spec = spec.partition(";")
            k = int(head[2:])
        img = img[k]
    kind, _, arg = spec.partition(":")
    try:
        if kind == "row":
            return img[int(arg), :].copy()
        if kind == "col":
            return img[:, int(arg)].copy()
        if kind == "line":
            r0, c0, r1, c1 = (float(v) for v in arg.split(","))
            n = int(math.ceil(math.hypot(r1 - r0, c1 - c0))) + 1
            rr = np.rint(np.linspace(r0, r1, n)).astype(int)
            cc = np.rint(np.linspace(c0, c1, n)).astype(int)
            return img[rr, cc]
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad profile {spec!r}: {exc}") from exc
    raise ConfigError(f"bad profile {spec!r}; use row:i, col:j or line:r0,c0,r1,c1")


def write_profile(path, values) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "value"])
        for i, v in enumerate(np.asarray(values, dtype=float)):
            w.writerow([i, repr(float(v))])
    return path
