import math
from dataclasses import replace

import numpy as np
import pytest

from mstct._backend import HAVE_NUMBA
from mstct.errors import ConfigError, GeometryMismatch
from mstct.geometry import fov_radius
from mstct.hilbert import default_p0, invert_dbp_per_stct
from mstct import dbp
from mstct.phantom import ImageGrid, disc, rasterize
from mstct.pipeline import (
    ReconJob,
    desk_grid,
    extract_profile,
    load_recon,
    normalize_algo,
    reconstruct_2d,
    run_sweep,
    write_profile,
    write_sweep,
)
from mstct.projector import Sinogram, simulate


@pytest.fixture(scope="module")
def coarse():
    from mstct.geometry import ScanGeometry

    return ScanGeometry(15.0, 190.0, 10.0, 256, 0.508, 41, 5, 0.0, math.radians(36.5))


@pytest.fixture(scope="module")
def grid():
    return ImageGrid(48, 0.15)


@pytest.fixture(scope="module")
def disc_sino(coarse):
    return simulate(disc(2.0), coarse)


def test_normalize_algo():
    assert normalize_algo("D-BPF") == "D"
    assert normalize_algo("s") == "S"
    with pytest.raises(ConfigError):
        normalize_algo("fbp")


def test_desk_grid_covers_fov(ref_geom):
    g = desk_grid(ref_geom, 256)
    assert g.extent == pytest.approx(2 * fov_radius(ref_geom), rel=1e-12)


@pytest.mark.parametrize("algo", ["D", "S"])
def test_zero_in_zero_out(coarse, grid, algo):
    z = Sinogram(np.zeros((5, 41, 256)), coarse)
    assert not reconstruct_2d(z, coarse, algo, grid).values.any()


@pytest.mark.parametrize("algo", ["D", "S"])
def test_linearity(coarse, grid, disc_sino, algo):
    other = simulate(disc(1.0, 0.7, 0.5, -0.3), coarse)
    a = reconstruct_2d(disc_sino, coarse, algo, grid).values
    b = reconstruct_2d(other, coarse, algo, grid).values
    both = Sinogram(1.5 * disc_sino.data - 2.0 * other.data, coarse)
    ab = reconstruct_2d(both, coarse, algo, grid).values
    assert np.abs(ab - (1.5 * a - 2.0 * b)).max() <= 1e-10 * max(1.0, np.abs(ab).max())


def test_stct_sum_order(coarse, grid, disc_sino):
    full = reconstruct_2d(disc_sino, coarse, "D", grid).values
    p0 = default_p0(grid.size)
    parts = [invert_dbp_per_stct(dbp.d_dbp_2d(disc_sino, i, coarse, grid, p0), grid.size, p0) for i in range(5)]
    rev = np.zeros_like(full)
    for part in parts[::-1]:
        rev += part
    assert np.abs(rev - full).max() <= 1e-12


def test_deterministic(coarse, grid, disc_sino):
    a = reconstruct_2d(disc_sino, coarse, "S", grid).values
    b = reconstruct_2d(disc_sino, coarse, "S", grid).values
    assert np.array_equal(a, b)


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba disabled")
def test_backends_agree(coarse, grid, disc_sino):
    a = reconstruct_2d(disc_sino, coarse, "D", grid, backend="numba").values
    b = reconstruct_2d(disc_sino, coarse, "D", grid, backend="numpy").values
    assert np.abs(a - b).max() <= 1e-9


def test_geometry_mismatch(coarse, grid, disc_sino):
    with pytest.raises(GeometryMismatch):
        reconstruct_2d(disc_sino, coarse.with_sources(51), "D", grid)


def test_rejects_3d_input(coarse, grid):
    sino = Sinogram(np.zeros((5, 41, 3, 256)), coarse, 3, 0.5)
    with pytest.raises(ValueError):
        reconstruct_2d(sino, coarse, "D", grid)


def test_disc_reconstruction_shape(coarse, grid, disc_sino):
    # coarse sampling: only check the disc is clearly resolved
    img = reconstruct_2d(disc_sino, coarse, "D", grid).values
    c = grid.coords()
    r = np.hypot(c[None, :], c[:, None])
    assert img[r < 1.0].mean() > 0.8
    assert abs(img[(r > 2.6) & (r < 3.4)].mean()) < 0.25


def test_recon_export_round_trip(tmp_path, coarse, grid, disc_sino):
    rec = reconstruct_2d(disc_sino, coarse, "D", grid)
    rec.export(tmp_path / "r")
    back = load_recon(tmp_path / "r")
    assert back.algo == "D" and back.pitch == pytest.approx(grid.pitch)
    assert np.allclose(back.values, rec.values, rtol=1e-6, atol=1e-7)


# -- sweeps and profiles ---------------------------------------------------------------


def test_sweep_rows(tmp_path, coarse):
    job = ReconJob(coarse, disc(2.0), size=32, pitch=0.2)
    rows = run_sweep(job, [21, 41], ["d-bpf", "s-bpf"])
    assert [(r["algo"], r["N"]) for r in rows] == [("D-BPF", 21), ("D-BPF", 41), ("S-BPF", 21), ("S-BPF", 41)]
    assert all(r["RMSE"] > 0 and math.isfinite(r["PSNR"]) for r in rows)
    text = write_sweep(tmp_path / "s.csv", rows).read_text().splitlines()
    assert text[0] == "algo,N,RMSE,PSNR" and len(text) == 5


def test_sweep_empty_and_bad(coarse):
    job = ReconJob(coarse, disc(2.0), size=32, pitch=0.2)
    assert run_sweep(job, []) == []
    with pytest.raises(ConfigError):
        run_sweep(job, [1])


def test_job_mask_is_fov_disc(coarse):
    job = ReconJob(coarse, disc(1.0), size=64)
    m = job.mask()
    g = job.grid()
    assert m[32, 32] and not m[0, 0]
    assert m.sum() == pytest.approx(math.pi * (fov_radius(coarse) / g.pitch) ** 2, rel=0.03)


def test_profiles(tmp_path):
    img = np.arange(25.0).reshape(5, 5)
    assert list(extract_profile(img, "row:1")) == [5, 6, 7, 8, 9]
    assert list(extract_profile(img, "col:4")) == [4, 9, 14, 19, 24]
    assert list(extract_profile(img, "line:0,0,0,4")) == [0, 1, 2, 3, 4]
    diag = extract_profile(img, "line:0,0,4,4")  # unit steps, nearest pixel
    assert diag.size == 7 and diag[0] == 0 and diag[-1] == 24 and np.all(np.diff(diag) >= 0)
    vol = np.stack([img, 10 * img, 100 * img])
    assert list(extract_profile(vol, "row:0")) == [0, 10, 20, 30, 40]
    assert list(extract_profile(vol, "z:2;col:0")) == [0, 500, 1000, 1500, 2000]
    for bad in ("row:9", "diag:1", "line:1,2"):
        with pytest.raises(ConfigError):
            extract_profile(img, bad)
    lines = write_profile(tmp_path / "p.csv", [1.0, 2.5]).read_text().splitlines()
    assert lines == ["index,value", "0,1.0", "1,2.5"]


def test_rasterized_reference_matches_grid(coarse):
    job = ReconJob(coarse, disc(1.0), size=32, pitch=0.2)
    ref = rasterize(job.phantom, job.grid())
    assert ref.shape == (32, 32) and ref.max() == 1.0


def test_rotation_equivariance(coarse, grid):
    # a quarter turn of both phantom and scan rotates the image by a quarter turn
    turned = replace(coarse, theta_0=math.pi / 2)
    a = reconstruct_2d(simulate(disc(1.2, 1.0, 0.8, 0.3), coarse), coarse, "D", grid).values
    b = reconstruct_2d(simulate(disc(1.2, 1.0, -0.3, 0.8), turned), turned, "D", grid).values
    assert np.linalg.norm(np.rot90(a, -1) - b) / np.linalg.norm(b) <= 0.03
