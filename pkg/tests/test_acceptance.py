"""Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned."""

import math

import numpy as np
import pytest

from mstct import dbp
from mstct.geometry import ScanGeometry, fov_radius, jacobian, ray_of, reference_geometry
from mstct.hilbert import HilbertRowContext, finite_hilbert_inverse_row, hilbert_forward_row, invert_dbp_per_stct
from mstct.metrics import disc_mask, region_std
from mstct.phantom import ImageGrid, VoxelGrid, ball, builtin_phantom, disc
from mstct.pipeline import ReconJob, reconstruct_2d, reconstruct_3d, run_sweep
from mstct.projector import Sinogram, add_poisson_noise, simulate

from .conftest import rel_l2, report

pytestmark = pytest.mark.slow


def test_criterion_1_geometry_constants():
    g = reference_geometry()
    rf, mag = fov_radius(g), g.magnification
    ok = abs(rf - 4.236) <= 0.001 and abs(mag - 13.667) <= 0.001
    report(1, ok, f"fov_radius={rf:.6f} mm (4.236 +/- 0.001), magnification={mag:.6f} (13.667 +/- 0.001)")
    assert ok


def test_criterion_2_jacobian():
    g = reference_geometry()
    rng = np.random.default_rng(2024)
    lam = rng.uniform(-g.s, g.s, 1000)
    u = rng.uniform(-g.d, g.d, 1000)
    eps = 1e-4

    def rays(a, b):
        phi, r = ray_of(a, b, 0.0, g)
        return phi, r

    p1, r1 = rays(lam + eps, u)
    p0, r0 = rays(lam - eps, u)
    q1, s1 = rays(lam, u + eps)
    q0, s0 = rays(lam, u - eps)
    fd = np.abs((p1 - p0) * (s1 - s0) - (q1 - q0) * (r1 - r0)) / (4 * eps * eps)
    exact = jacobian(lam, u, g)
    worst = float(np.max(np.abs(fd - exact) / exact))
    ok = worst <= 1e-6
    report(2, ok, f"max relative Jacobian error {worst:.2e} over 1000 points (<= 1e-6)")
    assert ok


def test_criterion_3_hilbert_pair():
    n, eps = 2048, 0.05
    pitch = 2 * (1 + eps) / n
    t = (np.arange(n) - (n - 1) / 2) * pitch
    # g = t on [-1, 1], continued outside by the closed-form transform of sqrt(1 - t^2)
    g = np.where(np.abs(t) <= 1, t, t - np.sign(t) * np.sqrt(np.maximum(t * t - 1, 0)))
    f = finite_hilbert_inverse_row(g, HilbertRowContext(n, pitch, epsilon=int(eps / 2 / pitch)))
    m = np.abs(t) <= 0.9
    pair = rel_l2(f[m], np.sqrt(1 - t[m] ** 2))

    x = np.linspace(-1, 1, 512)
    bump = np.where(np.abs(x) < 0.6, np.cos(np.pi * x / 1.2) ** 2, 0.0)
    back = finite_hilbert_inverse_row(hilbert_forward_row(bump), HilbertRowContext(512, epsilon=20))
    trip = rel_l2(back, bump)
    ok = pair <= 0.01 and trip <= 0.015
    report(3, ok, f"pair rel L2 {pair:.4f} (<= 0.01), bump round trip {trip:.4f} (<= 0.015)")
    assert ok


def test_criterion_4_dbp_hilbert_identity():
    # a single STCT whose rays span nearly the full half-turn
    g = ScanGeometry(15.0, 30.0, 88.0, 3801, 0.1, 2001)
    grid = ImageGrid(256, 6.0 / 256)
    d = dbp.d_dbp_2d(simulate(disc(2.0), g), 0, g, grid, 0)
    # central Hilbert line: the x axis, sitting between rows 127 and 128
    line = 0.5 * (d.values[127] + d.values[128])
    t = grid.coords()
    with np.errstate(divide="ignore"):
        ref = -2.0 * np.log(np.abs((t + 2.0) / (t - 2.0)))
    keep = np.abs(np.abs(t) - 2.0) > 3 * grid.pitch
    err = rel_l2(line[keep], ref[keep])
    ok = err <= 0.02
    report(4, ok, f"D-DBP vs -2 pi H f rel L2 {err:.4f} (<= 0.02)")
    assert ok


def test_criterion_5_sweep_trends():
    job = ReconJob(reference_geometry(), builtin_phantom("forbild_lite"), size=256)
    rows = run_sweep(job, [251, 501, 1001, 2001], ["d-bpf", "s-bpf"])
    d = {r["N"]: r["RMSE"] for r in rows if r["algo"] == "D-BPF"}
    s = [r["RMSE"] for r in rows if r["algo"] == "S-BPF"]
    flat = abs(d[2001] - d[251]) / d[251]
    decreasing = all(a > b for a, b in zip(s, s[1:]))
    ordered = d[251] < s[0]
    ok = flat <= 0.03 and decreasing and ordered
    detail = ", ".join(f"{r['algo']} N={r['N']} RMSE={r['RMSE']:.6f}" for r in rows)
    report(5, ok, f"(a) D change {flat:.4%} (<= 3%), (b) S decreasing={decreasing}, (c) D<S at 251={ordered}; {detail}")
    assert ok


def test_criterion_6_mid_plane():
    g = reference_geometry(501)
    pitch = 2 * fov_radius(g) / 64
    obj = ball(3.0)
    vol = reconstruct_3d(simulate(obj, g, rows=64, row_pitch=1.7), g, "D", VoxelGrid(64, pitch)).values
    flat = reconstruct_2d(simulate(obj.equator(), g), g, "D", ImageGrid(64, pitch)).values
    # 64 slices: z = 0 falls between slices 31 and 32
    mid = 0.5 * (vol[31] + vol[32])
    err = rel_l2(mid, flat)
    ok = err <= 0.01
    report(6, ok, f"3D z=0 slice vs 2D equatorial rel L2 {err:.5f} (<= 0.01)")
    assert ok


def test_criterion_7_noise_ordering():
    g = reference_geometry(2001)
    grid = ImageGrid(256, 2 * fov_radius(g) / 256)
    clean = simulate(disc(2.0, 0.5), g)
    region = disc_mask(grid.size, grid.pitch, 1.5)
    wins = []
    for seed in range(5):
        noisy = add_poisson_noise(clean, 1e5, seed)
        sd = region_std(reconstruct_2d(noisy, g, "D", grid).values, region)
        ss = region_std(reconstruct_2d(noisy, g, "S", grid).values, region)
        wins.append((seed, sd, ss))
    n_ok = sum(ss < sd for _, sd, ss in wins)
    ok = n_ok == 5
    detail = ", ".join(f"seed {k}: D={sd:.7f} S={ss:.7f}" for k, sd, ss in wins)
    report(7, ok, f"std(S) < std(D) for {n_ok}/5 seeds; {detail}")
    assert ok


def test_criterion_8_properties():
    g = ScanGeometry(15.0, 190.0, 10.0, 256, 0.508, 81, 5, 0.0, math.radians(36.5))
    grid = ImageGrid(48, 0.15)
    a = simulate(disc(2.0), g)
    b = simulate(disc(1.0, 0.7, 0.5, -0.3), g)
    mix = Sinogram(1.5 * a.data - 2.0 * b.data, g)
    lin = 0.0
    for algo in ("D", "S"):
        ra = reconstruct_2d(a, g, algo, grid).values
        rb = reconstruct_2d(b, g, algo, grid).values
        rm = reconstruct_2d(mix, g, algo, grid).values
        lin = max(lin, float(np.abs(rm - (1.5 * ra - 2.0 * rb)).max() / np.abs(rm).max()))

    zero = Sinogram(np.zeros_like(a.data), g)
    w = dbp.redundancy_weights(g, 0)
    stages = [
        dbp.preweight(zero.data[0], g, w),
        dbp.derivative_u(zero.data[0], g.detector_pitch),
        dbp.derivative_lambda(zero.data[0], g.source_step),
        dbp.d_dbp_2d(zero, 0, g, grid, 19).values,
        dbp.s_dbp_2d(zero, 0, g, grid, 19).values,
        invert_dbp_per_stct(dbp.d_dbp_2d(zero, 0, g, grid, 19), 48),
        reconstruct_2d(zero, g, "D", grid).values,
        reconstruct_2d(zero, g, "S", grid).values,
    ]
    zeros_ok = not any(np.any(s) for s in stages)

    t2 = reference_geometry(201)
    rf = fov_radius(t2)
    pou = 0.0
    for i in range(t2.stct_count):
        phi, r = ray_of(t2.lambdas()[:, None], t2.us()[None, ::4], t2.theta(i), t2)
        inside = np.abs(r) < rf
        total = sum(dbp.redundancy_weight_at(phi[inside], r[inside], j, t2) for j in range(t2.stct_count))
        pou = max(pou, float(np.abs(total - 1.0).max()))

    runs = [reconstruct_2d(add_poisson_noise(a, 1e4, 7), g, "S", grid).values for _ in range(2)]
    same = np.array_equal(runs[0], runs[1])

    ok = lin <= 1e-10 and zeros_ok and pou <= 1e-6 and same
    report(
        8,
        ok,
        f"linearity {lin:.2e} (<= 1e-10), zero in/zero out={zeros_ok}, partition of unity {pou:.2e} (<= 1e-6), bitwise rerun={same}",
    )
    assert ok
