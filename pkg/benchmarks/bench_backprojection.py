"""Time the numba and numpy backprojection kernels on one STCT.

    python3 benchmarks/bench_backprojection.py [--size 256] [--sources 501] [--repeat 3]

Run with MSTCT_DISABLE_NUMBA=1 to time the numpy path alone.
"""

import argparse
import math
import time

import numpy as np

from mstct import _kernels, dbp
from mstct._backend import HAVE_NUMBA
from mstct.geometry import fov_radius, reference_geometry
from mstct.hilbert import default_p0
from mstct.phantom import ImageGrid, builtin_phantom
from mstct.projector import simulate


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--sources", type=int, default=501)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    geom = reference_geometry(args.sources)
    grid = ImageGrid(args.size, 2 * fov_radius(geom) / args.size)
    sino = simulate(builtin_phantom("forbild_lite"), geom)
    q = dbp.preweight(sino.data[0], geom, dbp.redundancy_weights(geom, 0))
    xs = grid.extended(default_p0(args.size)).coords()
    ct, st = math.cos(geom.theta(0)), math.sin(geom.theta(0))
    gd = dbp.derivative_u(q, geom.detector_pitch)
    gs = dbp.derivative_lambda(q, geom.source_step)

    cases = {
        "D": lambda b: _kernels.bp_d_2d(gd, geom.lambdas(), geom.us()[0], geom.detector_pitch, xs, xs, ct, st, geom.l, geom.h, backend=b),
        "S": lambda b: _kernels.bp_s_2d(gs, -geom.s, geom.source_step, geom.us(), xs, xs, ct, st, geom.l, geom.h, backend=b),
    }
    backends = ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]
    print(f"grid {xs.size}^2, N={args.sources}, M={geom.detector_count}, best of {args.repeat}")
    print(f"{'kernel':<8}{'backend':<8}{'seconds':>10}{'speedup':>10}{'max diff':>12}")
    for name, run in cases.items():
        if HAVE_NUMBA:
            run("numba")  # compile outside the timed region
        results = {b: best_of(lambda: run(b), args.repeat) for b in backends}
        ref_t, (ref, _) = results["numpy"]
        for b in backends:
            t, (img, _) = results[b]
            diff = float(np.abs(img - ref).max())
            print(f"{name:<8}{b:<8}{t:>10.3f}{ref_t / t:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
