"""Backprojection kernels for differentiated backprojection.

Each kernel exists twice: a numba ``@njit(parallel=True)`` version that loops
per pixel, and a numpy version vectorised over pixels that loops over the
integration variable. Both sum the integration samples in index order, so
they agree to rounding. :func:`mstct._backend.use_numba` picks one.

Per-pixel accumulation order is fixed, so results do not depend on the
number of threads.
"""

import numpy as np

from ._backend import HAVE_NUMBA

DEGENERATE_TOL = 1e-9

if HAVE_NUMBA:
    from numba import njit, prange
else:  # pragma: no cover - exercised with MSTCT_DISABLE_NUMBA=1

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap

    prange = range


# -- numba path ------------------------------------------------------------------


@njit(parallel=True, cache=True)
def _bp_d_2d_nb(G, lam, u0, du, xs, ys, ct, st, l, h):
    n_lam, m = G.shape
    ny, nx = ys.size, xs.size
    out = np.zeros((ny, nx))
    degenerate = np.zeros(ny, dtype=np.int64)
    D = l + h
    for i in prange(ny):
        y = ys[i]
        for j in range(nx):
            x = xs[j]
            a = x * ct + y * st
            b = -x * st + y * ct
            L = b + l
            H = h - b
            if abs(L) < DEGENERATE_TOL:
                degenerate[i] += 1
                continue
            acc = 0.0
            for k in range(n_lam):
                f = ((D * a - lam[k] * H) / L - u0) / du
                if f < 0.0 or f > m - 1:
                    continue
                c = int(f)
                if c == m - 1:
                    c = m - 2
                w = f - c
                acc += G[k, c] * (1.0 - w) + G[k, c + 1] * w
            out[i, j] = acc / (L * L)
    return out, degenerate.sum()


@njit(parallel=True, cache=True)
def _bp_s_2d_nb(G, lam0, dlam, us, xs, ys, ct, st, l, h):
    n_lam, m = G.shape
    ny, nx = ys.size, xs.size
    out = np.zeros((ny, nx))
    degenerate = np.zeros(ny, dtype=np.int64)
    D = l + h
    for i in prange(ny):
        y = ys[i]
        for j in range(nx):
            x = xs[j]
            a = x * ct + y * st
            b = -x * st + y * ct
            L = b + l
            H = h - b
            if abs(H) < DEGENERATE_TOL:
                degenerate[i] += 1
                continue
            acc = 0.0
            for k in range(m):
                f = ((D * a - us[k] * L) / H - lam0) / dlam
                if f < 0.0 or f > n_lam - 1:
                    continue
                c = int(f)
                if c == n_lam - 1:
                    c = n_lam - 2
                w = f - c
                acc += G[c, k] * (1.0 - w) + G[c + 1, k] * w
            out[i, j] = acc / (H * H)
    return out, degenerate.sum()


@njit(parallel=True, cache=True)
def _bp_d_3d_nb(G, lam, u0, du, v0, dv, xs, ys, zs, ct, st, l, h):
    n_lam, mv, m = G.shape
    nz, ny, nx = zs.size, ys.size, xs.size
    out = np.zeros((nz, ny, nx))
    degenerate = np.zeros(ny, dtype=np.int64)
    D = l + h
    for i in prange(ny):
        y = ys[i]
        for j in range(nx):
            x = xs[j]
            a = x * ct + y * st
            b = -x * st + y * ct
            L = b + l
            H = h - b
            if abs(L) < DEGENERATE_TOL:
                degenerate[i] += nz
                continue
            inv_l2 = 1.0 / (L * L)
            for iz in range(nz):
                fv = (zs[iz] * D / L - v0) / dv
                if fv < 0.0 or fv > mv - 1:
                    continue
                r = int(fv)
                if r == mv - 1:
                    r = mv - 2
                wv = fv - r
                acc = 0.0
                for k in range(n_lam):
                    f = ((D * a - lam[k] * H) / L - u0) / du
                    if f < 0.0 or f > m - 1:
                        continue
                    c = int(f)
                    if c == m - 1:
                        c = m - 2
                    w = f - c
                    lo = G[k, r, c] * (1.0 - w) + G[k, r, c + 1] * w
                    hi = G[k, r + 1, c] * (1.0 - w) + G[k, r + 1, c + 1] * w
                    acc += lo * (1.0 - wv) + hi * wv
                out[iz, i, j] = acc * inv_l2
    return out, degenerate.sum()


@njit(parallel=True, cache=True)
def _bp_s_3d_nb(G, lam0, dlam, us, v0, dv, xs, ys, zs, ct, st, l, h):
    n_lam, mv, m = G.shape
    nz, ny, nx = zs.size, ys.size, xs.size
    out = np.zeros((nz, ny, nx))
    degenerate = np.zeros(ny, dtype=np.int64)
    D = l + h
    for i in prange(ny):
        y = ys[i]
        for j in range(nx):
            x = xs[j]
            a = x * ct + y * st
            b = -x * st + y * ct
            L = b + l
            H = h - b
            if abs(H) < DEGENERATE_TOL or abs(L) < DEGENERATE_TOL:
                degenerate[i] += nz
                continue
            inv_h2 = 1.0 / (H * H)
            for iz in range(nz):
                fv = (zs[iz] * D / L - v0) / dv
                if fv < 0.0 or fv > mv - 1:
                    continue
                r = int(fv)
                if r == mv - 1:
                    r = mv - 2
                wv = fv - r
                acc = 0.0
                for k in range(m):
                    f = ((D * a - us[k] * L) / H - lam0) / dlam
                    if f < 0.0 or f > n_lam - 1:
                        continue
                    c = int(f)
                    if c == n_lam - 1:
                        c = n_lam - 2
                    w = f - c
                    lo = G[c, r, k] * (1.0 - w) + G[c + 1, r, k] * w
                    hi = G[c, r + 1, k] * (1.0 - w) + G[c + 1, r + 1, k] * w
                    acc += lo * (1.0 - wv) + hi * wv
                out[iz, i, j] = acc * inv_h2
    return out, degenerate.sum()


# -- numpy path ------------------------------------------------------------------


def _pixel_frame(xs, ys, ct, st, l, h):
    x = xs[None, :]
    y = ys[:, None]
    a = x * ct + y * st
    b = -x * st + y * ct
    return a, b + l, h - b


def _lerp_index(f, n):
    """Cell index, weight and validity mask for fractional positions ``f``."""
    valid = (f >= 0.0) & (f <= n - 1)
    c = np.where(valid, f, 0.0).astype(np.int64)
    c = np.minimum(c, n - 2)
    w = np.where(valid, f - c, 0.0)
    return c, w, valid


def _bp_d_2d_np(G, lam, u0, du, xs, ys, ct, st, l, h):
    a, L, H = _pixel_frame(xs, ys, ct, st, l, h)
    bad = np.abs(L) < DEGENERATE_TOL
    Ls = np.where(bad, 1.0, L)
    D = l + h
    m = G.shape[1]
    acc = np.zeros(a.shape)
    for k in range(lam.size):
        f = ((D * a - lam[k] * H) / Ls - u0) / du
        c, w, valid = _lerp_index(f, m)
        row = G[k]
        acc += np.where(valid, row[c] * (1.0 - w) + row[c + 1] * w, 0.0)
    out = np.where(bad, 0.0, acc / (Ls * Ls))
    return out, int(bad.sum())


def _bp_s_2d_np(G, lam0, dlam, us, xs, ys, ct, st, l, h):
    a, L, H = _pixel_frame(xs, ys, ct, st, l, h)
    bad = np.abs(H) < DEGENERATE_TOL
    Hs = np.where(bad, 1.0, H)
    D = l + h
    n_lam = G.shape[0]
    acc = np.zeros(a.shape)
    for k in range(us.size):
        f = ((D * a - us[k] * L) / Hs - lam0) / dlam
        c, w, valid = _lerp_index(f, n_lam)
        col = G[:, k]
        acc += np.where(valid, col[c] * (1.0 - w) + col[c + 1] * w, 0.0)
    out = np.where(bad, 0.0, acc / (Hs * Hs))
    return out, int(bad.sum())


def _bp_d_3d_np(G, lam, u0, du, v0, dv, xs, ys, zs, ct, st, l, h):
    a, L, H = _pixel_frame(xs, ys, ct, st, l, h)
    bad = np.abs(L) < DEGENERATE_TOL
    Ls = np.where(bad, 1.0, L)
    D = l + h
    n_lam, mv, m = G.shape
    out = np.zeros((zs.size,) + a.shape)
    for iz, z in enumerate(zs):
        r, wv, vvalid = _lerp_index((z * D / Ls - v0) / dv, mv)
        acc = np.zeros(a.shape)
        for k in range(n_lam):
            c, w, valid = _lerp_index(((D * a - lam[k] * H) / Ls - u0) / du, m)
            g = G[k]
            lo = g[r, c] * (1.0 - w) + g[r, c + 1] * w
            hi = g[r + 1, c] * (1.0 - w) + g[r + 1, c + 1] * w
            acc += np.where(valid, lo * (1.0 - wv) + hi * wv, 0.0)
        out[iz] = np.where(bad | ~vvalid, 0.0, acc / (Ls * Ls))
    return out, int(bad.sum()) * zs.size


def _bp_s_3d_np(G, lam0, dlam, us, v0, dv, xs, ys, zs, ct, st, l, h):
    a, L, H = _pixel_frame(xs, ys, ct, st, l, h)
    bad = (np.abs(H) < DEGENERATE_TOL) | (np.abs(L) < DEGENERATE_TOL)
    Hs = np.where(bad, 1.0, H)
    Ls = np.where(bad, 1.0, L)
    D = l + h
    n_lam, mv, m = G.shape
    out = np.zeros((zs.size,) + a.shape)
    for iz, z in enumerate(zs):
        r, wv, vvalid = _lerp_index((z * D / Ls - v0) / dv, mv)
        acc = np.zeros(a.shape)
        for k in range(us.size):
            c, w, valid = _lerp_index(((D * a - us[k] * Ls) / Hs - lam0) / dlam, n_lam)
            g = G[:, :, k]
            lo = g[c, r] * (1.0 - w) + g[c + 1, r] * w
            hi = g[c, r + 1] * (1.0 - w) + g[c + 1, r + 1] * w
            acc += np.where(valid, lo * (1.0 - wv) + hi * wv, 0.0)
        out[iz] = np.where(bad | ~vvalid, 0.0, acc / (Hs * Hs))
    return out, int(bad.sum()) * zs.size


# -- dispatch --------------------------------------------------------------------


def _pick(nb, np_):
    def call(*args, backend=None):
        if backend is None:
            backend = "numba" if HAVE_NUMBA else "numpy"
        if backend == "numba":
            if not HAVE_NUMBA:
                raise RuntimeError("numba backend requested but numba is unavailable")
            out, n = nb(*args)
            return out, int(n)
        return np_(*args)

    return call


bp_d_2d = _pick(_bp_d_2d_nb, _bp_d_2d_np)
bp_s_2d = _pick(_bp_s_2d_nb, _bp_s_2d_np)
bp_d_3d = _pick(_bp_d_3d_nb, _bp_d_3d_np)
bp_s_3d = _pick(_bp_s_3d_nb, _bp_s_3d_np)
