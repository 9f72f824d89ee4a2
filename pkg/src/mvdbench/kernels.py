"""Hot loops of the plane sweep: homography warping and windowed ZNCC.

Each kernel exists twice: a numba version (loops, ``prange`` over
hypotheses) and a vectorised numpy version. ``warp_stack`` and
``zncc_volume`` dispatch on ``_jit.USE_NUMBA``. Per-pixel reductions in the
numba path run in a fixed row-major order, so results do not depend on the
thread count.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import _jit
from ._jit import njit, prange

# patches with a variance below this carry no usable signal
MIN_VARIANCE = 1e-12
# source coordinates this close outside the image count as on its border;
# without it, rounding in the homography flips validity for points that
# land exactly on the last row or column
EDGE_TOL = 1e-9


@njit(parallel=True, cache=True, nogil=True)
def _warp_stack_numba(img, hs, out_h, out_w):
    n = hs.shape[0]
    src_h, src_w = img.shape
    out = np.zeros((n, out_h, out_w))
    valid = np.zeros((n, out_h, out_w), dtype=np.bool_)
    xmax = src_w - 1.0
    ymax = src_h - 1.0
    for k in prange(n):
        h = hs[k]
        for v in range(out_h):
            for u in range(out_w):
                x = h[0, 0] * u + h[0, 1] * v + h[0, 2]
                y = h[1, 0] * u + h[1, 1] * v + h[1, 2]
                w = h[2, 0] * u + h[2, 1] * v + h[2, 2]
                if not w > 0.0:
                    continue
                xs = x / w
                ys = y / w
                if not (xs >= -EDGE_TOL and xs <= xmax + EDGE_TOL and ys >= -EDGE_TOL and ys <= ymax + EDGE_TOL):
                    continue
                xs = min(max(xs, 0.0), xmax)
                ys = min(max(ys, 0.0), ymax)
                x0 = int(np.floor(xs))
                y0 = int(np.floor(ys))
                if x0 > src_w - 2:
                    x0 = max(src_w - 2, 0)
                if y0 > src_h - 2:
                    y0 = max(src_h - 2, 0)
                x1 = min(x0 + 1, src_w - 1)
                y1 = min(y0 + 1, src_h - 1)
                fx = xs - x0
                fy = ys - y0
                top = (1.0 - fx) * img[y0, x0] + fx * img[y0, x1]
                bot = (1.0 - fx) * img[y1, x0] + fx * img[y1, x1]
                out[k, v, u] = (1.0 - fy) * top + fy * bot
                valid[k, v, u] = True
    return out, valid


def _warp_stack_numpy(img, hs, out_h, out_w):
    n = hs.shape[0]
    src_h, src_w = img.shape
    vv, uu = np.mgrid[0:out_h, 0:out_w].astype(np.float64)
    out = np.zeros((n, out_h, out_w))
    valid = np.zeros((n, out_h, out_w), dtype=bool)
    for k in range(n):
        h = hs[k]
        x = h[0, 0] * uu + h[0, 1] * vv + h[0, 2]
        y = h[1, 0] * uu + h[1, 1] * vv + h[1, 2]
        w = h[2, 0] * uu + h[2, 1] * vv + h[2, 2]
        front = w > 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            xs = np.where(front, x / np.where(front, w, 1.0), -1.0)
            ys = np.where(front, y / np.where(front, w, 1.0), -1.0)
        xmax, ymax = src_w - 1.0, src_h - 1.0
        ok = front & (xs >= -EDGE_TOL) & (xs <= xmax + EDGE_TOL) & (ys >= -EDGE_TOL) & (ys <= ymax + EDGE_TOL)
        xs = np.where(ok, np.clip(xs, 0.0, xmax), 0.0)
        ys = np.where(ok, np.clip(ys, 0.0, ymax), 0.0)
        x0 = np.minimum(np.floor(xs).astype(np.int64), max(src_w - 2, 0))
        y0 = np.minimum(np.floor(ys).astype(np.int64), max(src_h - 2, 0))
        x1 = np.minimum(x0 + 1, src_w - 1)
        y1 = np.minimum(y0 + 1, src_h - 1)
        fx = xs - x0
        fy = ys - y0
        top = (1.0 - fx) * img[y0, x0] + fx * img[y0, x1]
        bot = (1.0 - fx) * img[y1, x0] + fx * img[y1, x1]
        out[k] = np.where(ok, (1.0 - fy) * top + fy * bot, 0.0)
        valid[k] = ok
    return out, valid


@njit(parallel=True, cache=True, nogil=True)
def _zncc_volume_numba(key, warped, wvalid, r):
    n, h, w = warped.shape
    side = 2 * r + 1
    npix = side * side
    costs = np.ones((n, h, w))
    valid = np.zeros((n, h, w), dtype=np.bool_)
    if h < side or w < side:
        return costs, valid

    # keyview window statistics are shared by all hypotheses
    key_mean = np.zeros((h, w))
    key_ss = np.zeros((h, w))
    for v in range(r, h - r):
        for u in range(r, w - r):
            s = 0.0
            for dv in range(-r, r + 1):
                for du in range(-r, r + 1):
                    s += key[v + dv, u + du]
            m = s / npix
            ss = 0.0
            for dv in range(-r, r + 1):
                for du in range(-r, r + 1):
                    d = key[v + dv, u + du] - m
                    ss += d * d
            key_mean[v, u] = m
            key_ss[v, u] = ss

    for k in prange(n):
        img = warped[k]
        ok_map = wvalid[k]
        for v in range(r, h - r):
            for u in range(r, w - r):
                if key_ss[v, u] / npix < MIN_VARIANCE:
                    continue
                ok = True
                s = 0.0
                for dv in range(-r, r + 1):
                    for du in range(-r, r + 1):
                        if not ok_map[v + dv, u + du]:
                            ok = False
                        s += img[v + dv, u + du]
                if not ok:
                    continue
                mb = s / npix
                ma = key_mean[v, u]
                sab = 0.0
                sbb = 0.0
                for dv in range(-r, r + 1):
                    for du in range(-r, r + 1):
                        db = img[v + dv, u + du] - mb
                        sab += (key[v + dv, u + du] - ma) * db
                        sbb += db * db
                if sbb / npix < MIN_VARIANCE:
                    continue
                z = sab / np.sqrt(key_ss[v, u] * sbb)
                if z > 1.0:
                    z = 1.0
                elif z < -1.0:
                    z = -1.0
                costs[k, v, u] = (1.0 - z) * 0.5
                valid[k, v, u] = True
    return costs, valid


def _zncc_volume_numpy(key, warped, wvalid, r):
    n, h, w = warped.shape
    side = 2 * r + 1
    npix = side * side
    costs = np.ones((n, h, w))
    valid = np.zeros((n, h, w), dtype=bool)
    if h < side or w < side:
        return costs, valid
    inner = (slice(r, h - r), slice(r, w - r))
    a = sliding_window_view(key, (side, side))
    ac = a - a.sum(axis=(-2, -1))[..., None, None] / npix
    saa = (ac * ac).sum(axis=(-2, -1))
    key_ok = saa / npix >= MIN_VARIANCE
    for k in range(n):
        b = sliding_window_view(warped[k], (side, side))
        win_ok = sliding_window_view(wvalid[k], (side, side)).all(axis=(-2, -1))
        bc = b - b.sum(axis=(-2, -1))[..., None, None] / npix
        sab = (ac * bc).sum(axis=(-2, -1))
        sbb = (bc * bc).sum(axis=(-2, -1))
        ok = key_ok & win_ok & (sbb / npix >= MIN_VARIANCE)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.clip(sab / np.sqrt(saa * sbb), -1.0, 1.0)
        costs[k][inner] = np.where(ok, (1.0 - z) * 0.5, 1.0)
        valid[k][inner] = ok
    return costs, valid


def warp_stack(img: np.ndarray, hs: np.ndarray, out_h: int, out_w: int):
    """Warp one single-channel image through N homographies -> (N, out_h, out_w) values and validity."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    hs = np.ascontiguousarray(hs, dtype=np.float64).reshape(-1, 3, 3)
    if _jit.USE_NUMBA:
        return _warp_stack_numba(img, hs, int(out_h), int(out_w))
    return _warp_stack_numpy(img, hs, int(out_h), int(out_w))


def zncc_volume(key: np.ndarray, warped: np.ndarray, wvalid: np.ndarray, radius: int):
    """Windowed ZNCC cost ``(1 - zncc) / 2`` of ``key`` against every warped slice.

    Invalid cells (window off the image, touching an invalid warped pixel,
    or with a flat patch on either side) carry cost 1.0.
    """
    key = np.ascontiguousarray(key, dtype=np.float64)
    warped = np.ascontiguousarray(warped, dtype=np.float64)
    wvalid = np.ascontiguousarray(wvalid, dtype=np.bool_)
    if _jit.USE_NUMBA:
        return _zncc_volume_numba(key, warped, wvalid, int(radius))
    return _zncc_volume_numpy(key, warped, wvalid, int(radius))
