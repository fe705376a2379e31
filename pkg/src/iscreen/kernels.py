"""Hot per-pixel kernels, each in a numba flavor and a pure-numpy flavor.

Naming: ``_foo_loop`` is the scalar-loop source (compiled with numba when
enabled), ``_foo_np`` is the vectorized fallback, and the public ``foo`` is
whichever flavor :mod:`iscreen.accel` selected. Integer and boolean kernels
are bit-identical across flavors; float accumulators agree to last ulps.

All images are row-major 2-D arrays indexed ``[y, x]``; points are (x, y)
with integer coordinates at pixel centers.
"""

import numpy as np
from scipy import ndimage

from .accel import HAS_NUMBA, jit

_EIGHT = np.ones((3, 3), dtype=np.uint8)


# ---------------------------------------------------------------------------
# anti-aliased disk painting (rendering)
# ---------------------------------------------------------------------------

def _disk_bbox(w, h, cx, cy, radius):
    x0 = max(0, int(np.floor(cx - radius)))
    x1 = min(w, int(np.floor(cx + radius)) + 2)
    y0 = max(0, int(np.floor(cy - radius)))
    y1 = min(h, int(np.floor(cy + radius)) + 2)
    return x0, x1, y0, y1


def _blend_disk_loop(img, cx, cy, radius, intensity):
    # Coverage from a 2x2 subsample grid at pixel center +/- 0.25.
    h, w = img.shape
    r2 = radius * radius
    x0 = max(0, int(np.floor(cx - radius)))
    x1 = min(w, int(np.floor(cx + radius)) + 2)
    y0 = max(0, int(np.floor(cy - radius)))
    y1 = min(h, int(np.floor(cy + radius)) + 2)
    for y in range(y0, y1):
        for x in range(x0, x1):
            n = 0
            dx = (x - 0.25) - cx
            dy = (y - 0.25) - cy
            if dx * dx + dy * dy <= r2:
                n += 1
            dx = (x + 0.25) - cx
            dy = (y - 0.25) - cy
            if dx * dx + dy * dy <= r2:
                n += 1
            dx = (x - 0.25) - cx
            dy = (y + 0.25) - cy
            if dx * dx + dy * dy <= r2:
                n += 1
            dx = (x + 0.25) - cx
            dy = (y + 0.25) - cy
            if dx * dx + dy * dy <= r2:
                n += 1
            if n:
                c = n * 0.25
                img[y, x] = img[y, x] * (1.0 - c) + intensity * c


def _blend_disk_np(img, cx, cy, radius, intensity):
    h, w = img.shape
    r2 = radius * radius
    x0, x1, y0, y1 = _disk_bbox(w, h, cx, cy, radius)
    if x0 >= x1 or y0 >= y1:
        return
    xs = np.arange(x0, x1, dtype=np.float64)
    ys = np.arange(y0, y1, dtype=np.float64)
    n = np.zeros((y1 - y0, x1 - x0), dtype=np.float64)
    for oy in (-0.25, 0.25):
        dy = (ys + oy) - cy
        dy2 = dy * dy
        for ox in (-0.25, 0.25):
            dx = (xs + ox) - cx
            n += (dx * dx)[None, :] + dy2[:, None] <= r2
    c = n * 0.25
    sub = img[y0:y1, x0:x1]
    img[y0:y1, x0:x1] = sub * (1.0 - c) + intensity * c


# ---------------------------------------------------------------------------
# 8-connected component labeling (canonical raster first-encounter order)
# ---------------------------------------------------------------------------

def _uf_find_loop(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


_uf_find = jit(_uf_find_loop)


def _label8_loop(mask):
    h, w = mask.shape
    labels = np.zeros((h, w), np.int32)
    parent = np.zeros(h * w // 4 + 8, np.int32)
    nprov = 0
    for y in range(h):
        for x in range(w):
            if mask[y, x] == 0:
                continue
            root = 0
            if x > 0 and labels[y, x - 1] != 0:
                root = _uf_find(parent, labels[y, x - 1])
            if y > 0:
                for xx in range(max(0, x - 1), min(w, x + 2)):
                    l2 = labels[y - 1, xx]
                    if l2 != 0:
                        r2 = _uf_find(parent, l2)
                        if root == 0 or r2 < root:
                            if root != 0:
                                parent[root] = r2
                            root = r2
                        elif r2 != root:
                            parent[r2] = root
            if root == 0:
                nprov += 1
                parent[nprov] = nprov
                root = nprov
            labels[y, x] = root
    final = np.zeros(nprov + 1, np.int32)
    count = 0
    for y in range(h):
        for x in range(w):
            l = labels[y, x]
            if l == 0:
                continue
            r = _uf_find(parent, l)
            if final[r] == 0:
                count += 1
                final[r] = count
            labels[y, x] = final[r]
    return labels, count


def _label8_np(mask):
    # scipy numbers components in raster first-encounter order, matching the
    # loop flavor exactly; the cross-flavor tests pin that equivalence.
    labels, n = ndimage.label(mask, structure=_EIGHT, output=np.int32)
    return labels, int(n)


# ---------------------------------------------------------------------------
# binary morphology, separable kxk square, out-of-bounds = unset
# ---------------------------------------------------------------------------

def _binmorph_loop(mask, k, dilate):
    r = k // 2
    h, w = mask.shape
    tmp = np.zeros((h, w), np.uint8)
    out = np.zeros((h, w), np.uint8)
    for y in range(h):
        for x in range(w):
            acc = np.uint8(0) if dilate else np.uint8(1)
            for d in range(-r, r + 1):
                xx = x + d
                v = mask[y, xx] if 0 <= xx < w else np.uint8(0)
                if dilate:
                    acc = acc | v
                else:
                    acc = acc & v
            tmp[y, x] = acc
    for y in range(h):
        for x in range(w):
            acc = np.uint8(0) if dilate else np.uint8(1)
            for d in range(-r, r + 1):
                yy = y + d
                v = tmp[yy, x] if 0 <= yy < h else np.uint8(0)
                if dilate:
                    acc = acc | v
                else:
                    acc = acc & v
            out[y, x] = acc
    return out


def _shifted(m, dy, dx):
    """m translated so out[y, x] = m[y + dy, x + dx], OOB -> 0."""
    h, w = m.shape
    out = np.zeros_like(m)
    ys0, ys1 = max(0, -dy), min(h, h - dy)
    xs0, xs1 = max(0, -dx), min(w, w - dx)
    if ys0 < ys1 and xs0 < xs1:
        out[ys0:ys1, xs0:xs1] = m[ys0 + dy:ys1 + dy, xs0 + dx:xs1 + dx]
    return out


def _binmorph_np(mask, k, dilate):
    r = k // 2
    m = mask.astype(bool)
    for axis_dy, axis_dx in ((0, 1), (1, 0)):
        acc = np.zeros_like(m) if dilate else np.ones_like(m)
        for s in range(-r, r + 1):
            sh = _shifted(m, s * axis_dy, s * axis_dx)
            if dilate:
                acc |= sh
            else:
                acc &= sh
        m = acc
    return m.astype(np.uint8)


# ---------------------------------------------------------------------------
# grayscale morphology (max/min filter), same border rule (OOB = 0)
# ---------------------------------------------------------------------------

def _graymorph_loop(img, k, dilate):
    r = k // 2
    h, w = img.shape
    tmp = np.zeros((h, w), np.uint8)
    out = np.zeros((h, w), np.uint8)
    for y in range(h):
        for x in range(w):
            acc = np.uint8(0) if dilate else np.uint8(255)
            for d in range(-r, r + 1):
                xx = x + d
                v = img[y, xx] if 0 <= xx < w else np.uint8(0)
                if dilate:
                    acc = max(acc, v)
                else:
                    acc = min(acc, v)
            tmp[y, x] = acc
    for y in range(h):
        for x in range(w):
            acc = np.uint8(0) if dilate else np.uint8(255)
            for d in range(-r, r + 1):
                yy = y + d
                v = tmp[yy, x] if 0 <= yy < h else np.uint8(0)
                if dilate:
                    acc = max(acc, v)
                else:
                    acc = min(acc, v)
            out[y, x] = acc
    return out


def _graymorph_np(img, k, dilate):
    r = k // 2
    m = img.copy()
    for axis_dy, axis_dx in ((0, 1), (1, 0)):
        acc = np.zeros_like(m) if dilate else np.full_like(m, 255)
        for s in range(-r, r + 1):
            sh = _shifted(m, s * axis_dy, s * axis_dx)
            if dilate:
                np.maximum(acc, sh, out=acc)
            else:
                np.minimum(acc, sh, out=acc)
        m = acc
    return m


# ---------------------------------------------------------------------------
# box blur (clipped-window integer mean, round half up)
# ---------------------------------------------------------------------------

def _box_blur_loop(img, radius):
    h, w = img.shape
    out = np.empty((h, w), np.uint8)
    for y in range(h):
        ylo = max(0, y - radius)
        yhi = min(h, y + radius + 1)
        for x in range(w):
            xlo = max(0, x - radius)
            xhi = min(w, x + radius + 1)
            s = np.int64(0)
            for yy in range(ylo, yhi):
                for xx in range(xlo, xhi):
                    s += img[yy, xx]
            n = (yhi - ylo) * (xhi - xlo)
            out[y, x] = (2 * s + n) // (2 * n)
    return out


def _box_blur_np(img, radius):
    h, w = img.shape
    ii = np.zeros((h + 1, w + 1), np.int64)
    ii[1:, 1:] = np.cumsum(np.cumsum(img, axis=0, dtype=np.int64), axis=1)
    y0 = np.maximum(np.arange(h) - radius, 0)
    y1 = np.minimum(np.arange(h) + radius + 1, h)
    x0 = np.maximum(np.arange(w) - radius, 0)
    x1 = np.minimum(np.arange(w) + radius + 1, w)
    s = (ii[y1[:, None], x1[None, :]] - ii[y1[:, None], x0[None, :]]
         - ii[y0[:, None], x1[None, :]] + ii[y0[:, None], x0[None, :]])
    n = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    return ((2 * s + n) // (2 * n)).astype(np.uint8)


# ---------------------------------------------------------------------------
# 3x3 unsharp sharpen (replicate border, integer math)
# ---------------------------------------------------------------------------

def _sharpen_loop(img):
    h, w = img.shape
    out = np.empty((h, w), np.uint8)
    for y in range(h):
        yu = y - 1 if y > 0 else 0
        yd = y + 1 if y < h - 1 else h - 1
        for x in range(w):
            xl = x - 1 if x > 0 else 0
            xr = x + 1 if x < w - 1 else w - 1
            v = (5 * np.int32(img[y, x]) - np.int32(img[yu, x]) - np.int32(img[yd, x])
                 - np.int32(img[y, xl]) - np.int32(img[y, xr]))
            if v < 0:
                v = 0
            elif v > 255:
                v = 255
            out[y, x] = v
    return out


def _sharpen_np(img):
    p = np.pad(img.astype(np.int32), 1, mode="edge")
    v = 5 * p[1:-1, 1:-1] - p[:-2, 1:-1] - p[2:, 1:-1] - p[1:-1, :-2] - p[1:-1, 2:]
    return np.clip(v, 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# inverse-mapped bilinear warp (rotation / resize)
# ---------------------------------------------------------------------------

def _warp_loop(img, m00, m01, m02, m10, m11, m12, out_h, out_w, fill):
    h, w = img.shape
    out = np.empty((out_h, out_w), np.uint8)
    for y in range(out_h):
        for x in range(out_w):
            sx = m00 * x + m01 * y + m02
            sy = m10 * x + m11 * y + m12
            if sx < 0.0 or sx > w - 1.0 or sy < 0.0 or sy > h - 1.0:
                out[y, x] = fill
                continue
            x0 = int(np.floor(sx))
            if x0 > w - 2:
                x0 = w - 2
            if x0 < 0:
                x0 = 0
            y0 = int(np.floor(sy))
            if y0 > h - 2:
                y0 = h - 2
            if y0 < 0:
                y0 = 0
            x1 = x0 + 1 if w > 1 else 0
            y1 = y0 + 1 if h > 1 else 0
            wx = sx - x0
            wy = sy - y0
            v = ((1.0 - wy) * ((1.0 - wx) * img[y0, x0] + wx * img[y0, x1])
                 + wy * ((1.0 - wx) * img[y1, x0] + wx * img[y1, x1]))
            out[y, x] = np.uint8(np.rint(v))
    return out


def _warp_np(img, m00, m01, m02, m10, m11, m12, out_h, out_w, fill):
    h, w = img.shape
    xs = np.arange(out_w, dtype=np.float64)
    ys = np.arange(out_h, dtype=np.float64)
    sx = m00 * xs[None, :] + m01 * ys[:, None] + m02
    sy = m10 * xs[None, :] + m11 * ys[:, None] + m12
    inside = (sx >= 0.0) & (sx <= w - 1.0) & (sy >= 0.0) & (sy <= h - 1.0)
    x0 = np.clip(np.floor(sx).astype(np.int64), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, max(h - 2, 0))
    x1 = x0 + 1 if w > 1 else x0
    y1 = y0 + 1 if h > 1 else y0
    wx = np.where(inside, sx, 0.0) - np.where(inside, x0, 0)
    wy = np.where(inside, sy, 0.0) - np.where(inside, y0, 0)
    f = img.astype(np.float64)
    v = ((1.0 - wy) * ((1.0 - wx) * f[y0, x0] + wx * f[y0, x1])
         + wy * ((1.0 - wx) * f[y1, x0] + wx * f[y1, x1]))
    out = np.where(inside, np.rint(v), float(fill))
    return out.astype(np.uint8)


# ---------------------------------------------------------------------------
# DTW (Euclidean point cost, full grid)
# ---------------------------------------------------------------------------

def _dtw_loop(a, b):
    n = a.shape[0]
    m = b.shape[0]
    prev = np.empty(m, np.float64)
    cur = np.empty(m, np.float64)
    dx = a[0, 0] - b[0, 0]
    dy = a[0, 1] - b[0, 1]
    prev[0] = np.sqrt(dx * dx + dy * dy)
    for j in range(1, m):
        dx = a[0, 0] - b[j, 0]
        dy = a[0, 1] - b[j, 1]
        prev[j] = prev[j - 1] + np.sqrt(dx * dx + dy * dy)
    for i in range(1, n):
        dx = a[i, 0] - b[0, 0]
        dy = a[i, 1] - b[0, 1]
        cur[0] = prev[0] + np.sqrt(dx * dx + dy * dy)
        for j in range(1, m):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            c = np.sqrt(dx * dx + dy * dy)
            mn = prev[j - 1]
            if prev[j] < mn:
                mn = prev[j]
            if cur[j - 1] < mn:
                mn = cur[j - 1]
            cur[j] = c + mn
        prev, cur = cur, prev
    return prev[m - 1]


_dtw_jit = jit(_dtw_loop)


def _dtw_batch_loop(a, bs):
    out = np.empty(bs.shape[0], np.float64)
    for i in range(bs.shape[0]):
        out[i] = _dtw_jit(a, bs[i])
    return out


def _dtw_batch_np(a, bs):
    return np.array([_dtw_loop(a, bs[i]) for i in range(bs.shape[0])], np.float64)


# ---------------------------------------------------------------------------
# gradient-line center fit accumulators (pupil refinement)
# ---------------------------------------------------------------------------

def _gradfit_loop(img, excl, x_off, y_off):
    # img/excl are window slices; accumulators use absolute coordinates.
    h, w = img.shape
    syy = 0.0
    sxx = 0.0
    sxy = 0.0
    bx = 0.0
    by = 0.0
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            if (excl[y, x] or excl[y, x - 1] or excl[y, x + 1]
                    or excl[y - 1, x] or excl[y + 1, x]):
                continue
            gx = (img[y, x + 1] - img[y, x - 1]) * 0.5
            gy = (img[y + 1, x] - img[y - 1, x]) * 0.5
            wxx = gx * gx
            wyy = gy * gy
            wxy = gx * gy
            syy += wyy
            sxx += wxx
            sxy += wxy
            ax = np.float64(x + x_off)
            ay = np.float64(y + y_off)
            bx += wyy * ax - wxy * ay
            by += wxx * ay - wxy * ax
    return syy, sxx, sxy, bx, by


def _gradfit_np(img, excl, x_off, y_off):
    h, w = img.shape
    if h < 3 or w < 3:
        return 0.0, 0.0, 0.0, 0.0, 0.0
    e = excl != 0
    ok = ~(e[1:-1, 1:-1] | e[1:-1, :-2] | e[1:-1, 2:] | e[:-2, 1:-1] | e[2:, 1:-1])
    gx = (img[1:-1, 2:] - img[1:-1, :-2]) * 0.5
    gy = (img[2:, 1:-1] - img[:-2, 1:-1]) * 0.5
    xs = np.arange(1 + x_off, w - 1 + x_off, dtype=np.float64)[None, :]
    ys = np.arange(1 + y_off, h - 1 + y_off, dtype=np.float64)[:, None]
    wxx = np.where(ok, gx * gx, 0.0)
    wyy = np.where(ok, gy * gy, 0.0)
    wxy = np.where(ok, gx * gy, 0.0)
    return (float(wyy.sum()), float(wxx.sum()), float(wxy.sum()),
            float((wyy * xs - wxy * ys).sum()), float((wxx * ys - wxy * xs).sum()))


# ---------------------------------------------------------------------------
# flavor selection
# ---------------------------------------------------------------------------

if HAS_NUMBA:
    blend_disk = jit(_blend_disk_loop)
    label8 = jit(_label8_loop)
    binmorph = jit(_binmorph_loop)
    graymorph = jit(_graymorph_loop)
    box_blur = jit(_box_blur_loop)
    sharpen3 = jit(_sharpen_loop)
    warp_bilinear = jit(_warp_loop)
    dtw = _dtw_jit
    dtw_batch = jit(_dtw_batch_loop)
    gradfit = jit(_gradfit_loop)
else:
    blend_disk = _blend_disk_np
    label8 = _label8_np
    binmorph = _binmorph_np
    graymorph = _graymorph_np
    box_blur = _box_blur_np
    sharpen3 = _sharpen_np
    warp_bilinear = _warp_np
    dtw = _dtw_loop
    dtw_batch = _dtw_batch_np
    gradfit = _gradfit_np


def warmup():
    """Force one compile/dispatch of every kernel (tiny inputs)."""
    img = np.zeros((8, 8), np.float64)
    blend_disk(img, 4.0, 4.0, 2.0, 100.0)
    u8 = np.zeros((8, 8), np.uint8)
    u8[4, 4] = 1
    label8(u8)
    binmorph(u8, 3, True)
    binmorph(u8, 3, False)
    graymorph(u8, 3, True)
    graymorph(u8, 3, False)
    box_blur(u8, 1)
    sharpen3(u8)
    warp_bilinear(u8, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 8, 8, np.uint8(0))
    a = np.zeros((4, 2), np.float64)
    dtw(a, a)
    dtw_batch(a, np.zeros((2, 4, 2), np.float64))
    gradfit(img, np.zeros((8, 8), np.uint8), 0, 0)
