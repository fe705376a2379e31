"""Independent brute-force references used to derive expected test values.

Everything here is deliberately written the slow, obvious way (per-pixel
python loops, set algebra, full DP matrices) and never imports the fast
paths it checks.
"""

import math

import numpy as np


def threshold_ref(frame, threshold, polarity):
    h, w = frame.shape
    out = np.zeros((h, w), dtype=bool)
    for y in range(h):
        for x in range(w):
            p = int(frame[y, x])
            out[y, x] = p < threshold if polarity == "keep_below" else p >= threshold
    return out


def subtract_ref(a, b):
    h, w = a.shape
    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            out[y, x] = abs(int(a[y, x]) - int(b[y, x]))
    return out


def _mask_to_set(mask):
    return {(x, y) for y, x in zip(*np.nonzero(mask))}


def _set_to_mask(points, shape):
    out = np.zeros(shape, dtype=bool)
    for x, y in points:
        out[y, x] = True
    return out


def _dilate_set(points, k, shape):
    r = k // 2
    h, w = shape
    out = set()
    for x, y in points:
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                xx, yy = x + dx, y + dy
                if 0 <= xx < w and 0 <= yy < h:
                    out.add((xx, yy))
    return out


def _erode_set(points, k, shape):
    r = k // 2
    h, w = shape
    out = set()
    for y in range(h):
        for x in range(w):
            # out-of-bounds counts as unset, so border windows always fail
            if all((x + dx, y + dy) in points and 0 <= x + dx < w and 0 <= y + dy < h
                   for dy in range(-r, r + 1) for dx in range(-r, r + 1)):
                out.add((x, y))
    return out


def morphology_ref(mask, op, k):
    shape = mask.shape
    pts = _mask_to_set(mask)
    if op == "dilate":
        pts = _dilate_set(pts, k, shape)
    elif op == "erode":
        pts = _erode_set(pts, k, shape)
    elif op == "open":
        pts = _dilate_set(_erode_set(pts, k, shape), k, shape)
    elif op == "close":
        pts = _erode_set(_dilate_set(pts, k, shape), k, shape)
    else:
        raise ValueError(op)
    return _set_to_mask(pts, shape)


def gray_morph_ref(frame, op, k):
    """Max/min filter reference with out-of-bounds = 0."""
    h, w = frame.shape
    r = k // 2

    def window_vals(y, x):
        vals = []
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                yy, xx = y + dy, x + dx
                vals.append(int(frame[yy, xx]) if 0 <= yy < h and 0 <= xx < w else 0)
        return vals

    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            vals = window_vals(y, x)
            out[y, x] = max(vals) if op == "dilate" else min(vals)
    if op in ("dilate", "erode"):
        return out
    if op == "open":
        return gray_morph_ref(gray_morph_ref(frame, "erode", k), "dilate", k)
    if op == "close":
        return gray_morph_ref(gray_morph_ref(frame, "dilate", k), "erode", k)
    raise ValueError(op)


def dtw_ref(a, b):
    """Full-matrix DTW with Euclidean point cost."""
    n, m = len(a), len(b)
    D = [[math.inf] * m for _ in range(n)]
    for i in range(n):
        for j in range(m):
            c = math.hypot(a[i][0] - b[j][0], a[i][1] - b[j][1])
            if i == 0 and j == 0:
                D[i][j] = c
            elif i == 0:
                D[i][j] = c + D[i][j - 1]
            elif j == 0:
                D[i][j] = c + D[i - 1][j]
            else:
                D[i][j] = c + min(D[i - 1][j], D[i][j - 1], D[i - 1][j - 1])
    return D[n - 1][m - 1]


def resample_ref(points, n):
    """Arc-length uniform resampling, written independently."""
    pts = [(float(x), float(y)) for x, y in points]
    dedup = [pts[0]]
    for p in pts[1:]:
        if p != dedup[-1]:
            dedup.append(p)
    if len(dedup) == 1:
        return [dedup[0]] * n
    lengths = [math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(dedup[:-1], dedup[1:])]
    total = sum(lengths)
    out = []
    for i in range(n):
        s = total * i / (n - 1)
        acc = 0.0
        for (a, b), seg in zip(zip(dedup[:-1], dedup[1:]), lengths):
            if acc + seg >= s or (a, b) == (dedup[-2], dedup[-1]):
                t = 0.0 if seg == 0 else min(max((s - acc) / seg, 0.0), 1.0)
                out.append((a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t))
                break
            acc += seg
    return out


def decode_rank_ref(path, anchor, layout, lexicon, blend=0.2, n=32):
    """Exhaustive decode: full DTW against every candidate, no shared code."""
    total_w = sum(lexicon.weights)
    observed = resample_ref(path, n)
    scored = []
    for i, word in enumerate(lexicon.words):
        if word[0] != anchor:
            continue
        ideal = resample_ref([layout.center_of(ch) for ch in word], n)
        d = dtw_ref(observed, ideal) / n
        score = d - blend * math.log(lexicon.weights[i] / total_w)
        scored.append((score, i, word))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [(word, score) for score, _, word in scored]


def central_diff_grad(f, theta, eps=1e-4):
    """Central finite differences of a scalar function of a flat vector."""
    grad = np.zeros_like(theta)
    for i in range(len(theta)):
        up = theta.copy()
        dn = theta.copy()
        up[i] += eps
        dn[i] -= eps
        grad[i] = (f(up) - f(dn)) / (2 * eps)
    return grad


def centroid_below_ref(frame, threshold):
    """Plain per-pixel scan centroid of dark pixels (synth oracle check)."""
    sx = sy = n = 0
    h, w = frame.shape
    for y in range(h):
        for x in range(w):
            if frame[y, x] < threshold:
                sx += x
                sy += y
                n += 1
    return (sx / n, sy / n) if n else None
