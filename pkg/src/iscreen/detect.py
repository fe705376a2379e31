"""Per-frame eye measurement: pupil center, corneal glint, PCCR vector.

The pupil is the largest 8-connected dark component; its center starts at
the darkness-weighted centroid and is refined by one weighted least-squares
pass that intersects the image-gradient lines inside the component's
bounding box (circular edges point at their center). The glint is the
brightest small bright component, ties broken by proximity to the pupil. A
frame with no detectable glint is a "no reflection" observation and counts
as a blink.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .synth import GLINT_THRESHOLD


class NoPupil(LookupError):
    pass


class NoGlint(LookupError):
    pass


@dataclass(frozen=True)
class DetectorConfig:
    pupil_threshold: int = 64
    glint_threshold: int = GLINT_THRESHOLD
    max_glint_area: int = 64
    min_pupil_area: int = 9

    def __post_init__(self):
        if not self.pupil_threshold < self.glint_threshold:
            raise ValueError("pupil_threshold must be below glint_threshold")


@dataclass(frozen=True)
class PupilEstimate:
    center: tuple[float, float]
    radius: float
    confidence: float


@dataclass(frozen=True)
class GlintEstimate:
    center: tuple[float, float]
    peak_intensity: int
    area: int


@dataclass(frozen=True)
class GazeVector:
    du: float
    dv: float


@dataclass(frozen=True)
class EyeFeatures:
    pupil: PupilEstimate | None
    glint: GlintEstimate | None
    vector: GazeVector | None
    blink_observation: bool


def locate_pupil(frame: np.ndarray, cfg: DetectorConfig = DetectorConfig()) -> PupilEstimate:
    mask = (frame < cfg.pupil_threshold).astype(np.uint8)
    labels, n = kernels.label8(mask)
    if n == 0:
        raise NoPupil("no pixels below pupil threshold")
    ys, xs = np.nonzero(mask)
    labs = labels[ys, xs]
    areas = np.bincount(labs, minlength=n + 1)[1:]
    best = int(np.argmax(areas)) + 1
    area = int(areas[best - 1])
    if area < cfg.min_pupil_area:
        raise NoPupil(f"largest dark component area {area} < {cfg.min_pupil_area}")
    sel = labs == best
    ys, xs = ys[sel], xs[sel]
    weight = cfg.pupil_threshold - frame[ys, xs].astype(np.float64)
    wsum = weight.sum()
    cx = float((weight * xs).sum() / wsum)
    cy = float((weight * ys).sum() / wsum)
    cx, cy = _gradient_refine(frame, xs, ys, cx, cy, cfg)
    radius = float(np.sqrt(area / np.pi))
    confidence = _disk_dark_fraction(mask, cx, cy, radius)
    return PupilEstimate(center=(cx, cy), radius=radius, confidence=confidence)


def _gradient_refine(frame, xs, ys, cx, cy, cfg) -> tuple[float, float]:
    h, w = frame.shape
    pad = 3
    x0 = max(0, int(xs.min()) - pad)
    x1 = min(w, int(xs.max()) + pad + 1)
    y0 = max(0, int(ys.min()) - pad)
    y1 = min(h, int(ys.max()) + pad + 1)
    win = frame[y0:y1, x0:x1]
    # Glint-bright pixels and a 2-px ring around them are excluded so the
    # glint's own circular edge cannot pull the fit toward the glint.
    excl = kernels.binmorph((win >= cfg.glint_threshold).astype(np.uint8), 5, True)
    syy, sxx, sxy, bx, by = kernels.gradfit(win.astype(np.float64), excl, x0, y0)
    # Weak ridge anchored at the centroid keeps the 2x2 solve conditioned
    # and bounds the refinement when edges are sparse.
    lam = 1e-3 * (sxx + syy) * 0.5 + 1e-9
    a11 = syy + lam
    a22 = sxx + lam
    a12 = -sxy
    b1 = bx + lam * cx
    b2 = by + lam * cy
    det = a11 * a22 - a12 * a12
    if abs(det) < 1e-12:
        return cx, cy
    rx = (a22 * b1 - a12 * b2) / det
    ry = (a11 * b2 - a12 * b1) / det
    # Reject wild solutions (degenerate gradients); the centroid is safe.
    span = max(x1 - x0, y1 - y0)
    if abs(rx - cx) > span or abs(ry - cy) > span:
        return cx, cy
    return float(rx), float(ry)


def _disk_dark_fraction(mask, cx, cy, radius) -> float:
    h, w = mask.shape
    x0 = max(0, int(np.floor(cx - radius)))
    x1 = min(w, int(np.floor(cx + radius)) + 2)
    y0 = max(0, int(np.floor(cy - radius)))
    y1 = min(h, int(np.floor(cy + radius)) + 2)
    if x0 >= x1 or y0 >= y1:
        return 0.0
    yy, xx = np.mgrid[y0:y1, x0:x1]
    inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius * radius
    total = int(inside.sum())
    if total == 0:
        return 0.0
    dark = int(mask[y0:y1, x0:x1][inside].sum())
    return dark / total


def locate_glint(frame: np.ndarray, cfg: DetectorConfig = DetectorConfig(),
                 pupil_hint: tuple[float, float] | None = None) -> GlintEstimate:
    mask = (frame >= cfg.glint_threshold).astype(np.uint8)
    labels, n = kernels.label8(mask)
    if n == 0:
        raise NoGlint("no pixels at or above glint threshold")
    ys, xs = np.nonzero(mask)
    labs = labels[ys, xs]
    vals = frame[ys, xs].astype(np.float64)
    areas = np.bincount(labs, minlength=n + 1)
    peaks = np.zeros(n + 1, dtype=np.int64)
    np.maximum.at(peaks, labs, frame[ys, xs].astype(np.int64))
    ok = [l for l in range(1, n + 1) if areas[l] <= cfg.max_glint_area]
    if not ok:
        raise NoGlint("all bright components exceed max_glint_area")
    h, w = frame.shape
    hint = pupil_hint if pupil_hint is not None else ((w - 1) / 2.0, (h - 1) / 2.0)
    sw = np.bincount(labs, weights=vals, minlength=n + 1)
    sx = np.bincount(labs, weights=vals * xs, minlength=n + 1)
    sy = np.bincount(labs, weights=vals * ys, minlength=n + 1)

    def sort_key(l):
        gx, gy = sx[l] / sw[l], sy[l] / sw[l]
        d2 = (gx - hint[0]) ** 2 + (gy - hint[1]) ** 2
        return (-int(peaks[l]), d2, l)

    chosen = min(ok, key=sort_key)
    center = (float(sx[chosen] / sw[chosen]), float(sy[chosen] / sw[chosen]))
    return GlintEstimate(center=center, peak_intensity=int(peaks[chosen]),
                         area=int(areas[chosen]))


def pccr_vector(pupil: PupilEstimate, glint: GlintEstimate) -> GazeVector:
    """Pupil center minus glint center, exactly."""
    return GazeVector(du=pupil.center[0] - glint.center[0],
                      dv=pupil.center[1] - glint.center[1])


def extract_features(frame: np.ndarray, cfg: DetectorConfig = DetectorConfig()) -> EyeFeatures:
    """Measure one frame; absence is encoded in the result, never raised."""
    try:
        pupil = locate_pupil(frame, cfg)
    except NoPupil:
        pupil = None
    try:
        glint = locate_glint(frame, cfg, pupil.center if pupil else None)
    except NoGlint:
        glint = None
    vector = pccr_vector(pupil, glint) if pupil and glint else None
    return EyeFeatures(pupil=pupil, glint=glint, vector=vector,
                       blink_observation=glint is None)


def features_to_json(index: int, f: EyeFeatures) -> dict:
    return {
        "i": index,
        "px": f.pupil.center[0] if f.pupil else None,
        "py": f.pupil.center[1] if f.pupil else None,
        "gx": f.glint.center[0] if f.glint else None,
        "gy": f.glint.center[1] if f.glint else None,
        "du": f.vector.du if f.vector else None,
        "dv": f.vector.dv if f.vector else None,
        "blink": f.blink_observation,
    }
