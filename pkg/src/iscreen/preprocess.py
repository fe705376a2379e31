"""Image conditioning: thresholding, background subtraction, augmentation.

Frames are uint8 arrays (height, width); binary masks are bool arrays of the
same shape. Morphology uses a k x k square structuring element with
out-of-bounds treated as unset, for masks and grayscale alike. Augmentation
ops apply strictly in listed order and clamp intensities to 0..255; geometry
ops resample bilinearly unless an op requests nearest-neighbor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels


class DimensionMismatch(ValueError):
    pass


class InvalidSpec(ValueError):
    pass


class InvalidKernel(ValueError):
    pass


def binary_threshold(frame: np.ndarray, threshold: int, polarity: str = "keep_above") -> np.ndarray:
    """keep_below: pixel < threshold; keep_above: pixel >= threshold."""
    if polarity == "keep_below":
        return frame < threshold
    if polarity == "keep_above":
        return frame >= threshold
    raise ValueError(f"unknown polarity {polarity!r}")


def background_subtract(frame: np.ndarray, background: np.ndarray) -> np.ndarray:
    """Per-pixel absolute difference |frame - background|."""
    if frame.shape != background.shape:
        raise DimensionMismatch(f"{frame.shape} vs {background.shape}")
    return np.abs(frame.astype(np.int16) - background.astype(np.int16)).astype(np.uint8)


def _check_kernel(k) -> int:
    k = int(k)
    if k < 3 or k % 2 == 0:
        raise InvalidKernel(f"kernel size must be odd and >= 3, got {k}")
    return k


def morphology(mask: np.ndarray, op: str, k: int) -> np.ndarray:
    k = _check_kernel(k)
    m = mask.astype(np.uint8)
    if op == "dilate":
        out = kernels.binmorph(m, k, True)
    elif op == "erode":
        out = kernels.binmorph(m, k, False)
    elif op == "open":
        out = kernels.binmorph(kernels.binmorph(m, k, False), k, True)
    elif op == "close":
        out = kernels.binmorph(kernels.binmorph(m, k, True), k, False)
    else:
        raise ValueError(f"unknown morphology op {op!r}")
    return out.astype(bool)


# ---------------------------------------------------------------------------
# augmentation
# ---------------------------------------------------------------------------

# op name -> required parameter names
_AUGMENT_PARAMS = {
    "flip_h": (),
    "flip_v": (),
    "rotate": ("deg",),
    "resize": ("w", "h"),
    "pad": ("l", "r", "t", "b", "fill"),
    "brightness": ("delta",),
    "contrast": ("gain",),
    "saturate_clamp": ("lo", "hi"),
    "sharpen": (),
    "blur": ("radius",),
    "dilate": ("k",),
    "erode": ("k",),
    "open": ("k",),
    "close": ("k",),
}
_RESAMPLE_OPS = {"rotate", "resize"}


@dataclass(frozen=True)
class AugmentOp:
    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def validate(self) -> None:
        if self.name not in _AUGMENT_PARAMS:
            raise InvalidSpec(f"unknown augment op {self.name!r}")
        missing = [p for p in _AUGMENT_PARAMS[self.name] if p not in self.params]
        if missing:
            raise InvalidSpec(f"{self.name}: missing params {missing}")
        if self.name == "rotate":
            deg = self.params["deg"]
            if not (-45.0 < deg <= 45.0):
                raise InvalidSpec(f"rotation must lie in (-45, 45], got {deg}")
        if self.name == "resize":
            if self.params["w"] < 8 or self.params["h"] < 8:
                raise InvalidSpec("resize dims must be >= 8")
        if self.name in ("dilate", "erode", "open", "close"):
            k = self.params["k"]
            if k < 3 or k % 2 == 0:
                raise InvalidSpec(f"kernel size must be odd and >= 3, got {k}")
        if self.name == "blur" and self.params["radius"] < 1:
            raise InvalidSpec("blur radius must be >= 1")
        if self.name in _RESAMPLE_OPS:
            if self.params.get("resample", "bilinear") not in ("bilinear", "nearest"):
                raise InvalidSpec("resample must be 'bilinear' or 'nearest'")


@dataclass(frozen=True)
class AugmentSpec:
    """Ordered augmentation recipe, serializable to a JSON op array."""

    ops: tuple[AugmentOp, ...]
    rng_seed: int = 0

    def validate(self) -> None:
        for op in self.ops:
            op.validate()

    def to_json(self) -> list[dict]:
        return [{"op": op.name, **op.params, "seed": op.seed} for op in self.ops]

    @classmethod
    def from_json(cls, arr) -> "AugmentSpec":
        ops = []
        for obj in arr:
            obj = dict(obj)
            name = obj.pop("op")
            seed = int(obj.pop("seed", 0))
            ops.append(AugmentOp(name=name, params=obj, seed=seed))
        spec = cls(ops=tuple(ops), rng_seed=ops[0].seed if ops else 0)
        spec.validate()
        return spec


def _border_mean(frame: np.ndarray) -> int:
    h, w = frame.shape
    if h == 1 or w == 1:
        return int(round(float(frame.mean())))
    edge = np.concatenate([frame[0, :], frame[-1, :], frame[1:-1, 0], frame[1:-1, -1]])
    return int(round(float(edge.mean())))


def _warp(frame, m00, m01, m02, m10, m11, m12, out_h, out_w, fill, resample):
    if resample == "bilinear":
        return kernels.warp_bilinear(frame, m00, m01, m02, m10, m11, m12,
                                     out_h, out_w, np.uint8(fill))
    h, w = frame.shape
    xs = np.arange(out_w, dtype=np.float64)
    ys = np.arange(out_h, dtype=np.float64)
    sx = m00 * xs[None, :] + m01 * ys[:, None] + m02
    sy = m10 * xs[None, :] + m11 * ys[:, None] + m12
    xi = np.rint(sx).astype(np.int64)
    yi = np.rint(sy).astype(np.int64)
    inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    out = np.full((out_h, out_w), np.uint8(fill))
    out[inside] = frame[yi[inside], xi[inside]]
    return out


def _apply_rotate(frame, deg, resample):
    h, w = frame.shape
    rad = np.deg2rad(deg)
    c, s = np.cos(rad), np.sin(rad)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    # Inverse mapping of a rotation about the frame center; exposed corners
    # fill with the border mean so augmented training crops keep soft edges.
    m02 = cx - c * cx - s * cy
    m12 = cy + s * cx - c * cy
    return _warp(frame, c, s, m02, -s, c, m12, h, w, _border_mean(frame), resample)


def _apply_resize(frame, out_w, out_h, resample):
    h, w = frame.shape
    sxs = (w - 1) / (out_w - 1) if out_w > 1 else 0.0
    sys_ = (h - 1) / (out_h - 1) if out_h > 1 else 0.0
    m02 = 0.0 if out_w > 1 else (w - 1) / 2.0
    m12 = 0.0 if out_h > 1 else (h - 1) / 2.0
    return _warp(frame, sxs, 0.0, m02, 0.0, sys_, m12, out_h, out_w, 0, resample)


def _apply_op(frame: np.ndarray, op: AugmentOp) -> np.ndarray:
    p = op.params
    if op.name == "flip_h":
        return np.fliplr(frame).copy()
    if op.name == "flip_v":
        return np.flipud(frame).copy()
    if op.name == "rotate":
        return _apply_rotate(frame, float(p["deg"]), p.get("resample", "bilinear"))
    if op.name == "resize":
        return _apply_resize(frame, int(p["w"]), int(p["h"]), p.get("resample", "bilinear"))
    if op.name == "pad":
        return np.pad(frame, ((int(p["t"]), int(p["b"])), (int(p["l"]), int(p["r"]))),
                      constant_values=np.uint8(p["fill"]))
    if op.name == "brightness":
        return np.clip(frame.astype(np.int16) + int(p["delta"]), 0, 255).astype(np.uint8)
    if op.name == "contrast":
        v = np.rint((frame.astype(np.float64) - 128.0) * float(p["gain"]) + 128.0)
        return np.clip(v, 0, 255).astype(np.uint8)
    if op.name == "saturate_clamp":
        return np.clip(frame, np.uint8(p["lo"]), np.uint8(p["hi"]))
    if op.name == "sharpen":
        return kernels.sharpen3(frame)
    if op.name == "blur":
        return kernels.box_blur(frame, int(p["radius"]))
    if op.name in ("dilate", "erode", "open", "close"):
        k = int(p["k"])
        if op.name == "dilate":
            return kernels.graymorph(frame, k, True)
        if op.name == "erode":
            return kernels.graymorph(frame, k, False)
        if op.name == "open":
            return kernels.graymorph(kernels.graymorph(frame, k, False), k, True)
        return kernels.graymorph(kernels.graymorph(frame, k, True), k, False)
    raise InvalidSpec(f"unknown augment op {op.name!r}")


def augment(frame: np.ndarray, spec: AugmentSpec) -> np.ndarray:
    """Apply spec ops in listed order; deterministic for a given spec."""
    spec.validate()
    out = frame
    for op in spec.ops:
        out = _apply_op(out, op)
    return out


def sample_augment_spec(rng_seed: int, intensity_only: bool = True) -> AugmentSpec:
    """Draw a random label-preserving augmentation recipe.

    Used to expand calibration captures into regressor training data: the
    menu perturbs photometry (and optionally adds a small tilt) without
    changing what screen point the eye is looking at.
    """
    rng = np.random.default_rng(rng_seed)
    ops = []
    if rng.random() < 0.7:
        ops.append(AugmentOp("brightness", {"delta": int(rng.integers(-24, 25))}, rng_seed))
    if rng.random() < 0.7:
        ops.append(AugmentOp("contrast", {"gain": float(np.round(rng.uniform(0.85, 1.15), 3))}, rng_seed))
    if rng.random() < 0.4:
        ops.append(AugmentOp("blur", {"radius": 1}, rng_seed))
    if rng.random() < 0.3:
        ops.append(AugmentOp("sharpen", {}, rng_seed))
    if not intensity_only and rng.random() < 0.5:
        ops.append(AugmentOp("rotate", {"deg": float(np.round(rng.uniform(-3.0, 3.0), 2))}, rng_seed))
    if not ops:
        ops.append(AugmentOp("brightness", {"delta": int(rng.integers(-10, 11))}, rng_seed))
    return AugmentSpec(ops=tuple(ops), rng_seed=rng_seed)


def spec_to_json_str(spec: AugmentSpec) -> str:
    return json.dumps(spec.to_json(), separators=(",", ":"))
