"""Deterministic synthetic IR eye frames with exact ground truth.

The renderer stands in for an IR camera: it draws an anti-aliased dark pupil
disk over an iris disk over a flat background, a bright corneal glint near
the pupil, an eyelid band occluding the top of the iris region, and seeded
Gaussian noise. Because every frame is constructed from known parameters,
the true pupil-glint displacement and blink state are available per frame
and serve as the oracle for all downstream accuracy tests.

Conventions: frames are uint8 arrays of shape (height, width) indexed
[y, x]; points are (x, y) with integer coordinates at pixel centers; disk
edges are blended by coverage over a 2x2 subsample grid (offsets +/-0.25).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels

# Intensity at/above which a pixel qualifies as a corneal glint; shared with
# the detector default. Eyelid closure at/above BLINK_CLOSURE counts as a
# blink frame (and is guaranteed to occlude the glint for valid scenes).
GLINT_THRESHOLD = 200
BLINK_CLOSURE = 0.8


class InvalidScene(ValueError):
    """Scene parameters violate geometry or photometry constraints."""


@dataclass(frozen=True)
class SyntheticScene:
    """Parameters of one rendered eye frame.

    Defaults describe the standard desk-scale test eye: a 160x120 frame,
    bright skin background, mid-gray iris, dark pupil, one dominant glint.
    ``glint2_offset`` optionally adds a second, equally bright glint to
    exercise detector tie-breaking.
    """

    width: int = 160
    height: int = 120
    background_intensity: float = 120.0
    iris_center: tuple[float, float] = (80.0, 60.0)
    iris_radius: float = 36.0
    iris_intensity: float = 90.0
    pupil_center: tuple[float, float] = (80.0, 60.0)
    pupil_radius: float = 11.0
    pupil_intensity: float = 12.0
    glint_offset: tuple[float, float] = (-3.0, -2.0)
    glint_radius: float = 2.5
    glint_intensity: float = 250.0
    eyelid_closure: float = 0.0
    noise_sigma: float = 0.0
    rng_seed: int = 0
    glint2_offset: tuple[float, float] | None = None

    @property
    def glint_center(self) -> tuple[float, float]:
        return (self.pupil_center[0] + self.glint_offset[0],
                self.pupil_center[1] + self.glint_offset[1])

    @property
    def pccr_vector(self) -> tuple[float, float]:
        """True pupil-minus-glint displacement in pixels."""
        return (-self.glint_offset[0], -self.glint_offset[1])

    @property
    def blink(self) -> bool:
        return self.eyelid_closure >= BLINK_CLOSURE

    def validate(self) -> None:
        if self.width < 16 or self.height < 16:
            raise InvalidScene(f"frame must be at least 16x16, got {self.width}x{self.height}")
        for name in ("iris_radius", "pupil_radius", "glint_radius"):
            if getattr(self, name) <= 0:
                raise InvalidScene(f"{name} must be positive")
        for name, (cx, cy) in (("iris_center", self.iris_center),
                               ("pupil_center", self.pupil_center),
                               ("glint_center", self.glint_center)):
            if not (0 <= cx <= self.width - 1 and 0 <= cy <= self.height - 1):
                raise InvalidScene(f"{name} {(cx, cy)} outside frame")
        if not (self.pupil_intensity < self.iris_intensity < self.glint_intensity):
            raise InvalidScene("need pupil_intensity < iris_intensity < glint_intensity")
        if self.glint_intensity < GLINT_THRESHOLD:
            raise InvalidScene(f"glint_intensity must be >= {GLINT_THRESHOLD}")
        # Non-glint content must stay below the glint threshold so that a
        # fully closed eyelid really produces a "no reflection" frame.
        for name in ("background_intensity", "iris_intensity", "pupil_intensity"):
            v = getattr(self, name)
            if not (0 <= v < GLINT_THRESHOLD):
                raise InvalidScene(f"{name} must lie in [0, {GLINT_THRESHOLD})")
        if not 0.0 <= self.eyelid_closure <= 1.0:
            raise InvalidScene("eyelid_closure must lie in [0, 1]")
        if self.noise_sigma < 0:
            raise InvalidScene("noise_sigma must be >= 0")
        # The eyelid band spans the iris region, so pupil and glints must sit
        # inside the iris disk for full closure to occlude them.
        icx, icy = self.iris_center
        px, py = self.pupil_center
        if math.hypot(px - icx, py - icy) + self.pupil_radius > self.iris_radius + 1e-9:
            raise InvalidScene("pupil disk must lie inside the iris disk")
        for off in (self.glint_offset, self.glint2_offset):
            if off is None:
                continue
            gx, gy = px + off[0], py + off[1]
            if math.hypot(gx - icx, gy - icy) + self.glint_radius > self.iris_radius + 1e-9:
                raise InvalidScene("glint disk must lie inside the iris disk")


def render_eye_frame(scene: SyntheticScene) -> np.ndarray:
    """Render one frame; bit-identical for identical (scene, seed)."""
    scene.validate()
    img = np.full((scene.height, scene.width), float(scene.background_intensity), np.float64)
    kernels.blend_disk(img, scene.iris_center[0], scene.iris_center[1],
                       float(scene.iris_radius), float(scene.iris_intensity))
    kernels.blend_disk(img, scene.pupil_center[0], scene.pupil_center[1],
                       float(scene.pupil_radius), float(scene.pupil_intensity))
    gx, gy = scene.glint_center
    kernels.blend_disk(img, gx, gy, float(scene.glint_radius), float(scene.glint_intensity))
    if scene.glint2_offset is not None:
        g2x = scene.pupil_center[0] + scene.glint2_offset[0]
        g2y = scene.pupil_center[1] + scene.glint2_offset[1]
        kernels.blend_disk(img, g2x, g2y, float(scene.glint_radius), float(scene.glint_intensity))
    if scene.eyelid_closure > 0.0:
        _paint_eyelid(img, scene)
    if scene.noise_sigma > 0.0:
        rng = np.random.default_rng(scene.rng_seed)
        img += rng.standard_normal(img.shape) * scene.noise_sigma
    np.clip(img, 0.0, 255.0, out=img)
    return np.rint(img).astype(np.uint8)


def _paint_eyelid(img: np.ndarray, scene: SyntheticScene) -> None:
    # A full-width band growing down from the top of the iris region;
    # covered depth is linear in closure. Partially covered edge rows blend.
    top = scene.iris_center[1] - scene.iris_radius
    bottom = top + scene.eyelid_closure * 2.0 * scene.iris_radius
    ys = np.arange(img.shape[0], dtype=np.float64)
    cover = np.clip(np.minimum(ys + 0.5, bottom) - np.maximum(ys - 0.5, top), 0.0, 1.0)
    img *= (1.0 - cover)[:, None]
    img += (cover * scene.background_intensity)[:, None]


@dataclass(frozen=True)
class GroundTruth:
    """Per-frame oracle labels carried alongside rendered frames."""

    frame_index: int
    pccr_vector: tuple[float, float]
    screen_target: tuple[float, float] | None
    blink: bool


@dataclass(frozen=True)
class ScriptSegment:
    """A run of frames with static or linearly ramped scene parameters."""

    frames: int
    scene: SyntheticScene
    end_scene: SyntheticScene | None = None
    blink: bool = False
    target: tuple[float, float] | None = None


@dataclass(frozen=True)
class GazeScript:
    segments: tuple[ScriptSegment, ...]
    fps: float = 30.0


def _lerp(a: float, b: float, t: float) -> float:
    return a + (b - a) * t


def interpolate_scene(a: SyntheticScene, b: SyntheticScene, t: float) -> SyntheticScene:
    """Linear interpolation of all numeric scene parameters."""
    def pair(pa, pb):
        return (_lerp(pa[0], pb[0], t), _lerp(pa[1], pb[1], t))

    g2 = None
    if a.glint2_offset is not None and b.glint2_offset is not None:
        g2 = pair(a.glint2_offset, b.glint2_offset)
    elif a.glint2_offset is not None:
        g2 = a.glint2_offset
    return replace(
        a,
        background_intensity=_lerp(a.background_intensity, b.background_intensity, t),
        iris_center=pair(a.iris_center, b.iris_center),
        iris_radius=_lerp(a.iris_radius, b.iris_radius, t),
        iris_intensity=_lerp(a.iris_intensity, b.iris_intensity, t),
        pupil_center=pair(a.pupil_center, b.pupil_center),
        pupil_radius=_lerp(a.pupil_radius, b.pupil_radius, t),
        pupil_intensity=_lerp(a.pupil_intensity, b.pupil_intensity, t),
        glint_offset=pair(a.glint_offset, b.glint_offset),
        glint_radius=_lerp(a.glint_radius, b.glint_radius, t),
        glint_intensity=_lerp(a.glint_intensity, b.glint_intensity, t),
        eyelid_closure=_lerp(a.eyelid_closure, b.eyelid_closure, t),
        noise_sigma=_lerp(a.noise_sigma, b.noise_sigma, t),
        glint2_offset=g2,
    )


def script_frames(script: GazeScript):
    """Yield (frame_index, scene, segment) for every frame of the script."""
    if not script.segments or sum(s.frames for s in script.segments) <= 0:
        raise ValueError("script must contain at least one frame")
    index = 0
    for seg in script.segments:
        if seg.frames <= 0:
            raise ValueError("segment frame count must be positive")
        for k in range(seg.frames):
            t = k / (seg.frames - 1) if seg.frames > 1 else 0.0
            scene = seg.scene if seg.end_scene is None else interpolate_scene(seg.scene, seg.end_scene, t)
            if seg.blink:
                scene = replace(scene, eyelid_closure=1.0)
            # Fresh noise per frame, still fully determined by the base seed.
            scene = replace(scene, rng_seed=scene.rng_seed + index)
            yield index, scene, seg
            index += 1


def run_script(script: GazeScript) -> tuple[list[np.ndarray], list[GroundTruth]]:
    """Render a script into frames plus one GroundTruth per frame."""
    frames: list[np.ndarray] = []
    truths: list[GroundTruth] = []
    for index, scene, seg in script_frames(script):
        frames.append(render_eye_frame(scene))
        truths.append(GroundTruth(
            frame_index=index,
            pccr_vector=scene.pccr_vector,
            screen_target=seg.target,
            blink=scene.blink,
        ))
    return frames, truths
