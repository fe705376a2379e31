"""Dataset generation: scripted eye sessions rendered to disk.

A dataset directory holds a frame container, a ground-truth sidecar, and a
manifest tying them together with the generator's full configuration. A
diagonal affine truth map converts between screen targets and gaze vectors:
calibration capture inverts it (target -> vector), free-gaze traces are
generated in vector space and mapped forward, so every frame carries an
exact on-screen truth label.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import preprocess
from .calibrate import default_targets
from .container import read_container, read_sidecar, write_container, write_sidecar
from .synth import GazeScript, GroundTruth, ScriptSegment, SyntheticScene, run_script

CONTAINER_NAME = "frames.eys"
SIDECAR_NAME = "truth.ndjson"
MANIFEST_NAME = "manifest.json"
AUG_CONTAINER_NAME = "frames_aug.eys"
AUG_SIDECAR_NAME = "truth_aug.ndjson"


class ConfigError(ValueError):
    pass


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class TruthMap:
    """x = a0 + a1*du + a2*dv + a3*du*dv, likewise y over (b0..b3)."""

    coef_x: tuple[float, float, float, float]
    coef_y: tuple[float, float, float, float]

    def forward(self, du: float, dv: float) -> tuple[float, float]:
        a, b = self.coef_x, self.coef_y
        return (a[0] + a[1] * du + a[2] * dv + a[3] * du * dv,
                b[0] + b[1] * du + b[2] * dv + b[3] * du * dv)

    @property
    def diagonal(self) -> bool:
        a, b = self.coef_x, self.coef_y
        return a[2] == a[3] == b[1] == b[3] == 0.0 and a[1] != 0.0 and b[2] != 0.0

    def invert(self, x: float, y: float) -> tuple[float, float]:
        if not self.diagonal:
            raise ConfigError("target inversion requires a diagonal truth map")
        a, b = self.coef_x, self.coef_y
        return ((x - a[0]) / a[1], (y - b[0]) / b[2])

    def to_json(self) -> dict:
        return {"x": list(self.coef_x), "y": list(self.coef_y)}

    @classmethod
    def from_json(cls, obj) -> "TruthMap":
        return cls(coef_x=tuple(float(v) for v in obj["x"]),
                   coef_y=tuple(float(v) for v in obj["y"]))


def default_truth_map(width: int, height: int) -> TruthMap:
    # Gains keep the glint inside the iris over the whole screen.
    return TruthMap(coef_x=(width / 2.0, width / 30.0, 0.0, 0.0),
                    coef_y=(height / 2.0, 0.0, height / 40.0, 0.0))


@dataclass(frozen=True)
class GenerateConfig:
    width: int = 1080
    height: int = 1920
    eye: SyntheticScene = field(default_factory=SyntheticScene)
    truth_map: TruthMap | None = None
    noise_sigma: float = 0.0
    fps: tuple[int, int] = (30, 1)
    seed: int = 0
    session: dict = field(default_factory=lambda: {"kind": "calibration"})
    augment_copies: int = 0

    def resolved_truth_map(self) -> TruthMap:
        return self.truth_map if self.truth_map is not None else default_truth_map(self.width, self.height)

    @classmethod
    def from_json(cls, obj: dict) -> "GenerateConfig":
        try:
            screen = obj.get("screen", {})
            eye = SyntheticScene(**obj.get("eye", {}))
            tm = TruthMap.from_json(obj["truth_map"]) if "truth_map" in obj else None
            fps = tuple(obj.get("fps", (30, 1)))
            cfg = cls(width=int(screen.get("width", 1080)), height=int(screen.get("height", 1920)),
                      eye=eye, truth_map=tm, noise_sigma=float(obj.get("noise_sigma", 0.0)),
                      fps=(int(fps[0]), int(fps[1])), seed=int(obj.get("seed", 0)),
                      session=dict(obj.get("session", {"kind": "calibration"})),
                      augment_copies=int(obj.get("augment_copies", 0)))
        except (TypeError, KeyError, ValueError, IndexError) as e:
            raise ConfigError(f"bad generate config: {e}") from e
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.width < 64 or self.height < 64:
            raise ConfigError("screen must be at least 64x64")
        if self.fps[0] <= 0 or self.fps[1] <= 0:
            raise ConfigError("fps must be positive")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        kind = self.session.get("kind")
        if kind not in ("calibration", "free_gaze", "taps"):
            raise ConfigError(f"unknown session kind {kind!r}")
        if kind == "free_gaze" and int(self.session.get("frames", 0)) <= 0:
            raise ConfigError("free_gaze session needs frames > 0")
        tm = self.resolved_truth_map()
        if not tm.diagonal:
            raise ConfigError("generator truth map must be diagonal (a2=a3=b1=b3=0)")
        self._scene_for((0.0, 0.0)).validate()

    def _scene_for(self, vector: tuple[float, float]) -> SyntheticScene:
        # The rendered glint sits at pupil_center + offset and the true PCCR
        # vector is -offset, so offset = -vector.
        return replace(self.eye, glint_offset=(-vector[0], -vector[1]),
                       noise_sigma=self.noise_sigma, rng_seed=self.seed)

    def vector_for_target(self, target: tuple[float, float]) -> tuple[float, float]:
        return self.resolved_truth_map().invert(*target)


def _calibration_script(cfg: GenerateConfig) -> tuple[GazeScript, dict]:
    dwell = int(cfg.session.get("dwell_frames", 45))
    trans = int(cfg.session.get("transition_frames", 8))
    targets = default_targets(cfg.width, cfg.height)
    segments = []
    prev = cfg._scene_for((0.0, 0.0))
    for tgt in targets:
        scene = cfg._scene_for(cfg.vector_for_target(tgt))
        if trans > 0:
            segments.append(ScriptSegment(frames=trans, scene=prev, end_scene=scene))
        segments.append(ScriptSegment(frames=dwell, scene=scene, target=tgt))
        prev = scene
    return GazeScript(segments=tuple(segments), fps=cfg.fps[0] / cfg.fps[1]), {}


def _free_gaze_script(cfg: GenerateConfig) -> tuple[GazeScript, dict]:
    total = int(cfg.session.get("frames", 1000))
    dwell = int(cfg.session.get("dwell_frames", 18))
    sweep = int(cfg.session.get("sweep_frames", 24))
    rng = np.random.default_rng(cfg.seed)
    tm = cfg.resolved_truth_map()
    du_lo, du_hi = sorted((tm.invert(0, 0)[0], tm.invert(cfg.width - 1, 0)[0]))
    dv_lo, dv_hi = sorted((tm.invert(0, 0)[1], tm.invert(0, cfg.height - 1)[1]))
    margin = 0.02
    du_span, dv_span = du_hi - du_lo, dv_hi - dv_lo

    def waypoint():
        return (du_lo + du_span * rng.uniform(margin, 1 - margin),
                dv_lo + dv_span * rng.uniform(margin, 1 - margin))

    segments = []
    count = 0
    prev_vec = (0.0, 0.0)
    while count < total:
        nxt = waypoint()
        for frames, (a, b) in ((sweep, (prev_vec, nxt)), (dwell, (nxt, nxt))):
            if count >= total:
                break
            frames = min(frames, total - count)
            seg_scene = cfg._scene_for(a)
            end_scene = cfg._scene_for(b) if a != b else None
            segments.append(ScriptSegment(frames=frames, scene=seg_scene, end_scene=end_scene))
            count += frames
        prev_vec = nxt
    return GazeScript(segments=tuple(segments), fps=cfg.fps[0] / cfg.fps[1]), {}


def _taps_script(cfg: GenerateConfig) -> tuple[GazeScript, dict]:
    n_taps = int(cfg.session.get("taps", 5))
    dwell = int(cfg.session.get("dwell_frames", 20))
    blink = int(cfg.session.get("blink_frames", 12))
    trans = int(cfg.session.get("transition_frames", 8))
    targets = default_targets(cfg.width, cfg.height)
    segments = []
    taps = []
    prev = cfg._scene_for((0.0, 0.0))
    frame = 0
    for i in range(n_taps):
        tgt = targets[i % len(targets)]
        scene = cfg._scene_for(cfg.vector_for_target(tgt))
        if trans > 0:
            segments.append(ScriptSegment(frames=trans, scene=prev, end_scene=scene))
            frame += trans
        segments.append(ScriptSegment(frames=dwell, scene=scene, target=tgt))
        frame += dwell
        segments.append(ScriptSegment(frames=blink, scene=scene, blink=True))
        taps.append({"x": tgt[0], "y": tgt[1], "frame_on": frame, "frame_off": frame + blink})
        frame += blink
        prev = scene
    # trailing open-eye dwell so the last blink gap closes in-stream
    segments.append(ScriptSegment(frames=dwell, scene=prev))
    return GazeScript(segments=tuple(segments), fps=cfg.fps[0] / cfg.fps[1]), {"taps": taps}


_SCRIPT_BUILDERS = {"calibration": _calibration_script,
                    "free_gaze": _free_gaze_script,
                    "taps": _taps_script}


def build_script(cfg: GenerateConfig) -> tuple[GazeScript, dict]:
    return _SCRIPT_BUILDERS[cfg.session["kind"]](cfg)


def generate_dataset(cfg: GenerateConfig, outdir) -> dict:
    """Render the configured session and write container/sidecar/manifest."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    script, annotations = build_script(cfg)
    frames, truths = run_script(script)
    tm = cfg.resolved_truth_map()
    if cfg.session["kind"] == "free_gaze":
        # Every free-gaze frame has an exact truth label via the forward map;
        # scripted capture sessions label only their dwell segments.
        truths = [t if t.screen_target is not None else
                  replace(t, screen_target=tm.forward(*t.pccr_vector)) for t in truths]
    write_container(outdir / CONTAINER_NAME, np.stack(frames), cfg.fps)
    write_sidecar(outdir / SIDECAR_NAME, truths)

    manifest = {
        "schema": 1,
        "container": CONTAINER_NAME,
        "sidecar": SIDECAR_NAME,
        "frame_count": len(frames),
        "fps": list(cfg.fps),
        "seed": cfg.seed,
        "screen": {"width": cfg.width, "height": cfg.height},
        "truth_map": tm.to_json(),
        "session": cfg.session,
        "noise_sigma": cfg.noise_sigma,
        "annotations": annotations,
        "augmented": None,
    }
    if cfg.augment_copies > 0:
        manifest["augmented"] = _write_augmented(cfg, outdir, frames, truths)
    with open(outdir / MANIFEST_NAME, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


def _write_augmented(cfg, outdir, frames, truths) -> dict:
    """Label-preserving augmented copies of the target-labeled frames."""
    aug_frames, aug_truths, specs = [], [], []
    k = 0
    for frame, truth in zip(frames, truths):
        if truth.screen_target is None or truth.blink:
            continue
        for c in range(cfg.augment_copies):
            spec = preprocess.sample_augment_spec(rng_seed=cfg.seed * 100003 + k)
            aug_frames.append(preprocess.augment(frame, spec))
            aug_truths.append(replace(truth, frame_index=len(aug_frames) - 1))
            specs.append(spec.to_json())
            k += 1
    write_container(outdir / AUG_CONTAINER_NAME, np.stack(aug_frames), cfg.fps)
    write_sidecar(outdir / AUG_SIDECAR_NAME, aug_truths)
    return {"container": AUG_CONTAINER_NAME, "sidecar": AUG_SIDECAR_NAME, "specs": specs}


@dataclass(frozen=True)
class Dataset:
    frames: np.ndarray
    fps: tuple[int, int]
    truths: list[GroundTruth]
    manifest: dict
    root: Path


def load_dataset(path) -> Dataset:
    root = Path(path)
    mpath = root / MANIFEST_NAME
    if not mpath.exists():
        raise DatasetError(f"no manifest at {mpath}")
    manifest = json.loads(mpath.read_text("utf-8"))
    for key in ("container", "sidecar"):
        if not (root / manifest[key]).exists():
            raise DatasetError(f"manifest references missing file {manifest[key]}")
    frames, fps = read_container(root / manifest["container"])
    truths = read_sidecar(root / manifest["sidecar"])
    if len(frames) != manifest["frame_count"] or len(truths) != manifest["frame_count"]:
        raise DatasetError("frame counts disagree between container, sidecar and manifest")
    return Dataset(frames=frames, fps=fps, truths=truths, manifest=manifest, root=root)


def load_augmented(ds: Dataset):
    aug = ds.manifest.get("augmented")
    if not aug:
        return None
    frames, _ = read_container(ds.root / aug["container"])
    truths = read_sidecar(ds.root / aug["sidecar"])
    return frames, truths
