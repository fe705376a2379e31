"""Frame-stream replay through the full measurement-to-events loop.

Per frame: extract eye features, map the PCCR vector to screen coordinates,
feed the gaze sample to the session machine, collect UI events. The metrics
report compares predictions against the dataset's sidecar truth.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .calibrate import (CalibrationModel, CalibrationSample, DegenerateCalibration,
                        LearnedRegressor, aggregate_dwell, fit_affine_cross,
                        fit_regressor, make_features)
from .container import frame_time_ms
from .datasets import Dataset
from .detect import DetectorConfig, EyeFeatures, extract_features, features_to_json
from .events import GazeSample, SessionConfig, SessionMachine, UIEvent, event_log_line
from .keyboard import KeyboardLayout, Lexicon


class ModelMismatch(ValueError):
    pass


def load_model(path):
    """Load either mapping-model flavor from JSON (keyed by "kind")."""
    with open(path, "r", encoding="utf-8") as f:
        obj = json.load(f)
    if "kind" in obj:
        return LearnedRegressor.from_json(obj)
    return CalibrationModel.from_json(obj)


def map_features(model, feats: EyeFeatures) -> tuple[float, float] | None:
    if feats.vector is None:
        return None
    if isinstance(model, LearnedRegressor):
        radius = feats.pupil.radius if feats.pupil else 0.0
        return model.predict(make_features(feats.vector.du, feats.vector.dv, radius))
    return model.map_gaze((feats.vector.du, feats.vector.dv))


@dataclass
class MetricsReport:
    mean_gaze_error_px: float | None
    p95_gaze_error_px: float | None
    blink_precision: float
    blink_recall: float
    scroll_confusion: dict
    word_top1: float | None
    word_top3: float | None
    frames_per_second: float

    def to_json(self) -> dict:
        return {
            "mean_gaze_error_px": self.mean_gaze_error_px,
            "p95_gaze_error_px": self.p95_gaze_error_px,
            "blink_precision": self.blink_precision,
            "blink_recall": self.blink_recall,
            "scroll_confusion": self.scroll_confusion,
            "word_top1": self.word_top1,
            "word_top3": self.word_top3,
            "frames_per_second": self.frames_per_second,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, indent=2, sort_keys=True)
            f.write("\n")


@dataclass
class ReplayResult:
    events: list[UIEvent]
    features: list[EyeFeatures]
    predictions: list[tuple[float, float] | None]
    metrics: MetricsReport

    def write_event_log(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for ev in self.events:
                f.write(event_log_line(ev) + "\n")

    def write_features(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for i, feats in enumerate(self.features):
                f.write(json.dumps(features_to_json(i, feats), separators=(",", ":")) + "\n")


def check_model_matches(model, dataset: Dataset) -> None:
    screen = dataset.manifest.get("screen", {})
    mw = model.width if hasattr(model, "width") else None
    mh = model.height if hasattr(model, "height") else None
    if screen and (mw != screen.get("width") or mh != screen.get("height")):
        raise ModelMismatch(
            f"model screen {mw}x{mh} does not match dataset "
            f"{screen.get('width')}x{screen.get('height')}")


def replay(dataset: Dataset, model, layout: KeyboardLayout | None = None,
           lexicon: Lexicon | None = None,
           detector: DetectorConfig = DetectorConfig(),
           session: SessionConfig | None = None) -> ReplayResult:
    check_model_matches(model, dataset)
    screen = dataset.manifest["screen"]
    if session is None:
        session = SessionConfig(width=screen["width"], height=screen["height"])
    machine = SessionMachine(session, layout, lexicon)
    events: list[UIEvent] = []
    features: list[EyeFeatures] = []
    preds: list[tuple[float, float] | None] = []

    t0 = time.perf_counter()
    for i, frame in enumerate(dataset.frames):
        feats = extract_features(frame, detector)
        point = map_features(model, feats)
        t = frame_time_ms(i, dataset.fps)
        sample = GazeSample(t=t, point=point, valid=point is not None)
        events.extend(machine.feed(sample))
        features.append(feats)
        preds.append(point)
    events.extend(machine.finish())
    elapsed = time.perf_counter() - t0

    metrics = compute_metrics(dataset, features, preds, events, elapsed)
    return ReplayResult(events=events, features=features, predictions=preds, metrics=metrics)


def compute_metrics(dataset: Dataset, features, preds, events, elapsed: float) -> MetricsReport:
    errs = []
    pred_blinks = truth_blinks = both = 0
    for feats, pred, truth in zip(features, preds, dataset.truths):
        if feats.blink_observation:
            pred_blinks += 1
        if truth.blink:
            truth_blinks += 1
        if feats.blink_observation and truth.blink:
            both += 1
        if pred is not None and truth.screen_target is not None and not truth.blink:
            errs.append(np.hypot(pred[0] - truth.screen_target[0],
                                 pred[1] - truth.screen_target[1]))
    precision = both / pred_blinks if pred_blinks else 1.0
    recall = both / truth_blinks if truth_blinks else 1.0
    confusion = _scroll_confusion(dataset.manifest.get("annotations", {}), events, dataset.fps)
    return MetricsReport(
        mean_gaze_error_px=float(np.mean(errs)) if errs else None,
        p95_gaze_error_px=float(np.percentile(errs, 95)) if errs else None,
        blink_precision=precision,
        blink_recall=recall,
        scroll_confusion=confusion,
        word_top1=None,
        word_top3=None,
        frames_per_second=len(features) / elapsed if elapsed > 0 else 0.0,
    )


def collect_target_vectors(dataset: Dataset, detector: DetectorConfig = DetectorConfig()):
    """Group measured (vector, radius) per distinct sidecar target."""
    groups: dict[tuple[float, float], list] = {}
    for frame, truth in zip(dataset.frames, dataset.truths):
        if truth.screen_target is None or truth.blink:
            continue
        feats = extract_features(frame, detector)
        if feats.vector is None:
            continue
        radius = feats.pupil.radius if feats.pupil else 0.0
        groups.setdefault(truth.screen_target, []).append(
            (feats.vector.du, feats.vector.dv, radius))
    return groups


def calibrate_from_dataset(dataset: Dataset, detector: DetectorConfig = DetectorConfig(),
                           dwell_window: int = 30) -> CalibrationModel:
    """Detect, aggregate the median vector per target, fit the closed form."""
    groups = collect_target_vectors(dataset, detector)
    if not groups:
        raise DegenerateCalibration("dataset has no target-labeled frames")
    samples = []
    for target, rows in groups.items():
        vec = aggregate_dwell([(du, dv) for du, dv, _ in rows], window=dwell_window)
        samples.append(CalibrationSample(vector=vec, target=target))
    screen = dataset.manifest["screen"]
    return fit_affine_cross(samples, screen["width"], screen["height"])


def regressor_from_dataset(dataset: Dataset, variant: str = "linear",
                           ridge: float = 1e-6, seed: int = 0,
                           detector: DetectorConfig = DetectorConfig(),
                           augmented=None) -> LearnedRegressor:
    """Fit the learned mapping on every labeled frame (plus augmented copies)."""
    rows = []
    sources = [(dataset.frames, dataset.truths)]
    if augmented is not None:
        sources.append(augmented)
    for frames, truths in sources:
        for frame, truth in zip(frames, truths):
            if truth.screen_target is None or truth.blink:
                continue
            feats = extract_features(frame, detector)
            if feats.vector is None:
                continue
            radius = feats.pupil.radius if feats.pupil else 0.0
            rows.append(((feats.vector.du, feats.vector.dv, radius), truth.screen_target))
    if not rows:
        raise DegenerateCalibration("dataset has no target-labeled frames")
    screen = dataset.manifest["screen"]
    return fit_regressor(rows, ridge=ridge, variant=variant, seed=seed,
                         width=screen["width"], height=screen["height"])


def _scroll_confusion(annotations: dict, events, fps) -> dict:
    sweeps = annotations.get("scrolls", [])
    if not sweeps:
        return {}
    counts = {"up": {"up": 0, "down": 0, "none": 0},
              "down": {"up": 0, "down": 0, "none": 0}}
    scroll_events = [(e.t, e.kind.removeprefix("scroll_")) for e in events
                     if e.kind in ("scroll_up", "scroll_down")]
    for sweep in sweeps:
        t0 = frame_time_ms(sweep["frame_on"], fps)
        t1 = frame_time_ms(sweep["frame_off"], fps) + 100.0
        hit = next((kind for t, kind in scroll_events if t0 <= t <= t1), None)
        counts[sweep["dir"]][hit or "none"] += 1
    return counts
