"""Command-line entry points: generate, calibrate, replay, serve, bench.

Exit codes: 0 ok, 2 invalid config, 3 I/O failure, 4 degenerate calibration
or missing targets, 5 container/model mismatch, 6 bind failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import kernels
from .accel import HAS_NUMBA
from .calibrate import DegenerateCalibration, InsufficientSamples
from .container import ContainerFormatError
from .datasets import (ConfigError, DatasetError, GenerateConfig, generate_dataset,
                       load_augmented, load_dataset)
from .detect import DetectorConfig, extract_features
from .events import GazeSample, SessionConfig, SessionMachine
from .keyboard import KeyboardLayout, Lexicon, default_layout, load_default_lexicon
from .pipeline import (ModelMismatch, calibrate_from_dataset, load_model, map_features,
                       regressor_from_dataset, replay)
from .server import ServeOptions, run_server
from .synth import InvalidScene, SyntheticScene, render_eye_frame

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_CALIBRATION = 4
EXIT_MISMATCH = 5
EXIT_BIND = 6


def _load_layout_lexicon(args):
    layout = KeyboardLayout.load(args.layout) if args.layout else None
    lexicon = Lexicon.load(args.lexicon) if args.lexicon else None
    if layout is not None and lexicon is None:
        lexicon = load_default_lexicon()
    return layout, lexicon


def cmd_generate(args) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except OSError as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as e:
        print(f"config is not valid JSON: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        cfg = GenerateConfig.from_json(raw)
        manifest = generate_dataset(cfg, args.dataset)
    except (ConfigError, InvalidScene, ValueError) as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"write failed: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {manifest['frame_count']} frames to {args.dataset}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    try:
        ds = load_dataset(args.dataset)
    except (DatasetError, ContainerFormatError, OSError) as e:
        print(f"cannot load dataset: {e}", file=sys.stderr)
        return EXIT_IO
    try:
        if args.regressor:
            model = regressor_from_dataset(ds, variant=args.regressor, ridge=args.ridge,
                                           seed=args.seed or 0, augmented=load_augmented(ds))
            rms = float(np.sqrt(model.final_loss))
        else:
            model = calibrate_from_dataset(ds, dwell_window=args.dwell_window)
            rms = model.rms_residual
    except (DegenerateCalibration, InsufficientSamples) as e:
        print(f"calibration failed: {e}", file=sys.stderr)
        return EXIT_CALIBRATION
    try:
        with open(args.model, "w", encoding="utf-8") as f:
            json.dump(model.to_json(), f, separators=(",", ":"))
            f.write("\n")
    except OSError as e:
        print(f"write failed: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"rms {rms:.6g}")
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        ds = load_dataset(args.dataset)
        model = load_model(args.model)
        layout, lexicon = _load_layout_lexicon(args)
    except (DatasetError, OSError, json.JSONDecodeError) as e:
        print(f"cannot load inputs: {e}", file=sys.stderr)
        return EXIT_IO
    except ContainerFormatError as e:
        print(f"container mismatch: {e}", file=sys.stderr)
        return EXIT_MISMATCH
    try:
        result = replay(ds, model, layout=layout, lexicon=lexicon)
    except ModelMismatch as e:
        print(f"model mismatch: {e}", file=sys.stderr)
        return EXIT_MISMATCH
    try:
        if args.events_out:
            result.write_event_log(args.events_out)
        if args.features_out:
            result.write_features(args.features_out)
        if args.metrics_out:
            result.metrics.save(args.metrics_out)
    except OSError as e:
        print(f"write failed: {e}", file=sys.stderr)
        return EXIT_IO
    m = result.metrics
    print(json.dumps(m.to_json(), sort_keys=True))
    if m.frames_per_second < 120:
        print(f"warning: throughput {m.frames_per_second:.0f} fps below 120", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        model = load_model(args.model)
        ds = load_dataset(args.dataset) if args.dataset else None
        layout, lexicon = _load_layout_lexicon(args)
        if layout is None:
            layout = default_layout(model.width, model.height)
            lexicon = lexicon or load_default_lexicon()
    except (DatasetError, ContainerFormatError, OSError, json.JSONDecodeError) as e:
        print(f"cannot load inputs: {e}", file=sys.stderr)
        return EXIT_IO
    try:
        opts = ServeOptions(model=model, dataset=ds, layout=layout, lexicon=lexicon,
                            pacing=not args.no_pacing, host=args.host, port=args.port)
    except ModelMismatch as e:
        print(f"model mismatch: {e}", file=sys.stderr)
        return EXIT_MISMATCH
    return run_server(opts)


def cmd_bench(args) -> int:
    """Time the frame pipeline on a synthetic sweep (no I/O, no pacing)."""
    kernels.warmup()
    scene = SyntheticScene(width=args.width, height=args.height,
                           iris_center=(args.width / 2.0, args.height / 2.0),
                           pupil_center=(args.width / 2.0, args.height / 2.0),
                           iris_radius=args.height * 0.3, pupil_radius=args.height * 0.09,
                           glint_radius=args.height * 0.02, noise_sigma=args.sigma,
                           rng_seed=args.seed)
    from dataclasses import replace
    frames = []
    for i in range(args.frames):
        dx = 6.0 * np.sin(2 * np.pi * i / 60.0)
        dy = 4.0 * np.cos(2 * np.pi * i / 90.0)
        frames.append(render_eye_frame(replace(scene, glint_offset=(dx, dy),
                                               rng_seed=scene.rng_seed + i)))
    from .calibrate import CalibrationModel
    model = CalibrationModel(width=1080, height=1920,
                             coef_x=np.array([540.0, 36.0, 0.0, 0.0]),
                             coef_y=np.array([960.0, 0.0, 48.0, 0.0]), rms_residual=0.0)
    machine = SessionMachine(SessionConfig())
    detector = DetectorConfig()
    extract_features(frames[0], detector)        # dispatch warm-up
    t0 = time.perf_counter()
    for i, frame in enumerate(frames):
        feats = extract_features(frame, detector)
        point = map_features(model, feats)
        machine.feed(GazeSample(t=i * 33.0, point=point, valid=point is not None))
    elapsed = time.perf_counter() - t0
    fps = args.frames / elapsed
    print(json.dumps({"fps": round(fps, 1), "frames": args.frames,
                      "width": args.width, "height": args.height,
                      "numba": HAS_NUMBA}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iscreen",
                                description="eye-controlled interaction engine")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render a scripted dataset to disk")
    g.add_argument("--config", required=True)
    g.add_argument("--dataset", required=True)
    g.add_argument("--seed", type=int, default=None)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("calibrate", help="fit a gaze mapping from a dataset")
    c.add_argument("--dataset", required=True)
    c.add_argument("--model", required=True)
    c.add_argument("--regressor", choices=["linear", "mlp"], default=None)
    c.add_argument("--ridge", type=float, default=1e-6)
    c.add_argument("--dwell-window", type=int, default=30)
    c.add_argument("--seed", type=int, default=None)
    c.set_defaults(func=cmd_calibrate)

    r = sub.add_parser("replay", help="run a dataset through the full loop")
    r.add_argument("--dataset", required=True)
    r.add_argument("--model", required=True)
    r.add_argument("--layout", default=None)
    r.add_argument("--lexicon", default=None)
    r.add_argument("--events-out", default=None)
    r.add_argument("--features-out", default=None)
    r.add_argument("--metrics-out", default=None)
    r.set_defaults(func=cmd_replay)

    s = sub.add_parser("serve", help="stream gaze and events to clients")
    s.add_argument("--model", required=True)
    s.add_argument("--dataset", default=None)
    s.add_argument("--layout", default=None)
    s.add_argument("--lexicon", default=None)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, required=True)
    s.add_argument("--no-pacing", action="store_true")
    s.set_defaults(func=cmd_serve)

    b = sub.add_parser("bench", help="time the frame pipeline")
    b.add_argument("--width", type=int, default=640)
    b.add_argument("--height", type=int, default=480)
    b.add_argument("--frames", type=int, default=240)
    b.add_argument("--sigma", type=float, default=2.0)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
