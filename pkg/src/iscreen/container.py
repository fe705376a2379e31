"""Bit-exact frame stream container and ground-truth sidecar.

Container layout: magic "EYS1", then little-endian u32 width, height,
frame_count, fps_numerator, fps_denominator, then frame_count raw frames of
width*height bytes, row-major. The sidecar is newline-delimited JSON, one
object per frame: {"i", "du", "dv", "tx", "ty", "blink"} with tx/ty null
for frames without a known on-screen target.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .synth import GroundTruth

MAGIC = b"EYS1"
_HEADER = struct.Struct("<4sIIIII")


class ContainerFormatError(ValueError):
    """Container bytes do not match the declared layout."""


def write_container(path, frames, fps=(30, 1)) -> None:
    frames = np.asarray(frames, dtype=np.uint8)
    if frames.ndim != 3:
        raise ContainerFormatError("expected a (count, height, width) frame stack")
    count, h, w = frames.shape
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, w, h, count, int(fps[0]), int(fps[1])))
        f.write(frames.tobytes())


def read_container(path) -> tuple[np.ndarray, tuple[int, int]]:
    """Return (frames (count, h, w) uint8, (fps_numerator, fps_denominator))."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ContainerFormatError("container shorter than header")
    magic, w, h, count, num, den = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ContainerFormatError(f"bad magic {magic!r}")
    if num == 0 or den == 0:
        raise ContainerFormatError("fps numerator/denominator must be nonzero")
    expect = _HEADER.size + w * h * count
    if len(raw) != expect:
        raise ContainerFormatError(f"expected {expect} bytes, found {len(raw)}")
    frames = np.frombuffer(raw, dtype=np.uint8, offset=_HEADER.size).reshape(count, h, w)
    return frames, (num, den)


def truth_to_json(t: GroundTruth) -> dict:
    tx, ty = (t.screen_target if t.screen_target is not None else (None, None))
    return {"i": t.frame_index, "du": t.pccr_vector[0], "dv": t.pccr_vector[1],
            "tx": tx, "ty": ty, "blink": t.blink}


def truth_from_json(obj: dict) -> GroundTruth:
    target = None
    if obj.get("tx") is not None and obj.get("ty") is not None:
        target = (float(obj["tx"]), float(obj["ty"]))
    return GroundTruth(frame_index=int(obj["i"]),
                       pccr_vector=(float(obj["du"]), float(obj["dv"])),
                       screen_target=target, blink=bool(obj["blink"]))


def write_sidecar(path, truths) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for t in truths:
            f.write(json.dumps(truth_to_json(t), separators=(",", ":")) + "\n")


def read_sidecar(path) -> list[GroundTruth]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(truth_from_json(json.loads(line)))
    return out


def frame_time_ms(index: int, fps: tuple[int, int]) -> float:
    return index * 1000.0 * fps[1] / fps[0]
