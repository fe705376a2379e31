import numpy as np
import pytest

from iscreen.container import (MAGIC, ContainerFormatError, frame_time_ms, read_container,
                               read_sidecar, write_container, write_sidecar)
from iscreen.synth import GroundTruth


def test_container_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    frames = rng.integers(0, 256, (7, 12, 9), dtype=np.uint8)
    path = tmp_path / "x.eys"
    write_container(path, frames, fps=(30, 1))
    back, fps = read_container(path)
    assert fps == (30, 1)
    assert np.array_equal(back, frames)


def test_container_header_layout(tmp_path):
    frames = np.zeros((2, 3, 4), dtype=np.uint8)
    path = tmp_path / "x.eys"
    write_container(path, frames, fps=(24, 1))
    raw = path.read_bytes()
    assert raw[:4] == MAGIC
    assert np.frombuffer(raw[4:24], dtype="<u4").tolist() == [4, 3, 2, 24, 1]
    assert len(raw) == 24 + 2 * 3 * 4


def test_container_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.eys"
    path.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(ContainerFormatError):
        read_container(path)


def test_container_rejects_truncation(tmp_path):
    frames = np.zeros((2, 3, 4), dtype=np.uint8)
    path = tmp_path / "x.eys"
    write_container(path, frames)
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(ContainerFormatError):
        read_container(path)


def test_sidecar_round_trip(tmp_path):
    truths = [
        GroundTruth(frame_index=0, pccr_vector=(1.5, -2.25), screen_target=(100.0, 200.0), blink=False),
        GroundTruth(frame_index=1, pccr_vector=(0.0, 0.0), screen_target=None, blink=True),
    ]
    path = tmp_path / "truth.ndjson"
    write_sidecar(path, truths)
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 2
    assert '"tx":null' in lines[1]
    assert read_sidecar(path) == truths


def test_frame_time():
    assert frame_time_ms(0, (30, 1)) == 0.0
    assert frame_time_ms(30, (30, 1)) == 1000.0
    assert frame_time_ms(1, (30000, 1001)) == pytest.approx(33.367, abs=1e-3)
