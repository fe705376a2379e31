import numpy as np
import pytest
from dataclasses import replace

from iscreen.synth import (BLINK_CLOSURE, GLINT_THRESHOLD, GazeScript, InvalidScene,
                           ScriptSegment, SyntheticScene, render_eye_frame, run_script)
from oracles import centroid_below_ref

# The small frame exercised by the construction examples.
SPEC_SCENE = SyntheticScene(
    width=64, height=48, background_intensity=40.0,
    iris_center=(32.0, 24.0), iris_radius=14.0, iris_intensity=90.0,
    pupil_center=(32.0, 24.0), pupil_radius=6.0, pupil_intensity=10.0,
    glint_offset=(-3.0, -2.0), glint_radius=1.0, glint_intensity=250.0,
    eyelid_closure=0.0, noise_sigma=0.0, rng_seed=0)


def test_construction_pixels():
    frame = render_eye_frame(SPEC_SCENE)
    assert frame[24, 32] == 10          # pupil interior
    assert frame[22, 29] == 250         # glint interior


def test_full_closure_occludes_glint():
    frame = render_eye_frame(replace(SPEC_SCENE, eyelid_closure=1.0))
    assert frame.max() < 200


def test_determinism_bit_identical():
    scene = replace(SPEC_SCENE, noise_sigma=6.0, rng_seed=99)
    a = render_eye_frame(scene)
    b = render_eye_frame(scene)
    assert a.tobytes() == b.tobytes()


def test_different_seed_changes_noise():
    scene = replace(SPEC_SCENE, noise_sigma=6.0, rng_seed=1)
    a = render_eye_frame(scene)
    b = render_eye_frame(replace(scene, rng_seed=2))
    assert a.tobytes() != b.tobytes()


@pytest.mark.parametrize("bad", [
    dict(pupil_center=(100.0, 24.0), iris_center=(100.0, 24.0)),   # outside frame
    dict(pupil_radius=0.0),
    dict(iris_radius=-3.0),
    dict(width=8, height=8),
    dict(pupil_intensity=95.0),                                    # not darker than iris
    dict(glint_intensity=150.0),                                   # below glint floor
    dict(glint_offset=(13.5, 0.0)),                                # glint leaves iris
    dict(eyelid_closure=1.5),
])
def test_invalid_scene_rejected(bad):
    with pytest.raises(InvalidScene):
        render_eye_frame(replace(SPEC_SCENE, **bad))


def test_pupil_centroid_matches_independent_scan():
    # Oracle consistency: sigma=0, closure=0 -> dark-pixel centroid equals
    # pupil_center within 0.5 px, checked by a per-pixel reference scan.
    rng = np.random.default_rng(5)
    for _ in range(10):
        cx = 80.0 + rng.uniform(-6, 6)
        cy = 60.0 + rng.uniform(-6, 6)
        scene = replace(SyntheticScene(), pupil_center=(cx, cy), iris_center=(cx, cy))
        frame = render_eye_frame(scene)
        got = centroid_below_ref(frame, 64)
        assert got is not None
        assert abs(got[0] - cx) < 0.5 and abs(got[1] - cy) < 0.5


def test_blink_ground_truth_guarantee():
    # closure >= 0.8 -> no pixel at or above the glint threshold
    rng = np.random.default_rng(6)
    for i in range(20):
        scene = replace(
            SyntheticScene(),
            background_intensity=float(rng.uniform(30, 160)),
            iris_intensity=float(rng.uniform(60, 160)),
            pupil_intensity=float(rng.uniform(5, 50)),
            eyelid_closure=float(rng.uniform(BLINK_CLOSURE, 1.0)),
            glint_offset=(float(rng.uniform(-8, 8)), float(rng.uniform(-6, 6))),
            noise_sigma=float(rng.uniform(0, 4)),
            rng_seed=i)
        if scene.pupil_intensity >= scene.iris_intensity:
            continue
        frame = render_eye_frame(scene)
        assert frame.max() < GLINT_THRESHOLD


def test_static_script():
    script = GazeScript(segments=(ScriptSegment(frames=30, scene=SPEC_SCENE),))
    frames, truths = run_script(script)
    assert len(frames) == 30 and len(truths) == 30
    assert all(np.array_equal(f, frames[0]) for f in frames)
    assert all(not t.blink for t in truths)
    assert [t.frame_index for t in truths] == list(range(30))


def test_blink_marker_passthrough():
    segs = (ScriptSegment(frames=10, scene=SPEC_SCENE),
            ScriptSegment(frames=9, scene=SPEC_SCENE, blink=True),
            ScriptSegment(frames=11, scene=SPEC_SCENE))
    _, truths = run_script(GazeScript(segments=segs))
    blink_frames = [t.frame_index for t in truths if t.blink]
    assert blink_frames == list(range(10, 19))


def test_glint_ramp_vectors():
    # offset ramps (0,0) -> (6,0) over 7 frames; vector = pupil - glint = -offset
    start = replace(SPEC_SCENE, glint_offset=(0.0, 0.0))
    end = replace(SPEC_SCENE, glint_offset=(6.0, 0.0))
    seg = ScriptSegment(frames=7, scene=start, end_scene=end)
    _, truths = run_script(GazeScript(segments=(seg,)))
    expect = [(-float(k), 0.0) for k in range(7)]
    assert [t.pccr_vector for t in truths] == expect


def test_ramp_interpolates_positions():
    a = replace(SyntheticScene(), pupil_center=(78.0, 60.0), iris_center=(78.0, 60.0))
    b = replace(SyntheticScene(), pupil_center=(82.0, 60.0), iris_center=(82.0, 60.0))
    seg = ScriptSegment(frames=5, scene=a, end_scene=b)
    frames, _ = run_script(GazeScript(segments=(seg,)))
    centroids = [centroid_below_ref(f, 64)[0] for f in frames]
    assert centroids == pytest.approx([78, 79, 80, 81, 82], abs=0.3)


def test_empty_script_rejected():
    with pytest.raises(ValueError):
        run_script(GazeScript(segments=()))


def test_second_glint_rendered():
    scene = replace(SPEC_SCENE, glint2_offset=(5.0, 3.0))
    frame = render_eye_frame(scene)
    assert frame[27, 37] == 250 and frame[22, 29] == 250
