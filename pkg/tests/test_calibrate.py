import numpy as np
import pytest

from iscreen.calibrate import (CalibrationModel, CalibrationSample, DegenerateCalibration,
                               FeatureMismatch, InsufficientSamples, LearnedRegressor,
                               SingularSystem, default_targets, fit_affine_cross,
                               fit_regressor, make_features, map_gaze, mlp_loss,
                               mlp_loss_grad, predict)
from oracles import central_diff_grad

VECTORS5 = [(-10.0, -8.0), (10.0, -8.0), (-10.0, 8.0), (10.0, 8.0), (0.0, 0.0)]


def samples_from(coef_x, coef_y, vectors=VECTORS5):
    out = []
    for du, dv in vectors:
        x = coef_x[0] + coef_x[1] * du + coef_x[2] * dv + coef_x[3] * du * dv
        y = coef_y[0] + coef_y[1] * du + coef_y[2] * dv + coef_y[3] * du * dv
        out.append(CalibrationSample(vector=(du, dv), target=(x, y)))
    return out


# -- targets ------------------------------------------------------------------

def test_default_targets_values():
    t = default_targets(1000, 1000)
    assert (500.0, 500.0) in t
    assert (100.0, 100.0) in t and (900.0, 900.0) in t
    assert len(t) == 5 and len(set(t)) == 5


def test_default_targets_always_five_distinct():
    for w, h in ((64, 64), (1080, 1920), (333, 777)):
        t = default_targets(w, h)
        assert len(set(t)) == 5
        assert all(0 <= x < w and 0 <= y < h for x, y in t)


# -- closed-form fit ----------------------------------------------------------

def test_fit_recovers_stated_mapping():
    model = fit_affine_cross(samples_from((100, 50, 0, 0), (200, 0, 40, 0)), 1080, 1920)
    assert np.abs(model.coef_x - [100, 50, 0, 0]).max() < 1e-6
    assert np.abs(model.coef_y - [200, 0, 40, 0]).max() < 1e-6
    assert model.rms_residual < 1e-6


def test_fit_identity_mapping():
    model = fit_affine_cross(samples_from((0, 1, 0, 0), (0, 0, 1, 0)), 1080, 1920)
    assert np.allclose(model.coef_x, [0, 1, 0, 0], atol=1e-9)
    assert np.allclose(model.coef_y, [0, 0, 1, 0], atol=1e-9)


def test_fit_collinear_vectors_degenerate():
    line = [(float(i), 2.0 * i) for i in range(5)]          # du,dv on one line
    with pytest.raises(DegenerateCalibration):
        fit_affine_cross(samples_from((10, 3, 0, 0), (20, 0, 5, 0), line), 1080, 1920)


def test_fit_too_few_samples():
    with pytest.raises(InsufficientSamples):
        fit_affine_cross(samples_from((0, 1, 0, 0), (0, 0, 1, 0))[:3], 1080, 1920)


def test_noiseless_recovery_of_random_family_members():
    rng = np.random.default_rng(77)
    for _ in range(20):
        cx = rng.uniform(-200, 1000, 4)
        cy = rng.uniform(-200, 1000, 4)
        model = fit_affine_cross(samples_from(cx, cy), 4000, 4000)
        assert model.rms_residual < 1e-6
        assert np.abs(model.coef_x - cx).max() < 1e-6
        assert np.abs(model.coef_y - cy).max() < 1e-6


def test_least_squares_optimality():
    rng = np.random.default_rng(3)
    samples = [CalibrationSample(vector=(rng.uniform(-10, 10), rng.uniform(-10, 10)),
                                 target=(rng.uniform(0, 1000), rng.uniform(0, 1000)))
               for _ in range(12)]
    model = fit_affine_cross(samples, 1080, 1920)

    def ssr(cx, cy):
        total = 0.0
        for s in samples:
            du, dv = s.vector
            row = np.array([1.0, du, dv, du * dv])
            total += (row @ cx - s.target[0]) ** 2 + (row @ cy - s.target[1]) ** 2
        return total

    base = ssr(model.coef_x, model.coef_y)
    for axis in range(2):
        for i in range(4):
            for delta in (1e-3, -1e-3):
                cx, cy = model.coef_x.copy(), model.coef_y.copy()
                (cx if axis == 0 else cy)[i] += delta
                assert ssr(cx, cy) >= base - 1e-12


# -- map_gaze -----------------------------------------------------------------

def test_map_gaze_identity():
    model = CalibrationModel(1080, 1920, np.array([0.0, 1, 0, 0]), np.array([0.0, 0, 1, 0]), 0.0)
    assert map_gaze(model, (100.0, 200.0)) == (100.0, 200.0)


def test_map_gaze_hand_arithmetic():
    model = CalibrationModel(1080, 1920, np.array([100.0, 50, 0, 0]), np.array([200.0, 0, 40, 0]), 0.0)
    assert map_gaze(model, (2.0, 3.0)) == (200.0, 320.0)


def test_map_gaze_clamps_to_screen():
    model = CalibrationModel(100, 100, np.array([0.0, 1, 0, 0]), np.array([0.0, 0, 1, 0]), 0.0)
    assert map_gaze(model, (500.0, -500.0)) == (99.0, 0.0)


def test_map_gaze_monotone_in_du():
    model = CalibrationModel(4000, 4000, np.array([500.0, 30, 2, 0.5]),
                             np.array([500.0, 0, 30, 0]), 0.0)
    for dv in np.linspace(-10, 10, 7):
        assert model.coef_x[3] * dv + model.coef_x[1] > 0
        xs = [model.map_gaze((du, dv))[0] for du in np.linspace(-10, 10, 41)]
        assert all(b >= a for a, b in zip(xs[:-1], xs[1:]))


def test_model_json_round_trip(tmp_path):
    model = fit_affine_cross(samples_from((100, 50, 1, 0.2), (200, -2, 40, 0)), 1080, 1920)
    path = tmp_path / "model.json"
    model.save(path)
    back = CalibrationModel.load(path)
    assert back.to_json() == model.to_json()
    obj = model.to_json()
    assert set(obj) == {"w", "h", "x", "y", "rms"}


# -- learned regressor --------------------------------------------------------

def linear_dataset(n=50, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n):
        du, dv, r = rng.uniform(-15, 15), rng.uniform(-20, 20), rng.uniform(9, 13)
        x = 540 + 36 * du
        y = 960 + 48 * dv
        rows.append(((du, dv, r), (x, y)))
    return rows


def test_linear_regressor_exact_recovery():
    model = fit_regressor(linear_dataset(), ridge=0.0, variant="linear")
    assert model.final_loss < 1e-9
    for (f, target) in linear_dataset()[:10]:
        assert np.allclose(predict(model, make_features(*f)), target, atol=1e-4)


def test_ridge_asymptote_is_bias_only():
    data = linear_dataset()
    model = fit_regressor(data, ridge=1e9, variant="linear")
    assert float(np.linalg.norm(model.weights["w"])) < 1e-3
    mean = np.mean([t for _, t in data], axis=0)
    pred = predict(model, make_features(*data[0][0]))
    assert np.allclose(pred, mean, atol=1e-2)


def test_singular_system_raised():
    rows = [((1.0, 1.0, 1.0), (10.0, 10.0))] * 10           # identical features
    with pytest.raises(SingularSystem):
        fit_regressor(rows, ridge=0.0, variant="linear")


def test_regressor_sample_minimums():
    with pytest.raises(InsufficientSamples):
        fit_regressor(linear_dataset(5), variant="linear")
    with pytest.raises(InsufficientSamples):
        fit_regressor(linear_dataset(19), variant="mlp")


def test_ridge_monotonicity_of_training_residual():
    data = [((du, dv, r), (x, y)) for (du, dv, r), (x, y) in linear_dataset(40, seed=5)]
    # add noise so the fit is not exact at ridge 0
    rng = np.random.default_rng(9)
    data = [((du, dv, r), (x + rng.normal(0, 30), y + rng.normal(0, 30)))
            for (du, dv, r), (x, y) in data]
    losses = [fit_regressor(data, ridge=lam, variant="linear").final_loss
              for lam in (0.0, 1e-3, 1e-1, 1.0, 10.0, 1e3)]
    assert all(b >= a - 1e-12 for a, b in zip(losses[:-1], losses[1:]))


def test_mlp_gradient_check_against_central_differences():
    # 10 seeded random parameter points; relative error < 1e-4 per coordinate
    rng = np.random.default_rng(42)
    d, h = 6, 8
    z = rng.standard_normal((20, d))
    t = rng.uniform(0, 1, (20, 2))
    for trial in range(10):
        theta = rng.standard_normal(d * h + h + h * 2 + 2) * 0.7
        ridge = float(rng.choice([0.0, 1e-3]))
        _, analytic = mlp_loss_grad(theta, z, t, ridge, d, h)
        numeric = central_diff_grad(lambda th: mlp_loss(th, z, t, ridge, d, h), theta)
        rel = np.abs(analytic - numeric) / np.maximum(1e-4, np.abs(analytic) + np.abs(numeric))
        assert rel.max() < 1e-4, f"trial {trial}: worst rel {rel.max()}"


def test_mlp_training_deterministic_and_recorded():
    data = linear_dataset(40)
    a = fit_regressor(data, variant="mlp", seed=11)
    b = fit_regressor(data, variant="mlp", seed=11)
    assert a.final_loss == b.final_loss
    assert all(np.array_equal(a.weights[k], b.weights[k]) for k in a.weights)
    assert a.epochs == 2000 and a.lr == 1e-2 and a.hidden == 8


def test_mlp_fits_linear_data_reasonably():
    data = linear_dataset(60)
    model = fit_regressor(data, variant="mlp", seed=1)
    errs = [np.hypot(*(np.array(predict(model, make_features(*f))) - t))
            for f, t in data]
    assert float(np.mean(errs)) < 120.0          # coarse sanity, not an accuracy claim


def test_predict_bias_only_and_determinism():
    model = LearnedRegressor(kind="linear", width=1080, height=1920,
                             feat_mean=np.zeros(6), feat_std=np.ones(6), ridge=0.0,
                             weights={"w": np.zeros((6, 2)),
                                      "b": np.array([480 / 1080, 960 / 1920])})
    for f in ((0.0, 0.0, 10.0), (5.0, -3.0, 11.0)):
        assert predict(model, make_features(*f)) == (480.0, 960.0)
    a = predict(model, make_features(1, 2, 3))
    assert a == predict(model, make_features(1, 2, 3))


def test_linear_regressor_agrees_with_closed_form_at_calibration_points():
    coef_x, coef_y = (100.0, 50.0, 0.0, 0.0), (200.0, 0.0, 40.0, 0.0)
    cal = samples_from(coef_x, coef_y)
    affine = fit_affine_cross(cal, 4000, 4000)
    grid = [(x, y) for x in np.linspace(-12, 12, 7) for y in np.linspace(-12, 12, 7)]
    rows = [((du, dv, 10.0 + 0.05 * i),
             (coef_x[0] + coef_x[1] * du, coef_y[0] + coef_y[2] * dv))
            for i, (du, dv) in enumerate(grid)]
    reg = fit_regressor(rows, ridge=0.0, variant="linear", width=4000, height=4000)
    for s in cal:
        a = affine.map_gaze(s.vector)
        b = predict(reg, make_features(s.vector[0], s.vector[1], 10.0))
        assert np.allclose(a, b, atol=1e-6)


def test_predict_feature_mismatch():
    model = fit_regressor(linear_dataset(), variant="linear")
    with pytest.raises(FeatureMismatch):
        predict(model, np.array([1.0, 2.0]))
    with pytest.raises(FeatureMismatch):
        predict(model, np.array([1, 2, 3, 4, np.nan, 6]))


def test_regressor_json_round_trip():
    model = fit_regressor(linear_dataset(30), variant="mlp", seed=2)
    back = LearnedRegressor.from_json(model.to_json())
    f = make_features(3.0, -2.0, 11.0)
    assert predict(back, f) == predict(model, f)
