"""Mapping from PCCR vectors to screen coordinates.

Two fitting routes share the screen-space contract: a closed-form per-axis
least squares over the affine-plus-cross family
``x = a0 + a1*du + a2*dv + a3*du*dv`` (the richest polynomial identifiable
from 5 calibration points with slack), and a small learned regressor over
degree-2 monomials of (du, dv) plus the pupil radius, either ridge
closed-form or a one-hidden-layer tanh network trained by full-batch
gradient descent with analytic gradients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class DegenerateCalibration(ValueError):
    pass


class InsufficientSamples(ValueError):
    pass


class SingularSystem(ValueError):
    pass


class FeatureMismatch(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationSample:
    vector: tuple[float, float]          # (du, dv)
    target: tuple[float, float]          # known on-screen point (x, y)


# Normalized 5-point pattern: four corners inset by 0.1 plus the center.
TARGET_PATTERN = ((0.1, 0.1), (0.9, 0.1), (0.1, 0.9), (0.9, 0.9), (0.5, 0.5))


def default_targets(width: int, height: int) -> list[tuple[float, float]]:
    if width < 64 or height < 64:
        raise ValueError("screen must be at least 64x64")
    return [(nx * width, ny * height) for nx, ny in TARGET_PATTERN]


def _design(vectors: np.ndarray) -> np.ndarray:
    du, dv = vectors[:, 0], vectors[:, 1]
    return np.column_stack([np.ones_like(du), du, dv, du * dv])


@dataclass
class CalibrationModel:
    width: int
    height: int
    coef_x: np.ndarray                   # (a0, a1, a2, a3)
    coef_y: np.ndarray                   # (b0, b1, b2, b3)
    rms_residual: float

    def map_gaze(self, vector: tuple[float, float]) -> tuple[float, float]:
        du, dv = vector
        row = np.array([1.0, du, dv, du * dv])
        x = float(row @ self.coef_x)
        y = float(row @ self.coef_y)
        return (min(max(x, 0.0), self.width - 1.0),
                min(max(y, 0.0), self.height - 1.0))

    def to_json(self) -> dict:
        return {"w": self.width, "h": self.height,
                "x": [float(c) for c in self.coef_x],
                "y": [float(c) for c in self.coef_y],
                "rms": float(self.rms_residual)}

    @classmethod
    def from_json(cls, obj: dict) -> "CalibrationModel":
        return cls(width=int(obj["w"]), height=int(obj["h"]),
                   coef_x=np.asarray(obj["x"], float), coef_y=np.asarray(obj["y"], float),
                   rms_residual=float(obj["rms"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, separators=(",", ":"))
            f.write("\n")

    @classmethod
    def load(cls, path) -> "CalibrationModel":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(json.load(f))


def fit_affine_cross(samples, width: int, height: int) -> CalibrationModel:
    """Per-axis ordinary least squares over [1, du, dv, du*dv]."""
    if len(samples) < 4:
        raise InsufficientSamples(f"need at least 4 samples, got {len(samples)}")
    vectors = np.array([s.vector for s in samples], float)
    targets = np.array([s.target for s in samples], float)
    X = _design(vectors)
    if np.linalg.matrix_rank(X) < 4:
        raise DegenerateCalibration("calibration vectors are degenerate (rank < 4)")
    coef, *_ = np.linalg.lstsq(X, targets, rcond=None)
    resid = X @ coef - targets
    rms = float(np.sqrt(np.mean(np.sum(resid ** 2, axis=1))))
    return CalibrationModel(width=width, height=height,
                            coef_x=coef[:, 0], coef_y=coef[:, 1], rms_residual=rms)


def map_gaze(model: CalibrationModel, vector: tuple[float, float]) -> tuple[float, float]:
    return model.map_gaze(vector)


def aggregate_dwell(vectors, window: int = 30) -> tuple[float, float]:
    """Median vector over a dwell window; rejects blink/invalid frames by
    construction since callers only pass frames that produced a vector."""
    arr = np.array(vectors[-window:] if window else vectors, float)
    if arr.size == 0:
        raise InsufficientSamples("empty dwell window")
    med = np.median(arr, axis=0)
    return (float(med[0]), float(med[1]))


# ---------------------------------------------------------------------------
# learned regressor
# ---------------------------------------------------------------------------

FEATURE_NAMES = ("du", "dv", "du2", "dudv", "dv2", "pupil_radius")


def make_features(du: float, dv: float, pupil_radius: float) -> np.ndarray:
    return np.array([du, dv, du * du, du * dv, dv * dv, pupil_radius], float)


@dataclass
class LearnedRegressor:
    kind: str                            # "linear" | "mlp"
    width: int
    height: int
    feat_mean: np.ndarray
    feat_std: np.ndarray
    ridge: float
    weights: dict = field(default_factory=dict)   # kind-specific arrays
    hidden: int = 0
    final_loss: float = 0.0
    seed: int = 0
    epochs: int = 0
    lr: float = 0.0

    def _standardize(self, phi: np.ndarray) -> np.ndarray:
        return (phi - self.feat_mean) / self.feat_std

    def predict(self, features) -> tuple[float, float]:
        phi = np.asarray(features, float)
        if phi.shape != (len(FEATURE_NAMES),):
            raise FeatureMismatch(f"expected {len(FEATURE_NAMES)} features, got {phi.shape}")
        if not np.all(np.isfinite(phi)):
            raise FeatureMismatch("features must be finite")
        z = self._standardize(phi)
        if self.kind == "linear":
            out = z @ self.weights["w"] + self.weights["b"]
        else:
            hidden = np.tanh(z @ self.weights["w1"] + self.weights["b1"])
            out = hidden @ self.weights["w2"] + self.weights["b2"]
        x = float(out[0]) * self.width
        y = float(out[1]) * self.height
        return (min(max(x, 0.0), self.width - 1.0),
                min(max(y, 0.0), self.height - 1.0))

    def to_json(self) -> dict:
        return {
            "kind": self.kind, "w": self.width, "h": self.height,
            "features": list(FEATURE_NAMES),
            "feat_mean": self.feat_mean.tolist(), "feat_std": self.feat_std.tolist(),
            "ridge": self.ridge, "hidden": self.hidden, "final_loss": self.final_loss,
            "seed": self.seed, "epochs": self.epochs, "lr": self.lr,
            "weights": {k: np.asarray(v).tolist() for k, v in self.weights.items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LearnedRegressor":
        return cls(kind=obj["kind"], width=int(obj["w"]), height=int(obj["h"]),
                   feat_mean=np.asarray(obj["feat_mean"], float),
                   feat_std=np.asarray(obj["feat_std"], float),
                   ridge=float(obj["ridge"]), hidden=int(obj["hidden"]),
                   final_loss=float(obj["final_loss"]), seed=int(obj["seed"]),
                   epochs=int(obj["epochs"]), lr=float(obj["lr"]),
                   weights={k: np.asarray(v, float) for k, v in obj["weights"].items()})


def _prepare(dataset, width, height):
    phi = np.array([make_features(*f) for f, _ in dataset], float)
    targets = np.array([t for _, t in dataset], float) / np.array([width, height], float)
    mean = phi.mean(axis=0)
    std = phi.std(axis=0)
    std[std < 1e-12] = 1.0
    return (phi - mean) / std, targets, mean, std


def fit_regressor(dataset, ridge: float = 0.0, variant: str = "linear",
                  width: int = 1080, height: int = 1920,
                  hidden: int = 8, epochs: int = 2000, lr: float = 1e-2,
                  seed: int = 0) -> LearnedRegressor:
    """Fit the learned mapping; deterministic for a given seed.

    ``dataset`` is a list of ((du, dv, pupil_radius), (x, y)) pairs.
    """
    d = len(FEATURE_NAMES)
    if variant == "linear":
        if len(dataset) < d:
            raise InsufficientSamples(f"linear variant needs >= {d} samples")
    elif variant == "mlp":
        if len(dataset) < 20:
            raise InsufficientSamples("mlp variant needs >= 20 samples")
    else:
        raise ValueError(f"unknown variant {variant!r}")
    z, t, mean, std = _prepare(dataset, width, height)

    if variant == "linear":
        zb = np.column_stack([z, np.ones(len(z))])
        if ridge == 0.0 and np.linalg.matrix_rank(zb) < d + 1:
            raise SingularSystem("rank-deficient features with ridge 0")
        penalty = np.eye(d + 1) * ridge
        penalty[d, d] = 0.0                       # bias is never penalized
        coef = np.linalg.solve(zb.T @ zb + penalty, zb.T @ t)
        pred = zb @ coef
        loss = float(np.mean((pred - t) ** 2))
        return LearnedRegressor(kind="linear", width=width, height=height,
                                feat_mean=mean, feat_std=std, ridge=ridge,
                                weights={"w": coef[:d], "b": coef[d]},
                                final_loss=loss, seed=seed)

    rng = np.random.default_rng(seed)
    w1 = rng.standard_normal((d, hidden)) / np.sqrt(d)
    b1 = np.zeros(hidden)
    w2 = rng.standard_normal((hidden, 2)) / np.sqrt(hidden)
    b2 = np.zeros(2)
    theta = mlp_pack(w1, b1, w2, b2)
    loss = np.inf
    for _ in range(epochs):
        loss, grad = mlp_loss_grad(theta, z, t, ridge, d, hidden)
        theta = theta - lr * grad
    loss, _ = mlp_loss_grad(theta, z, t, ridge, d, hidden)
    w1, b1, w2, b2 = mlp_unpack(theta, d, hidden)
    return LearnedRegressor(kind="mlp", width=width, height=height,
                            feat_mean=mean, feat_std=std, ridge=ridge, hidden=hidden,
                            weights={"w1": w1, "b1": b1, "w2": w2, "b2": b2},
                            final_loss=float(loss), seed=seed, epochs=epochs, lr=lr)


def predict(model: LearnedRegressor, features) -> tuple[float, float]:
    return model.predict(features)


# --- mlp internals, exposed so gradients can be checked externally --------

def mlp_pack(w1, b1, w2, b2) -> np.ndarray:
    return np.concatenate([w1.ravel(), b1.ravel(), w2.ravel(), b2.ravel()])


def mlp_unpack(theta: np.ndarray, d: int, h: int):
    i = 0
    w1 = theta[i:i + d * h].reshape(d, h); i += d * h
    b1 = theta[i:i + h]; i += h
    w2 = theta[i:i + h * 2].reshape(h, 2); i += h * 2
    b2 = theta[i:i + 2]
    return w1, b1, w2, b2


def mlp_loss(theta: np.ndarray, z: np.ndarray, t: np.ndarray, ridge: float,
             d: int, h: int) -> float:
    w1, b1, w2, b2 = mlp_unpack(theta, d, h)
    a = np.tanh(z @ w1 + b1)
    pred = a @ w2 + b2
    mse = float(np.mean((pred - t) ** 2))
    return mse + ridge * (float(np.sum(w1 ** 2)) + float(np.sum(w2 ** 2)))


def mlp_loss_grad(theta: np.ndarray, z: np.ndarray, t: np.ndarray, ridge: float,
                  d: int, h: int) -> tuple[float, np.ndarray]:
    w1, b1, w2, b2 = mlp_unpack(theta, d, h)
    a = np.tanh(z @ w1 + b1)
    pred = a @ w2 + b2
    err = pred - t
    n = err.size
    mse = float(np.mean(err ** 2))
    loss = mse + ridge * (float(np.sum(w1 ** 2)) + float(np.sum(w2 ** 2)))
    dpred = 2.0 * err / n
    gw2 = a.T @ dpred + 2.0 * ridge * w2
    gb2 = dpred.sum(axis=0)
    da = (dpred @ w2.T) * (1.0 - a ** 2)
    gw1 = z.T @ da + 2.0 * ridge * w1
    gb1 = da.sum(axis=0)
    return loss, mlp_pack(gw1, gb1, gw2, gb2)
