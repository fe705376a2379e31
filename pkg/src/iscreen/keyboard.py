"""On-screen keyboard geometry and gaze-path word decoding.

A word is typed by blinking on its first letter and gliding the gaze through
the remaining letters; the decoder ranks every lexicon word sharing that
first letter by elastic-matching distance between the observed path and the
ideal polyline through the word's key centers. Both paths are resampled to
32 points by arc length so scores are length-invariant; a small
log-frequency bonus (weight 0.2) breaks near-ties.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import kernels

RESAMPLE_POINTS = 32
FREQ_BLEND = 0.2
SUGGESTION_SLOTS = 5


class EmptyLexicon(ValueError):
    pass


class NoCandidates(LookupError):
    pass


Rect = tuple[float, float, float, float]          # (x, y, w, h)


def _contains(rect: Rect, point) -> bool:
    x, y, w, h = rect
    return x <= point[0] < x + w and y <= point[1] < y + h


@dataclass(frozen=True)
class Key:
    label: str
    rect: Rect

    @property
    def center(self) -> tuple[float, float]:
        x, y, w, h = self.rect
        return (x + w / 2.0, y + h / 2.0)


@dataclass(frozen=True)
class KeyboardLayout:
    keys: tuple[Key, ...]
    suggestion_bar: Rect

    def __post_init__(self):
        labels = [k.label for k in self.keys if len(k.label) == 1 and k.label.isalpha()]
        if sorted(labels) != [chr(c) for c in range(ord("a"), ord("z") + 1)]:
            raise ValueError("layout must contain every letter a-z exactly once")
        for i, a in enumerate(self.keys):
            for b in self.keys[i + 1:]:
                if (a.rect[0] < b.rect[0] + b.rect[2] and b.rect[0] < a.rect[0] + a.rect[2]
                        and a.rect[1] < b.rect[1] + b.rect[3] and b.rect[1] < a.rect[1] + a.rect[3]):
                    raise ValueError(f"key rects overlap: {a.label} and {b.label}")

    def key_at(self, point) -> Key | None:
        for k in self.keys:
            if _contains(k.rect, point):
                return k
        return None

    def in_suggestion_bar(self, point) -> bool:
        return _contains(self.suggestion_bar, point)

    def suggestion_slot(self, point, slots: int = SUGGESTION_SLOTS) -> int:
        x, _, w, _ = self.suggestion_bar
        idx = int((point[0] - x) / w * slots)
        return min(max(idx, 0), slots - 1)

    def center_of(self, label: str) -> tuple[float, float]:
        for k in self.keys:
            if k.label == label:
                return k.center
        raise KeyError(label)

    def slot_center(self, idx: int, slots: int = SUGGESTION_SLOTS) -> tuple[float, float]:
        x, y, w, h = self.suggestion_bar
        return (x + (idx + 0.5) * w / slots, y + h / 2.0)

    @property
    def key_width(self) -> float:
        return float(np.median([k.rect[2] for k in self.keys]))

    def to_json(self) -> dict:
        return {"keys": [{"label": k.label, "rect": list(k.rect)} for k in self.keys],
                "suggestion_bar": list(self.suggestion_bar)}

    @classmethod
    def from_json(cls, obj: dict) -> "KeyboardLayout":
        keys = tuple(Key(label=k["label"], rect=tuple(float(v) for v in k["rect"]))
                     for k in obj["keys"])
        return cls(keys=keys, suggestion_bar=tuple(float(v) for v in obj["suggestion_bar"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, separators=(",", ":"))
            f.write("\n")

    @classmethod
    def load(cls, path) -> "KeyboardLayout":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(json.load(f))


_ROWS = ("qwertyuiop", "asdfghjkl", "zxcvbnm")


def default_layout(width: int = 1080, height: int = 1920) -> KeyboardLayout:
    """Three-row qwerty filling the bottom quarter, suggestion bar above."""
    key_w = width / 10.0
    key_h = height * 0.075
    kb_top = height - 3 * key_h
    bar_h = height * 0.05
    gap = 1.0                                     # keeps rects disjoint
    keys = []
    for r, row in enumerate(_ROWS):
        y = kb_top + r * key_h
        x0 = (width - len(row) * key_w) / 2.0
        for i, ch in enumerate(row):
            keys.append(Key(label=ch, rect=(x0 + i * key_w, y, key_w - gap, key_h - gap)))
    bar = (0.0, kb_top - bar_h, float(width), bar_h - gap)
    return KeyboardLayout(keys=tuple(keys), suggestion_bar=bar)


@dataclass(frozen=True)
class Lexicon:
    words: tuple[str, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if not self.words:
            raise EmptyLexicon("lexicon has no words")
        if len(self.words) != len(self.weights):
            raise ValueError("words and weights length mismatch")
        for w in self.words:
            if not (w and w.isalpha() and w == w.lower() and w.isascii()):
                raise ValueError(f"lexicon words must be lowercase a-z, got {w!r}")

    def log_rel_freq(self) -> np.ndarray:
        w = np.asarray(self.weights, float)
        return np.log(w / w.sum())

    def to_json(self) -> dict:
        return {"words": list(self.words), "weights": list(self.weights)}

    @classmethod
    def from_json(cls, obj: dict) -> "Lexicon":
        return cls(words=tuple(obj["words"]), weights=tuple(float(v) for v in obj["weights"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, separators=(",", ":"))
            f.write("\n")

    @classmethod
    def load(cls, path) -> "Lexicon":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(json.load(f))


def load_default_lexicon() -> Lexicon:
    """Bundled 1000 common words, Zipf-weighted by rank."""
    text = resources.files("iscreen.data").joinpath("words.txt").read_text("utf-8")
    words = tuple(w for w in text.split() if w)
    weights = tuple(1.0 / (i + 1) for i in range(len(words)))
    return Lexicon(words=words, weights=weights)


def ideal_path(word: str, layout: KeyboardLayout) -> np.ndarray:
    pts = [layout.center_of(ch) for ch in word]
    return np.asarray(pts, float)


def resample_polyline(points, n: int = RESAMPLE_POINTS) -> np.ndarray:
    """Resample to n points uniformly spaced by arc length."""
    pts = np.asarray(points, float).reshape(-1, 2)
    if len(pts) == 1:
        return np.repeat(pts, n, axis=0)
    seg = np.sqrt(np.sum(np.diff(pts, axis=0) ** 2, axis=1))
    keep = np.concatenate([[True], seg > 0])
    pts = pts[keep]
    if len(pts) == 1:
        return np.repeat(pts, n, axis=0)
    seg = np.sqrt(np.sum(np.diff(pts, axis=0) ** 2, axis=1))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    t = np.linspace(0.0, s[-1], n)
    return np.column_stack([np.interp(t, s, pts[:, 0]), np.interp(t, s, pts[:, 1])])


class WordDecoder:
    """Reusable decoder: precomputes ideal resampled paths per lexicon word."""

    def __init__(self, layout: KeyboardLayout, lexicon: Lexicon):
        self.layout = layout
        self.lexicon = lexicon
        self._log_freq = lexicon.log_rel_freq()
        self._by_anchor: dict[str, tuple[list[int], np.ndarray]] = {}

    def _candidates(self, anchor: str):
        cached = self._by_anchor.get(anchor)
        if cached is not None:
            return cached
        idx = [i for i, w in enumerate(self.lexicon.words) if w[0] == anchor]
        if idx:
            ideals = np.stack([resample_polyline(ideal_path(self.lexicon.words[i], self.layout))
                               for i in idx])
        else:
            ideals = np.zeros((0, RESAMPLE_POINTS, 2))
        self._by_anchor[anchor] = (idx, ideals)
        return idx, ideals

    def decode(self, path, anchor_key: str, top_k: int = SUGGESTION_SLOTS):
        if not len(path):
            raise ValueError("path must be non-empty")
        anchor_key = anchor_key.lower()
        idx, ideals = self._candidates(anchor_key)
        if not idx:
            raise NoCandidates(f"no lexicon word starts with {anchor_key!r}")
        observed = resample_polyline(path)
        dists = kernels.dtw_batch(observed, ideals) / RESAMPLE_POINTS
        scores = dists - FREQ_BLEND * self._log_freq[idx]
        order = np.argsort(scores, kind="stable")[:top_k]
        return [(self.lexicon.words[idx[i]], float(scores[i])) for i in order]


def decode_word(path, anchor_key: str, layout: KeyboardLayout, lexicon: Lexicon,
                top_k: int = SUGGESTION_SLOTS):
    """One-shot decode; build a WordDecoder for repeated calls."""
    return WordDecoder(layout, lexicon).decode(path, anchor_key, top_k)


def path_score(path, word: str, layout: KeyboardLayout, lexicon: Lexicon) -> float:
    """Score of one specific word against a path (same blend as decode)."""
    i = lexicon.words.index(word)
    observed = resample_polyline(path)
    ideal = resample_polyline(ideal_path(word, layout))
    d = float(kernels.dtw(observed, ideal)) / RESAMPLE_POINTS
    return d - FREQ_BLEND * float(lexicon.log_rel_freq()[i])


def jitter_path(path: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.asarray(path, float) + rng.standard_normal((len(path), 2)) * sigma


def word_center_path(word: str, layout: KeyboardLayout, points_per_seg: int = 6) -> np.ndarray:
    """Dense polyline through a word's key centers (a clean typing trace)."""
    centers = ideal_path(word, layout)
    if len(centers) == 1:
        return centers
    out = [centers[0]]
    for a, b in zip(centers[:-1], centers[1:]):
        if math.hypot(b[0] - a[0], b[1] - a[1]) < 1e-9:
            continue
        for k in range(1, points_per_seg + 1):
            t = k / points_per_seg
            out.append(a + (b - a) * t)
    return np.asarray(out, float)
