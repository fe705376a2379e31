"""Interaction semantics: gaze samples and blinks in, UI events out.

A deterministic per-session state machine built on three detectors:

* fixations by dispersion-threshold identification (window max coordinate
  span <= threshold, duration >= minimum);
* blinks from contiguous runs of invalid samples, classified by duration
  (dropout < noise max, natural in between, intentional >= minimum) and
  anchored at the last fixation centroid before onset;
* scrolls from near-monotone vertical sweeps inside a short trailing window.

An intentional blink taps at its anchor, or, over a keyboard key, anchors a
typed word whose remaining letters are traced by gaze and decoded against
the lexicon when the next intentional blink ends the word.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

from .keyboard import KeyboardLayout, Lexicon, NoCandidates, WordDecoder

SCROLL_REVERSAL_TOLERANCE_PX = 10.0


class NonMonotonicTime(ValueError):
    pass


@dataclass(frozen=True)
class GazeSample:
    t: float                                   # ms, strictly increasing
    point: tuple[float, float] | None
    valid: bool


@dataclass(frozen=True)
class Fixation:
    centroid: tuple[float, float]
    start: float
    duration: float
    dispersion: float


@dataclass(frozen=True)
class BlinkEvent:
    onset: float
    offset: float
    anchor: tuple[float, float]


@dataclass(frozen=True)
class UIEvent:
    kind: str                                  # tap | scroll_up | scroll_down |
    t: float                                   # key_anchor | word_candidates | word_commit
    point: tuple[float, float] | None = None
    key: str | None = None
    word: str | None = None
    candidates: tuple[tuple[str, float], ...] | None = None

    def to_json(self) -> dict:
        obj = {"t": self.t, "kind": self.kind}
        if self.kind == "tap":
            obj["x"], obj["y"] = self.point
        elif self.kind == "key_anchor":
            obj["key"] = self.key
        elif self.kind == "word_candidates":
            obj["candidates"] = [{"word": w, "score": s} for w, s in self.candidates]
        elif self.kind == "word_commit":
            obj["word"] = self.word
        return obj


def event_log_line(ev: UIEvent) -> str:
    return json.dumps(ev.to_json(), separators=(",", ":"))


@dataclass(frozen=True)
class SessionConfig:
    width: int = 1080
    height: int = 1920
    min_fixation_ms: float = 150.0
    dispersion_threshold_px: float = 30.0
    intentional_blink_min_ms: float = 300.0
    blink_noise_max_ms: float = 100.0
    scroll_window_ms: float = 600.0
    scroll_min_travel: float = 0.5             # fraction of height
    scroll_max_horizontal_drift: float = 0.15  # fraction of width

    def __post_init__(self):
        if not self.blink_noise_max_ms < self.intentional_blink_min_ms:
            raise ValueError("blink_noise_max_ms must be below intentional_blink_min_ms")


class _IdtTracker:
    """Online dispersion-threshold fixation identification."""

    def __init__(self, cfg: SessionConfig):
        self.cfg = cfg
        self._ts: list[float] = []
        self._xs: list[float] = []
        self._ys: list[float] = []
        self.last: Fixation | None = None

    def _dispersion(self) -> float:
        return max(max(self._xs) - min(self._xs), max(self._ys) - min(self._ys))

    def _finalize(self, ts, xs, ys) -> Fixation | None:
        if not ts or ts[-1] - ts[0] < self.cfg.min_fixation_ms:
            return None
        n = len(xs)
        disp = max(max(xs) - min(xs), max(ys) - min(ys))
        return Fixation(centroid=(sum(xs) / n, sum(ys) / n),
                        start=ts[0], duration=ts[-1] - ts[0], dispersion=disp)

    def add(self, t: float, point) -> Fixation | None:
        """Feed one valid sample; returns a fixation completed by this sample."""
        self._ts.append(t)
        self._xs.append(point[0])
        self._ys.append(point[1])
        if self._dispersion() <= self.cfg.dispersion_threshold_px:
            return None
        fix = self._finalize(self._ts[:-1], self._xs[:-1], self._ys[:-1])
        if fix is not None:
            self.last = fix
            self._ts, self._xs, self._ys = [t], [point[0]], [point[1]]
            return fix
        # No qualifying window yet: slide the front until dispersion fits.
        while len(self._ts) > 1 and self._dispersion() > self.cfg.dispersion_threshold_px:
            self._ts.pop(0)
            self._xs.pop(0)
            self._ys.pop(0)
        return None

    def interrupt(self) -> Fixation | None:
        """Close the current window (gap/blink); returns it if it qualified."""
        fix = self._finalize(self._ts, self._xs, self._ys)
        self._ts, self._xs, self._ys = [], [], []
        if fix is not None:
            self.last = fix
        return fix

    def anchor(self) -> tuple[float, float] | None:
        """Current qualifying window centroid, else last completed fixation."""
        fix = self._finalize(self._ts, self._xs, self._ys)
        if fix is not None:
            return fix.centroid
        return self.last.centroid if self.last is not None else None


def detect_fixations(samples, cfg: SessionConfig = SessionConfig()) -> list[Fixation]:
    """Offline fixation pass over a full sample list."""
    out: list[Fixation] = []
    tracker = _IdtTracker(cfg)
    t_prev = None
    for s in samples:
        if t_prev is not None and s.t <= t_prev:
            raise NonMonotonicTime(f"timestamps must strictly increase ({s.t} after {t_prev})")
        t_prev = s.t
        if s.valid:
            fix = tracker.add(s.t, s.point)
            if fix is not None:
                out.append(fix)
        else:
            fix = tracker.interrupt()
            if fix is not None:
                out.append(fix)
    fix = tracker.interrupt()
    if fix is not None:
        out.append(fix)
    return out


def classify_blink(onset: float, offset: float, anchor, cfg: SessionConfig) -> BlinkEvent | None:
    """Intentional blink -> BlinkEvent; dropouts and natural blinks -> None."""
    duration = offset - onset
    if duration < cfg.intentional_blink_min_ms:
        return None                            # dropout or natural blink
    if anchor is None:
        return None                            # nothing to anchor the tap to
    return BlinkEvent(onset=onset, offset=offset, anchor=anchor)


def detect_scroll(samples, cfg: SessionConfig) -> str | None:
    """Classify a sample window as "up", "down", or None.

    Up means gaze moved bottom to top (y decreasing) nearly monotonically
    with enough vertical travel and little horizontal drift.
    """
    pts = [s for s in samples if s.valid]
    if len(pts) < 2:
        return None
    if pts[-1].t - pts[0].t > cfg.scroll_window_ms:
        return None
    xs = [s.point[0] for s in pts]
    ys = [s.point[1] for s in pts]
    if max(xs) - min(xs) > cfg.scroll_max_horizontal_drift * cfg.width:
        return None
    need = cfg.scroll_min_travel * cfg.height
    steps = [b - a for a, b in zip(ys[:-1], ys[1:])]
    if ys[0] - ys[-1] >= need and all(d <= SCROLL_REVERSAL_TOLERANCE_PX for d in steps):
        return "up"
    if ys[-1] - ys[0] >= need and all(d >= -SCROLL_REVERSAL_TOLERANCE_PX for d in steps):
        return "down"
    return None


class SessionMachine:
    """One gaze-interaction session; deterministic given its input stream."""

    def __init__(self, cfg: SessionConfig = SessionConfig(),
                 layout: KeyboardLayout | None = None,
                 lexicon: Lexicon | None = None):
        self.cfg = cfg
        self.layout = layout
        self.lexicon = lexicon
        self.decoder = WordDecoder(layout, lexicon) if layout and lexicon else None
        self._idt = _IdtTracker(cfg)
        self.mode = "idle"                     # "idle" | "typing"
        self._gap_onset: float | None = None
        self._gap_anchor: tuple[float, float] | None = None
        self._scroll: deque = deque()
        self._path: list[tuple[float, float]] = []
        self._anchor_key: str | None = None
        self._t_last: float | None = None
        self._text: list[str] = []
        self._event_count = 0

    # -- input ------------------------------------------------------------

    def feed(self, sample: GazeSample) -> list[UIEvent]:
        if self._t_last is not None and sample.t <= self._t_last:
            raise NonMonotonicTime(f"timestamps must strictly increase "
                                   f"({sample.t} after {self._t_last})")
        self._t_last = sample.t
        events: list[UIEvent] = []
        if sample.valid:
            if self._gap_onset is not None:
                self._close_gap(sample.t, events)
            self._idt.add(sample.t, sample.point)
            if self.mode == "typing":
                self._path.append(sample.point)
            else:
                self._scroll_step(sample, events)
        else:
            if self._gap_onset is None:
                self._gap_onset = sample.t
                self._idt.interrupt()
                self._gap_anchor = self._idt.anchor()
                self._scroll.clear()
        return self._record(events)

    def feed_blink(self, t: float, duration_ms: float) -> list[UIEvent]:
        """Explicit blink marker (wire protocol); gaze samples keep flowing."""
        if self._t_last is not None and t < self._t_last:
            raise NonMonotonicTime(f"blink at {t} precedes last sample {self._t_last}")
        events: list[UIEvent] = []
        blink = classify_blink(t, t + duration_ms, self._idt.anchor(), self.cfg)
        if blink is not None:
            self._scroll.clear()
            self._tap_blink(blink.offset, blink.anchor, events)
        return self._record(events)

    def finish(self) -> list[UIEvent]:
        """End of stream: close any open gap at the last seen timestamp."""
        events: list[UIEvent] = []
        if self._gap_onset is not None and self._t_last is not None:
            self._close_gap(self._t_last, events)
        return self._record(events)

    # -- internals ----------------------------------------------------------

    def _record(self, events: list[UIEvent]) -> list[UIEvent]:
        for ev in events:
            self._event_count += 1
            if ev.kind == "word_commit":
                self._text.append(ev.word)
        return events

    def _close_gap(self, t_close: float, events: list[UIEvent]) -> None:
        onset, anchor = self._gap_onset, self._gap_anchor
        self._gap_onset = None
        self._gap_anchor = None
        blink = classify_blink(onset, t_close, anchor, self.cfg)
        if blink is not None:
            self._tap_blink(blink.offset, blink.anchor, events)

    def _tap_blink(self, t: float, anchor, events: list[UIEvent]) -> None:
        if self.mode == "typing":
            self._end_word(t, anchor, events)
            return
        key = self.layout.key_at(anchor) if self.layout is not None else None
        if key is not None and self.decoder is not None:
            events.append(UIEvent(kind="key_anchor", t=t, key=key.label))
            self.mode = "typing"
            self._anchor_key = key.label
            self._path = [anchor]
        else:
            events.append(UIEvent(kind="tap", t=t, point=anchor))

    def _end_word(self, t: float, anchor, events: list[UIEvent]) -> None:
        path, anchor_key = self._path, self._anchor_key
        self.mode = "idle"
        self._path = []
        self._anchor_key = None
        try:
            cands = self.decoder.decode(path if path else [anchor], anchor_key)
        except NoCandidates:
            return
        if self.layout.in_suggestion_bar(anchor):
            slot = self.layout.suggestion_slot(anchor)
            if slot < len(cands):
                events.append(UIEvent(kind="word_commit", t=t, word=cands[slot][0]))
        else:
            events.append(UIEvent(kind="word_candidates", t=t,
                                  candidates=tuple((w, s) for w, s in cands)))
            events.append(UIEvent(kind="word_commit", t=t, word=cands[0][0]))

    def _scroll_step(self, sample: GazeSample, events: list[UIEvent]) -> None:
        self._scroll.append(sample)
        while self._scroll and sample.t - self._scroll[0].t > self.cfg.scroll_window_ms:
            self._scroll.popleft()
        direction = detect_scroll(self._scroll, self.cfg)
        if direction is not None:
            events.append(UIEvent(kind=f"scroll_{direction}", t=sample.t))
            self._scroll.clear()

    def set_layout(self, layout: KeyboardLayout | None,
                   lexicon: Lexicon | None = None) -> None:
        """Swap the keyboard layout (wire-protocol handshake)."""
        self.layout = layout
        if lexicon is not None:
            self.lexicon = lexicon
        lex = getattr(self, "lexicon", None)
        self.decoder = WordDecoder(layout, lex) if layout and lex else None

    # -- introspection ------------------------------------------------------

    def snapshot(self) -> dict:
        return {"mode": self.mode,
                "t": self._t_last,
                "text": " ".join(self._text),
                "event_count": self._event_count}


def run_session(samples, cfg: SessionConfig = SessionConfig(),
                layout: KeyboardLayout | None = None,
                lexicon: Lexicon | None = None) -> list[UIEvent]:
    """Feed a whole sample list through a fresh machine and flush it."""
    machine = SessionMachine(cfg, layout, lexicon)
    events: list[UIEvent] = []
    for s in samples:
        events.extend(machine.feed(s))
    events.extend(machine.finish())
    return events
