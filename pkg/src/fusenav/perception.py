"""Obstacle / drop-off detection and sonar-gated recognition dispatch.

Detection runs over post-fusion per-channel ranges.  Side and front
channels raise an Obstacle event when the range falls to their trigger
threshold; the inclined channels watch the ground echo and report a
DropOff when it comes back longer than ``expected_ground_range`` plus a
margin (the floor is missing), or an Obstacle when it comes back shorter
by the same margin.  Every trigger latches and only re-arms after the
range clears by 10% of the trigger level, so a static obstacle produces
exactly one event instead of a storm.

Recognition is gated by detection: the recognizer processes at most one
frame at a time, and events arriving while it is busy are coalesced down
to the single most recent one -- a stale frame is useless for navigation.
The gate runs in simulated time (timestamps on the events drive it); only
the ordering and coalescing semantics are contractual.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Protocol, Sequence

import numpy as np

from .core import DataError, SonarChannel, INCLINED_CHANNELS

REARM_FRACTION = 0.10  # a trigger re-arms after clearing by 10% of its level


class DetectionKind(enum.Enum):
    OBSTACLE = "obstacle"
    DROPOFF = "dropoff"


def _default_thresholds() -> dict:
    return {
        SonarChannel.FRONT: 2.0,
        SonarChannel.LEFT: 1.5,
        SonarChannel.RIGHT: 1.5,
    }


@dataclass(frozen=True)
class DetectionConfig:
    """Trigger thresholds (m).  ``expected_ground_range`` is the inclined
    channels' nominal ground echo (belt height / sin(depression))."""

    thresholds: Mapping[SonarChannel, float] = field(
        default_factory=_default_thresholds
    )
    expected_ground_range: float = math.sqrt(2.0)
    dropoff_margin: float = 0.3
    max_range: float = 4.0

    def __post_init__(self):
        if self.dropoff_margin <= 0.0:
            raise DataError("dropoff_margin must be positive")
        for ch, thr in self.thresholds.items():
            if not 0.0 < thr <= self.max_range:
                raise DataError(f"threshold for {ch} outside (0, max_range]")


@dataclass(frozen=True)
class DetectionEvent:
    t: float
    channel: SonarChannel
    kind: DetectionKind
    range_m: float


class ObstacleDetector:
    """Threshold detector with per-trigger hysteresis latches.

    Feed it one mapping of channel -> fused range per tick; channels with
    no echo are either omitted or passed as ``math.inf``.  A no-echo
    reading never triggers, but it does re-arm the horizontal-channel
    obstacle latch (the obstacle left the beam); on inclined channels a
    missing ground echo is ambiguous and is ignored outright.
    """

    def __init__(self, cfg: DetectionConfig | None = None):
        self.cfg = cfg or DetectionConfig()
        self._armed: dict[tuple[SonarChannel, DetectionKind], bool] = {}

    def _is_armed(self, key) -> bool:
        return self._armed.get(key, True)

    def process(
        self, t: float, ranges: Mapping[SonarChannel, float]
    ) -> list[DetectionEvent]:
        cfg = self.cfg
        events: list[DetectionEvent] = []
        for channel, r in ranges.items():
            no_echo = r is None or not math.isfinite(r)
            if channel in INCLINED_CHANNELS:
                if no_echo:
                    continue
                hi = cfg.expected_ground_range + cfg.dropoff_margin
                lo = cfg.expected_ground_range - cfg.dropoff_margin
                key_hi = (channel, DetectionKind.DROPOFF)
                key_lo = (channel, DetectionKind.OBSTACLE)
                if r >= hi:
                    if self._is_armed(key_hi):
                        events.append(
                            DetectionEvent(t, channel, DetectionKind.DROPOFF, r)
                        )
                        self._armed[key_hi] = False
                elif r <= hi * (1.0 - REARM_FRACTION):
                    self._armed[key_hi] = True
                if r <= lo:
                    if self._is_armed(key_lo):
                        events.append(
                            DetectionEvent(t, channel, DetectionKind.OBSTACLE, r)
                        )
                        self._armed[key_lo] = False
                elif r >= lo * (1.0 + REARM_FRACTION):
                    self._armed[key_lo] = True
            else:
                thr = cfg.thresholds.get(channel)
                if thr is None:
                    continue
                key = (channel, DetectionKind.OBSTACLE)
                effective = math.inf if no_echo else r
                if effective <= thr:
                    if self._is_armed(key):
                        events.append(
                            DetectionEvent(t, channel, DetectionKind.OBSTACLE, r)
                        )
                        self._armed[key] = False
                elif effective >= thr * (1.0 + REARM_FRACTION):
                    self._armed[key] = True
        return events


def detect(ticks, cfg: DetectionConfig | None = None) -> list[DetectionEvent]:
    """Run a fresh detector over ``(t, {channel: range})`` ticks."""
    detector = ObstacleDetector(cfg)
    events: list[DetectionEvent] = []
    for t, ranges in ticks:
        events.extend(detector.process(t, ranges))
    return events


DEFAULT_RESOLUTION = (640, 480)
_DEFAULT_BASE_MS = 100.0
# Anchored so the default resolution lands on the measured 604 ms average.
_DEFAULT_PER_PIXEL_MS = (604.0 - _DEFAULT_BASE_MS) / (
    DEFAULT_RESOLUTION[0] * DEFAULT_RESOLUTION[1]
)


@dataclass(frozen=True)
class LatencyModel:
    """Affine frame-processing latency, strictly increasing in pixel count."""

    base_ms: float = _DEFAULT_BASE_MS
    per_pixel_ms: float = _DEFAULT_PER_PIXEL_MS

    def __post_init__(self):
        if self.per_pixel_ms <= 0.0:
            raise DataError("per_pixel_ms must be positive")


def latency_model(
    resolution: tuple[int, int], params: LatencyModel | None = None
) -> float:
    """Latency in ms for a frame of the given (width, height)."""
    w, h = resolution
    if w <= 0 or h <= 0:
        raise DataError(f"resolution must be positive, got {resolution}")
    params = params or LatencyModel()
    return params.base_ms + params.per_pixel_ms * (w * h)


class Recognizer(Protocol):
    """Pluggable recognizer: labels a frame triggered by a detection event."""

    resolution: tuple[int, int]

    def recognize(self, event: DetectionEvent) -> Sequence[tuple[str, float]]:
        ...


_DEFAULT_LABELS = ("person", "chair", "door", "pole", "bin", "bicycle")


class MockRecognizer:
    """Deterministic stand-in for a real (cloud) label-detection service.

    Labels and confidences are drawn from an RNG keyed on (seed, event
    time, channel), so results do not depend on call order.  ``fail_rate``
    injects deterministic failures for exercising the failure path.
    """

    def __init__(
        self,
        seed: int = 0,
        resolution: tuple[int, int] = DEFAULT_RESOLUTION,
        labels: Sequence[str] = _DEFAULT_LABELS,
        fail_rate: float = 0.0,
    ):
        self.seed = seed
        self.resolution = resolution
        self.labels = tuple(labels)
        self.fail_rate = fail_rate

    def _rng(self, event: DetectionEvent) -> np.random.Generator:
        key = (self.seed, int(round(event.t * 1e6)) & 0x7FFFFFFF,
               hash(event.channel.value) & 0x7FFFFFFF)
        return np.random.default_rng(key)

    def recognize(self, event: DetectionEvent) -> list[tuple[str, float]]:
        rng = self._rng(event)
        if rng.random() < self.fail_rate:
            raise RuntimeError("mock recognizer failure")
        count = int(rng.integers(1, 3))
        idx = rng.choice(len(self.labels), size=count, replace=False)
        return [
            (self.labels[i], round(float(rng.uniform(0.5, 0.99)), 3)) for i in idx
        ]


@dataclass(frozen=True)
class RecognitionResult:
    event: DetectionEvent
    labels: tuple
    latency_ms: float
    completed_t: float
    failed: bool = False


class RecognitionGate:
    """Single-slot dispatcher from detection events to the recognizer.

    ``submit`` advances simulated time to the event's timestamp, collects
    any recognition that completed meanwhile, and either starts the event
    (recognizer idle) or coalesces it into the single pending slot
    (recognizer busy, newest event wins).  DropOff events are never
    dispatched.  ``flush`` drains in-flight and pending work.
    """

    def __init__(self, recognizer: Recognizer, latency: LatencyModel | None = None):
        self.recognizer = recognizer
        self.latency = latency or LatencyModel()
        self._busy_until: Optional[float] = None
        self._started_t: Optional[float] = None
        self._in_flight: Optional[DetectionEvent] = None
        self._pending: Optional[DetectionEvent] = None
        self.processed_count = 0

    def _start(self, event: DetectionEvent, start_t: float) -> None:
        self._in_flight = event
        self._started_t = start_t
        self._busy_until = start_t + latency_model(
            self.recognizer.resolution, self.latency
        ) / 1000.0

    def _complete(self) -> RecognitionResult:
        event = self._in_flight
        done_t = self._busy_until
        latency = (done_t - self._started_t) * 1000.0
        self._in_flight = None
        self._busy_until = None
        self._started_t = None
        self.processed_count += 1
        try:
            labels = tuple(self.recognizer.recognize(event))
            failed = False
        except Exception:
            labels = ()
            failed = True
        result = RecognitionResult(
            event=event,
            labels=labels,
            latency_ms=latency,
            completed_t=done_t,
            failed=failed,
        )
        if self._pending is not None:
            nxt, self._pending = self._pending, None
            # the queued frame starts as soon as the slot frees up
            self._start(nxt, done_t)
        return result

    def _advance(self, now: float) -> list[RecognitionResult]:
        out = []
        while self._busy_until is not None and self._busy_until <= now:
            out.append(self._complete())
        return out

    def submit(self, event: DetectionEvent) -> list[RecognitionResult]:
        """Feed one detection event; returns results completed by event.t."""
        completed = self._advance(event.t)
        if event.kind is not DetectionKind.OBSTACLE:
            return completed
        if self._busy_until is not None:
            self._pending = event  # coalesce: keep only the latest
        else:
            self._start(event, event.t)
        return completed

    def poll(self, now: float) -> list[RecognitionResult]:
        """Collect results completed by ``now`` without submitting."""
        return self._advance(now)

    def flush(self) -> list[RecognitionResult]:
        """Complete all in-flight and pending recognitions."""
        out = []
        while self._busy_until is not None:
            out.append(self._complete())
        return out
