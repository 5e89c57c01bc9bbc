"""Tactile and audio feedback mapping.

Five coin motors sit on the belt (1 left, 2 front-left, 3 front, 4
front-right, 5 right).  Vibration intensity follows the distance to the
nearest obstacle: saturated at 1.0 up close, fading linearly to 0.0 at
``max_distance``.  The linear ramp is the simplest monotone choice and is
plain config.

Audio is rate-limited: bursts of messages would otherwise flood the user,
so the scheduler emits at most one message per ``min_gap`` seconds, always
the most urgent pending one (lower priority number first, earlier
timestamp breaking ties), and silently drops anything older than the
staleness window -- a stale obstacle announcement is worse than none.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import DataError, SonarChannel
from .perception import DetectionEvent, DetectionKind

# Audio priority classes, most urgent first.
PRIORITY_DROPOFF = 0
PRIORITY_OBSTACLE = 1
PRIORITY_RECOGNITION = 2
PRIORITY_STATUS = 3

MOTOR_FOR_CHANNEL = {
    SonarChannel.LEFT: 1,
    SonarChannel.INCLINED_LEFT: 2,
    SonarChannel.FRONT: 3,
    SonarChannel.INCLINED_RIGHT: 4,
    SonarChannel.RIGHT: 5,
}


@dataclass(frozen=True)
class TactileCommand:
    motor: int  # 1..5
    intensity: float  # 0..1
    t: float


@dataclass(frozen=True)
class AudioMessage:
    priority: int  # lower = more urgent
    text: str
    t: float

    def __post_init__(self):
        if not self.text:
            raise DataError("audio message text must be non-empty")


@dataclass(frozen=True)
class FeedbackConfig:
    min_distance: float = 0.5  # m, full intensity at or below
    max_distance: float = 2.5  # m, silent at or beyond

    def __post_init__(self):
        if not 0.0 < self.min_distance < self.max_distance:
            raise DataError("need 0 < min_distance < max_distance")


def intensity_map(distance: float, min_d: float = 0.5, max_d: float = 2.5) -> float:
    """Map obstacle distance to vibration intensity in [0, 1].

    1.0 at or below ``min_d``, 0.0 at or beyond ``max_d``, linear in
    between; negative distances behave like ``min_d``.
    """
    if not 0.0 < min_d < max_d:
        raise DataError("need 0 < min_d < max_d")
    if distance <= min_d:
        return 1.0
    if distance >= max_d:
        return 0.0
    return (max_d - distance) / (max_d - min_d)


def route_event(event: DetectionEvent, cfg: FeedbackConfig | None = None) -> TactileCommand:
    """Map a detection event to its belt motor and intensity."""
    cfg = cfg or FeedbackConfig()
    return TactileCommand(
        motor=MOTOR_FOR_CHANNEL[event.channel],
        intensity=intensity_map(event.range_m, cfg.min_distance, cfg.max_distance),
        t=event.t,
    )


def priority_for(event: DetectionEvent) -> int:
    return (
        PRIORITY_DROPOFF if event.kind is DetectionKind.DROPOFF else PRIORITY_OBSTACLE
    )


class AudioScheduler:
    """Flood-suppressed, priority-ordered audio queue.

    ``offer`` enqueues; ``poll(now)`` returns the next message to speak or
    None.  Emissions are never closer than ``min_gap`` seconds apart, the
    most urgent (then oldest) pending message wins, and pending messages
    older than ``staleness`` seconds are dropped.
    """

    def __init__(self, min_gap: float = 2.0, staleness: float = 5.0):
        if min_gap <= 0.0:
            raise DataError("min_gap must be positive")
        self.min_gap = min_gap
        self.staleness = staleness
        self._pending: list[tuple[int, float, int, AudioMessage]] = []
        self._counter = 0
        self._last_emit: float | None = None

    def offer(self, msg: AudioMessage) -> None:
        self._pending.append((msg.priority, msg.t, self._counter, msg))
        self._counter += 1

    def poll(self, now: float) -> AudioMessage | None:
        self._pending = [
            entry for entry in self._pending if now - entry[3].t <= self.staleness
        ]
        if self._last_emit is not None and now - self._last_emit < self.min_gap:
            return None
        if not self._pending:
            return None
        self._pending.sort(key=lambda entry: entry[:3])
        _, _, _, msg = self._pending.pop(0)
        self._last_emit = now
        return msg
