"""Debounced eye-contact detection from per-frame head poses."""
from dataclasses import dataclass, field
import enum

from .errors import StaleTimestamp, ValidationError
from .faceid import UNKNOWN, IdentityLabel
from .headpose import relative_yaw


@dataclass(frozen=True)
class AttentionConfig:
    tau: float = 10.0  # eye-contact half-angle, degrees
    on_frames: int = 5
    off_frames: int = 8
    refractory: int = 4000  # ms between GazeStarts of one track

    def __post_init__(self):
        if not 0 < self.tau <= 45:
            raise ValidationError("tau must lie in (0, 45]")
        if self.on_frames < 1 or self.off_frames < 1:
            raise ValidationError("hysteresis frame counts must be at least 1")
        if self.refractory < 0:
            raise ValidationError("refractory must be non-negative")


class EventKind(enum.Enum):
    GAZE_START = "GazeStart"
    GAZE_END = "GazeEnd"
    ID_SNAPSHOT = "IdSnapshot"


@dataclass(frozen=True)
class CueEvent:
    kind: EventKind
    timestamp: int
    track_id: int = -1
    bearing: float = 0.0
    identity: IdentityLabel = UNKNOWN
    people: tuple = ()  # IdSnapshot only: ((identity, bearing), ...) sorted by bearing


def id_snapshot(timestamp, people) -> CueEvent:
    ordered = tuple(sorted(people, key=lambda p: p[1]))
    return CueEvent(EventKind.ID_SNAPSHOT, timestamp, people=ordered)


@dataclass
class _Track:
    last_ts: int = None
    hits: int = 0
    misses: int = 0
    state: str = "idle"  # idle | active | suppressed
    last_start: int = None
    identity: IdentityLabel = UNKNOWN
    bearing: float = 0.0


@dataclass
class Attention:
    """Per-track hysteresis state machine.

    A track turns ``active`` (and emits GazeStart) after ``on_frames``
    consecutive eye-contact frames. If that happens within ``refractory`` ms of
    the track's previous GazeStart the episode is swallowed instead: the track
    goes ``suppressed``, emits nothing and is not reported as a gazer, and it
    returns to idle the same way an active track would. ``off_frames``
    consecutive non-contact frames end an episode; only active episodes emit
    GazeEnd.
    """

    config: AttentionConfig = field(default_factory=AttentionConfig)
    _tracks: dict = field(default_factory=dict, init=False, repr=False)

    def _observe(self, track_id, contact, timestamp):
        tr = self._tracks.setdefault(track_id, _Track())
        if tr.last_ts is not None and timestamp <= tr.last_ts:
            raise StaleTimestamp(f"track {track_id}: {timestamp} ms after {tr.last_ts} ms")
        tr.last_ts = timestamp
        cfg = self.config
        events = []
        if contact:
            tr.hits += 1
            tr.misses = 0
            if tr.state == "idle" and tr.hits >= cfg.on_frames:
                if tr.last_start is not None and timestamp - tr.last_start < cfg.refractory:
                    tr.state = "suppressed"
                else:
                    tr.state = "active"
                    tr.last_start = timestamp
                    events.append(
                        CueEvent(EventKind.GAZE_START, timestamp, track_id, tr.bearing, tr.identity)
                    )
        else:
            tr.misses += 1
            tr.hits = 0
            if tr.state != "idle" and tr.misses >= cfg.off_frames:
                if tr.state == "active":
                    events.append(
                        CueEvent(EventKind.GAZE_END, timestamp, track_id, tr.bearing, tr.identity)
                    )
                tr.state = "idle"
        return events

    def update(self, track_id, pose, bearing, identity, timestamp) -> list:
        """Feed one observation; ``pose`` is a HeadPose or a bare yaw in degrees."""
        yaw = getattr(pose, "yaw", pose)
        tr = self._tracks.setdefault(track_id, _Track())
        tr.identity = identity
        tr.bearing = bearing
        contact = abs(relative_yaw(yaw, bearing)) <= self.config.tau
        return self._observe(track_id, contact, timestamp)

    def mark_absent(self, track_id, timestamp) -> list:
        """A frame in which a known track was not observed counts as no eye contact."""
        if track_id not in self._tracks:
            return []
        return self._observe(track_id, False, timestamp)

    def active_gazers(self, timestamp=None) -> set:
        return {
            (tid, tr.identity, tr.bearing)
            for tid, tr in self._tracks.items()
            if tr.state == "active"
        }

    @property
    def track_ids(self):
        return set(self._tracks)
