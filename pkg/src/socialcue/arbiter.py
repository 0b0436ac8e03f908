"""Turns cue events into stereo speech, spearcons and belt pulses."""
from dataclasses import dataclass
import enum
import math

from .attention import EventKind
from .errors import ValidationError

HALF_FIELD = 85.0
N_CELLS = 16
CELL_SPACING = 360.0 / N_CELLS
SPEARCON_TOKEN = "eye-contact"


class Variant(enum.Enum):
    AUDIO = "audio"
    AUDIO_HAPTICS = "haptics"


@dataclass(frozen=True)
class Speech:
    seq: int
    timestamp: int
    text: str
    pan: float = 0.0


@dataclass(frozen=True)
class Spearcon:
    seq: int
    timestamp: int
    pan: float = 0.0
    token: str = SPEARCON_TOKEN


@dataclass(frozen=True)
class BeltPulse:
    seq: int
    timestamp: int
    cell: int
    intensity: int = 200
    duration: int = 400  # ms


@dataclass(frozen=True)
class ArbiterConfig:
    aggregation_threshold: int = 2
    mute: bool = False
    gaze_message_template: str = "{name}"
    count_message_template: str = "{count} people are looking at you"
    roster_message_template: str = "{count} people"
    unknown_text: str = "unknown"
    belt_intensity: int = 200
    belt_duration: int = 400
    pulse_on_aggregate: bool = False

    def __post_init__(self):
        if self.aggregation_threshold != 2:
            raise ValidationError("aggregation threshold is fixed at 2")
        for t in (self.gaze_message_template, self.count_message_template, self.roster_message_template):
            if not t:
                raise ValidationError("message templates must be non-empty")
        if not 0 <= self.belt_intensity <= 255:
            raise ValidationError("belt intensity must fit in a byte")
        if not 0 <= self.belt_duration <= 65535:
            raise ValidationError("belt duration must fit in 16 bits")


def bearing_to_cell(beta_full: float) -> int:
    """Belt cell for a body-frame bearing; cell 0 at the front, clockwise seen from above."""
    if not math.isfinite(beta_full):
        raise ValueError("bearing must be finite")
    return int(math.floor((beta_full % 360.0) / CELL_SPACING + 0.5)) % N_CELLS


def bearing_to_pan(beta: float) -> float:
    """Stereo pan in [-1, 1]; negative favours the left channel."""
    return max(-1.0, min(1.0, beta / HALF_FIELD))


class Arbiter:
    """Single-threaded reducer from cue events to output commands.

    Sequence numbers are gapless across the session, whichever method
    produced the command.
    """

    def __init__(self, config: ArbiterConfig = None, variant: Variant = Variant.AUDIO):
        self.config = config or ArbiterConfig()
        self.variant = variant
        self._seq = 0

    def _next(self):
        self._seq += 1
        return self._seq

    def _label(self, identity):
        if identity.known:
            return self.config.gaze_message_template.format(name=identity.name)
        return self.config.unknown_text

    def _speech(self, t, text, pan, out):
        if not self.config.mute:
            out.append(Speech(self._next(), t, text, pan))

    def _pulse(self, t, bearing, out):
        if self.variant is Variant.AUDIO_HAPTICS:
            cfg = self.config
            out.append(BeltPulse(self._next(), t, bearing_to_cell(bearing), cfg.belt_intensity, cfg.belt_duration))

    def on_gaze_events(self, events, gazers, timestamp=None) -> list:
        """Commands for one batch of same-time events given the active gazer set."""
        starts = [e for e in events if e.kind is EventKind.GAZE_START]
        out = []
        if not starts:
            return out
        t = starts[0].timestamp if timestamp is None else timestamp
        if len(gazers) > self.config.aggregation_threshold:
            self._speech(t, self.config.count_message_template.format(count=len(gazers)), 0.0, out)
            if self.config.pulse_on_aggregate:
                for _, _, bearing in sorted(gazers, key=lambda g: (g[2], g[0])):
                    self._pulse(t, bearing, out)
            return out
        for ev in sorted(starts, key=lambda e: (e.timestamp, e.track_id)):
            pan = bearing_to_pan(ev.bearing)
            if not self.config.mute:
                out.append(Spearcon(self._next(), ev.timestamp, pan))
            self._pulse(ev.timestamp, ev.bearing, out)
            self._speech(ev.timestamp, self._label(ev.identity), pan, out)
        return out

    def on_id_request(self, snapshot) -> list:
        """Roster announcement, left to right, for an IdSnapshot event."""
        t = snapshot.timestamp
        out = []
        people = sorted(snapshot.people, key=lambda p: p[1])
        self._speech(t, self.config.roster_message_template.format(count=len(people)), 0.0, out)
        for identity, bearing in people:
            self._pulse(t, bearing, out)
            self._speech(t, self._label(identity), bearing_to_pan(bearing), out)
        return out
