"""Expected event and command logs derived straight from a scenario script.

This is a second, deliberately plain implementation of the eye-contact and
announcement rules. It works on whole per-track contact sequences (run
lengths) rather than streaming state, and formats its own log lines, so that
agreement with the streaming pipeline is a meaningful check.
"""
from dataclasses import dataclass, field
import json
import math

from .synth import scene_state


def _signed(value, places):
    text = f"{value:+.{places}f}"
    if float(text) == 0.0:
        text = "+" + text[1:]
    return text


def _wrap(a):
    return (a + 180.0) % 360.0 - 180.0


def _pan(beta):
    if beta >= 85.0:
        return 1.0
    if beta <= -85.0:
        return -1.0
    return beta / 85.0


def _cell(beta):
    """Nearest of 16 motor directions; exact halves go to the clockwise neighbour."""
    b = beta % 360.0
    best = None
    for cell in range(16):
        centre = cell * 22.5
        gap = abs(b - centre)
        gap = min(gap, 360.0 - gap)
        clockwise = ((b - centre) % 360.0) > 180.0  # centre lies clockwise of b
        key = (gap, not clockwise)
        if best is None or key < best[0]:
            best = (key, cell)
    return best[1]


def _runs(flags):
    """[(value, first index, length)] for consecutive equal values."""
    out = []
    for i, f in enumerate(flags):
        if out and out[-1][0] == f:
            out[-1][2] += 1
        else:
            out.append([f, i, 1])
    return [tuple(r) for r in out]


@dataclass
class OracleResult:
    events: list  # log lines
    commands: list  # log lines
    contact: dict = field(default_factory=dict)  # track -> [(onset ms, offset ms)] scripted eye contact
    episodes: dict = field(default_factory=dict)  # track -> [(start ms, end ms or None)] announced gazes
    truth_bins: list = field(default_factory=list)  # (t, track, delta) per visible participant-frame


def ground_truth_events(scenario, attention_config=None, arbiter_config=None, variant="audio", model=None):
    tau = getattr(attention_config, "tau", 10.0)
    on = getattr(attention_config, "on_frames", 5)
    off = getattr(attention_config, "off_frames", 8)
    refractory = getattr(attention_config, "refractory", 4000)
    mute = getattr(arbiter_config, "mute", False)
    gaze_tpl = getattr(arbiter_config, "gaze_message_template", "{name}")
    count_tpl = getattr(arbiter_config, "count_message_template", "{count} people are looking at you")
    roster_tpl = getattr(arbiter_config, "roster_message_template", "{count} people")
    unknown = getattr(arbiter_config, "unknown_text", "unknown")
    intensity = getattr(arbiter_config, "belt_intensity", 200)
    duration = getattr(arbiter_config, "belt_duration", 400)
    pulse_aggregate = getattr(arbiter_config, "pulse_on_aggregate", False)
    haptics = getattr(variant, "value", variant) == "haptics"

    times = scenario.frame_times()
    n_tracks = len(scenario.participants)
    seen = [dict() for _ in range(n_tracks)]  # frame index -> state
    visible_at = []
    truth_bins = []
    for k, t in enumerate(times):
        states = scene_state(scenario, t, model)
        visible_at.append(states)
        for st in states:
            seen[st.track_id - 1][k] = st
            truth_bins.append((t, st.track_id, _wrap(st.yaw - st.bearing)))

    # per track: GazeStart / GazeEnd frame indices
    starts = {}  # frame -> [track]
    ends = {}
    contact_intervals = {}
    episodes = {}
    bearing_at = {}  # (track, frame) -> last seen bearing
    for i in range(n_tracks):
        track = i + 1
        if not seen[i]:
            continue
        first = min(seen[i])
        flags = []
        last_bearing = None
        for k in range(first, len(times)):
            st = seen[i].get(k)
            if st is not None:
                last_bearing = st.bearing
            bearing_at[track, k] = last_bearing
            flags.append(st is not None and abs(_wrap(st.yaw - st.bearing)) <= tau)

        contact_intervals[track] = [
            (times[first + s], times[first + s + n] if first + s + n < len(times) else times[-1])
            for value, s, n in _runs(flags)
            if value
        ]

        engaged = False  # inside a confirmed episode, announced or swallowed
        announced = False
        last_start = None
        eps = []
        for value, s, n in _runs(flags):
            if value and not engaged and n >= on:
                k = first + s + on - 1
                engaged = True
                if last_start is not None and times[k] - last_start < refractory:
                    announced = False
                else:
                    announced = True
                    last_start = times[k]
                    starts.setdefault(k, []).append(track)
                    eps.append([times[k], None])
            elif not value and engaged and n >= off:
                k = first + s + off - 1
                engaged = False
                if announced:
                    ends.setdefault(k, []).append(track)
                    eps[-1][1] = times[k]
        episodes[track] = [tuple(e) for e in eps]

    names = {i + 1: p.name for i, p in enumerate(scenario.participants)}

    def ident(track):
        return f"known:{names[track]}" if names[track] is not None else "unknown"

    def spoken(track):
        return gaze_tpl.format(name=names[track]) if names[track] is not None else unknown

    events, commands = [], []
    active = set()
    pending = sorted(scenario.id_requests)
    for k, t in enumerate(times):
        batch = []
        for track in sorted(set(starts.get(k, [])) | set(ends.get(k, []))):
            kind = "GazeStart" if track in starts.get(k, []) else "GazeEnd"
            batch.append((kind, track))
            if kind == "GazeStart":
                active.add(track)
            else:
                active.discard(track)
        for kind, track in batch:
            b = bearing_at[track, k]
            events.append(f"{len(events) + 1} {t} {kind} {track} {_signed(b, 3)} {ident(track)}")

        def say(text, pan):
            if not mute:
                commands.append(f"{len(commands) + 1} {t} Speech {_signed(pan, 4)} {json.dumps(text)}")

        def buzz(b):
            if haptics:
                commands.append(f"{len(commands) + 1} {t} BeltPulse {_cell(b)} {intensity} {duration}")

        new = [track for kind, track in batch if kind == "GazeStart"]
        if new and len(active) > 2:
            say(count_tpl.format(count=len(active)), 0.0)
            if pulse_aggregate:
                for track in sorted(active, key=lambda tr: (bearing_at[tr, k], tr)):
                    buzz(bearing_at[track, k])
        else:
            for track in new:
                b = bearing_at[track, k]
                if not mute:
                    commands.append(f"{len(commands) + 1} {t} Spearcon {_signed(_pan(b), 4)} eye-contact")
                buzz(b)
                say(spoken(track), _pan(b))

        while pending and pending[0] <= t:
            pending.pop(0)
            events.append(f"{len(events) + 1} {t} id_request")
            people = sorted(visible_at[k], key=lambda st: (st.bearing, st.track_id))
            tokens = [f"{ident(st.track_id)}@{_signed(st.bearing, 3)}" for st in people]
            events.append(" ".join([f"{len(events) + 1} {t} IdSnapshot {len(people)}"] + tokens))
            say(roster_tpl.format(count=len(people)), 0.0)
            for st in people:
                buzz(st.bearing)
                say(spoken(st.track_id), _pan(st.bearing))

    return OracleResult(events, commands, contact_intervals, episodes, truth_bins)


def contact_onset(result: OracleResult, track, t):
    """Scripted onset of the eye-contact interval that is in progress (or last began) at ``t``."""
    onsets = [a for a, _ in result.contact.get(track, []) if a <= t]
    return onsets[-1] if onsets else math.nan
