"""Line-oriented event and command logs.

Every record is ``seq timestamp kind fields...`` with a fixed field order
per kind::

    3 1200 GazeStart 2 +30.000 known:Anna
    4 1500 GazeEnd 2 +29.874 known:Anna
    5 2000 id_request
    6 2000 IdSnapshot 2 known:Ben@-40.000 unknown@+10.000
    1 1200 Spearcon +0.3529 eye-contact
    2 1200 BeltPulse 1 200 400
    3 1200 Speech +0.3529 "Anna"

Speech text is JSON-quoted; pans carry four decimals and bearings three.
"""
from dataclasses import dataclass
import json

from .arbiter import BeltPulse, Spearcon, Speech
from .attention import CueEvent, EventKind
from .errors import ParseError
from .faceid import IdentityLabel

ID_REQUEST = "id_request"


def _fixed(value, places):
    # adding 0.0 turns a rounded -0.0 into 0.0
    return f"{round(value, places) + 0.0:+.{places}f}"


@dataclass(frozen=True)
class IdRequest:
    timestamp: int


def format_command(cmd) -> str:
    if isinstance(cmd, Speech):
        return f"{cmd.seq} {cmd.timestamp} Speech {_fixed(cmd.pan, 4)} {json.dumps(cmd.text)}"
    if isinstance(cmd, Spearcon):
        return f"{cmd.seq} {cmd.timestamp} Spearcon {_fixed(cmd.pan, 4)} {cmd.token}"
    if isinstance(cmd, BeltPulse):
        return f"{cmd.seq} {cmd.timestamp} BeltPulse {cmd.cell} {cmd.intensity} {cmd.duration}"
    raise TypeError(f"not a command: {cmd!r}")


def format_event(seq, ev) -> str:
    if isinstance(ev, IdRequest):
        return f"{seq} {ev.timestamp} {ID_REQUEST}"
    if ev.kind is EventKind.ID_SNAPSHOT:
        people = " ".join(f"{ident}@{_fixed(b, 3)}" for ident, b in ev.people)
        tail = f" {people}" if people else ""
        return f"{seq} {ev.timestamp} IdSnapshot {len(ev.people)}{tail}"
    return f"{seq} {ev.timestamp} {ev.kind.value} {ev.track_id} {_fixed(ev.bearing, 3)} {ev.identity}"


def format_log(lines) -> str:
    return "".join(line + "\n" for line in lines)


@dataclass(frozen=True)
class Record:
    """One parsed log line; ``fields`` holds the kind-specific values."""

    seq: int
    timestamp: int
    kind: str
    fields: tuple
    line: int = 0


_ARITY = {
    "Speech": 2,
    "Spearcon": 2,
    "BeltPulse": 3,
    "GazeStart": 3,
    "GazeEnd": 3,
    ID_REQUEST: 0,
}


def parse_line(text, lineno=0) -> Record:
    parts = text.split(" ", 3)
    if len(parts) < 3:
        raise ParseError(f"expected 'seq timestamp kind ...', got {text!r}", lineno)
    try:
        seq, ts = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError(f"non-integer seq or timestamp in {text!r}", lineno) from None
    kind = parts[2]
    rest = parts[3] if len(parts) > 3 else ""
    try:
        if kind == "Speech":
            pan, quoted = rest.split(" ", 1)
            fields = (float(pan), json.loads(quoted))
        elif kind == "Spearcon":
            pan, token = rest.split(" ")
            fields = (float(pan), token)
        elif kind == "BeltPulse":
            fields = tuple(int(v) for v in rest.split(" "))
        elif kind in ("GazeStart", "GazeEnd"):
            track, bearing, ident = rest.split(" ")
            fields = (int(track), float(bearing), str(IdentityLabel.parse(ident)))
        elif kind == ID_REQUEST:
            fields = ()
        elif kind == "IdSnapshot":
            tokens = rest.split(" ") if rest else []
            n = int(tokens[0])
            people = []
            for tok in tokens[1:]:
                ident, bearing = tok.rsplit("@", 1)
                people.append((str(IdentityLabel.parse(ident)), float(bearing)))
            if len(people) != n:
                raise ValueError("snapshot count does not match its entries")
            fields = (n, tuple(people))
        else:
            raise ValueError(f"unknown record kind {kind!r}")
    except (ValueError, json.JSONDecodeError) as exc:
        raise ParseError(str(exc), lineno) from None
    if kind in _ARITY and len(fields) != _ARITY[kind]:
        raise ParseError(f"{kind} takes {_ARITY[kind]} fields", lineno)
    return Record(seq, ts, kind, fields, lineno)


def parse_log(text) -> list:
    records = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        records.append(parse_line(line, lineno))
    return records
