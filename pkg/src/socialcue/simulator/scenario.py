"""Scripted meeting scenarios and their text format.

Example::

    # two people, one of them turns to the wearer
    duration 6000
    fps 30
    fov 170
    noise 0
    jitter 8 10
    participant Anna enter=0 exit=6000
      t=0 bearing=-30 distance=1200 yaw=40
      t=1000 bearing=-30 distance=1200 yaw=-30
    participant unknown enter=500 exit=6000
      t=0 bearing=25 distance=1500 yaw=-20
    id_request t=3000

Keyframes may also carry ``pitch=<deg>``. ``resolution WxH`` overrides the
camera size. Timelines interpolate linearly between keyframes and hold their
end values outside them.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from ..camera import CameraIntrinsics
from ..errors import ParseError, ValidationError

HALF_FIELD = 85.0


@dataclass(frozen=True)
class Keyframe:
    t: int
    bearing: float
    distance: float
    yaw: float
    pitch: float = 0.0


@dataclass(frozen=True)
class Participant:
    name: str  # None for an unknown person
    enter: int
    exit: int
    keyframes: tuple

    @property
    def known(self):
        return self.name is not None

    def state(self, t):
        """Interpolated (bearing, distance, yaw, pitch) at time t."""
        ks = self.keyframes
        times = [k.t for k in ks]
        out = []
        for attr in ("bearing", "distance", "yaw", "pitch"):
            vals = [getattr(k, attr) for k in ks]
            out.append(float(np.interp(t, times, vals)))
        return tuple(out)


@dataclass(frozen=True)
class Jitter:
    amplitude: float  # px
    period: float  # frames

    def offset(self, k):
        phase = 2 * math.pi * k / self.period
        return self.amplitude * math.sin(phase), self.amplitude * math.cos(phase)


@dataclass(frozen=True)
class Scenario:
    duration: int
    fps: float = 30.0
    camera: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    participants: tuple = ()
    id_requests: tuple = ()
    jitter: Jitter = None
    noise: float = 0.0

    def frame_times(self):
        """Integer-millisecond timestamps of every frame in [0, duration]."""
        out = []
        k = 0
        while True:
            t = int(round(k * 1000.0 / self.fps))
            if t > self.duration:
                return out
            out.append(t)
            k += 1

    def validate(self):
        if self.duration <= 0:
            raise ValidationError("duration must be positive")
        if self.fps <= 0:
            raise ValidationError("fps must be positive")
        if self.noise < 0:
            raise ValidationError("noise must be non-negative")
        if self.jitter is not None and (self.jitter.amplitude < 0 or self.jitter.period <= 0):
            raise ValidationError("jitter needs amplitude >= 0 and period > 0")
        for i, p in enumerate(self.participants):
            who = p.name or f"unknown #{i + 1}"
            if p.name is not None and (not p.name or any(c.isspace() for c in p.name)):
                raise ValidationError(f"participant name {p.name!r} must be a single token")
            if not 0 <= p.enter < p.exit:
                raise ValidationError(f"{who}: need 0 <= enter < exit")
            if not p.keyframes:
                raise ValidationError(f"{who}: at least one keyframe is required")
            last = -1
            for k in p.keyframes:
                if not 0 <= k.t <= self.duration:
                    raise ValidationError(f"{who}: keyframe t={k.t} outside [0, {self.duration}]")
                if k.t <= last:
                    raise ValidationError(f"{who}: keyframe times must increase")
                last = k.t
                if abs(k.bearing) > HALF_FIELD:
                    raise ValidationError(f"{who}: bearing {k.bearing} exceeds the {HALF_FIELD} deg half field")
                if k.distance <= 0:
                    raise ValidationError(f"{who}: distance must be positive")
        for t in self.id_requests:
            if not 0 <= t <= self.duration:
                raise ValidationError(f"id_request t={t} outside the scenario")
        return self


def _num(text, lineno, what):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{what} must be a number, got {text!r}", lineno) from None


def _int(text, lineno, what):
    v = _num(text, lineno, what)
    if v != int(v):
        raise ParseError(f"{what} must be an integer, got {text!r}", lineno)
    return int(v)


def _kv(tokens, lineno, allowed):
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ParseError(f"expected key=value, got {tok!r}", lineno)
        k, v = tok.split("=", 1)
        if k not in allowed:
            raise ParseError(f"unknown key {k!r}", lineno)
        out[k] = v
    return out


def load_scenario(text) -> Scenario:
    header = {}
    participants = []
    requests = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        indented = body[0] in " \t"
        tokens = body.split()
        if indented:
            if current is None:
                raise ParseError("keyframe outside a participant block", lineno)
            kv = _kv(tokens, lineno, {"t", "bearing", "distance", "yaw", "pitch"})
            missing = {"t", "bearing", "distance", "yaw"} - set(kv)
            if missing:
                raise ParseError(f"keyframe lacks {', '.join(sorted(missing))}", lineno)
            current["keyframes"].append(
                Keyframe(
                    _int(kv["t"], lineno, "t"),
                    _num(kv["bearing"], lineno, "bearing"),
                    _num(kv["distance"], lineno, "distance"),
                    _num(kv["yaw"], lineno, "yaw"),
                    _num(kv.get("pitch", "0"), lineno, "pitch"),
                )
            )
            continue
        key = tokens[0]
        if key in ("duration", "fps", "fov", "noise"):
            if len(tokens) != 2:
                raise ParseError(f"{key} takes one value", lineno)
            header[key] = _num(tokens[1], lineno, key)
        elif key == "resolution":
            try:
                w, h = (int(v) for v in tokens[1].lower().split("x"))
            except (ValueError, IndexError):
                raise ParseError("resolution must look like 2592x1944", lineno) from None
            header["resolution"] = (w, h)
        elif key == "jitter":
            if len(tokens) != 3:
                raise ParseError("jitter takes amplitude and period", lineno)
            header["jitter"] = Jitter(_num(tokens[1], lineno, "amplitude"), _num(tokens[2], lineno, "period"))
        elif key == "participant":
            if len(tokens) < 2:
                raise ParseError("participant needs a name or 'unknown'", lineno)
            kv = _kv(tokens[2:], lineno, {"enter", "exit"})
            current = {
                "name": None if tokens[1] == "unknown" else tokens[1],
                "enter": _int(kv.get("enter", "0"), lineno, "enter"),
                "exit": kv.get("exit"),
                "line": lineno,
                "keyframes": [],
            }
            if current["exit"] is not None:
                current["exit"] = _int(current["exit"], lineno, "exit")
            participants.append(current)
        elif key == "id_request":
            kv = _kv(tokens[1:], lineno, {"t"})
            if "t" not in kv:
                raise ParseError("id_request needs t=<ms>", lineno)
            requests.append(_int(kv["t"], lineno, "t"))
            current = None
        else:
            raise ParseError(f"unknown directive {key!r}", lineno)
    if "duration" not in header:
        raise ParseError("scenario lacks a duration line")
    duration = int(header["duration"])
    w, h = header.get("resolution", (CameraIntrinsics.width, CameraIntrinsics.height))
    try:
        camera = CameraIntrinsics(w, h, header.get("fov", 170.0))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    parts = tuple(
        Participant(
            p["name"],
            p["enter"],
            duration if p["exit"] is None else p["exit"],
            tuple(p["keyframes"]),
        )
        for p in participants
    )
    return Scenario(
        duration=duration,
        fps=header.get("fps", 30.0),
        camera=camera,
        participants=parts,
        id_requests=tuple(requests),
        jitter=header.get("jitter"),
        noise=header.get("noise", 0.0),
    ).validate()


def _fmt(v):
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def serialize_scenario(s: Scenario) -> str:
    lines = [
        f"duration {s.duration}",
        f"fps {_fmt(s.fps)}",
        f"fov {_fmt(s.camera.fov_h)}",
        f"resolution {s.camera.width}x{s.camera.height}",
        f"noise {_fmt(s.noise)}",
    ]
    if s.jitter is not None:
        lines.append(f"jitter {_fmt(s.jitter.amplitude)} {_fmt(s.jitter.period)}")
    for p in s.participants:
        lines.append(f"participant {p.name or 'unknown'} enter={p.enter} exit={p.exit}")
        for k in p.keyframes:
            line = f"  t={k.t} bearing={_fmt(k.bearing)} distance={_fmt(k.distance)} yaw={_fmt(k.yaw)}"
            if k.pitch:
                line += f" pitch={_fmt(k.pitch)}"
            lines.append(line)
    for t in s.id_requests:
        lines.append(f"id_request t={t}")
    return "\n".join(lines) + "\n"
