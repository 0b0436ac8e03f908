"""``key = value`` run configuration covering every tunable constant."""
from dataclasses import dataclass, field, fields, replace

from .arbiter import ArbiterConfig
from .attention import AttentionConfig
from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class RunConfig:
    attention: AttentionConfig = field(default_factory=AttentionConfig)
    arbiter: ArbiterConfig = field(default_factory=ArbiterConfig)
    threshold: float = None  # open-set rejection threshold; None means calibrate on the gallery
    bin_inner: float = 22.5
    bin_outer: float = 67.5
    stabilizer_window: int = 31
    enroll_samples: int = 5
    face_noise: float = 0.0  # chip pixel noise sigma
    workers: int = 4

    def __post_init__(self):
        if not 0 < self.bin_inner < self.bin_outer < 180:
            raise ValidationError("need 0 < bin_inner < bin_outer < 180")
        if self.threshold is not None and self.threshold <= 0:
            raise ValidationError("threshold must be positive")
        if self.stabilizer_window < 1 or self.enroll_samples < 1 or self.workers < 1:
            raise ValidationError("stabilizer_window, enroll_samples and workers must be >= 1")
        if self.face_noise < 0:
            raise ValidationError("face_noise must be non-negative")


def _bool(text):
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _coerce(kind, text):
    if kind is bool:
        return _bool(text)
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    return text


_ATT = {f.name: f.type for f in fields(AttentionConfig)}
_ARB = {f.name: f.type for f in fields(ArbiterConfig)}
_RUN = {"threshold": float, "bin_inner": float, "bin_outer": float, "stabilizer_window": int,
        "enroll_samples": int, "face_noise": float, "workers": int}
_TYPES = {"float": float, "int": int, "bool": bool, "str": str}


def _type_of(t):
    return _TYPES.get(t, t) if isinstance(t, str) else t


def parse_config(text) -> RunConfig:
    att, arb, run = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key = value, got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key in _ATT:
                att[key] = _coerce(_type_of(_ATT[key]), value)
            elif key in _ARB:
                arb[key] = _coerce(_type_of(_ARB[key]), value)
            elif key in _RUN:
                run[key] = _coerce(_RUN[key], value)
            else:
                raise ParseError(f"unknown key {key!r}", lineno)
        except ValueError as exc:
            raise ParseError(f"{key}: {exc}", lineno) from None
    return RunConfig(attention=AttentionConfig(**att), arbiter=ArbiterConfig(**arb), **run)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def with_mute(cfg: RunConfig, mute=True) -> RunConfig:
    return replace(cfg, arbiter=replace(cfg.arbiter, mute=mute))
