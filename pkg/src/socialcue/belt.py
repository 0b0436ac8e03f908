"""Wire codec for the vibrotactile belt link.

Frame layout, 6 bytes::

    0xAA | cell | intensity | duration lo | duration hi | xor(bytes 1..4)
"""
from dataclasses import dataclass, field

from .arbiter import BeltPulse
from .errors import BadChecksum, FieldOverflow, Truncated

SYNC = 0xAA
FRAME_LEN = 6


@dataclass(frozen=True)
class PulseFields:
    cell: int
    intensity: int
    duration: int


def encode_pulse(p) -> bytes:
    cell, intensity, duration = p.cell, p.intensity, p.duration
    if not 0 <= cell <= 15:
        raise FieldOverflow(f"cell {cell} outside 0..15")
    if not 0 <= intensity <= 255:
        raise FieldOverflow(f"intensity {intensity} outside 0..255")
    if not 0 <= duration <= 0xFFFF:
        raise FieldOverflow(f"duration {duration} ms does not fit in 16 bits")
    body = bytes([cell, intensity, duration & 0xFF, duration >> 8])
    check = body[0] ^ body[1] ^ body[2] ^ body[3]
    return bytes([SYNC]) + body + bytes([check])


def _valid_at(buf, i):
    if buf[i] != SYNC or buf[i + 1] > 15:
        return False
    return buf[i + 1] ^ buf[i + 2] ^ buf[i + 3] ^ buf[i + 4] == buf[i + 5]


def _confirmed(buf, i):
    """A frame at ``i`` is corroborated when it ends the buffer or a sync byte follows it."""
    j = i + FRAME_LEN
    if j >= len(buf):
        return True
    if buf[j] != SYNC:
        return False
    return len(buf) - j < FRAME_LEN or _valid_at(buf, j)


def _candidates(buf, start, stop):
    return [i for i in range(start, min(stop, len(buf) - FRAME_LEN + 1)) if _valid_at(buf, i)]


def decode_frame(data) -> tuple:
    """Decode the first frame in ``data``; returns (PulseFields, bytes consumed).

    Raises Truncated when fewer than 6 bytes are available, and BadChecksum
    when the leading frame is corrupt. In the latter case ``exc.consumed``
    tells the caller how many bytes to drop to reach the next sync byte that
    starts a valid frame (or all bytes when none does).

    Garbage can contain byte runs that pass the checksum, including runs that
    borrow the first bytes of the real frame after them. Among overlapping
    candidates the decoder prefers one that is corroborated by what follows
    it (end of data, or another sync byte).
    """
    buf = bytes(data)
    if len(buf) < FRAME_LEN:
        raise Truncated(f"need {FRAME_LEN} bytes, have {len(buf)}")
    if _valid_at(buf, 0):
        if not _confirmed(buf, 0):
            rivals = [i for i in _candidates(buf, 1, FRAME_LEN) if _confirmed(buf, i)]
            if rivals:
                raise BadChecksum(f"frame at 0 overlaps a better-aligned frame at {rivals[0]}", rivals[0])
        duration = buf[3] | (buf[4] << 8)
        return PulseFields(buf[1], buf[2], duration), FRAME_LEN
    found = _candidates(buf, 1, len(buf))
    if found:
        first = found[0]
        overlapping = [i for i in found if i < first + FRAME_LEN]
        skip = next((i for i in overlapping if _confirmed(buf, i)), first)
    else:
        nxt = buf.find(bytes([SYNC]), 1)
        skip = nxt if nxt != -1 else len(buf)
    raise BadChecksum(f"corrupt frame, skipping {skip} bytes", skip)


class FrameReader:
    """Incremental decoder that resynchronises on corruption."""

    def __init__(self):
        self._buf = bytearray()
        self.errors = 0

    def feed(self, data) -> list:
        self._buf.extend(data)
        out = []
        while True:
            try:
                pulse, used = decode_frame(self._buf)
            except Truncated:
                break
            except BadChecksum as exc:
                self.errors += 1
                del self._buf[: exc.consumed]
                continue
            del self._buf[:used]
            out.append(pulse)
        return out


@dataclass
class LoopbackBelt:
    """In-memory stand-in for the belt: bytes written come back decoded."""

    reader: FrameReader = field(default_factory=FrameReader)
    received: list = field(default_factory=list)
    _tx: bytearray = field(default_factory=bytearray)

    def write(self, data) -> int:
        self._tx.extend(data)
        self.received.extend(self.reader.feed(data))
        return len(data)

    def read(self) -> bytes:
        """Everything written so far, as the device saw it on the wire."""
        return bytes(self._tx)

    def send(self, pulse: BeltPulse) -> int:
        return self.write(encode_pulse(pulse))
