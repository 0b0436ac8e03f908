"""Open-set face identification with LBP histograms sampled at facial landmarks."""
from dataclasses import dataclass, field
import math
from pathlib import Path
import struct

import cv2
import numpy as np

from .errors import DegenerateLandmarks, ParseError, ValidationError
from .headpose import INTERIOR, OUTER_EYE_CORNERS

CHIP_SIZE = 128
CHIP_EYES = np.array([[CHIP_SIZE / 2 - 32, CHIP_SIZE / 2], [CHIP_SIZE / 2 + 32, CHIP_SIZE / 2]])
PATCH = 16
N_BINS = 59
DESCRIPTOR_DIM = len(INTERIOR) * N_BINS
DEFAULT_THRESHOLD = 20.0

GALLERY_MAGIC = b"LBPG"
GALLERY_VERSION = 1
MANIFEST = "manifest.txt"


@dataclass(frozen=True)
class IdentityLabel:
    name: str = None  # None means unknown

    @property
    def known(self):
        return self.name is not None

    def spoken(self):
        return self.name if self.known else "unknown"

    def __str__(self):
        return f"known:{self.name}" if self.known else "unknown"

    @classmethod
    def parse(cls, text):
        if text == "unknown":
            return UNKNOWN
        if text.startswith("known:") and len(text) > 6:
            return cls(text[6:])
        raise ValueError(f"bad identity token {text!r}")


UNKNOWN = IdentityLabel()


@dataclass(frozen=True)
class FaceChip:
    image: np.ndarray  # (128, 128) uint8
    landmarks: np.ndarray  # (68, 2) chip px


def _similarity_from_pairs(src, dst):
    """2x3 matrix of the similarity taking the two ``src`` points onto ``dst``."""
    zs = src[:, 0] + 1j * src[:, 1]
    zd = dst[:, 0] + 1j * dst[:, 1]
    a = (zd[1] - zd[0]) / (zs[1] - zs[0])
    b = zd[0] - a * zs[0]
    return np.array([[a.real, -a.imag, b.real], [a.imag, a.real, b.imag]])


def normalize_face(image, landmarks) -> FaceChip:
    """Warp a face so its outer eye corners sit at the canonical chip positions."""
    img = np.asarray(getattr(image, "data", image))
    pts = np.asarray(getattr(landmarks, "points", landmarks), dtype=float)
    eyes = pts[list(OUTER_EYE_CORNERS)]
    if np.hypot(*(eyes[1] - eyes[0])) < 2.0:
        raise DegenerateLandmarks("outer eye corners coincide")
    h, w = img.shape
    if np.any(eyes < 0) or np.any(eyes[:, 0] > w) or np.any(eyes[:, 1] > h):
        raise DegenerateLandmarks("eye corners lie outside the image")
    m = _similarity_from_pairs(eyes, CHIP_EYES)
    if np.allclose(m, [[1, 0, 0], [0, 1, 0]], atol=1e-12, rtol=0) and img.shape[0] >= CHIP_SIZE and img.shape[1] >= CHIP_SIZE:
        chip = np.array(img[:CHIP_SIZE, :CHIP_SIZE], dtype=np.uint8)
    else:
        chip = cv2.warpAffine(
            np.ascontiguousarray(img, dtype=np.uint8),
            m,
            (CHIP_SIZE, CHIP_SIZE),
            flags=cv2.INTER_LINEAR,
            borderMode=cv2.BORDER_REPLICATE,
        )
    return FaceChip(chip, pts @ m[:, :2].T + m[:, 2])


def _uniform_table():
    table = np.full(256, N_BINS - 1, dtype=np.int64)
    nxt = 0
    for code in range(256):
        bits = [(code >> i) & 1 for i in range(8)]
        transitions = sum(bits[i] != bits[(i + 1) % 8] for i in range(8))
        if transitions <= 2:
            table[code] = nxt
            nxt += 1
    assert nxt == N_BINS - 1
    return table


UNIFORM_BIN = _uniform_table()


def _neighbour_offsets():
    out = []
    for k in range(8):
        a = 2 * math.pi * k / 8
        out.append((round(math.cos(a), 12) + 0.0, round(-math.sin(a), 12) + 0.0))
    return out


def lbp_codes(image) -> np.ndarray:
    """LBP(8, 1) codes for pixels 1..n-2 in each axis.

    Bit k is set when the bilinearly sampled neighbour at angle 2*pi*k/8 is
    at least the centre value. Interpolation runs on differences from the
    centre, so adding a constant to the image leaves every code unchanged.
    """
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    ctr = img[1:-1, 1:-1]
    codes = np.zeros((h - 2, w - 2), dtype=np.int64)

    def shifted(dx, dy):
        return img[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx] - ctr

    for k, (dx, dy) in enumerate(_neighbour_offsets()):
        x0, y0 = math.floor(dx), math.floor(dy)
        fx, fy = dx - x0, dy - y0
        d00 = shifted(x0, y0)
        if fx == 0 and fy == 0:
            val = d00
        else:
            d10 = shifted(x0 + 1, y0)
            d01 = shifted(x0, y0 + 1)
            d11 = shifted(x0 + 1, y0 + 1)
            top = d00 + fx * (d10 - d00)
            bot = d01 + fx * (d11 - d01)
            val = top + fy * (bot - top)
        codes |= (val >= 0).astype(np.int64) << k
    return codes


def extract_descriptor(chip: FaceChip) -> np.ndarray:
    """Concatenated uniform-LBP histograms of 16x16 patches around the interior landmarks."""
    bins = UNIFORM_BIN[lbp_codes(chip.image)]
    h, w = chip.image.shape
    out = np.zeros((len(INTERIOR), N_BINS))
    half = PATCH // 2
    for row, idx in enumerate(INTERIOR):
        cx, cy = np.rint(chip.landmarks[idx]).astype(int)
        # code image covers pixels 1..w-2
        x0, x1 = max(cx - half, 1), min(cx + half, w - 1)
        y0, y1 = max(cy - half, 1), min(cy + half, h - 1)
        if x1 <= x0 or y1 <= y0:
            continue
        hist = np.bincount(bins[y0 - 1 : y1 - 1, x0 - 1 : x1 - 1].ravel(), minlength=N_BINS)
        out[row] = hist / hist.sum()
    return out.ravel()


def chi_square(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = a + b
    m = s > 0
    return float(np.sum((a[m] - b[m]) ** 2 / s[m]))


def _chi_square_many(gallery, d):
    s = gallery + d
    diff = (gallery - d) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(s > 0, diff / np.where(s > 0, s, 1.0), 0.0)
    return terms.sum(axis=1)


@dataclass
class Gallery:
    """Enrolled descriptors per name plus the open-set rejection threshold."""

    entries: dict = field(default_factory=dict)
    threshold: float = DEFAULT_THRESHOLD
    fallback_threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValidationError("rejection threshold must be positive")

    def enroll(self, name, descriptors, calibrate=True):
        if not name or any(c.isspace() for c in name):
            raise ValidationError(f"identity names must be non-empty single tokens: {name!r}")
        descs = [np.asarray(d, dtype=np.float64) for d in np.atleast_2d(descriptors)]
        self.entries = {**self.entries, name: self.entries.get(name, []) + descs}
        if calibrate:
            self.calibrate()

    def calibrate(self):
        """Threshold halfway between the closest impostor and the farthest genuine pair."""
        names = sorted(self.entries)
        if len(names) < 2:
            self.threshold = self.fallback_threshold
            return self.threshold
        genuine = [0.0]
        impostor = []
        for i, a in enumerate(names):
            A = np.array(self.entries[a])
            for j in range(len(A)):
                genuine.extend(_chi_square_many(A[j + 1 :], A[j]).tolist())
            for b in names[i + 1 :]:
                B = np.array(self.entries[b])
                for row in A:
                    impostor.extend(_chi_square_many(B, row).tolist())
        self.threshold = 0.5 * (min(impostor) + max(genuine))
        if self.threshold <= 0:
            self.threshold = self.fallback_threshold
        return self.threshold

    @property
    def names(self):
        return sorted(self.entries)


def identify(gallery: Gallery, d) -> tuple:
    """Nearest enrolled descriptor under chi-square; Unknown beyond the threshold."""
    best_name, best = None, math.inf
    d = np.asarray(d, dtype=float)
    for name in sorted(gallery.entries):
        dist = float(_chi_square_many(np.array(gallery.entries[name]), d).min())
        if dist < best:
            best_name, best = name, dist
    if best_name is None or best > gallery.threshold:
        return UNKNOWN, best
    return IdentityLabel(best_name), best


def save_gallery(gallery: Gallery, directory):
    """Write one binary descriptor file per identity plus a text manifest.

    Descriptor file layout (little endian): 4-byte magic ``LBPG``, uint32
    version, uint32 descriptor count, then ``count * 3009`` float64 values.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    lines = ["# socialcue gallery", f"threshold {gallery.threshold!r}"]
    for i, name in enumerate(gallery.names):
        fname = f"{i:04d}.lbp"
        descs = np.array(gallery.entries[name], dtype="<f8").reshape(-1, DESCRIPTOR_DIM)
        with open(root / fname, "wb") as fh:
            fh.write(struct.pack("<4sII", GALLERY_MAGIC, GALLERY_VERSION, len(descs)))
            fh.write(descs.tobytes())
        lines.append(f"identity {name} {fname}")
    (root / MANIFEST).write_text("\n".join(lines) + "\n")


def _read_descriptors(path):
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise ParseError(f"{path}: file too short")
    magic, version, count = struct.unpack_from("<4sII", raw)
    if magic != GALLERY_MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}")
    if version != GALLERY_VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    body = np.frombuffer(raw, dtype="<f8", offset=12)
    if body.size != count * DESCRIPTOR_DIM:
        raise ParseError(f"{path}: expected {count} descriptors")
    return [row.astype(np.float64) for row in body.reshape(count, DESCRIPTOR_DIM)]


def load_gallery(directory) -> Gallery:
    root = Path(directory)
    gallery = None
    entries = {}
    threshold = None
    for lineno, line in enumerate((root / MANIFEST).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "threshold" and len(parts) == 2:
            threshold = float(parts[1])
        elif parts[0] == "identity" and len(parts) == 3:
            entries[parts[1]] = _read_descriptors(root / parts[2])
        else:
            raise ParseError(f"unrecognised manifest line {line!r}", lineno)
    if threshold is None:
        raise ParseError("manifest lacks a threshold line")
    gallery = Gallery(entries, threshold)
    return gallery
