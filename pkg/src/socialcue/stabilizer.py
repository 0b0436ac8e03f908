"""Camera-shake compensation from sparse optical flow.

Corners (minimum-eigenvalue score) are tracked with pyramidal Lucas-Kanade,
a similarity transform is fitted to the tracks by random-sample consensus,
per-frame motions are accumulated into a trajectory, the trajectory is
smoothed with a centred moving average and each frame is warped by the
difference between smoothed and raw trajectory.
"""
from collections import deque
from dataclasses import dataclass, field
import math

import cv2
import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, InsufficientTexture, NoConsensus, ValidationError

PYRAMID_LEVELS = 3
LK_WINDOW = 15
LK_MAX_ITER = 20
LK_EPS = 0.01
FB_THRESHOLD = 1.0
MIN_FEATURES = 8


@dataclass(frozen=True)
class Frame:
    data: np.ndarray  # (height, width) uint8
    timestamp: int = 0  # ms

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValidationError("frames are 2D grayscale arrays")
        if arr.shape[0] < 32 or arr.shape[1] < 32:
            raise ValidationError(f"frame {arr.shape[1]}x{arr.shape[0]} is smaller than 32x32")
        if arr.dtype != np.uint8:
            arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]


@dataclass(frozen=True)
class FlowPair:
    src: tuple
    dst: tuple
    residual: float = 0.0


@dataclass(frozen=True)
class SimilarityTransform:
    """``x -> scale * R(rotation) @ x + translation`` in pixel coordinates."""

    scale: float = 1.0
    rotation: float = 0.0  # radians
    translation: tuple = (0.0, 0.0)

    def matrix(self) -> np.ndarray:
        c = self.scale * math.cos(self.rotation)
        s = self.scale * math.sin(self.rotation)
        tx, ty = self.translation
        return np.array([[c, -s, tx], [s, c, ty], [0.0, 0.0, 1.0]])

    @classmethod
    def from_matrix(cls, m):
        scale = math.hypot(m[0, 0], m[1, 0])
        return cls(scale, math.atan2(m[1, 0], m[0, 0]), (float(m[0, 2]), float(m[1, 2])))

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        m = self.matrix()
        return p @ m[:2, :2].T + m[:2, 2]

    def inverse(self) -> "SimilarityTransform":
        return SimilarityTransform.from_matrix(np.linalg.inv(self.matrix()))

    def compose(self, other: "SimilarityTransform") -> "SimilarityTransform":
        """``self ∘ other``: apply ``other`` first."""
        return SimilarityTransform.from_matrix(self.matrix() @ other.matrix())

    def about(self, center) -> "SimilarityTransform":
        """The same motion expressed with ``center`` as origin, converted to pixel coordinates."""
        c = np.asarray(center, dtype=float)
        shift = SimilarityTransform(translation=tuple(c))
        back = SimilarityTransform(translation=tuple(-c))
        return shift.compose(self).compose(back)


# ---------------------------------------------------------------------------
# features and flow


def _box3(x):
    """3x3 box sum with replicated borders."""
    p = np.pad(x, 1, mode="edge")
    r = p[:-2] + p[1:-1] + p[2:]
    return r[:, :-2] + r[:, 1:-1] + r[:, 2:]


def good_features(level, max_features, quality=0.01, block=12, border=LK_WINDOW):
    """Corners ranked by the smaller eigenvalue of the local structure tensor.

    At most one corner per ``block``-sized tile (the tile maximum), which both
    suppresses non-maxima and spreads features over the frame.
    """
    gx, gy = _unpadded(level.gx), _unpadded(level.gy)
    a = _box3(gx * gx)
    b = _box3(gx * gy)
    c = _box3(gy * gy)
    score = (a + c) / 2 - np.sqrt(((a - c) / 2) ** 2 + b * b)
    h, w = score.shape
    inner = score[border : h - border, border : w - border]
    peak = inner.max() if inner.size else 0.0
    if peak <= 0:
        return np.empty((0, 2))
    bh, bw = inner.shape[0] // block, inner.shape[1] // block
    tiles = inner[: bh * block, : bw * block].reshape(bh, block, bw, block).transpose(0, 2, 1, 3)
    tiles = tiles.reshape(bh, bw, block * block)
    arg = tiles.argmax(axis=2)
    best = np.take_along_axis(tiles, arg[..., None], axis=2)[..., 0]
    ty, tx = np.nonzero(best >= quality * peak)
    vals = best[ty, tx]
    order = np.argsort(-vals, kind="stable")[:max_features]
    ty, tx = ty[order], tx[order]
    a_ = arg[ty, tx]
    ys = border + ty * block + a_ // block
    xs = border + tx * block + a_ % block
    return np.stack([xs, ys], axis=1).astype(float)


_PAD = LK_WINDOW // 2 + 2


@dataclass
class _Level:
    """One pyramid level, stored with a replicated border of ``_PAD`` pixels."""

    img: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    shape: tuple  # unpadded (h, w)


def _gradients(img):
    gx = np.empty_like(img)
    gy = np.empty_like(img)
    gx[:, 1:-1] = (img[:, 2:] - img[:, :-2]) * 0.5
    gx[:, 0] = img[:, 1] - img[:, 0]
    gx[:, -1] = img[:, -1] - img[:, -2]
    gy[1:-1] = (img[2:] - img[:-2]) * 0.5
    gy[0] = img[1] - img[0]
    gy[-1] = img[-1] - img[-2]
    return gx, gy


def build_pyramid(img, levels=PYRAMID_LEVELS):
    """Gaussian pyramid with per-level intensity gradients."""
    cur = np.asarray(img, dtype=np.float32)
    out = []
    for lvl in range(levels):
        if lvl:
            cur = ndimage.gaussian_filter(cur, 1.0, mode="nearest", truncate=2.0)[::2, ::2]
        gx, gy = _gradients(cur)
        padded = [np.pad(a, _PAD, mode="edge") for a in (cur, gx, gy)]
        out.append(_Level(*padded, cur.shape))
    return out


def _unpadded(a):
    return a[_PAD:-_PAD, _PAD:-_PAD]


class _Windows:
    """Bilinear window sampler over padded images.

    All pixels of one window share the point's fractional offset, so each
    sample is four flat gathers with one set of weights per point.
    """

    def __init__(self, window):
        half = window // 2
        self.half = half
        oy, ox = np.mgrid[-half : half + 1, -half : half + 1]
        self.ox = ox.ravel()
        self.oy = oy.ravel()

    def locate(self, level, px, py):
        h, w = level.shape
        wp = level.img.shape[1]
        lim = _PAD - self.half - 1
        px = np.clip(px, -lim, w - 1 + lim - 1)
        py = np.clip(py, -lim, h - 1 + lim - 1)
        fx = np.floor(px)
        fy = np.floor(py)
        base = (fy.astype(np.int64) + _PAD) * wp + fx.astype(np.int64) + _PAD
        idx = base[:, None] + (self.oy * wp + self.ox)[None, :]
        ax = (px - fx).astype(np.float32)[:, None]
        ay = (py - fy).astype(np.float32)[:, None]
        return idx, ax, ay, wp

    @staticmethod
    def sample(flat, loc):
        idx, ax, ay, wp = loc
        a = flat.take(idx)
        b = flat.take(idx + 1)
        c = flat.take(idx + wp)
        d = flat.take(idx + wp + 1)
        top = a + ax * (b - a)
        bot = c + ax * (d - c)
        return top + ay * (bot - top)


def lucas_kanade(prev_pyr, cur_pyr, pts, window=LK_WINDOW, max_iter=LK_MAX_ITER, eps=LK_EPS):
    """Track ``pts`` from the first pyramid into the second; returns (new_pts, ok)."""
    n = len(pts)
    win = _Windows(window)
    levels = len(prev_pyr)
    guess = np.zeros((n, 2))
    ok = np.ones(n, dtype=bool)
    for lvl in range(levels - 1, -1, -1):
        L = prev_pyr[lvl]
        J = cur_pyr[lvl]
        jflat = J.img.ravel()
        p = pts / (2**lvl)
        loc = win.locate(L, p[:, 0], p[:, 1])
        tmpl = win.sample(L.img.ravel(), loc)
        gx = win.sample(L.gx.ravel(), loc)
        gy = win.sample(L.gy.ravel(), loc)
        gxx = (gx * gx).sum(1)
        gxy = (gx * gy).sum(1)
        gyy = (gy * gy).sum(1)
        det = gxx * gyy - gxy * gxy
        ok &= det > 1e-6 * (gxx + gyy) ** 2 + 1e-9
        v = np.zeros((n, 2))
        active = np.nonzero(ok)[0]
        for _ in range(max_iter):
            if len(active) == 0:
                break
            q = p[active] + guess[active] + v[active]
            diff = tmpl[active] - win.sample(jflat, win.locate(J, q[:, 0], q[:, 1]))
            bx = (diff * gx[active]).sum(1)
            by = (diff * gy[active]).sum(1)
            d = det[active]
            dx = (gyy[active] * bx - gxy[active] * by) / d
            dy = (gxx[active] * by - gxy[active] * bx) / d
            v[active, 0] += dx
            v[active, 1] += dy
            active = active[np.hypot(dx, dy) >= eps]
        guess = guess + v
        if lvl > 0:
            guess *= 2.0
    new = pts + guess
    return new, ok & np.all(np.isfinite(new), axis=1)


def track_flow(prev: Frame, cur: Frame, max_features: int = 200, _pyramids=None) -> list:
    """Sparse flow from ``prev`` to ``cur`` with a forward-backward consistency check."""
    if prev.data.shape != cur.data.shape:
        raise DimensionMismatch(f"frame sizes differ: {prev.data.shape} vs {cur.data.shape}")
    if max_features < MIN_FEATURES:
        raise ValueError(f"max_features must be at least {MIN_FEATURES}")
    if _pyramids is None:
        prev_pyr, cur_pyr = build_pyramid(prev.data), build_pyramid(cur.data)
    else:
        prev_pyr, cur_pyr = _pyramids
    pts = good_features(prev_pyr[0], max_features)
    if len(pts) < MIN_FEATURES:
        raise InsufficientTexture(f"only {len(pts)} corner features found")
    fwd, ok_f = lucas_kanade(prev_pyr, cur_pyr, pts)
    back, ok_b = lucas_kanade(cur_pyr, prev_pyr, fwd)
    fb = np.hypot(*(back - pts).T)
    h, w = prev.data.shape
    inside = (fwd[:, 0] >= -1) & (fwd[:, 0] <= w) & (fwd[:, 1] >= -1) & (fwd[:, 1] <= h)
    keep = ok_f & ok_b & inside & (fb <= FB_THRESHOLD)
    return [
        FlowPair((float(a[0]), float(a[1])), (float(b[0]), float(b[1])), float(r))
        for a, b, r in zip(pts[keep], fwd[keep], fb[keep])
    ]


# ---------------------------------------------------------------------------
# robust motion fit


def fit_similarity(src, dst) -> SimilarityTransform:
    """Least-squares similarity mapping ``src`` onto ``dst`` (complex-number form)."""
    zs = src[:, 0] + 1j * src[:, 1]
    zd = dst[:, 0] + 1j * dst[:, 1]
    ms, md = zs.mean(), zd.mean()
    cs, cd = zs - ms, zd - md
    denom = np.vdot(cs, cs).real
    if denom <= 1e-12:
        raise NoConsensus("source points coincide")
    a = np.vdot(cs, cd) / denom
    b = md - a * ms
    return SimilarityTransform(abs(a), math.atan2(a.imag, a.real), (b.real, b.imag))


def estimate_global_motion(
    pairs, threshold=2.0, min_inlier_ratio=0.5, iterations=200, seed=0
) -> SimilarityTransform:
    """Robust similarity fit of ``from -> to`` over flow pairs.

    Raises NoConsensus with fewer than 4 pairs or when less than half of
    the pairs agree with the best model.
    """
    if len(pairs) < 4:
        raise NoConsensus(f"need at least 4 pairs, got {len(pairs)}")
    src = np.array([p.src for p in pairs], dtype=float)
    dst = np.array([p.dst for p in pairs], dtype=float)
    n = len(src)
    rng = np.random.default_rng(seed)
    zs = src[:, 0] + 1j * src[:, 1]
    zd = dst[:, 0] + 1j * dst[:, 1]
    best = None
    best_count = -1
    for _ in range(iterations):
        i, j = rng.choice(n, 2, replace=False)
        dz = zs[j] - zs[i]
        if abs(dz) < 1e-9:
            continue
        a = (zd[j] - zd[i]) / dz
        b = zd[i] - a * zs[i]
        inl = np.abs(a * zs + b - zd) <= threshold
        count = int(inl.sum())
        if count > best_count:
            best, best_count = inl, count
            if count == n:
                break
    if best is None or best_count < min_inlier_ratio * n:
        raise NoConsensus(f"{max(best_count, 0)} of {n} pairs agree with the best model")
    inliers = best
    for _ in range(2):
        model = fit_similarity(src[inliers], dst[inliers])
        resid = np.hypot(*(model.apply(src) - dst).T)
        refined = resid <= threshold
        if refined.sum() < min_inlier_ratio * n:
            break
        if np.array_equal(refined, inliers):
            break
        inliers = refined
    model = fit_similarity(src[inliers], dst[inliers])
    if not 0.5 < model.scale < 2.0:
        raise NoConsensus(f"implausible scale {model.scale:.3f}")
    return model


# ---------------------------------------------------------------------------
# trajectory smoothing and warping


def warp_frame(frame: Frame, transform: SimilarityTransform) -> Frame:
    """Resample ``frame`` so that content at x moves to ``transform(x)``.

    Bilinear sampling, replicated borders. A transform that moves no pixel
    by more than 1e-9 px returns the frame unchanged.
    """
    h, w = frame.data.shape
    corners = np.array([[0, 0], [w, 0], [0, h], [w, h]], dtype=float)
    if np.max(np.abs(transform.apply(corners) - corners)) < 1e-9:
        return frame
    m = transform.matrix()[:2].astype(np.float32)
    out = cv2.warpAffine(
        np.ascontiguousarray(frame.data),
        m,
        (w, h),
        flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_REPLICATE,
    )
    return Frame(out, frame.timestamp)


@dataclass
class StabilizedFrame:
    frame: Frame
    correction: SimilarityTransform  # about the image centre, pixel coordinates
    tracking_failed: bool = False


@dataclass
class Stabilizer:
    """Streaming stabilizer; one instance per camera stream.

    The moving average is centred, so each output lags its input by
    ``window // 2`` frames. :meth:`step` returns whatever frames became
    ready; :meth:`flush` drains the rest at end of stream. Near the start
    and end of the stream the averaging window is truncated to the frames
    that exist.
    """

    window: int = 31
    max_features: int = 100
    seed: int = 0
    _prev: Frame = field(default=None, init=False, repr=False)
    _prev_pyr: list = field(default=None, init=False, repr=False)
    _traj: list = field(default_factory=list, init=False, repr=False)
    _pending: deque = field(default_factory=deque, init=False, repr=False)
    _emitted: int = field(default=0, init=False, repr=False)

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be at least 1")

    @property
    def radius(self):
        return self.window // 2

    def _motion(self, prev, cur, pyramids):
        """Frame-to-frame motion as (dx, dy, dangle, dlogscale) about the image centre."""
        center = np.array([cur.width / 2, cur.height / 2])
        pairs = track_flow(prev, cur, self.max_features, _pyramids=pyramids)
        centred = [FlowPair(tuple(np.subtract(p.src, center)), tuple(np.subtract(p.dst, center)), p.residual) for p in pairs]
        m = estimate_global_motion(centred, seed=self.seed)
        return np.array([m.translation[0], m.translation[1], m.rotation, math.log(m.scale)])

    def _push(self, frame):
        failed = False
        pyr = build_pyramid(frame.data)
        if self._prev is None:
            params = np.zeros(4)
        else:
            if frame.timestamp <= self._prev.timestamp:
                raise ValidationError("frame timestamps must increase")
            try:
                params = self._traj[-1] + self._motion(self._prev, frame, (self._prev_pyr, pyr))
            except (InsufficientTexture, NoConsensus):
                params = self._traj[-1].copy()
                failed = True
        self._prev = frame
        self._prev_pyr = pyr
        self._traj.append(params)
        self._pending.append((frame, failed))

    def _emit(self, final):
        out = []
        n = len(self._traj)
        while self._pending:
            k = self._emitted
            if not final and k + self.radius >= n:
                break
            frame, failed = self._pending.popleft()
            lo, hi = max(0, k - self.radius), min(n, k + self.radius + 1)
            smooth = np.mean(self._traj[lo:hi], axis=0)
            c = smooth - self._traj[k]
            if failed:
                correction = SimilarityTransform()
                result = frame
            else:
                correction = SimilarityTransform(math.exp(c[3]), c[2], (c[0], c[1]))
                pix = correction.about((frame.width / 2, frame.height / 2))
                result = warp_frame(frame, pix)
            out.append(StabilizedFrame(result, correction, failed))
            self._emitted += 1
        return out

    def step(self, frame: Frame) -> list:
        self._push(frame)
        return self._emit(final=False)

    def flush(self) -> list:
        return self._emit(final=True)


def stabilize_sequence(frames, **kwargs) -> list:
    """Stabilize a finite sequence; returns one StabilizedFrame per input."""
    stab = Stabilizer(**kwargs)
    out = []
    for f in frames:
        out.extend(stab.step(f))
    out.extend(stab.flush())
    return out
