"""End-to-end runner: simulator -> stabilizer -> headpose -> faceid -> attention -> arbiter."""
from collections import Counter, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import time
import zlib

import numpy as np

from .arbiter import Arbiter, Variant
from .attention import Attention, id_snapshot
from .config import RunConfig
from .errors import DegenerateConfiguration, DegenerateLandmarks, NoConvergence, SocialCueError
from .faceid import UNKNOWN, Gallery, IdentityLabel, extract_descriptor, identify, normalize_face
from .headpose import bearing_of, classify_yaw, default_face_model, solve_pose, yaw_bin_of_delta
from .logs import IdRequest, format_command, format_event, parse_log
from .metrics import MetricsReport, fraction, gaze_episodes, match_episodes, mean_or_none
from .simulator.oracle import contact_onset, ground_truth_events
from .simulator.synth import (
    add_pixel_noise,
    identity_seed,
    render_face,
    render_view,
    scene_state,
    scene_texture,
    synthesize_observations,
)
from .stabilizer import Frame, SimilarityTransform, Stabilizer

FRAME_SIZE = (640, 480)


class PipelineError(SocialCueError):
    """A module error, tagged with the scenario time at which it happened."""

    def __init__(self, timestamp, cause):
        super().__init__(f"t={timestamp} ms: {type(cause).__name__}: {cause}")
        self.timestamp = timestamp
        self.cause = cause


@dataclass
class Options:
    faces: bool = True  # render face patches and identify them; otherwise identities come from the script
    frames: bool = None  # render jittered frames and stabilize; None means "when the scenario has jitter"
    deterministic: bool = True
    seed: int = 0


@dataclass
class Packet:
    """Everything the camera side hands to perception for one frame."""

    index: int
    timestamp: int
    states: list
    observations: list
    faces: list = field(default_factory=list)  # (image, landmarks) per observation, or empty


@dataclass
class Percept:
    track_id: int
    pose: object  # HeadPose or None on failure
    bearing: float
    label: object  # IdentityLabel or None when faces are off
    truth: object  # ParticipantState
    error: str = None


@dataclass
class RunResult:
    events: list
    commands: list
    report: MetricsReport
    warnings: list = field(default_factory=list)

    @property
    def event_log(self):
        return "".join(line + "\n" for line in self.events)

    @property
    def command_log(self):
        return "".join(line + "\n" for line in self.commands)


def _hash_seed(*parts):
    return zlib.crc32(":".join(str(p) for p in parts).encode())


def build_gallery(scenario, cfg: RunConfig):
    gallery = Gallery()
    names = sorted({p.name for p in scenario.participants if p.name is not None})
    for name in names:
        descs = []
        for j in range(cfg.enroll_samples):
            img, lm = render_face(identity_seed(name), _hash_seed("enroll", name, j))
            descs.append(extract_descriptor(normalize_face(img, lm)))
        gallery.enroll(name, descs, calibrate=False)
    if cfg.threshold is not None:
        gallery.threshold = cfg.threshold
    else:
        gallery.calibrate()
    return gallery


class Runner:
    def __init__(self, scenario, variant=Variant.AUDIO, config: RunConfig = None, options: Options = None):
        self.scenario = scenario
        self.variant = Variant(variant) if isinstance(variant, str) else variant
        self.cfg = config or RunConfig()
        self.opt = options or Options()
        self.frames = self.opt.frames if self.opt.frames is not None else scenario.jitter is not None
        self.model = default_face_model()
        self.gallery = build_gallery(scenario, self.cfg) if self.opt.faces else None

    # -- camera side -----------------------------------------------------

    def _faces(self, t, states, obs):
        out = []
        for st in states:
            img, lm = render_face(identity_seed(st.name, st.track_id), _hash_seed(self.opt.seed, t, st.track_id))
            if self.cfg.face_noise > 0:
                img = add_pixel_noise(img, self.cfg.face_noise, np.random.default_rng(_hash_seed("px", self.opt.seed, t, st.track_id)))
            out.append((img, lm))
        return out

    def _capture(self, k, t, offset=(0.0, 0.0)):
        states = scene_state(self.scenario, t, self.model)
        obs = synthesize_observations(self.scenario, t, self.opt.seed, self.model, offset, states)
        faces = self._faces(t, states, obs) if self.opt.faces else []
        return Packet(k, t, states, obs, faces)

    def packets(self):
        """Camera packets in frame order, stabilized when frames are on."""
        times = self.scenario.frame_times()
        if not self.frames:
            for k, t in enumerate(times):
                yield self._capture(k, t)
            return
        cam = self.scenario.camera
        fw, fh = FRAME_SIZE
        ratio = cam.width / fw
        tex, margin = scene_texture(fw, fh, seed=self.opt.seed)
        jitter = self.scenario.jitter
        stab = Stabilizer(window=self.cfg.stabilizer_window, seed=self.opt.seed)
        held = deque()

        def release(done):
            for sf in done:
                pkt = held.popleft()
                c = sf.correction
                cam_corr = SimilarityTransform(c.scale, c.rotation, (c.translation[0] * ratio, c.translation[1] * ratio))
                cam_corr = cam_corr.about(cam.center)
                pkt.observations = [
                    replace(o, points=cam_corr.apply(o.points), bbox=_bbox(cam_corr.apply(o.points)))
                    for o in pkt.observations
                ]
                yield pkt

        for k, t in enumerate(times):
            dx, dy = jitter.offset(k) if jitter else (0.0, 0.0)
            frame = Frame(render_view(tex, margin, fw, fh, dx, dy), t)
            held.append(self._capture(k, t, (dx * ratio, dy * ratio)))
            yield from release(stab.step(frame))
        yield from release(stab.flush())

    # -- perception ------------------------------------------------------

    def perceive(self, pkt: Packet) -> list:
        out = []
        for i, (obs, st) in enumerate(zip(pkt.observations, pkt.states)):
            bearing = bearing_of(obs, self.scenario.camera)
            try:
                pose = solve_pose(obs, self.model, self.scenario.camera)
                err = None
            except (NoConvergence, DegenerateConfiguration) as exc:
                pose, err = None, str(PipelineError(pkt.timestamp, exc))
            label = None
            if self.opt.faces:
                img, lm = pkt.faces[i]
                try:
                    label, _ = identify(self.gallery, extract_descriptor(normalize_face(img, lm)))
                except DegenerateLandmarks as exc:
                    label, err = UNKNOWN, str(PipelineError(pkt.timestamp, exc))
            out.append(Percept(obs.track_id, pose, bearing, label, st, err))
        return out

    def _perceived(self, packets):
        if self.opt.deterministic:
            for pkt in packets:
                yield pkt, self.perceive(pkt)
            return
        window = 4 * self.cfg.workers
        with ThreadPoolExecutor(self.cfg.workers) as pool:
            inflight = deque()
            for pkt in packets:
                inflight.append((pkt, pool.submit(self.perceive, pkt)))
                if len(inflight) >= window:
                    pkt0, fut = inflight.popleft()
                    yield pkt0, fut.result()
            while inflight:
                pkt0, fut = inflight.popleft()
                yield pkt0, fut.result()

    # -- decision side ---------------------------------------------------

    def run(self, oracle=None) -> RunResult:
        attention = Attention(self.cfg.attention)
        arbiter = Arbiter(self.cfg.arbiter, self.variant)
        events, commands, warnings = [], [], []
        votes = {}
        requests = deque(sorted(self.scenario.id_requests))
        bins_ok = bins_total = 0
        id_hits = id_known = rej_hits = rej_total = 0
        failures = 0
        n_frames = 0
        inner, outer = self.cfg.bin_inner, self.cfg.bin_outer

        start = time.perf_counter()
        for pkt, percepts in self._perceived(self.packets()):
            n_frames += 1
            t = pkt.timestamp
            batch = []
            seen = set()
            visible = []
            for p in sorted(percepts, key=lambda p: p.track_id):
                if p.error:
                    warnings.append(p.error)
                if p.label is not None:
                    votes.setdefault(p.track_id, Counter())[str(p.label)] += 1
                    if p.truth.name is None:
                        rej_total += 1
                        rej_hits += not p.label.known
                    else:
                        id_known += 1
                        id_hits += p.label.name == p.truth.name
                identity = self._identity(p, votes)
                if p.pose is None:
                    failures += 1
                    continue
                seen.add(p.track_id)
                visible.append((identity, p.bearing))
                bins_total += 1
                truth_bin = yaw_bin_of_delta(p.truth.yaw - p.truth.bearing, inner, outer)
                bins_ok += classify_yaw(p.pose, p.bearing, inner, outer) is truth_bin
                batch += attention.update(p.track_id, p.pose, p.bearing, identity, t)
            for tid in sorted(attention.track_ids - seen):
                batch += attention.mark_absent(tid, t)
            batch.sort(key=lambda e: (e.timestamp, e.track_id))
            for ev in batch:
                events.append(format_event(len(events) + 1, ev))
            commands += [format_command(c) for c in arbiter.on_gaze_events(batch, attention.active_gazers(t), t)]
            while requests and requests[0] <= t:
                requests.popleft()
                events.append(format_event(len(events) + 1, IdRequest(t)))
                snap = id_snapshot(t, visible)
                events.append(format_event(len(events) + 1, snap))
                commands += [format_command(c) for c in arbiter.on_id_request(snap)]
        elapsed = time.perf_counter() - start

        report = MetricsReport(
            yaw_bin_accuracy=fraction(bins_ok, bins_total),
            id_rank1=fraction(id_hits, id_known),
            unknown_rejection_rate=fraction(rej_hits, rej_total),
            throughput=n_frames / elapsed if elapsed > 0 else None,
            frames=n_frames,
            pose_failures=failures,
        )
        result = RunResult(events, commands, report, warnings)
        if oracle is not False:
            self._score(result, oracle)
        return result

    def _identity(self, p, votes):
        if p.label is None:
            return IdentityLabel(p.truth.name)
        counts = votes[p.track_id]
        best = max(counts.values())
        if counts[str(p.label)] == best:
            return p.label
        return IdentityLabel.parse(min(k for k, v in counts.items() if v == best))

    def _score(self, result, oracle):
        if oracle is None:
            oracle = ground_truth_events(self.scenario, self.cfg.attention, self.cfg.arbiter, self.variant, self.model)
        end = self.scenario.frame_times()[-1]
        predicted = gaze_episodes(parse_log(result.event_log))
        p, r, matches = match_episodes(predicted, oracle.episodes, end)
        latencies = [pr[0] - contact_onset(oracle, track, pr[0]) for track, pr, _ in matches]
        result.report.gaze_event_precision = p
        result.report.gaze_event_recall = r
        result.report.mean_gaze_latency = mean_or_none(latencies)


def _bbox(points, margin=2.0):
    lo = points.min(axis=0) - margin
    hi = points.max(axis=0) + margin
    return (lo[0], lo[1], hi[0], hi[1])


def run_scenario(scenario, variant=Variant.AUDIO, config=None, seed=0, deterministic=True, faces=True, frames=None, oracle=None):
    opts = Options(faces=faces, frames=frames, deterministic=deterministic, seed=seed)
    return Runner(scenario, variant, config, opts).run(oracle)
