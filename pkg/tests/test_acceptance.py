"""One test per acceptance criterion, each at its stated tolerance."""
import math
import time

import numpy as np
import pytest
from skimage.registration import phase_cross_correlation

from socialcue import cli
from socialcue.belt import FRAME_LEN, FrameReader, PulseFields, decode_frame, encode_pulse
from socialcue.camera import CameraIntrinsics, project
from socialcue.config import RunConfig
from socialcue.faceid import UNKNOWN, Gallery, IdentityLabel, extract_descriptor, identify, normalize_face
from socialcue.headpose import (
    LandmarkObservation,
    bearing_of,
    classify_yaw,
    default_face_model,
    pose_points,
    solve_pose,
    yaw_bin_of_delta,
)
from socialcue.logs import parse_log
from socialcue.metrics import gaze_episodes, match_episodes
from socialcue.pipeline import run_scenario
from socialcue.simulator import load_scenario
from socialcue.simulator.oracle import ground_truth_events
from socialcue.simulator.randomized import random_scenario
from socialcue.simulator.synth import add_pixel_noise, in_view, jittered_sequence, nose_position, render_face
from socialcue.stabilizer import Frame, stabilize_sequence

GOLDEN = ("single_gazer", "two_gazers", "four_gazers", "unknown_person", "id_request_mixed")


def test_ac1_pose_recovery_sweep(verdict):
    model, cam = default_face_model(), CameraIntrinsics()
    worst, n = 0.0, 0
    start = time.perf_counter()
    for yaw in (-60, -30, 0, 30, 60):
        for pitch in (-15, 0, 15):
            for distance in (800, 1500, 3000):
                for bearing in (-30, 0, 30):
                    pts = project(pose_points(model, yaw, pitch, 0, nose_position(bearing, distance)), cam)
                    pose = solve_pose(LandmarkObservation.from_points(1, pts, 0), model, cam)
                    worst = max(worst, abs(pose.yaw - yaw))
                    n += 1
    elapsed = time.perf_counter() - start
    verdict(
        "AC1 pose recovery",
        worst <= 0.5 and elapsed < 10,
        f"{n} poses, worst yaw error {worst:.2e} deg (<= 0.5), sweep {elapsed:.2f} s (< 10)",
    )


def test_ac2_yaw_bin_accuracy_with_noise(verdict):
    model, cam = default_face_model(), CameraIntrinsics()
    rng = np.random.default_rng(2024)
    bins = [(-85, -67.5), (-67.5, -22.5), (-22.5, 22.5), (22.5, 67.5), (67.5, 85)]
    correct = total = 0
    for lo, hi in bins:
        done = 0
        while done < 1000:
            delta = rng.uniform(lo, hi)
            bearing = rng.uniform(-60, 60)
            distance = rng.uniform(600, 2000)
            pitch = rng.uniform(-15, 15)
            pts3 = pose_points(model, bearing + delta, pitch, 0, nose_position(bearing, distance))
            if not in_view(pts3, cam):
                continue
            pts = project(pts3, cam) + rng.normal(0, 1.0, (68, 2))
            obs = LandmarkObservation.from_points(1, pts, 0)
            pose = solve_pose(obs, model, cam)
            correct += classify_yaw(pose, bearing_of(obs, cam)) is yaw_bin_of_delta(delta)
            total += 1
            done += 1
    acc = correct / total
    verdict("AC2 yaw-bin accuracy", acc >= 0.87, f"{total} noisy frames, accuracy {acc:.4f} (>= 0.87)")


def _chips(seed, poses, sigma, tag):
    out = []
    for k in poses:
        img, lm = render_face(seed, k)
        if sigma:
            img = add_pixel_noise(img, sigma, np.random.default_rng([seed, k, tag]))
        out.append(extract_descriptor(normalize_face(img, lm)))
    return out


def _id_trial(sigma):
    known = list(range(1000, 1010))
    unseen = [2000, 2001, 2002]
    gallery = Gallery()
    for s in known:
        gallery.enroll(f"id{s}", _chips(s, range(5), sigma, 1), calibrate=False)
    gallery.calibrate()
    hits = 0
    for s in known:
        for d in _chips(s, range(5, 10), sigma, 2):
            # closed-set rank-1: nearest enrolled identity, threshold not applied
            open_gallery = Gallery(gallery.entries, math.inf)
            hits += identify(open_gallery, d)[0] == IdentityLabel(f"id{s}")
    rejected = sum(identify(gallery, d)[0] is UNKNOWN for s in unseen for d in _chips(s, range(5), sigma, 3))
    return hits / 50, rejected / 15, gallery.threshold


def test_ac3_identification(verdict):
    r0, rej0, th0 = _id_trial(0)
    r8, rej8, th8 = _id_trial(8)
    ok = r0 == 1.0 and r8 >= 0.89 and rej0 >= 0.9 and rej8 >= 0.9
    verdict(
        "AC3 identification",
        ok,
        f"rank-1 noise-free {r0:.3f} (= 1), sigma 8 {r8:.3f} (>= 0.89); "
        f"unseen rejected {rej0:.3f} / {rej8:.3f} (>= 0.9) at theta_u {th0:.2f} / {th8:.2f}",
    )


def test_ac4_golden_logs(verdict, tmp_path):
    mismatches, pulses_in_audio = [], 0
    for name in GOLDEN:
        for variant in ("audio", "haptics"):
            out = tmp_path / f"{name}-{variant}"
            code = cli.main(["run", "--scenario", name, "--variant", variant, "--seed", "0",
                             "--deterministic", "--out", str(out)])
            got = (out / "commands.log").read_bytes()
            want = cli.golden_text(name, variant).encode()
            if code != 0 or got != want:
                mismatches.append(f"{name}/{variant}")
            if variant == "audio":
                pulses_in_audio += got.count(b" BeltPulse ")
    four = cli.golden_text("four_gazers", "audio")
    ok = not mismatches and pulses_in_audio == 0 and '"4 people are looking at you"' in four
    verdict(
        "AC4 golden logs",
        ok,
        f"{2 * len(GOLDEN)} runs byte-identical: {not mismatches} {mismatches or ''}; "
        f"BeltPulse records in audio logs: {pulses_in_audio}",
    )


def test_ac5_oracle_equivalence(verdict):
    cfg = RunConfig()
    unequal = []
    tp = n_pred = n_truth = 0
    for seed in range(100):
        scenario = random_scenario(seed)
        oracle = ground_truth_events(scenario, cfg.attention, cfg.arbiter, "haptics")
        clean = run_scenario(scenario, "haptics", cfg, seed=seed, faces=False, oracle=oracle)
        if clean.events != oracle.events or clean.commands != oracle.commands:
            unequal.append(seed)
        noisy = run_scenario(random_scenario(seed, noise=1.0), "haptics", cfg, seed=seed, faces=False, oracle=False)
        predicted = gaze_episodes(parse_log(noisy.event_log))
        end = scenario.frame_times()[-1]
        _, _, matches = match_episodes(predicted, oracle.episodes, end)
        tp += len(matches)
        n_pred += sum(map(len, predicted.values()))
        n_truth += sum(map(len, oracle.episodes.values()))
    precision, recall = tp / n_pred, tp / n_truth
    verdict(
        "AC5 oracle equivalence",
        not unequal and precision >= 0.95 and recall >= 0.95,
        f"100 noise-free scenarios equal to oracle: {100 - len(unequal)}/100; "
        f"sigma 1 px over {n_truth} gaze episodes: precision {precision:.4f}, recall {recall:.4f} (>= 0.95)",
    )


def test_ac6_stabilizer(verdict):
    frames, injected = jittered_sequence(100, 8.0, 10, seed=7)
    out = stabilize_sequence(frames)
    ref, _ = jittered_sequence(1, 0.0, 10, seed=7)
    crop = (slice(40, -40), slice(40, -40))
    r = ref[0].data.astype(float)[crop]
    residual = []
    for o in out:
        shift, _, _ = phase_cross_correlation(o.frame.data.astype(float)[crop], r, upsample_factor=20)
        residual.append((shift[1], shift[0]))
    residual = np.array(residual)

    def rms(a):
        return float(np.sqrt(np.mean(np.sum((a - a.mean(axis=0)) ** 2, axis=1))))

    ratio = rms(residual) / rms(injected)
    static = [Frame(ref[0].data, 33 * k) for k in range(100)]
    exact = all(np.array_equal(a.data, b.frame.data) for a, b in zip(static, stabilize_sequence(static)))
    verdict(
        "AC6 stabilizer",
        ratio <= 0.10 and exact,
        f"residual/injected RMS {ratio:.4f} (<= 0.10), static sequence bit-exact: {exact}",
    )


def test_ac7_belt_protocol(verdict):
    failures = 0
    count = 0
    for cell in range(16):
        for intensity in range(256):
            for duration in (0, 1, 400, 65535):
                p = PulseFields(cell, intensity, duration)
                frame = encode_pulse(p)
                got, used = decode_frame(frame)
                failures += got != p or used != FRAME_LEN or len(frame) != 6
                count += 1
    rng = np.random.default_rng(77)
    recovered = 0
    for _ in range(1000):
        garbage = rng.integers(0, 256, int(rng.integers(1, 65))).astype(np.uint8).tobytes()
        p = PulseFields(int(rng.integers(16)), int(rng.integers(256)), int(rng.integers(65536)))
        reader = FrameReader()
        got = reader.feed(garbage + encode_pulse(p))
        recovered += bool(got) and got[-1] == p
    verdict(
        "AC7 belt protocol",
        failures == 0 and count == 16384 and recovered == 1000,
        f"{count - failures}/{count} round trips exact, resync recovered {recovered}/1000",
    )


JITTERED = """
duration 4000
fps 30
fov 170
noise 0
jitter 8 10
participant Ben enter=0 exit=4000
  t=0 bearing=-40 distance=1300 yaw=10
participant unknown enter=0 exit=4000
  t=0 bearing=10 distance=1500 yaw=-40
participant Carla enter=0 exit=4000
  t=0 bearing=50 distance=1200 yaw=0
  t=2500 bearing=50 distance=1200 yaw=0
  t=2800 bearing=50 distance=1200 yaw=50
"""


def test_ac8_throughput(verdict):
    rates = {}
    for name in ("id_request_mixed", "four_gazers"):
        s = load_scenario(cli.read_scenario_text(name))
        rates[name] = run_scenario(s, "haptics", faces=False, frames=False, oracle=False).report.throughput
    framed = run_scenario(load_scenario(JITTERED), "haptics", faces=False, frames=True, oracle=False)
    fps = framed.report.throughput
    verdict(
        "AC8 throughput",
        min(rates.values()) >= 100 and fps >= 15,
        "landmark-only " + ", ".join(f"{k} {v:.0f}" for k, v in rates.items())
        + f" scene-frames/s (>= 100); 640x480 frames with stabilization {fps:.1f} fps (>= 15)",
    )
