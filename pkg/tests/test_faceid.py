import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from skimage.feature import local_binary_pattern

from socialcue.errors import DegenerateLandmarks, ParseError, ValidationError
from socialcue.faceid import (
    CHIP_EYES,
    CHIP_SIZE,
    DESCRIPTOR_DIM,
    N_BINS,
    UNIFORM_BIN,
    UNKNOWN,
    FaceChip,
    Gallery,
    IdentityLabel,
    chi_square,
    extract_descriptor,
    identify,
    lbp_codes,
    load_gallery,
    normalize_face,
    save_gallery,
)
from socialcue.simulator.synth import canonical_chip_landmarks, render_face


def chip_of(seed, pose_seed):
    img, lm = render_face(seed, pose_seed)
    return normalize_face(img, lm)


def test_uniform_table_by_brute_force():
    def transitions(code):
        bits = [(code >> i) & 1 for i in range(8)]
        return sum(bits[i] != bits[(i + 1) % 8] for i in range(8))

    uniform = [c for c in range(256) if transitions(c) <= 2]
    assert len(uniform) == 58
    assert sorted(UNIFORM_BIN[uniform]) == list(range(58))
    assert all(UNIFORM_BIN[c] == N_BINS - 1 for c in range(256) if c not in uniform)


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_lbp_codes_match_scikit_image(rng):
    # float pixels avoid exact ties, where interpolation round-off could differ
    img = rng.uniform(0, 255, (40, 50))
    ref = local_binary_pattern(img, 8, 1, method="default").astype(int)
    np.testing.assert_array_equal(lbp_codes(img), ref[1:-1, 1:-1])


def test_constant_chip_codes_are_255():
    chip = FaceChip(np.full((CHIP_SIZE, CHIP_SIZE), 77, np.uint8), canonical_chip_landmarks())
    assert np.all(lbp_codes(chip.image) == 255)
    d = extract_descriptor(chip).reshape(-1, N_BINS)
    assert np.all(d[:, UNIFORM_BIN[255]] == 1.0)
    assert d.sum() == pytest.approx(len(d))


def test_descriptor_shape_and_offset_invariance():
    chip = chip_of(11, 1)
    d = extract_descriptor(chip)
    assert d.shape == (DESCRIPTOR_DIM,) == (51 * 59,)
    np.testing.assert_array_equal(extract_descriptor(chip), d)
    # squeeze the range so a +10 offset cannot clip
    base = FaceChip((chip.image // 2 + 20).astype(np.uint8), chip.landmarks)
    shifted = FaceChip(base.image + np.uint8(10), chip.landmarks)
    np.testing.assert_array_equal(extract_descriptor(shifted), extract_descriptor(base))


def test_patch_outside_chip_gives_zero_histogram():
    lm = canonical_chip_landmarks().copy()
    lm[40] = (-100, -100)
    d = extract_descriptor(FaceChip(np.full((CHIP_SIZE, CHIP_SIZE), 5, np.uint8), lm)).reshape(-1, N_BINS)
    assert np.all(d[40 - 17] == 0)


def test_normalize_fixed_point(rng):
    img = rng.integers(0, 256, (CHIP_SIZE, CHIP_SIZE)).astype(np.uint8)
    lm = canonical_chip_landmarks()
    chip = normalize_face(img, lm)
    np.testing.assert_array_equal(chip.image, img)
    np.testing.assert_allclose(chip.landmarks, lm, atol=0.5)


def test_normalize_rotated_input():
    lm = canonical_chip_landmarks()
    a = math.radians(15)
    R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    c = np.array([80.0, 80.0])
    rotated = (lm - CHIP_SIZE / 2) @ R.T + c
    chip = normalize_face(np.zeros((160, 160), np.uint8), rotated)
    np.testing.assert_allclose(chip.landmarks[[36, 45]], CHIP_EYES, atol=0.5)


def test_normalize_degenerate():
    lm = canonical_chip_landmarks().copy()
    lm[45] = lm[36] + 1.0
    with pytest.raises(DegenerateLandmarks):
        normalize_face(np.zeros((128, 128), np.uint8), lm)


def test_inter_identity_distance_exceeds_intra():
    a = [extract_descriptor(chip_of(101, k)) for k in range(20)]
    b = [extract_descriptor(chip_of(202, k)) for k in range(20)]
    intra = max(chi_square(x, y) for i, x in enumerate(a) for y in a[i + 1 :])
    inter = min(chi_square(x, y) for x in a for y in b)
    assert inter > intra


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_chi_square_metric_sanity(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.dirichlet(np.ones(N_BINS)), rng.dirichlet(np.ones(N_BINS))
    b[rng.integers(N_BINS)] = 0.0
    assert chi_square(a, a) == 0
    assert chi_square(a, b) == pytest.approx(chi_square(b, a))
    assert chi_square(a, b) >= 0
    # brute-force definition
    ref = sum((x - y) ** 2 / (x + y) for x, y in zip(a, b) if x + y > 0)
    assert chi_square(a, b) == pytest.approx(ref)


@pytest.fixture(scope="module")
def small_gallery():
    g = Gallery()
    for name, seed in (("Anna", 1), ("Ben", 2), ("Carla", 3)):
        g.enroll(name, [extract_descriptor(chip_of(seed, k)) for k in range(5)], calibrate=False)
    g.calibrate()
    return g


def test_identify_self_and_empty(small_gallery):
    d = small_gallery.entries["Ben"][2]
    label, dist = identify(small_gallery, d)
    assert label == IdentityLabel("Ben") and dist == 0
    label, dist = identify(Gallery(), d)
    assert label is UNKNOWN and dist == math.inf


def test_calibration_formula(small_gallery):
    names = small_gallery.names
    genuine, impostor = [0.0], []
    for a in names:
        for i, x in enumerate(small_gallery.entries[a]):
            genuine += [chi_square(x, y) for y in small_gallery.entries[a][i + 1 :]]
            for b in names:
                if b > a:
                    impostor += [chi_square(x, y) for y in small_gallery.entries[b]]
    assert small_gallery.threshold == pytest.approx(0.5 * (min(impostor) + max(genuine)))


def test_single_identity_gallery_uses_fallback():
    g = Gallery(fallback_threshold=7.5)
    g.enroll("Solo", [extract_descriptor(chip_of(5, k)) for k in range(3)])
    assert g.threshold == 7.5


def test_held_out_probes_and_unseen_identity(small_gallery):
    for name, seed in (("Anna", 1), ("Ben", 2), ("Carla", 3)):
        for k in range(5, 10):
            assert identify(small_gallery, extract_descriptor(chip_of(seed, k)))[0] == IdentityLabel(name)
    rejected = [identify(small_gallery, extract_descriptor(chip_of(999, k)))[0] is UNKNOWN for k in range(10)]
    assert np.mean(rejected) >= 0.9


def test_raising_threshold_never_turns_known_into_unknown(small_gallery):
    probes = [extract_descriptor(chip_of(s, k)) for s in (1, 2, 999) for k in range(5, 8)]
    base = small_gallery.threshold
    for d in probes:
        low, _ = identify(Gallery(small_gallery.entries, base), d)
        high, _ = identify(Gallery(small_gallery.entries, base * 1.5), d)
        if low.known:
            assert high == low


def test_enroll_rejects_bad_names():
    with pytest.raises(ValidationError):
        Gallery().enroll("two words", [np.zeros(DESCRIPTOR_DIM)])


def test_gallery_round_trip(small_gallery, tmp_path):
    save_gallery(small_gallery, tmp_path)
    back = load_gallery(tmp_path)
    assert back.threshold == small_gallery.threshold
    assert back.names == small_gallery.names
    for n in back.names:
        np.testing.assert_array_equal(np.array(back.entries[n]), np.array(small_gallery.entries[n]))
    raw = (tmp_path / "0000.lbp").read_bytes()
    assert raw[:4] == b"LBPG"
    (tmp_path / "0000.lbp").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ParseError):
        load_gallery(tmp_path)


def test_identity_label_text():
    assert str(IdentityLabel("Anna")) == "known:Anna"
    assert str(UNKNOWN) == "unknown" and UNKNOWN.spoken() == "unknown"
    assert IdentityLabel.parse("known:Anna") == IdentityLabel("Anna")
    with pytest.raises(ValueError):
        IdentityLabel.parse("Anna")
