"""DoG scale space and keypoint detection on synthetic fixtures."""

import numpy as np
import pytest

from featreg.detector import (
    DetectorParams,
    Keypoint,
    build_scale_space,
    detect_keypoints,
    max_octaves,
    read_keypoints,
    write_keypoints,
)
from featreg.errors import ParseError, TooSmall
from featreg.imaging import Image
from helpers import texture_image


def blob_image(size: int, centers, sigma_blob: float, amp: float = 1.0) -> Image:
    ys, xs = np.mgrid[0:size, 0:size].astype(float)
    img = np.zeros((size, size))
    for cx, cy in centers:
        img += amp * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma_blob**2))
    return Image(np.clip(img, 0, 1))


class TestScaleSpace:
    def test_constant_image_zero_dogs(self):
        space = build_scale_space(Image(np.full((64, 64), 0.5)), DetectorParams())
        worst = max(float(np.abs(d).max()) for octave in space.dogs for d in octave)
        assert worst < 1e-9

    def test_octave_count_rule(self):
        assert max_octaves(256, 256) == 5  # 256 -> 128 -> 64 -> 32 -> 16
        assert max_octaves(255, 255) == 4
        assert max_octaves(16, 1024) == 1

    def test_levels_per_octave(self):
        params = DetectorParams(scales_per_octave=4)
        space = build_scale_space(Image(np.zeros((40, 40))), params)
        assert all(len(g) == params.scales_per_octave + 3 for g in space.gaussians)
        assert all(len(d) == params.scales_per_octave + 2 for d in space.dogs)

    def test_sigma_ladder(self):
        params = DetectorParams(base_sigma=1.6, scales_per_octave=3)
        space = build_scale_space(Image(np.zeros((32, 32))), params)
        k = 2 ** (1 / 3)
        assert np.allclose(space.level_sigmas, [1.6 * k**i for i in range(6)])

    def test_too_small(self):
        with pytest.raises(TooSmall):
            build_scale_space(Image(np.zeros((15, 100))), DetectorParams())

    def test_rejects_color(self):
        with pytest.raises(ValueError):
            build_scale_space(Image(np.zeros((32, 32, 3))), DetectorParams())

    def test_octave_clamp(self):
        space = build_scale_space(Image(np.zeros((64, 64))), DetectorParams(octaves=2))
        assert len(space.gaussians) == 2


class TestDetectKeypoints:
    def test_constant_image_empty(self):
        assert detect_keypoints(Image(np.full((64, 64), 0.5)), DetectorParams()) == []

    def test_single_blob(self):
        # frozen from the reference run: one extremum, dead centre, sigma 3.2
        kps = detect_keypoints(blob_image(128, [(64, 64)], 4.0), DetectorParams())
        assert len(kps) == 1
        kp = kps[0]
        assert abs(kp.x - 64) <= 2 and abs(kp.y - 64) <= 2
        k = 2 ** (1 / 3)
        assert 4.0 / k <= kp.sigma <= 4.0 * k
        assert abs(kp.response) >= DetectorParams().contrast_threshold

    def test_two_blobs(self):
        kps = detect_keypoints(blob_image(128, [(40, 40), (90, 80)], 4.0), DetectorParams())
        assert any(abs(kp.x - 40) <= 2 and abs(kp.y - 40) <= 2 for kp in kps)
        assert any(abs(kp.x - 90) <= 2 and abs(kp.y - 80) <= 2 for kp in kps)

    def test_determinism(self):
        img = texture_image(96, seed=2)
        a = detect_keypoints(img, DetectorParams())
        b = detect_keypoints(img, DetectorParams())
        assert a == b

    def test_translation_covariance(self):
        img = blob_image(128, [(40, 40), (70, 56)], 4.0)
        shifted = Image(np.roll(img.pixels, shift=(6, 8), axis=(0, 1)))
        kps = detect_keypoints(img, DetectorParams())
        kps_shifted = detect_keypoints(shifted, DetectorParams())
        for kp in kps:
            moved = [
                s
                for s in kps_shifted
                if abs(s.x - (kp.x + 8)) <= 0.5 and abs(s.y - (kp.y + 6)) <= 0.5
            ]
            assert moved, f"keypoint at ({kp.x}, {kp.y}) did not shift by (8, 6)"

    def test_bounds_and_contrast_floor(self):
        img = texture_image(80, seed=14)
        params = DetectorParams()
        kps = detect_keypoints(img, params)
        assert kps
        for kp in kps:
            assert 0 <= kp.x < 80 and 0 <= kp.y < 80
            assert abs(kp.response) >= params.contrast_threshold
            assert kp.sigma > 0

    def test_contrast_threshold_monotone(self):
        img = texture_image(80, seed=9)
        loose = detect_keypoints(img, DetectorParams(contrast_threshold=0.02))
        tight = detect_keypoints(img, DetectorParams(contrast_threshold=0.05))
        assert set(tight).issubset(set(loose))

    def test_max_keypoints_truncation(self):
        img = texture_image(80, seed=9)
        full = detect_keypoints(img, DetectorParams())
        assert len(full) > 5
        top = detect_keypoints(img, DetectorParams(max_keypoints=5))
        assert top == full[:5]
        responses = [abs(kp.response) for kp in full]
        assert responses == sorted(responses, reverse=True)


class TestKeypointDump:
    def test_round_trip(self):
        kps = [
            Keypoint(12.0, 34.0, 1.6, 0, -0.125),
            Keypoint(8.0, 2.0, 3.2, 1, 0.5),
        ]
        text = write_keypoints(kps)
        assert text.splitlines()[0] == "12 34 1.6 0 -0.125"
        assert read_keypoints(text) == kps

    def test_empty(self):
        assert write_keypoints([]) == ""
        assert read_keypoints("") == []

    def test_bad_field_count(self):
        with pytest.raises(ParseError):
            read_keypoints("1 2 3 4\n")
