"""Keypoint error, true positives, and the per-pair evaluation report."""

import numpy as np
import pytest

from featreg.detector import Keypoint
from featreg.errors import IndexOutOfRange
from featreg.evaluation import (
    EvalReport,
    evaluate_pair,
    keypoint_error,
    true_positives,
)
from featreg.geometry import Homography, Point2, RansacParams, project_points
from featreg.matcher import MatchPair


def kp(x, y):
    return Keypoint(float(x), float(y), 1.6, 0, 0.1)


def diagonal_matches(n):
    return [MatchPair(i, i, 0.0, 1.0, 0.0) for i in range(n)]


def planted_setup(seed=0, n=20, offset=None):
    """Keypoints in A, their images under a planted H in B (+ optional offset)."""
    rng = np.random.default_rng(seed)
    h = Homography([[1.05, 0.02, 5.0], [-0.01, 0.98, -3.0], [1e-5, -2e-5, 1.0]])
    pts = rng.uniform(10, 300, size=(n, 2))
    proj = project_points(h, pts)
    if offset is not None:
        proj = proj + offset
    kps_a = [kp(*p) for p in pts]
    kps_b = [kp(*p) for p in proj]
    return h, kps_a, kps_b


class TestKeypointError:
    def test_identity_zero(self):
        kps = [kp(3, 4), kp(10, 20)]
        err = keypoint_error(diagonal_matches(2), kps, kps, Homography.identity())
        assert err == 0.0

    def test_three_four_five(self):
        kps_a = [kp(0, 0)]
        kps_b = [kp(3, 4)]
        err = keypoint_error(diagonal_matches(1), kps_a, kps_b, Homography.identity())
        assert err == 5.0

    def test_planted_exact_then_constructed_noise(self):
        h, kps_a, kps_b = planted_setup(seed=1)
        assert keypoint_error(diagonal_matches(20), kps_a, kps_b, h) < 1e-9

        rng = np.random.default_rng(2)
        noise = rng.uniform(-1, 1, size=(20, 2))
        h2, kps_a2, kps_b2 = planted_setup(seed=1, offset=noise)
        expected = np.hypot(noise[:, 0], noise[:, 1]).mean()
        got = keypoint_error(diagonal_matches(20), kps_a2, kps_b2, h2)
        assert abs(got - expected) < 1e-9

    def test_empty_matches_absent(self):
        assert keypoint_error([], [], [], Homography.identity()) is None

    def test_median_aggregate(self):
        kps_a = [kp(0, 0), kp(10, 0), kp(20, 0)]
        kps_b = [kp(0, 1), kp(10, 2), kp(20, 9)]
        err = keypoint_error(diagonal_matches(3), kps_a, kps_b,
                             Homography.identity(), aggregate="median")
        assert err == 2.0

    def test_index_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            keypoint_error([MatchPair(5, 0, 0.0, 1.0, 0.0)], [kp(0, 0)], [kp(0, 0)],
                           Homography.identity())


class TestTruePositives:
    def test_all_exact(self):
        h, kps_a, kps_b = planted_setup(seed=3)
        assert true_positives(diagonal_matches(20), kps_a, kps_b, h) == 20

    def test_boundary_exactly_two_px(self):
        kps_a = [kp(0, 0)]
        kps_b = [kp(2.0, 0.0)]
        assert true_positives(diagonal_matches(1), kps_a, kps_b, Homography.identity()) == 0

    def test_planted_offsets(self):
        # k matches at 1 px, m matches at 5 px
        k, m = 7, 5
        kps_a = [kp(10 * i, 50) for i in range(k + m)]
        kps_b = [kp(10 * i + (1.0 if i < k else 5.0), 50) for i in range(k + m)]
        assert true_positives(diagonal_matches(k + m), kps_a, kps_b,
                              Homography.identity()) == k


class TestEvaluatePair:
    def test_all_exact_matches(self):
        h, kps_a, kps_b = planted_setup(seed=4)
        report = evaluate_pair(diagonal_matches(20), kps_a, kps_b, h,
                               RansacParams(max_iterations=300, seed=11))
        assert report.n_matches == 20
        assert report.tp == 20
        assert report.ke_gh < 1e-9
        assert not report.ransac_failed
        assert report.ke_ch < 1e-6
        assert report.inlier_ratio == 1.0

    def test_three_matches_ransac_fails(self):
        h, kps_a, kps_b = planted_setup(seed=5, n=3)
        report = evaluate_pair(diagonal_matches(3), kps_a, kps_b, h)
        assert report.ransac_failed
        assert report.ke_ch is None and report.inlier_ratio is None
        assert report.ke_gh is not None and report.ke_gh < 1e-9
        assert report.tp == 3

    def test_mixed_inliers_outliers(self):
        h, kps_a, kps_b = planted_setup(seed=6, n=40)
        # push the last 10 target points > 10 px off
        bad = [kp(p.x + 15.0, p.y + 11.0) for p in kps_b[30:]]
        kps_b = kps_b[:30] + bad
        report = evaluate_pair(diagonal_matches(40), kps_a, kps_b, h,
                               RansacParams(max_iterations=500, seed=13))
        assert report.tp == 30
        assert not report.ransac_failed
        assert abs(report.inlier_ratio - 0.75) <= 1 / 40
        assert report.ke_ch is not None

    def test_empty_matches(self):
        report = evaluate_pair([], [], [], Homography.identity())
        assert report.n_matches == 0
        assert report.ke_gh is None and report.tp == 0
        assert report.ransac_failed

    def test_deterministic(self):
        h, kps_a, kps_b = planted_setup(seed=7, n=25)
        params = RansacParams(max_iterations=400, seed=21)
        a = evaluate_pair(diagonal_matches(25), kps_a, kps_b, h, params)
        b = evaluate_pair(diagonal_matches(25), kps_a, kps_b, h, params)
        assert a == b


class TestReportInvariants:
    def test_tp_cannot_exceed_matches(self):
        with pytest.raises(ValueError):
            EvalReport(n_matches=1, ke_gh=0.0, tp=2, ke_ch=None,
                       inlier_ratio=None, ransac_failed=True)

    def test_inlier_ratio_range(self):
        with pytest.raises(ValueError):
            EvalReport(n_matches=4, ke_gh=0.0, tp=2, ke_ch=0.0,
                       inlier_ratio=1.5, ransac_failed=False)

    def test_degradation_never_raises_tp(self):
        h, kps_a, kps_b = planted_setup(seed=8, n=10)
        base_tp = true_positives(diagonal_matches(10), kps_a, kps_b, h)
        kps_a2 = kps_a + [kp(0, 0)]
        kps_b2 = kps_b + [kp(500, 500)]
        worse = diagonal_matches(11)
        assert true_positives(worse, kps_a2, kps_b2, h) == base_tp
        base_ke = keypoint_error(diagonal_matches(10), kps_a, kps_b, h)
        assert keypoint_error(worse, kps_a2, kps_b2, h) >= base_ke
