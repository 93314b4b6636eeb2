"""The four registration quality measures for one matched image pair.

Reprojection errors are computed both against the ground-truth homography
(keypoint error + true positives) and against a RANSAC-estimated one
(computed-homography error + inlier ratio).  Empty match lists yield absent
errors, never zeros, so aggregation cannot mistake failure for perfection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IndexOutOfRange, InsufficientData, NoConsensus
from .geometry import Correspondence, Homography, Point2, RansacParams, project_points, ransac_homography
from .matcher import MatchPair

TP_RADIUS_PX = 2.0  # strict < when counting true positives

_AGGREGATORS = {"mean": np.mean, "median": np.median}


@dataclass(frozen=True)
class EvalReport:
    n_matches: int
    ke_gh: float | None  # keypoint error vs ground-truth homography (px)
    tp: int
    ke_ch: float | None  # keypoint error vs RANSAC-computed homography (px)
    inlier_ratio: float | None
    ransac_failed: bool

    def __post_init__(self):
        if self.tp > self.n_matches:
            raise ValueError("tp cannot exceed n_matches")
        if self.inlier_ratio is not None and not 0.0 <= self.inlier_ratio <= 1.0:
            raise ValueError("inlier_ratio must be in [0, 1]")


def _match_points(
    matches: Sequence[MatchPair], kps_a: Sequence, kps_b: Sequence
) -> tuple[np.ndarray, np.ndarray]:
    pa = np.empty((len(matches), 2))
    pb = np.empty((len(matches), 2))
    for row, mp in enumerate(matches):
        if not (0 <= mp.idx_a < len(kps_a)) or not (0 <= mp.idx_b < len(kps_b)):
            raise IndexOutOfRange(f"match ({mp.idx_a}, {mp.idx_b}) outside keypoint lists")
        ka, kb = kps_a[mp.idx_a], kps_b[mp.idx_b]
        pa[row] = (ka.x, ka.y)
        pb[row] = (kb.x, kb.y)
    return pa, pb


def _reprojection_errors(
    matches: Sequence[MatchPair], kps_a: Sequence, kps_b: Sequence, h: Homography
) -> np.ndarray:
    pa, pb = _match_points(matches, kps_a, kps_b)
    proj = project_points(h, pa)
    return np.hypot(proj[:, 0] - pb[:, 0], proj[:, 1] - pb[:, 1])


def keypoint_error(
    matches: Sequence[MatchPair],
    kps_a: Sequence,
    kps_b: Sequence,
    h: Homography,
    aggregate: str = "mean",
) -> float | None:
    """Aggregate reprojection error of the matches under h; None when empty."""
    if not matches:
        return None
    errors = _reprojection_errors(matches, kps_a, kps_b, h)
    return float(_AGGREGATORS[aggregate](errors))


def true_positives(
    matches: Sequence[MatchPair], kps_a: Sequence, kps_b: Sequence, h_gt: Homography
) -> int:
    """Matches whose ground-truth reprojection error is strictly under 2 px."""
    if not matches:
        return 0
    errors = _reprojection_errors(matches, kps_a, kps_b, h_gt)
    return int((errors < TP_RADIUS_PX).sum())


def evaluate_pair(
    matches: Sequence[MatchPair],
    kps_a: Sequence,
    kps_b: Sequence,
    h_gt: Homography,
    ransac_params: RansacParams = RansacParams(),
    aggregate: str = "mean",
) -> EvalReport:
    """Full report for one matched pair; RANSAC failures are encoded, not raised."""
    ke_gh = keypoint_error(matches, kps_a, kps_b, h_gt, aggregate)
    tp = true_positives(matches, kps_a, kps_b, h_gt)

    ke_ch: float | None = None
    inlier_ratio: float | None = None
    ransac_failed = True
    if matches:
        pa, pb = _match_points(matches, kps_a, kps_b)
        pairs = [
            Correspondence(Point2(*pa[i]), Point2(*pb[i])) for i in range(len(matches))
        ]
        try:
            h_est, mask = ransac_homography(pairs, ransac_params)
        except (InsufficientData, NoConsensus):
            pass
        else:
            ransac_failed = False
            ke_ch = keypoint_error(matches, kps_a, kps_b, h_est, aggregate)
            inlier_ratio = sum(mask) / len(matches)
    return EvalReport(
        n_matches=len(matches),
        ke_gh=ke_gh,
        tp=tp,
        ke_ch=ke_ch,
        inlier_ratio=inlier_ratio,
        ransac_failed=ransac_failed,
    )
