"""featreg: feature-based image registration toolkit and benchmark harness.

Pipeline pieces (detector -> descriptor -> distance -> matcher -> geometry ->
evaluation) are importable individually; the harness module glues them into
the grid benchmark behind the `featreg` CLI.
"""

from .detector import DetectorParams, Keypoint, detect_keypoints
from .distance import Metric, distance_matrix
from .evaluation import EvalReport, evaluate_pair
from .geometry import (
    Correspondence,
    Homography,
    Point2,
    RansacParams,
    apply_homography,
    estimate_homography_dlt,
    parse_homography_file,
    ransac_homography,
)
from .imaging import Image, Patch, extract_patch, gaussian_blur, load_image, to_grayscale
from .matcher import MatchPair, MatchParams, match

__all__ = [
    "Correspondence",
    "DetectorParams",
    "EvalReport",
    "Homography",
    "Image",
    "Keypoint",
    "MatchPair",
    "MatchParams",
    "Metric",
    "Patch",
    "Point2",
    "RansacParams",
    "apply_homography",
    "detect_keypoints",
    "distance_matrix",
    "estimate_homography_dlt",
    "evaluate_pair",
    "extract_patch",
    "gaussian_blur",
    "load_image",
    "match",
    "parse_homography_file",
    "ransac_homography",
    "to_grayscale",
]

__version__ = "0.1.0"
