"""Homographies: representation, projective transforms, DLT fitting, RANSAC.

A homography is stored canonically normalized (bottom-right entry 1 when it
is nonzero, unit Frobenius norm otherwise) so that equality comparisons and
round-trips through text files are well-defined.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateConfiguration,
    DegeneratePoint,
    InsufficientData,
    NoConsensus,
    ParseError,
)
from .rng import Xorshift64Star

_W_EPS = 1e-12
_DET_EPS = 1e-12
_COLLINEAR_EPS = 1e-9


class Point2(NamedTuple):
    x: float
    y: float


class Correspondence(NamedTuple):
    p1: Point2
    p2: Point2


@dataclass(frozen=True)
class RansacParams:
    """Knobs for robust homography fitting.

    inlier_threshold is in pixels of reprojection error; the seed feeds the
    pinned xorshift64* sampler so masks are reproducible.
    """

    max_iterations: int = 2000
    inlier_threshold: float = 2.0
    min_inliers: int = 4
    seed: int = 1

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.inlier_threshold > 0:
            raise ValueError("inlier_threshold must be > 0")
        if self.min_inliers < 4:
            raise ValueError("min_inliers must be >= 4")


class Homography:
    """Invertible 3x3 projective map, canonically normalized on construction."""

    __slots__ = ("m",)

    def __init__(self, m):
        arr = np.asarray(m, dtype=float).reshape(3, 3).copy()
        if not np.all(np.isfinite(arr)):
            raise DegenerateConfiguration("homography entries must be finite")
        if abs(arr[2, 2]) > _DET_EPS:
            arr /= arr[2, 2]
        else:
            norm = np.linalg.norm(arr)
            if norm <= _DET_EPS:
                raise DegenerateConfiguration("homography is the zero matrix")
            arr /= norm
            # fix the scale sign so Frobenius-normalized matrices compare equal
            flat = arr.reshape(-1)
            lead = flat[np.argmax(np.abs(flat))]
            if lead < 0:
                arr = -arr
        if abs(np.linalg.det(arr)) <= _DET_EPS:
            raise DegenerateConfiguration("homography is singular")
        arr.flags.writeable = False
        object.__setattr__(self, "m", arr)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.m))

    def __repr__(self) -> str:
        rows = "; ".join(" ".join(f"{v:.6g}" for v in row) for row in self.m)
        return f"Homography([{rows}])"


def apply_homography(h: Homography, p: Point2) -> Point2:
    """Map a point through h; raises DegeneratePoint when it goes to infinity."""
    x, y = float(p[0]), float(p[1])
    m = h.m
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(w) <= _W_EPS:
        raise DegeneratePoint(f"point ({x}, {y}) maps to infinity")
    return Point2(
        (m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w,
        (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w,
    )


def project_points(h: Homography, pts: np.ndarray) -> np.ndarray:
    """Vectorized apply_homography for an (n, 2) array.

    Points whose denominator vanishes come back as +inf coordinates instead
    of raising, so callers scoring many points can treat them as outliers.
    """
    pts = np.asarray(pts, dtype=float)
    w = h.m[2, 0] * pts[:, 0] + h.m[2, 1] * pts[:, 1] + h.m[2, 2]
    out = np.empty_like(pts)
    bad = np.abs(w) <= _W_EPS
    wsafe = np.where(bad, 1.0, w)
    out[:, 0] = (h.m[0, 0] * pts[:, 0] + h.m[0, 1] * pts[:, 1] + h.m[0, 2]) / wsafe
    out[:, 1] = (h.m[1, 0] * pts[:, 0] + h.m[1, 1] * pts[:, 1] + h.m[1, 2]) / wsafe
    out[bad] = np.inf
    return out


def parse_homography_file(text: bytes | str) -> Homography:
    """Parse the ground-truth wire format: 9 whitespace-separated reals."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"homography file is not valid UTF-8: {exc}") from exc
    tokens = text.split()
    if len(tokens) != 9:
        raise ParseError(f"expected 9 numbers, found {len(tokens)}")
    values = []
    for tok in tokens:
        try:
            v = float(tok)
        except ValueError as exc:
            raise ParseError(f"bad number {tok!r}") from exc
        if not np.isfinite(v):
            raise ParseError(f"non-finite entry {tok!r}")
        values.append(v)
    return Homography(np.array(values).reshape(3, 3))


def format_homography(h: Homography) -> str:
    """Inverse of parse_homography_file (row per line, repr-exact decimals)."""
    return "\n".join(" ".join(repr(float(v)) for v in row) for row in h.m) + "\n"


def _hartley_transform(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Similarity T mapping pts to zero centroid and mean distance sqrt(2).

    Returns (T, T_inverse); the inverse is closed-form since T is a
    similarity, sparing a linear solve in the RANSAC inner loop.
    """
    centroid = pts.mean(axis=0)
    dist = np.sqrt(((pts - centroid) ** 2).sum(axis=1)).mean()
    if dist <= _DET_EPS:
        raise DegenerateConfiguration("all points coincide")
    s = np.sqrt(2.0) / dist
    t = np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )
    t_inv = np.array(
        [[1.0 / s, 0.0, centroid[0]], [0.0, 1.0 / s, centroid[1]], [0.0, 0.0, 1.0]]
    )
    return t, t_inv


def _apply_affine(t: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return pts @ t[:2, :2].T + t[:2, 2]


def _correspondence_arrays(pairs: Sequence[Correspondence]) -> tuple[np.ndarray, np.ndarray]:
    p1 = np.array([[c.p1[0], c.p1[1]] for c in pairs], dtype=float)
    p2 = np.array([[c.p2[0], c.p2[1]] for c in pairs], dtype=float)
    return p1, p2


def _solve_dlt(n1: np.ndarray, n2: np.ndarray) -> np.ndarray:
    """Smallest-singular-vector solution of the stacked system, as a 3x3."""
    n = len(n1)
    a = np.zeros((2 * n, 9))
    x, y = n1[:, 0], n1[:, 1]
    u, v = n2[:, 0], n2[:, 1]
    a[0::2, 0] = x
    a[0::2, 1] = y
    a[0::2, 2] = 1.0
    a[0::2, 6] = -u * x
    a[0::2, 7] = -u * y
    a[0::2, 8] = -u
    a[1::2, 3] = x
    a[1::2, 4] = y
    a[1::2, 5] = 1.0
    a[1::2, 6] = -v * x
    a[1::2, 7] = -v * y
    a[1::2, 8] = -v

    _, s, vt = np.linalg.svd(a)
    rank_tol = s[0] * max(a.shape) * np.finfo(float).eps
    if int((s > rank_tol).sum()) < 8:
        raise DegenerateConfiguration("design matrix rank-deficient (collinear points?)")
    return vt[-1].reshape(3, 3)


def _dlt_arrays(p1: np.ndarray, p2: np.ndarray) -> Homography:
    t1, _ = _hartley_transform(p1)
    t2, t2_inv = _hartley_transform(p2)
    hn = _solve_dlt(_apply_affine(t1, p1), _apply_affine(t2, p2))
    return Homography(t2_inv @ hn @ t1)


def estimate_homography_dlt(pairs: Sequence[Correspondence]) -> Homography:
    """Least-squares homography via the normalized direct linear transform.

    Both point sets are Hartley-normalized (zero centroid, mean distance
    sqrt(2)); the stacked 2n x 9 system is solved by SVD and the result
    denormalized and canonically normalized.
    """
    if len(pairs) < 4:
        raise InsufficientData(f"DLT needs >= 4 correspondences, got {len(pairs)}")
    p1, p2 = _correspondence_arrays(pairs)
    if not (np.all(np.isfinite(p1)) and np.all(np.isfinite(p2))):
        raise DegenerateConfiguration("correspondence coordinates must be finite")
    return _dlt_arrays(p1, p2)


def _has_collinear_triple(q: np.ndarray) -> bool:
    """True when any 3 of the 4 already-normalized points are collinear."""
    for skip in range(4):
        tri = [p for i, p in enumerate(q) if i != skip]
        cross = (tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1]) - (
            tri[1][1] - tri[0][1]
        ) * (tri[2][0] - tri[0][0])
        if abs(cross) < _COLLINEAR_EPS:
            return True
    return False


def _minimal_sample_fit(s1: np.ndarray, s2: np.ndarray) -> Homography | None:
    """Fit 4 correspondences, or None when the sample is degenerate."""
    try:
        t1, _ = _hartley_transform(s1)
        t2, t2_inv = _hartley_transform(s2)
        n1 = _apply_affine(t1, s1)
        n2 = _apply_affine(t2, s2)
        if _has_collinear_triple(n1) or _has_collinear_triple(n2):
            return None
        return Homography(t2_inv @ _solve_dlt(n1, n2) @ t1)
    except DegenerateConfiguration:
        return None


def ransac_homography(
    pairs: Sequence[Correspondence], params: RansacParams
) -> tuple[Homography, list[bool]]:
    """Robust homography fit; returns the refit model and its inlier mask.

    Runs exactly params.max_iterations minimal-sample rounds (degenerate
    samples consume a round), keeps the consensus-maximal model with ties
    broken by lower summed inlier error then earlier iteration, refits by
    DLT on the winning inlier set, and returns that refit together with the
    winning mask.  Fully deterministic given the seed.
    """
    n = len(pairs)
    if n < 4:
        raise InsufficientData(f"RANSAC needs >= 4 pairs, got {n}")
    p1, p2 = _correspondence_arrays(pairs)
    rng = Xorshift64Star(params.seed)

    best_count = -1
    best_err_sum = np.inf
    best_mask: np.ndarray | None = None
    best_model: Homography | None = None

    x1, y1 = p1[:, 0], p1[:, 1]
    x2, y2 = p2[:, 0], p2[:, 1]
    for _ in range(params.max_iterations):
        idx = rng.sample_distinct(n, 4)
        model = _minimal_sample_fit(p1[idx], p2[idx])
        if model is None:
            continue

        m = model.m
        w = m[2, 0] * x1 + m[2, 1] * y1 + m[2, 2]
        bad = np.abs(w) <= _W_EPS
        w[bad] = 1.0
        ex = (m[0, 0] * x1 + m[0, 1] * y1 + m[0, 2]) / w - x2
        ey = (m[1, 0] * x1 + m[1, 1] * y1 + m[1, 2]) / w - y2
        err = np.hypot(ex, ey)
        err[bad] = np.inf
        mask = err < params.inlier_threshold
        count = int(mask.sum())
        err_sum = float(err[mask].sum())
        if count > best_count or (count == best_count and err_sum < best_err_sum):
            best_count = count
            best_err_sum = err_sum
            best_mask = mask
            best_model = model

    if best_model is None or best_count < params.min_inliers:
        raise NoConsensus(
            f"best consensus {max(best_count, 0)} below min_inliers {params.min_inliers}"
        )

    try:
        refit = _dlt_arrays(p1[best_mask], p2[best_mask])
    except DegenerateConfiguration:
        refit = best_model  # inlier set degenerate; keep the sample model
    return refit, [bool(b) for b in best_mask]
