"""Difference-of-Gaussians scale-space keypoint detector.

Keypoints are integer-grid extrema of the DoG pyramid (strict 26-neighbour
comparison) that pass a contrast threshold and a principal-curvature edge
test, mapped back to original-image pixel coordinates.  No subpixel
refinement and no orientation assignment: descriptors downstream are
patch-based and never consume orientation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError, TooSmall
from .imaging import Image, downsample_half, gaussian_blur

_MIN_DIM = 16


@dataclass(frozen=True)
class DetectorParams:
    base_sigma: float = 1.6
    scales_per_octave: int = 3
    octaves: int | None = None  # None: until min dimension < 16
    contrast_threshold: float = 0.03
    edge_ratio: float = 10.0
    max_keypoints: int | None = None

    def __post_init__(self):
        if self.base_sigma <= 0:
            raise ValueError("base_sigma must be > 0")
        if self.scales_per_octave < 1:
            raise ValueError("scales_per_octave must be >= 1")
        if self.octaves is not None and self.octaves < 1:
            raise ValueError("octaves must be >= 1")
        if self.contrast_threshold <= 0:
            raise ValueError("contrast_threshold must be > 0")
        if self.edge_ratio <= 0:
            raise ValueError("edge_ratio must be > 0")
        if self.max_keypoints is not None and self.max_keypoints < 1:
            raise ValueError("max_keypoints must be >= 1")


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    sigma: float
    octave: int
    response: float


@dataclass(frozen=True)
class ScaleSpace:
    """Gaussian and DoG pyramids; gaussians[o][i] has blur base_sigma * k**i
    in octave-o pixel units, and dogs[o][i] = gaussians[o][i+1] - gaussians[o][i]."""

    gaussians: tuple[tuple[np.ndarray, ...], ...]
    dogs: tuple[tuple[np.ndarray, ...], ...]
    level_sigmas: tuple[float, ...]


def max_octaves(width: int, height: int) -> int:
    """Octave count under the stop-before-min-dim-16 rule."""
    count = 0
    w, h = width, height
    while min(w, h) >= _MIN_DIM:
        count += 1
        w //= 2
        h //= 2
    return count


def build_scale_space(img: Image, params: DetectorParams) -> ScaleSpace:
    if img.channels != 1:
        raise ValueError("detector expects a grayscale image")
    if min(img.width, img.height) < _MIN_DIM:
        raise TooSmall(f"need min dimension >= {_MIN_DIM}, got {img.width}x{img.height}")

    s = params.scales_per_octave
    k = 2.0 ** (1.0 / s)
    sigmas = tuple(params.base_sigma * k**i for i in range(s + 3))

    n_octaves = max_octaves(img.width, img.height)
    if params.octaves is not None:
        n_octaves = min(n_octaves, params.octaves)

    gaussians: list[tuple[np.ndarray, ...]] = []
    dogs: list[tuple[np.ndarray, ...]] = []
    base = img
    for octave in range(n_octaves):
        levels = []
        if octave == 0:
            levels.append(gaussian_blur(base, sigmas[0]).pixels)
        else:
            levels.append(base.pixels)  # downsampled level already carries sigma_0
        for i in range(1, s + 3):
            step = float(np.sqrt(sigmas[i] ** 2 - sigmas[i - 1] ** 2))
            levels.append(gaussian_blur(Image(levels[i - 1]), step).pixels)
        gaussians.append(tuple(levels))
        dogs.append(tuple(levels[i + 1] - levels[i] for i in range(s + 2)))
        if octave + 1 < n_octaves:
            base = downsample_half(Image(levels[s]))  # sigma there is 2 * base_sigma
    return ScaleSpace(tuple(gaussians), tuple(dogs), sigmas)


def _extrema_mask(prev: np.ndarray, cur: np.ndarray, nxt: np.ndarray) -> np.ndarray:
    """Strict 26-neighbour extremum test on the interior of cur."""
    center = cur[1:-1, 1:-1]
    others = []
    for level in (prev, cur, nxt):
        for dy in (0, 1, 2):
            for dx in (0, 1, 2):
                if level is cur and dy == 1 and dx == 1:
                    continue
                h, w = cur.shape
                others.append(level[dy : h - 2 + dy, dx : w - 2 + dx])
    stack = np.stack(others)
    return (center > stack.max(axis=0)) | (center < stack.min(axis=0))


def detect_keypoints(img: Image, params: DetectorParams) -> list[Keypoint]:
    """DoG extrema in original-image coordinates, strongest responses first.

    Deterministic: ties in |response| are broken by (y, x, octave).
    """
    space = build_scale_space(img, params)
    edge_bound_num = (params.edge_ratio + 1.0) ** 2
    keypoints: list[Keypoint] = []

    for octave, dog_levels in enumerate(space.dogs):
        factor = 2**octave
        for i in range(1, len(dog_levels) - 1):
            cur = dog_levels[i]
            if cur.shape[0] < 3 or cur.shape[1] < 3:
                continue
            mask = _extrema_mask(dog_levels[i - 1], cur, dog_levels[i + 1])
            center = cur[1:-1, 1:-1]
            mask &= np.abs(center) >= params.contrast_threshold
            ys, xs = np.nonzero(mask)
            if ys.size == 0:
                continue
            ys = ys + 1
            xs = xs + 1
            c = cur[ys, xs]
            dxx = cur[ys, xs + 1] - 2 * c + cur[ys, xs - 1]
            dyy = cur[ys + 1, xs] - 2 * c + cur[ys - 1, xs]
            dxy = 0.25 * (
                cur[ys + 1, xs + 1]
                - cur[ys + 1, xs - 1]
                - cur[ys - 1, xs + 1]
                + cur[ys - 1, xs - 1]
            )
            tr = dxx + dyy
            det = dxx * dyy - dxy * dxy
            keep = (det > 0) & (tr * tr * params.edge_ratio < det * edge_bound_num)
            sigma = space.level_sigmas[i] * factor
            for y, x, r in zip(ys[keep], xs[keep], c[keep]):
                keypoints.append(
                    Keypoint(
                        x=float(x * factor),
                        y=float(y * factor),
                        sigma=sigma,
                        octave=octave,
                        response=float(r),
                    )
                )

    keypoints.sort(key=lambda kp: (-abs(kp.response), kp.y, kp.x, kp.octave))
    if params.max_keypoints is not None:
        keypoints = keypoints[: params.max_keypoints]
    return keypoints


def write_keypoints(keypoints: list[Keypoint]) -> str:
    """Text dump: one 'x y sigma octave response' line per keypoint."""
    lines = [
        f"{kp.x:.9g} {kp.y:.9g} {kp.sigma:.9g} {kp.octave} {kp.response:.9g}"
        for kp in keypoints
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def read_keypoints(text: str) -> list[Keypoint]:
    keypoints = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ParseError(f"line {lineno}: expected 5 fields, got {len(parts)}")
        try:
            keypoints.append(
                Keypoint(
                    x=float(parts[0]),
                    y=float(parts[1]),
                    sigma=float(parts[2]),
                    octave=int(parts[3]),
                    response=float(parts[4]),
                )
            )
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
    return keypoints
