"""Keypoint-dump parsing and patch sampling, mirroring the toolkit's
documented conventions: sigma-scaled windows, bilinear sampling and resize,
BT.601 grayscale, channel replication, hard out-of-bounds drops."""

from __future__ import annotations

import numpy as np

_GRAY = np.array([0.299, 0.587, 0.114])
_EPS = 1e-9


def read_keypoints(text: str) -> list[tuple[float, float, float, int, float]]:
    """Parse 'x y sigma octave response' lines."""
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        x, y, sigma, octave, response = line.split()
        out.append((float(x), float(y), float(sigma), int(octave), float(response)))
    return out


def match_channels(pixels: np.ndarray, channels: int) -> np.ndarray:
    if channels == 1:
        return pixels @ _GRAY if pixels.ndim == 3 else pixels
    if pixels.ndim == 2:
        return np.repeat(pixels[:, :, None], 3, axis=2)
    return pixels


def _bilinear_grid(pixels: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    h, w = pixels.shape[:2]
    x0 = np.clip(np.floor(xs).astype(int), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(ys).astype(int), 0, max(h - 2, 0))
    fx = np.clip(xs - x0, 0.0, 1.0)
    fy = np.clip(ys - y0, 0.0, 1.0)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    if pixels.ndim == 3:
        wy0, wy1 = (1 - fy)[:, None, None], fy[:, None, None]
        wx0, wx1 = (1 - fx)[None, :, None], fx[None, :, None]
    else:
        wy0, wy1 = (1 - fy)[:, None], fy[:, None]
        wx0, wx1 = (1 - fx)[None, :], fx[None, :]
    return (
        wy0 * wx0 * pixels[np.ix_(y0, x0)]
        + wy0 * wx1 * pixels[np.ix_(y0, x1)]
        + wy1 * wx0 * pixels[np.ix_(y1, x0)]
        + wy1 * wx1 * pixels[np.ix_(y1, x1)]
    )


def extract_patch(pixels: np.ndarray, cx: float, cy: float, window: int,
                  out_side: int) -> np.ndarray | None:
    """window x window bilinear sample around (cx, cy) resized to out_side;
    None when the window crosses the image border."""
    h, w = pixels.shape[:2]
    xs = cx - (window - 1) / 2.0 + np.arange(window, dtype=float)
    ys = cy - (window - 1) / 2.0 + np.arange(window, dtype=float)
    if xs[0] < -_EPS or ys[0] < -_EPS or xs[-1] > w - 1 + _EPS or ys[-1] > h - 1 + _EPS:
        return None
    patch = _bilinear_grid(pixels, np.clip(ys, 0, h - 1), np.clip(xs, 0, w - 1))
    if out_side != window:
        if out_side == 1:
            pos = np.array([(window - 1) / 2.0])
        else:
            pos = np.arange(out_side, dtype=float) * (window - 1) / (out_side - 1)
        patch = _bilinear_grid(patch, pos, pos)
    return np.clip(patch, 0.0, 1.0)


def scaled_window(window: int, sigma: float, base_sigma: float) -> int:
    return max(1, int(round(window * sigma / base_sigma)))
