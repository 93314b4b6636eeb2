"""Image container, netpbm decoding, blurring, downsampling, patch sampling.

Pixels live as float64 intensities in [0, 1]: shape (h, w) for grayscale or
(h, w, 3) for RGB, row-major.  All operations are pure; arrays inside Image
and Patch are frozen (writeable=False) so values can be shared safely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfBounds, ParseError, TooSmall, TruncatedData, UnsupportedFormat
from .geometry import Point2

# BT.601 luma weights, the fixed grayscale conversion of the toolkit
_GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])

_BOUNDS_EPS = 1e-9


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


def _validate_pixels(pixels: np.ndarray, what: str) -> np.ndarray:
    if pixels.ndim == 3 and pixels.shape[2] == 1:
        pixels = pixels[:, :, 0]
    if pixels.ndim not in (2, 3) or (pixels.ndim == 3 and pixels.shape[2] != 3):
        raise ValueError(f"{what} must be (h, w) or (h, w, 3), got {pixels.shape}")
    if not np.all(np.isfinite(pixels)):
        raise ValueError(f"{what} intensities must be finite")
    if pixels.size and (pixels.min() < 0.0 or pixels.max() > 1.0):
        raise ValueError(f"{what} intensities must lie in [0, 1]")
    return pixels


@dataclass(frozen=True)
class Image:
    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixels", _freeze(_validate_pixels(np.asarray(self.pixels), "image")))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3


@dataclass(frozen=True)
class Patch:
    pixels: np.ndarray

    def __post_init__(self):
        px = _validate_pixels(np.asarray(self.pixels), "patch")
        if px.shape[0] != px.shape[1]:
            raise ValueError(f"patch must be square, got {px.shape}")
        object.__setattr__(self, "pixels", _freeze(px))

    @property
    def side(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3


class _Scanner:
    """Tokenizer for netpbm headers and ASCII payloads ('#' starts a comment)."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def next_token(self) -> bytes | None:
        data, n = self.data, len(self.data)
        i = self.pos
        while i < n:
            c = data[i : i + 1]
            if c == b"#":
                while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                    i += 1
            elif c.isspace():
                i += 1
            else:
                break
        if i >= n:
            self.pos = i
            return None
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
            i += 1
        self.pos = i
        return data[start:i]

    def next_int(self, what: str) -> int:
        tok = self.next_token()
        if tok is None:
            raise TruncatedData(f"missing {what}")
        try:
            return int(tok)
        except ValueError as exc:
            raise ParseError(f"bad {what}: {tok!r}") from exc


def load_image(data: bytes) -> Image:
    """Decode PGM (P2/P5) or PPM (P3/P6) bytes into a unit-interval Image."""
    magic = data[:2]
    if magic in (b"P2", b"P5"):
        channels = 1
    elif magic in (b"P3", b"P6"):
        channels = 3
    else:
        raise UnsupportedFormat(f"unsupported magic {magic!r}")
    binary = magic in (b"P5", b"P6")

    scanner = _Scanner(data)
    scanner.pos = 2
    width = scanner.next_int("width")
    height = scanner.next_int("height")
    maxval = scanner.next_int("maxval")
    if width < 1 or height < 1:
        raise ParseError(f"bad dimensions {width}x{height}")
    if not 1 <= maxval <= 65535:
        raise ParseError(f"maxval {maxval} outside 1..65535")

    count = width * height * channels
    if binary:
        # a single whitespace byte separates the header from the payload
        payload = data[scanner.pos + 1 :]
        dtype = ">u2" if maxval > 255 else np.uint8
        itemsize = 2 if maxval > 255 else 1
        if len(payload) < count * itemsize:
            raise TruncatedData(
                f"payload holds {len(payload)} bytes, need {count * itemsize}"
            )
        samples = np.frombuffer(payload[: count * itemsize], dtype=dtype).astype(float)
    else:
        values = np.empty(count, dtype=float)
        for k in range(count):
            values[k] = scanner.next_int("sample")
        samples = values
    if samples.size and (samples.min() < 0 or samples.max() > maxval):
        raise ParseError("sample value outside 0..maxval")

    pixels = samples / maxval
    if channels == 3:
        pixels = pixels.reshape(height, width, 3)
    else:
        pixels = pixels.reshape(height, width)
    return Image(pixels)


def write_pgm(img: Image, maxval: int = 255, binary: bool = True) -> bytes:
    """Serialize a grayscale image as P5 (binary) or P2 (ASCII) for debug dumps."""
    if img.channels != 1:
        raise ValueError("write_pgm handles grayscale images only")
    if not 1 <= maxval <= 65535:
        raise ValueError("maxval outside 1..65535")
    quant = np.rint(img.pixels * maxval).astype(np.uint32)
    header = f"P5\n{img.width} {img.height}\n{maxval}\n" if binary else f"P2\n{img.width} {img.height}\n{maxval}\n"
    if binary:
        body = quant.astype(">u2" if maxval > 255 else np.uint8).tobytes()
        return header.encode("ascii") + body
    lines = [" ".join(str(v) for v in row) for row in quant]
    return header.encode("ascii") + ("\n".join(lines) + "\n").encode("ascii")


def to_grayscale(img: Image) -> Image:
    """BT.601 luma; grayscale input is returned unchanged."""
    if img.channels == 1:
        return img
    return Image(np.clip(img.pixels @ _GRAY_WEIGHTS, 0.0, 1.0))


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled Gaussian of radius ceil(3*sigma), renormalized to sum 1."""
    if sigma <= 0:
        return np.array([1.0])
    radius = int(np.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-(xs**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def _blur_axis(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(arr, pad, mode="edge")
    out = np.zeros_like(arr)
    length = arr.shape[axis]
    index = [slice(None)] * arr.ndim
    for t, kv in enumerate(kernel):
        index[axis] = slice(t, t + length)
        out += kv * padded[tuple(index)]
    return out


def gaussian_blur(img: Image, sigma: float) -> Image:
    """Separable Gaussian smoothing with edge-replicate borders.

    sigma = 0 returns the input unchanged.  The kernel sums to 1, so constant
    regions (and total intensity of interior impulses) are preserved.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return img
    kernel = gaussian_kernel(sigma)
    out = _blur_axis(img.pixels, kernel, axis=0)
    out = _blur_axis(out, kernel, axis=1)
    return Image(np.clip(out, 0.0, 1.0))


def downsample_half(img: Image) -> Image:
    """Point-sampled 2x decimation to floor(w/2) x floor(h/2); anti-alias by
    blurring beforehand."""
    if img.width < 2 or img.height < 2:
        raise TooSmall(f"cannot halve a {img.width}x{img.height} image")
    return Image(img.pixels[::2, ::2][: img.height // 2, : img.width // 2])


def _bilinear_grid(pixels: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample an axis-aligned grid of subpixel positions bilinearly.

    Positions must already lie within [0, size-1] on each axis.
    """
    h, w = pixels.shape[:2]
    x0 = np.clip(np.floor(xs).astype(int), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(ys).astype(int), 0, max(h - 2, 0))
    fx = np.clip(xs - x0, 0.0, 1.0)
    fy = np.clip(ys - y0, 0.0, 1.0)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)

    if pixels.ndim == 3:
        wy0 = (1 - fy)[:, None, None]
        wy1 = fy[:, None, None]
        wx0 = (1 - fx)[None, :, None]
        wx1 = fx[None, :, None]
    else:
        wy0 = (1 - fy)[:, None]
        wy1 = fy[:, None]
        wx0 = (1 - fx)[None, :]
        wx1 = fx[None, :]
    return (
        wy0 * wx0 * pixels[np.ix_(y0, x0)]
        + wy0 * wx1 * pixels[np.ix_(y0, x1)]
        + wy1 * wx0 * pixels[np.ix_(y1, x0)]
        + wy1 * wx1 * pixels[np.ix_(y1, x1)]
    )


def _grid_positions(center: float, count: int) -> np.ndarray:
    return center - (count - 1) / 2.0 + np.arange(count, dtype=float)


def extract_patch(img: Image, center: Point2, window: int, out_side: int) -> Patch:
    """Bilinearly sample a window x window square around center, resize to out_side.

    The window must lie fully inside the image; keypoints too close to a
    border are the caller's job to drop.  With out_side == window and an
    integer center this reproduces the underlying pixels exactly.
    """
    if window < 1 or out_side < 1:
        raise ValueError("window and out_side must be >= 1")
    cx, cy = float(center[0]), float(center[1])
    xs = _grid_positions(cx, window)
    ys = _grid_positions(cy, window)
    if (
        xs[0] < -_BOUNDS_EPS
        or ys[0] < -_BOUNDS_EPS
        or xs[-1] > img.width - 1 + _BOUNDS_EPS
        or ys[-1] > img.height - 1 + _BOUNDS_EPS
    ):
        raise OutOfBounds(
            f"window {window} at ({cx:.2f}, {cy:.2f}) exits {img.width}x{img.height} image"
        )
    patch = _bilinear_grid(img.pixels, np.clip(ys, 0, img.height - 1), np.clip(xs, 0, img.width - 1))
    if out_side != window:
        if out_side == 1:
            pos = np.array([(window - 1) / 2.0])
            patch = _bilinear_grid(patch, pos, pos)
        else:
            pos = np.arange(out_side, dtype=float) * (window - 1) / (out_side - 1)
            patch = _bilinear_grid(patch, pos, pos)
    return Patch(np.clip(patch, 0.0, 1.0))
