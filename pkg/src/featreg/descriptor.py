"""Keypoints -> fixed-length descriptor vectors.

Three interchangeable backends: mean-centred unit-norm raw patches (the
zero-asset default), the config-driven CNN engine, and descriptor-file
import.  Patch windows scale with keypoint sigma so descriptors stay
scale-covariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detector import Keypoint
from .errors import OutOfBounds, ParseError
from .imaging import Image, Patch, extract_patch, to_grayscale
from .network import NetworkConfig, cnn_forward, load_weights, validate_network

_ZERO_NORM_EPS = 1e-12
_UNIT_TOL = 1e-6

_GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass
class DescriptorSet:
    keypoints: list[Keypoint]
    vectors: np.ndarray  # (n, d) float32
    normalized: bool
    dropped: int = 0  # keypoints lost to window bounds or zero vectors

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise ValueError(f"vectors must be 2-D, got shape {self.vectors.shape}")
        if self.vectors.shape[0] != len(self.keypoints):
            raise ValueError(
                f"{self.vectors.shape[0]} rows vs {len(self.keypoints)} keypoints"
            )
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("descriptor entries must be finite")
        if self.normalized and len(self.keypoints):
            norms = np.linalg.norm(self.vectors.astype(np.float64), axis=1)
            if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
                raise ValueError("normalized set contains non-unit rows")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.keypoints)


def describe_patch_raw(patch: Patch) -> np.ndarray:
    """Flatten, mean-centre, L2-normalize; constant patches give the zero vector."""
    px = patch.pixels
    if px.ndim == 3:
        px = px @ _GRAY_WEIGHTS
    vec = px.reshape(-1).astype(np.float64)
    vec = vec - vec.mean()
    norm = np.linalg.norm(vec)
    if norm < _ZERO_NORM_EPS:
        return np.zeros(vec.size, dtype=np.float32)
    return (vec / norm).astype(np.float32)


@dataclass(frozen=True)
class RawPatchBackend:
    """Patch pixels themselves as the descriptor (after centring/normalizing)."""

    side: int = 32

    @property
    def input_side(self) -> int:
        return self.side

    @property
    def input_channels(self) -> int:
        return 1

    @property
    def output_dim(self) -> int:
        return self.side * self.side

    def describe(self, patch: Patch) -> np.ndarray:
        return describe_patch_raw(patch)


class CnnBackend:
    """Forward-pass activations at the config's tap layer as the descriptor."""

    def __init__(self, cfg: NetworkConfig, weights: bytes | dict):
        trace = validate_network(cfg)
        self.cfg = cfg
        self.params = load_weights(cfg, weights) if isinstance(weights, (bytes, bytearray)) else weights
        tap_shape = dict(trace)[cfg.tap]
        self._dim = int(np.prod(tap_shape))

    @property
    def input_side(self) -> int:
        return self.cfg.input_side

    @property
    def input_channels(self) -> int:
        return self.cfg.input_channels

    @property
    def output_dim(self) -> int:
        return self._dim

    def describe(self, patch: Patch) -> np.ndarray:
        return cnn_forward(self.cfg, self.params, patch.pixels.astype(np.float32))


def _match_channels(img: Image, channels: int) -> Image:
    if channels == 1:
        return to_grayscale(img)
    if img.channels == 3:
        return img
    return Image(np.repeat(img.pixels[:, :, None], 3, axis=2))


def describe_keypoints(
    img: Image,
    keypoints: list[Keypoint],
    backend,
    window: int = 64,
    normalize: bool = True,
    base_sigma: float = 1.6,
) -> DescriptorSet:
    """Describe each keypoint from a sigma-scaled window around it.

    The sampling window is window * (kp.sigma / base_sigma) pixels, rounded
    to the nearest integer (min 1), then resized to the backend's input
    side.  Keypoints whose window leaves the image are dropped; with
    normalize, zero-vector rows are dropped too.  Survivor order follows
    input order, and len(result) + result.dropped == len(keypoints).
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    src = _match_channels(img, backend.input_channels)
    kept: list[Keypoint] = []
    rows: list[np.ndarray] = []
    dropped = 0
    for kp in keypoints:
        eff_window = max(1, int(round(window * kp.sigma / base_sigma)))
        try:
            patch = extract_patch(src, (kp.x, kp.y), eff_window, backend.input_side)
        except OutOfBounds:
            dropped += 1
            continue
        rows.append(np.asarray(backend.describe(patch), dtype=np.float32))
        kept.append(kp)

    vectors = np.stack(rows) if rows else np.zeros((0, backend.output_dim), dtype=np.float32)
    if normalize and len(kept):
        norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
        keep = norms >= _ZERO_NORM_EPS
        dropped += int((~keep).sum())
        kept = [kp for kp, ok in zip(kept, keep) if ok]
        vectors = (vectors[keep].astype(np.float64) / norms[keep, None]).astype(np.float32)
    return DescriptorSet(kept, vectors, normalized=normalize, dropped=dropped)


# --- KPD1 descriptor file format -----------------------------------------------
#
#   KPD1\n
#   <n> <dim>\n
#   x y sigma octave response v1 ... vdim      (one line per keypoint)
#
# All reals printed with 9 significant digits, which round-trips float32.

_MAGIC = b"KPD1\n"


def write_descriptors(ds: DescriptorSet) -> bytes:
    out = [f"{len(ds)} {ds.dim}"]
    for kp, row in zip(ds.keypoints, ds.vectors):
        head = f"{kp.x:.9g} {kp.y:.9g} {kp.sigma:.9g} {kp.octave} {kp.response:.9g}"
        out.append(head + "".join(f" {v:.9g}" for v in row.tolist()))
    return _MAGIC + ("\n".join(out) + "\n").encode("ascii")


def read_descriptors(data: bytes) -> DescriptorSet:
    if not data.startswith(_MAGIC):
        raise ParseError("missing KPD1 magic")
    text = data[len(_MAGIC):].decode("ascii", errors="strict")
    lines = text.splitlines()
    if not lines:
        raise ParseError("missing KPD1 header line")
    header = lines[0].split()
    if len(header) != 2:
        raise ParseError(f"bad KPD1 header {lines[0]!r}")
    try:
        n, dim = int(header[0]), int(header[1])
    except ValueError as exc:
        raise ParseError(f"bad KPD1 header {lines[0]!r}") from exc
    if n < 0 or dim < 0:
        raise ParseError("negative KPD1 counts")
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != n:
        raise ParseError(f"expected {n} descriptor lines, found {len(body)}")

    keypoints: list[Keypoint] = []
    vectors = np.zeros((n, dim), dtype=np.float32)
    for i, line in enumerate(body):
        parts = line.split()
        if len(parts) != 5 + dim:
            raise ParseError(f"row {i}: expected {5 + dim} fields, got {len(parts)}")
        try:
            keypoints.append(
                Keypoint(float(parts[0]), float(parts[1]), float(parts[2]),
                         int(parts[3]), float(parts[4]))
            )
            vectors[i] = np.array(parts[5:], dtype=np.float32)
        except ValueError as exc:
            raise ParseError(f"row {i}: {exc}") from exc
    if n:
        norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
        normalized = bool(np.all(np.abs(norms - 1.0) <= _UNIT_TOL))
    else:
        normalized = False
    return DescriptorSet(keypoints, vectors, normalized=normalized)
