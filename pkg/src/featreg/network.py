"""Config-driven CNN forward-pass engine: conv / relu / maxpool / fc.

Conventions, fixed and relied on by the weights exporter:
  - conv is cross-correlation (no kernel flip) plus bias;
  - activations are (h, w, c) arrays; flattening for fc layers is row-major
    by (row, column, channel);
  - weights blob = float32 little-endian, layers in config order, weight
    tensor then bias per conv/fc layer; conv weights laid out
    [out][in][kh][kw] row-major, fc weights [out][in];
  - storage is float32, dot products accumulate in float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ParseError, ShapeMismatch, WeightSizeMismatch

_KINDS = ("conv", "relu", "maxpool", "fc")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    name: str
    in_channels: int = 0
    out_channels: int = 0
    kernel: int = 0
    stride: int = 1
    pad: int = 0
    in_features: int = 0
    out_features: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if not self.name:
            raise ValueError("layer name must be non-empty")
        if self.kind == "conv":
            if min(self.in_channels, self.out_channels, self.kernel, self.stride) < 1:
                raise ValueError(f"conv {self.name}: dimensions must be positive")
            if self.pad < 0:
                raise ValueError(f"conv {self.name}: pad must be >= 0")
        elif self.kind == "maxpool":
            if min(self.kernel, self.stride) < 1:
                raise ValueError(f"maxpool {self.name}: dimensions must be positive")
        elif self.kind == "fc":
            if min(self.in_features, self.out_features) < 1:
                raise ValueError(f"fc {self.name}: dimensions must be positive")


def conv(name: str, in_channels: int, out_channels: int, kernel: int, stride: int = 1, pad: int = 0) -> LayerSpec:
    return LayerSpec("conv", name, in_channels=in_channels, out_channels=out_channels,
                     kernel=kernel, stride=stride, pad=pad)


def relu(name: str) -> LayerSpec:
    return LayerSpec("relu", name)


def maxpool(name: str, kernel: int, stride: int) -> LayerSpec:
    return LayerSpec("maxpool", name, kernel=kernel, stride=stride)


def fc(name: str, in_features: int, out_features: int) -> LayerSpec:
    return LayerSpec("fc", name, in_features=in_features, out_features=out_features)


@dataclass(frozen=True)
class NetworkConfig:
    input_side: int
    input_channels: int
    layers: tuple[LayerSpec, ...]
    tap: str

    def __post_init__(self):
        if self.input_side < 1 or self.input_channels < 1:
            raise ValueError("input dimensions must be positive")
        names = [layer.name for layer in self.layers]
        if len(set(names)) != len(names):
            raise ValueError("layer names must be unique")
        if self.tap not in names:
            raise ValueError(f"tap {self.tap!r} names no layer")
        object.__setattr__(self, "layers", tuple(self.layers))


Shape = tuple[int, ...]  # (side, side, channels) spatial, (n,) after fc


def validate_network(cfg: NetworkConfig) -> list[tuple[str, Shape]]:
    """Propagate shapes through the layer chain; the full (name, shape) trace."""
    trace: list[tuple[str, Shape]] = []
    side = cfg.input_side
    channels = cfg.input_channels
    flat: int | None = None  # set once an fc collapses spatial structure

    for layer in cfg.layers:
        if layer.kind == "conv":
            if flat is not None:
                raise ShapeMismatch(f"{layer.name}: conv after a fully connected layer")
            if layer.in_channels != channels:
                raise ShapeMismatch(
                    f"{layer.name}: expects {layer.in_channels} channels, input has {channels}"
                )
            padded = side + 2 * layer.pad
            if layer.kernel > padded:
                raise ShapeMismatch(f"{layer.name}: kernel {layer.kernel} exceeds input {padded}")
            side = (padded - layer.kernel) // layer.stride + 1
            channels = layer.out_channels
            trace.append((layer.name, (side, side, channels)))
        elif layer.kind == "relu":
            trace.append((layer.name, (flat,) if flat is not None else (side, side, channels)))
        elif layer.kind == "maxpool":
            if flat is not None:
                raise ShapeMismatch(f"{layer.name}: maxpool after a fully connected layer")
            if layer.kernel > side:
                raise ShapeMismatch(f"{layer.name}: kernel {layer.kernel} exceeds input {side}")
            side = (side - layer.kernel) // layer.stride + 1
            trace.append((layer.name, (side, side, channels)))
        else:  # fc
            available = flat if flat is not None else side * side * channels
            if layer.in_features != available:
                raise ShapeMismatch(
                    f"{layer.name}: expects {layer.in_features} inputs, previous layer yields {available}"
                )
            flat = layer.out_features
            trace.append((layer.name, (flat,)))
    return trace


def layer_weight_sizes(cfg: NetworkConfig) -> list[tuple[str, int, int]]:
    """(name, weight count, bias count) for each parameterized layer, in order."""
    sizes = []
    for layer in cfg.layers:
        if layer.kind == "conv":
            sizes.append(
                (layer.name, layer.out_channels * layer.in_channels * layer.kernel**2, layer.out_channels)
            )
        elif layer.kind == "fc":
            sizes.append((layer.name, layer.out_features * layer.in_features, layer.out_features))
    return sizes


def blob_length(cfg: NetworkConfig) -> int:
    """Exact byte length of a weights blob for this config."""
    return 4 * sum(w + b for _, w, b in layer_weight_sizes(cfg))


def load_weights(cfg: NetworkConfig, blob: bytes) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Slice a raw blob into per-layer (weight, bias) float32 arrays."""
    expected = blob_length(cfg)
    if len(blob) != expected:
        raise WeightSizeMismatch(f"blob holds {len(blob)} bytes, config implies {expected}")
    flat = np.frombuffer(blob, dtype="<f4")
    params: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    pos = 0
    for layer in cfg.layers:
        if layer.kind == "conv":
            wn = layer.out_channels * layer.in_channels * layer.kernel**2
            w = flat[pos : pos + wn].reshape(
                layer.out_channels, layer.in_channels, layer.kernel, layer.kernel
            )
            pos += wn
            b = flat[pos : pos + layer.out_channels]
            pos += layer.out_channels
            params[layer.name] = (w, b)
        elif layer.kind == "fc":
            wn = layer.out_features * layer.in_features
            w = flat[pos : pos + wn].reshape(layer.out_features, layer.in_features)
            pos += wn
            b = flat[pos : pos + layer.out_features]
            pos += layer.out_features
            params[layer.name] = (w, b)
    return params


def pack_weights(cfg: NetworkConfig, params: dict[str, tuple[np.ndarray, np.ndarray]]) -> bytes:
    """Inverse of load_weights; used by tests and synthetic fixtures."""
    chunks = []
    for name, wn, bn in layer_weight_sizes(cfg):
        w, b = params[name]
        w = np.asarray(w, dtype="<f4").reshape(-1)
        b = np.asarray(b, dtype="<f4").reshape(-1)
        if w.size != wn or b.size != bn:
            raise WeightSizeMismatch(f"{name}: got {w.size}+{b.size} values, need {wn}+{bn}")
        chunks.append(w.tobytes())
        chunks.append(b.tobytes())
    return b"".join(chunks)


def _conv_forward(x: np.ndarray, layer: LayerSpec, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    k, s, p = layer.kernel, layer.stride, layer.pad
    if p:
        x = np.pad(x, ((p, p), (p, p), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(0, 1))
    windows = windows[::s, ::s]  # (oh, ow, c, k, k)
    oh, ow = windows.shape[:2]
    cols = windows.reshape(oh * ow, -1).astype(np.float64)  # (positions, c*k*k)
    wmat = w.reshape(layer.out_channels, -1).astype(np.float64)  # (out, in*k*k) same ordering
    out = cols @ wmat.T + b.astype(np.float64)
    return out.reshape(oh, ow, layer.out_channels).astype(np.float32)


def _maxpool_forward(x: np.ndarray, layer: LayerSpec) -> np.ndarray:
    k, s = layer.kernel, layer.stride
    windows = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(0, 1))
    return windows[::s, ::s].max(axis=(-2, -1))


def cnn_forward(cfg: NetworkConfig, weights, x: np.ndarray) -> np.ndarray:
    """Run the network on one (side, side, channels) input; activations at
    cfg.tap, flattened row-major by (row, column, channel), as float32.

    ``weights`` may be the raw blob bytes or a dict from load_weights.
    """
    validate_network(cfg)
    params = load_weights(cfg, weights) if isinstance(weights, (bytes, bytearray)) else weights

    x = np.asarray(x, dtype=np.float32)
    if x.ndim == 2:
        x = x[:, :, None]
    expected = (cfg.input_side, cfg.input_side, cfg.input_channels)
    if x.shape != expected:
        raise ShapeMismatch(f"input shape {x.shape} != configured {expected}")

    for layer in cfg.layers:
        if layer.kind == "conv":
            if x.ndim != 3 or x.shape[2] != layer.in_channels:
                raise ShapeMismatch(f"{layer.name}: bad input shape {x.shape}")
            w, b = params[layer.name]
            x = _conv_forward(x, layer, w, b)
        elif layer.kind == "relu":
            x = np.maximum(x, np.float32(0.0))
        elif layer.kind == "maxpool":
            if x.ndim != 3:
                raise ShapeMismatch(f"{layer.name}: maxpool needs a spatial input")
            x = _maxpool_forward(x, layer)
        else:  # fc
            flat = x.reshape(-1)  # (row, column, channel) order for spatial inputs
            if flat.size != layer.in_features:
                raise ShapeMismatch(
                    f"{layer.name}: expects {layer.in_features} inputs, got {flat.size}"
                )
            w, b = params[layer.name]
            x = (w.astype(np.float64) @ flat.astype(np.float64) + b.astype(np.float64)).astype(
                np.float32
            )
        if layer.name == cfg.tap:
            return np.ascontiguousarray(x.reshape(-1), dtype=np.float32)
    raise ShapeMismatch(f"tap {cfg.tap!r} never reached")  # unreachable per config validation


# --- network config wire format ----------------------------------------------
#
#   input <side> <channels>
#   tap <layer-name>
#   conv <name> <in> <out> <kernel> <stride> <pad>
#   relu <name>
#   maxpool <name> <kernel> <stride>
#   fc <name> <in> <out>
#
# One directive per line; '#' starts a comment; layer order is significant.

def parse_network_config(text: str) -> NetworkConfig:
    input_side = input_channels = None
    tap = None
    layers: list[LayerSpec] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind, args = parts[0], parts[1:]
        try:
            if kind == "input":
                input_side, input_channels = int(args[0]), int(args[1])
            elif kind == "tap":
                (tap,) = args
            elif kind == "conv":
                layers.append(conv(args[0], int(args[1]), int(args[2]), int(args[3]),
                                   int(args[4]), int(args[5])))
            elif kind == "relu":
                (name,) = args
                layers.append(relu(name))
            elif kind == "maxpool":
                layers.append(maxpool(args[0], int(args[1]), int(args[2])))
            elif kind == "fc":
                layers.append(fc(args[0], int(args[1]), int(args[2])))
            else:
                raise ParseError(f"line {lineno}: unknown directive {kind!r}")
        except (ValueError, IndexError) as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
    if input_side is None or tap is None:
        raise ParseError("config must declare 'input' and 'tap'")
    try:
        cfg = NetworkConfig(input_side, input_channels, tuple(layers), tap)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    validate_network(cfg)
    return cfg


def bundled_config(name: str) -> NetworkConfig:
    """One of the configs shipped with the package (e.g. 'alexnet',
    'alexnet-conv2-128'), parsed and validated."""
    text = resources.files("featreg.configs").joinpath(f"{name}.netcfg").read_text()
    return parse_network_config(text)


def write_network_config(cfg: NetworkConfig) -> str:
    lines = [f"input {cfg.input_side} {cfg.input_channels}", f"tap {cfg.tap}"]
    for layer in cfg.layers:
        if layer.kind == "conv":
            lines.append(
                f"conv {layer.name} {layer.in_channels} {layer.out_channels} "
                f"{layer.kernel} {layer.stride} {layer.pad}"
            )
        elif layer.kind == "relu":
            lines.append(f"relu {layer.name}")
        elif layer.kind == "maxpool":
            lines.append(f"maxpool {layer.name} {layer.kernel} {layer.stride}")
        else:
            lines.append(f"fc {layer.name} {layer.in_features} {layer.out_features}")
    return "\n".join(lines) + "\n"
