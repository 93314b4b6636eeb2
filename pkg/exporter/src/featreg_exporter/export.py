"""Mapping torch modules onto the toolkit's layer vocabulary and emitting
its config / weights-blob / KPD1 formats.

The crucial permutation: torch flattens activations channel-major (c, y, x)
before a Linear layer, while the target engine flattens row-major
(y, x, c).  The first fc after a spatial layer therefore gets its weight
columns reordered; the manifest records every such rewrite.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import LayoutMismatch
from .models import SourceModel, build_model
from .patches import extract_patch, match_channels, read_keypoints, scaled_window


def _square(value, what: str, layer: str) -> int:
    if isinstance(value, (tuple, list)):
        if value[0] != value[1]:
            raise LayoutMismatch(f"{layer}: non-square {what} {value}")
        return int(value[0])
    return int(value)


@dataclass
class MappedLayer:
    kind: str  # conv | relu | maxpool | fc
    name: str
    module: nn.Module | None
    config_line: str
    permute: np.ndarray | None = None  # fc column order, torch -> engine


@dataclass
class MappedNetwork:
    model: SourceModel
    tap: str
    layers: list[MappedLayer]
    skipped: list[str] = field(default_factory=list)
    permutations: list[str] = field(default_factory=list)

    def config_text(self) -> str:
        lines = [
            f"# exported from {self.model.name}",
            f"input {self.model.input_side} {self.model.input_channels}",
            f"tap {self.tap}",
        ]
        lines += [layer.config_line for layer in self.layers]
        return "\n".join(lines) + "\n"

    def blob_bytes(self) -> bytes:
        chunks = []
        for layer in self.layers:
            if layer.kind == "conv":
                w = layer.module.weight.detach().numpy().astype("<f4")  # [out][in][kh][kw]
                b = layer.module.bias.detach().numpy().astype("<f4")
                chunks += [w.tobytes(), b.tobytes()]
            elif layer.kind == "fc":
                w = layer.module.weight.detach().numpy().astype(np.float64)
                if layer.permute is not None:
                    w = w[:, layer.permute]
                b = layer.module.bias.detach().numpy().astype("<f4")
                chunks += [w.astype("<f4").tobytes(), b.tobytes()]
        return b"".join(chunks)


def map_network(model: SourceModel, tap: str) -> MappedNetwork:
    """Express the torch module list in the conv/relu/maxpool/fc vocabulary."""
    mapped = MappedNetwork(model, tap, [])
    side = model.input_side
    channels = model.input_channels
    flat: int | None = None
    param_idx = 0  # conv/fc counter; relu/pool names follow their block

    for module in model.modules:
        if isinstance(module, nn.Conv2d):
            if flat is not None:
                raise LayoutMismatch("conv after a linear layer")
            k = _square(module.kernel_size, "kernel", f"conv{param_idx + 1}")
            s = _square(module.stride, "stride", f"conv{param_idx + 1}")
            p = _square(module.padding, "padding", f"conv{param_idx + 1}")
            if module.groups != 1:
                raise LayoutMismatch(f"conv{param_idx + 1}: grouped convolution unsupported")
            if _square(module.dilation, "dilation", f"conv{param_idx + 1}") != 1:
                raise LayoutMismatch(f"conv{param_idx + 1}: dilation unsupported")
            if module.bias is None:
                raise LayoutMismatch(f"conv{param_idx + 1}: bias-free conv unsupported")
            param_idx += 1
            name = f"conv{param_idx}"
            line = (f"conv {name} {module.in_channels} {module.out_channels} {k} {s} {p}")
            mapped.layers.append(MappedLayer("conv", name, module, line))
            side = (side + 2 * p - k) // s + 1
            channels = module.out_channels
        elif isinstance(module, nn.ReLU):
            name = f"relu{max(param_idx, 1)}"
            mapped.layers.append(MappedLayer("relu", name, module, f"relu {name}"))
        elif isinstance(module, nn.MaxPool2d):
            k = _square(module.kernel_size, "kernel", f"pool{param_idx}")
            s = _square(module.stride, "stride", f"pool{param_idx}")
            if _square(module.padding, "padding", f"pool{param_idx}") != 0:
                raise LayoutMismatch(f"pool{param_idx}: padded maxpool unsupported")
            name = f"pool{max(param_idx, 1)}"
            mapped.layers.append(MappedLayer("maxpool", name, module, f"maxpool {name} {k} {s}"))
            side = (side - k) // s + 1
        elif isinstance(module, nn.Linear):
            if module.bias is None:
                raise LayoutMismatch("bias-free linear unsupported")
            permute = None
            if flat is None:
                expected = side * side * channels
                if module.in_features != expected:
                    raise LayoutMismatch(
                        f"linear expects {module.in_features}, spatial chain yields {expected}"
                    )
                # torch index (c, y, x) -> engine index (y, x, c)
                c_idx, y_idx, x_idx = np.meshgrid(
                    np.arange(channels), np.arange(side), np.arange(side), indexing="ij"
                )
                torch_order = (c_idx * side * side + y_idx * side + x_idx).reshape(-1)
                engine_order = (y_idx * side * channels + x_idx * channels + c_idx).reshape(-1)
                permute = np.empty(expected, dtype=np.int64)
                permute[engine_order] = torch_order
            param_idx += 1
            name = f"fc{param_idx}"
            line = f"fc {name} {module.in_features} {module.out_features}"
            mapped.layers.append(MappedLayer("fc", name, module, line, permute))
            if permute is not None:
                mapped.permutations.append(
                    f"{name}: weight columns reordered channel-major (c,y,x) -> "
                    f"row-major (y,x,c) over {channels}x{side}x{side}"
                )
            flat = module.out_features
        elif isinstance(module, nn.Dropout):
            mapped.skipped.append("dropout (inference identity)")
        elif isinstance(module, nn.AdaptiveAvgPool2d):
            out = _square(module.output_size, "output size", "adaptive-avgpool")
            if flat is not None or out != side:
                raise LayoutMismatch(
                    f"adaptive average pool to {out} is not an identity here (side {side})"
                )
            mapped.skipped.append(f"adaptive-avgpool (identity at side {side})")
        elif isinstance(module, nn.Flatten):
            mapped.skipped.append("flatten (implicit before fc)")
        elif isinstance(module, (nn.LocalResponseNorm,)):
            mapped.skipped.append("local-response-norm (dropped, not in vocabulary)")
        else:
            raise LayoutMismatch(f"unsupported module {type(module).__name__}")

    names = [layer.name for layer in mapped.layers]
    if len(set(names)) != len(names):
        raise LayoutMismatch(f"layer naming collision: {names}")
    if tap not in names:
        raise LayoutMismatch(f"tap {tap!r} not among exported layers {names}")
    return mapped


def manifest_for(mapped: MappedNetwork, blob: bytes, config_path, blob_path,
                 weights_path, seed) -> dict:
    return {
        "model": mapped.model.name,
        "tap": mapped.tap,
        "weights_source": str(weights_path) if weights_path else f"seeded-init:{seed}",
        "config_path": str(config_path),
        "blob_path": str(blob_path),
        "blob_bytes": len(blob),
        "blob_sha256": hashlib.sha256(blob).hexdigest(),
        "skipped_layers": mapped.skipped,
        "permutations": mapped.permutations,
    }


def export_weights(
    model_name: str,
    tap: str,
    out_config: str | Path,
    out_blob: str | Path,
    out_manifest: str | Path | None = None,
    weights_path: str | None = None,
    seed: int = 0,
) -> dict:
    """Write config + blob (+ manifest) for a registry model; returns the manifest."""
    model = build_model(model_name, weights_path, seed)
    mapped = map_network(model, tap)
    blob = mapped.blob_bytes()
    Path(out_config).write_text(mapped.config_text())
    Path(out_blob).write_bytes(blob)
    manifest = manifest_for(mapped, blob, out_config, out_blob, weights_path, seed)
    if out_manifest:
        Path(out_manifest).write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def run_to_tap(mapped: MappedNetwork, patch: np.ndarray) -> np.ndarray:
    """Push one (side, side, channels) patch through torch up to the tap."""
    x = torch.from_numpy(
        np.ascontiguousarray(patch, dtype=np.float32).reshape(
            mapped.model.input_side, mapped.model.input_side, -1
        )
    ).permute(2, 0, 1)[None]
    with torch.no_grad():
        for layer in mapped.layers:
            if layer.kind == "fc" and x.dim() > 2:
                x = torch.flatten(x, 1)
            x = layer.module(x)
            if layer.name == mapped.tap:
                if x.dim() > 2:  # spatial tap: emit row-major (y, x, c) order
                    x = x.permute(0, 2, 3, 1)
                return x.reshape(-1).numpy().astype(np.float32)
    raise LayoutMismatch(f"tap {mapped.tap!r} never reached")


def _format_kpd(keypoints, vectors: np.ndarray) -> bytes:
    dim = vectors.shape[1] if vectors.size else (vectors.shape[1] if vectors.ndim == 2 else 0)
    out = [f"{len(keypoints)} {dim}"]
    for (x, y, sigma, octave, response), row in zip(keypoints, vectors):
        head = f"{x:.9g} {y:.9g} {sigma:.9g} {octave} {response:.9g}"
        out.append(head + "".join(f" {v:.9g}" for v in row.tolist()))
    return b"KPD1\n" + ("\n".join(out) + "\n").encode("ascii")


def export_descriptors(
    model_name: str,
    tap: str,
    images_dir: str | Path,
    keypoints_dir: str | Path,
    out_dir: str | Path,
    window: int = 64,
    base_sigma: float = 1.6,
    weights_path: str | None = None,
    seed: int = 0,
) -> list[Path]:
    """KPD1 files for every image in images_dir with a matching keypoint dump.

    For images/<name>.(pgm|ppm), the dump is keypoints/<name>.txt and the
    output out/<name>.kpd.  Keypoints whose sigma-scaled window leaves the
    image are dropped, matching the primary pipeline.
    """
    from .pnm import read_image

    torch.set_num_threads(1)  # keep forward passes reproducible
    model = build_model(model_name, weights_path, seed)
    mapped = map_network(model, tap)
    tap_dim = None

    images_dir, keypoints_dir, out_dir = Path(images_dir), Path(keypoints_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for image_path in sorted(images_dir.iterdir()):
        if image_path.suffix.lower() not in (".pgm", ".ppm"):
            continue
        dump = keypoints_dir / f"{image_path.stem}.txt"
        if not dump.exists():
            continue
        pixels = match_channels(read_image(image_path.read_bytes()), model.input_channels)
        keypoints = read_keypoints(dump.read_text())
        kept, rows = [], []
        for kp in keypoints:
            x, y, sigma, _, _ = kp
            eff = scaled_window(window, sigma, base_sigma)
            patch = extract_patch(pixels, x, y, eff, model.input_side)
            if patch is None:
                continue
            rows.append(run_to_tap(mapped, patch))
            kept.append(kp)
        if tap_dim is None:
            probe = np.zeros((model.input_side, model.input_side, model.input_channels))
            tap_dim = run_to_tap(mapped, probe).size
        vectors = np.stack(rows) if rows else np.zeros((0, tap_dim), np.float32)
        target = out_dir / f"{image_path.stem}.kpd"
        target.write_bytes(_format_kpd(kept, vectors))
        written.append(target)
    return written
