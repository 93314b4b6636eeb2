"""Source model registry.

Models are torch modules in plain execution order.  `alexnet` is the
torchvision topology (input 224x224x3, fc6/fc7 descriptors); `tinynet` is a
small 16x16 single-channel network used for cross-engine parity fixtures.
Weights come from a local state-dict file when given, otherwise from a
seeded random initialization (there is no downloading here).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from . import UnknownModel


@dataclass
class SourceModel:
    name: str
    input_side: int
    input_channels: int
    modules: list[nn.Module]  # execution order


def _tinynet() -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(1, 4, 3, stride=1, padding=1),
        nn.ReLU(),
        nn.MaxPool2d(2, 2),
        nn.Conv2d(4, 8, 3, stride=1, padding=0),
        nn.ReLU(),
        nn.Linear(8 * 6 * 6, 32),
        nn.ReLU(),
        nn.Linear(32, 16),
    )


def build_model(name: str, weights_path: str | None = None, seed: int = 0) -> SourceModel:
    torch.manual_seed(seed)
    if name == "alexnet":
        from torchvision.models import alexnet

        net = alexnet(weights=None)
        modules = list(net.features) + [net.avgpool] + list(net.classifier)
        model = SourceModel(name, 224, 3, modules)
        root: nn.Module = net
    elif name == "tinynet":
        net = _tinynet()
        model = SourceModel(name, 16, 1, list(net))
        root = net
    else:
        raise UnknownModel(f"no model named {name!r} (known: alexnet, tinynet)")
    if weights_path:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        root.load_state_dict(state)
    root.eval()
    return model
