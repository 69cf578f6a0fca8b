"""Image feature extractor: residual CNN trunk, affine projection, vector self-attention."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from ..errors import ConfigError
from .attention import VectorSelfAttention

FEATURE_DIMS = (256, 512, 1024, 2048)
RESNET34_LAYERS = (3, 4, 6, 3)
RESNET34_WIDTHS = (64, 128, 256, 512)


@dataclass
class ImageBranchConfig:
    d_I: int = 256
    layers: tuple[int, ...] = RESNET34_LAYERS
    widths: tuple[int, ...] = RESNET34_WIDTHS
    pretrained: str | None = None
    dropout_p: float = 0.5
    dropout: bool = True
    strict_dims: bool = True

    def __post_init__(self):
        self.layers = tuple(int(v) for v in self.layers)
        self.widths = tuple(int(v) for v in self.widths)
        if self.strict_dims and self.d_I not in FEATURE_DIMS:
            raise ConfigError(f"d_I must be one of {FEATURE_DIMS}, got {self.d_I}")
        if self.d_I < 1:
            raise ConfigError("d_I must be positive")
        if len(self.layers) != len(self.widths) or not self.layers:
            raise ConfigError("layers and widths must be non-empty and of equal length")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError("dropout_p must be in [0, 1)")


class BasicBlock(nn.Module):
    expansion = 1

    def __init__(self, in_planes, planes, stride=1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_planes, planes, 3, stride, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(planes)
        self.relu = nn.ReLU(inplace=True)
        self.conv2 = nn.Conv2d(planes, planes, 3, 1, 1, bias=False)
        self.bn2 = nn.BatchNorm2d(planes)
        self.downsample = None
        if stride != 1 or in_planes != planes:
            self.downsample = nn.Sequential(
                nn.Conv2d(in_planes, planes, 1, stride, bias=False),
                nn.BatchNorm2d(planes),
            )

    def forward(self, x):
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


class ResNetTrunk(nn.Module):
    """Residual conv stack with global average pooling.

    With the default ``layers``/``widths`` this is the 34-layer topology;
    parameter names follow the common ``conv1``/``bn1``/``layerN.M`` scheme so
    exported weights load by name.
    """

    def __init__(self, layers=RESNET34_LAYERS, widths=RESNET34_WIDTHS):
        super().__init__()
        self.conv1 = nn.Conv2d(3, widths[0], 7, 2, 3, bias=False)
        self.bn1 = nn.BatchNorm2d(widths[0])
        self.relu = nn.ReLU(inplace=True)
        self.maxpool = nn.MaxPool2d(3, 2, 1)
        in_planes = widths[0]
        for i, (n_blocks, planes) in enumerate(zip(layers, widths)):
            stride = 1 if i == 0 else 2
            blocks = []
            for b in range(n_blocks):
                blocks.append(BasicBlock(in_planes, planes, stride if b == 0 else 1))
                in_planes = planes
            setattr(self, f"layer{i + 1}", nn.Sequential(*blocks))
        self.n_stages = len(layers)
        self.out_channels = in_planes
        self.avgpool = nn.AdaptiveAvgPool2d(1)
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, mode="fan_out", nonlinearity="relu")
            elif isinstance(m, nn.BatchNorm2d):
                nn.init.ones_(m.weight)
                nn.init.zeros_(m.bias)

    def forward(self, x):
        x = self.maxpool(self.relu(self.bn1(self.conv1(x))))
        for i in range(self.n_stages):
            x = getattr(self, f"layer{i + 1}")(x)
        return torch.flatten(self.avgpool(x), 1)


def load_named_arrays(module: nn.Module, path) -> list[str]:
    """Copy arrays from an ``.npz`` archive into ``module`` by parameter path.

    Keys absent from the module are ignored; returns the list of loaded keys.
    """
    state = module.state_dict()
    loaded = []
    with np.load(Path(path)) as arch:
        for key in arch.files:
            if key in state:
                arr = torch.from_numpy(arch[key])
                if arr.shape != state[key].shape:
                    raise ConfigError(f"{key}: shape {tuple(arr.shape)} != {tuple(state[key].shape)}")
                state[key] = arr.to(state[key].dtype)
                loaded.append(key)
    module.load_state_dict(state)
    return loaded


class ImageBranch(nn.Module):
    """image (B, 3, S, S) -> f_I (B, d_I)."""

    def __init__(self, cfg: ImageBranchConfig, use_dropout: bool | None = None):
        super().__init__()
        self.cfg = cfg
        self.backbone = ResNetTrunk(cfg.layers, cfg.widths)
        if cfg.pretrained:
            load_named_arrays(self.backbone, cfg.pretrained)
        self.fc = nn.Linear(self.backbone.out_channels, cfg.d_I)
        enabled = cfg.dropout if use_dropout is None else use_dropout
        self.dropout = nn.Dropout(cfg.dropout_p) if enabled and cfg.dropout_p > 0 else nn.Identity()
        self.attention = VectorSelfAttention(cfg.d_I)

    def forward(self, image, return_weights=False):
        f = self.dropout(self.fc(self.backbone(image)))
        return self.attention(f, return_weights=return_weights)
