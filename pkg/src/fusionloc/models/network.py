"""Full relocalisation networks: fusion with MHSA, plain concatenation, and single-sensor baselines."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import torch
import torch.nn as nn

from ..errors import ConfigError
from .fusion import FusionConfig, FusionStack, fuse_concat
from .image_branch import ImageBranch, ImageBranchConfig
from .point_branch import PointBranch, PointBranchConfig, SetAbstractionParams
from .regression import PosePrediction, RegressionHead

MODEL_KINDS = ("fusionloc", "concat", "image", "point")


@dataclass
class ModelConfig:
    """Everything needed to rebuild a network.

    ``kind``: ``fusionloc`` (concat + MHSA stack), ``concat`` (no MHSA),
    ``image`` or ``point`` (single-sensor baselines).
    """

    kind: str = "fusionloc"
    image: ImageBranchConfig = field(default_factory=ImageBranchConfig)
    point: PointBranchConfig = field(default_factory=PointBranchConfig)
    n_heads: int = 2
    n_layers: int = 6
    norm_kind: str = "BN"
    crop_size: int = 256

    def __post_init__(self):
        if isinstance(self.image, dict):
            self.image = ImageBranchConfig(**self.image)
        if isinstance(self.point, dict):
            d = dict(self.point)
            d["sa"] = tuple(SetAbstractionParams(**p) if isinstance(p, dict) else p for p in d.get("sa", ()))
            self.point = PointBranchConfig(**d)
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"kind must be one of {MODEL_KINDS}, got {self.kind!r}")
        if self.kind == "fusionloc":
            self.fusion  # validates head divisibility and norm kind

    @property
    def fusion(self) -> FusionConfig:
        return FusionConfig(self.image.d_I, self.point.d_P, self.n_heads, self.n_layers, self.norm_kind)

    @property
    def uses_image(self) -> bool:
        return self.kind != "point"

    @property
    def uses_point(self) -> bool:
        return self.kind != "image"

    @property
    def feature_dim(self) -> int:
        return self.image.d_I * self.uses_image + self.point.d_P * self.uses_point

    def to_dict(self) -> dict:
        return asdict(self)


class FusionLocNet(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        # dropout is switched off whenever the fusion stack uses batch norm
        use_dropout = cfg.image.dropout and not (cfg.kind == "fusionloc" and cfg.norm_kind == "BN")
        self.image_branch = ImageBranch(cfg.image, use_dropout) if cfg.uses_image else None
        self.point_branch = PointBranch(cfg.point) if cfg.uses_point else None
        self.fusion = FusionStack(cfg.fusion) if cfg.kind == "fusionloc" else None
        self.head = RegressionHead(cfg.feature_dim)

    def features(self, image=None, scan=None) -> torch.Tensor:
        parts = []
        if self.image_branch is not None:
            parts.append(self.image_branch(image))
        if self.point_branch is not None:
            parts.append(self.point_branch(scan))
        f = parts[0] if len(parts) == 1 else fuse_concat(*parts)
        if self.fusion is not None:
            f = self.fusion(f)
        return f

    def forward(self, image=None, scan=None) -> PosePrediction:
        return self.head(self.features(image, scan))

    def param_groups(self, weight_decay: float):
        """Split parameters into decayed weights and undecayed normalisation affines / biases of norms."""
        decay, no_decay = [], []
        norm_types = (nn.BatchNorm1d, nn.BatchNorm2d, nn.LayerNorm)
        norm_params = {id(p) for m in self.modules() if isinstance(m, norm_types) for p in m.parameters(recurse=False)}
        for p in self.parameters():
            (no_decay if id(p) in norm_params else decay).append(p)
        return [
            {"params": decay, "weight_decay": weight_decay},
            {"params": no_decay, "weight_decay": 0.0},
        ]
