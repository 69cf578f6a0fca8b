"""Concatenation fusion followed by a stack of pre-norm multi-head self-attention blocks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn

from ..errors import ConfigError
from .attention import multi_head_attention

HEAD_COUNTS = (1, 2, 4, 8)
LAYER_COUNTS = (1, 2, 4, 6)
NORM_KINDS = ("BN", "LN")


@dataclass
class FusionConfig:
    d_I: int = 256
    d_P: int = 256
    n_heads: int = 2
    n_layers: int = 6
    norm_kind: str = "BN"

    def __post_init__(self):
        self.norm_kind = str(self.norm_kind).upper()
        if self.norm_kind not in NORM_KINDS:
            raise ConfigError(f"norm_kind must be one of {NORM_KINDS}, got {self.norm_kind!r}")
        if self.n_heads < 1 or self.n_layers < 1:
            raise ConfigError("n_heads and n_layers must be >= 1")
        if self.dim % self.n_heads:
            raise ConfigError(f"d_I + d_P = {self.dim} is not divisible by {self.n_heads} heads")

    @property
    def dim(self) -> int:
        return self.d_I + self.d_P


def fuse_concat(f_I: torch.Tensor, f_P: torch.Tensor) -> torch.Tensor:
    """Image-first concatenation along the feature axis."""
    return torch.cat([f_I, f_P], dim=-1)


class MhsaBlock(nn.Module):
    """``f + W_p [head_1, ..., head_H]`` computed on ``norm(f)``. No positional encoding."""

    def __init__(self, dim: int, n_heads: int, norm_kind: str = "BN", device=None):
        super().__init__()
        if dim % n_heads:
            raise ConfigError(f"dim {dim} not divisible by {n_heads} heads")
        self.dim, self.n_heads, self.norm_kind = dim, n_heads, norm_kind
        d_head = dim // n_heads
        self.norm = nn.BatchNorm1d(dim, device=device) if norm_kind == "BN" else nn.LayerNorm(dim, device=device)
        self.w_q = nn.Parameter(torch.empty(n_heads, d_head, d_head, device=device))
        self.w_k = nn.Parameter(torch.empty(n_heads, d_head, d_head, device=device))
        self.w_v = nn.Parameter(torch.empty(n_heads, d_head, d_head, device=device))
        self.w_p = nn.Parameter(torch.empty(dim, dim, device=device))
        self.reset_parameters()

    def reset_parameters(self):
        head_bound = 1.0 / math.sqrt(self.dim // self.n_heads)
        for w in (self.w_q, self.w_k, self.w_v):
            nn.init.uniform_(w, -head_bound, head_bound)
        nn.init.uniform_(self.w_p, -1.0 / math.sqrt(self.dim), 1.0 / math.sqrt(self.dim))

    def forward(self, f, return_weights=False):
        if self.norm_kind == "BN" and self.training and f.shape[0] < 2:
            raise ConfigError("batch normalisation in training mode needs a batch of at least 2")
        g = self.norm(f)
        out, weights = multi_head_attention(g, self.w_q, self.w_k, self.w_v, self.w_p, return_weights=True)
        out = out + f
        return (out, weights) if return_weights else out


class FusionStack(nn.Module):
    """``n_layers`` independent blocks of identical shape, applied in sequence."""

    def __init__(self, cfg: FusionConfig, device=None):
        super().__init__()
        self.cfg = cfg
        self.blocks = nn.ModuleList(
            MhsaBlock(cfg.dim, cfg.n_heads, cfg.norm_kind, device=device) for _ in range(cfg.n_layers)
        )

    def forward(self, f, return_weights=False):
        weights = []
        for block in self.blocks:
            f, w = block(f, return_weights=True)
            weights.append(w)
        return (f, weights) if return_weights else f
