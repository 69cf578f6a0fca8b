"""Point-cloud feature extractor for 2D scans.

Set abstraction (farthest point sampling, ball query grouping, shared MLP,
max-pool) three times, a sigmoid-gated self-attention over the resulting
feature matrix, and a group-all layer pooling everything into one vector.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from ..errors import ConfigError
from .image_branch import FEATURE_DIMS


@dataclass(frozen=True)
class SetAbstractionParams:
    point_num: int
    radius: float
    sample_num: int
    mlp_widths: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "mlp_widths", tuple(int(w) for w in self.mlp_widths))
        if self.point_num < 1 or self.sample_num < 1:
            raise ConfigError("point_num and sample_num must be >= 1")
        if self.radius <= 0:
            raise ConfigError("radius must be > 0")
        if not self.mlp_widths:
            raise ConfigError("mlp_widths must be non-empty")


DEFAULT_SA = (
    SetAbstractionParams(256, 0.2, 32, (16, 16, 32)),
    SetAbstractionParams(128, 0.4, 16, (32, 32, 64)),
    SetAbstractionParams(64, 0.8, 8, (64, 64, 64)),
)


@dataclass
class PointBranchConfig:
    d_P: int = 256
    sa: tuple[SetAbstractionParams, ...] = DEFAULT_SA
    n_points: int = 1024
    batch_norm: bool = True
    strict_dims: bool = True

    def __post_init__(self):
        self.sa = tuple(p if isinstance(p, SetAbstractionParams) else SetAbstractionParams(*p) for p in self.sa)
        if self.strict_dims and self.d_P not in FEATURE_DIMS:
            raise ConfigError(f"d_P must be one of {FEATURE_DIMS}, got {self.d_P}")
        n = self.n_points
        for p in self.sa:
            if p.point_num > n:
                raise ConfigError(f"set abstraction wants {p.point_num} centres from {n} points")
            n = p.point_num


def square_distance(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """(..., N, 2), (..., M, 2) -> (..., N, M) squared Euclidean distances."""
    diff = a.unsqueeze(-2) - b.unsqueeze(-3)
    return (diff * diff).sum(-1)


def farthest_point_sample(points: torch.Tensor, m: int, start=0) -> torch.Tensor:
    """Greedy max-min sampling of ``m`` indices.

    points: (N, 2) or (B, N, 2); start: int or (B,) tensor. The first index
    is ``start``; each next index maximises the distance to the nearest
    already-chosen point, ties going to the lowest index.
    """
    squeeze = points.dim() == 2
    pts = points.unsqueeze(0) if squeeze else points
    b, n, _ = pts.shape
    if m > n:
        raise ValueError(f"cannot sample {m} points from {n}")
    if m < 1:
        raise ValueError("m must be >= 1")
    with torch.no_grad():
        idx = torch.empty(b, m, dtype=torch.long, device=pts.device)
        cur = torch.as_tensor(start, dtype=torch.long, device=pts.device).expand(b).clone()
        if (cur < 0).any() or (cur >= n).any():
            raise ValueError(f"start index out of range for {n} points")
        min_d = torch.full((b, n), float("inf"), dtype=pts.dtype, device=pts.device)
        rows = torch.arange(b, device=pts.device)
        for i in range(m):
            idx[:, i] = cur
            d = ((pts - pts[rows, cur].unsqueeze(1)) ** 2).sum(-1)
            min_d = torch.minimum(min_d, d)
            cur = torch.argmax(min_d, dim=-1)  # first maximum wins ties
    return idx[0] if squeeze else idx


def ball_query(points: torch.Tensor, centers: torch.Tensor, radius: float, k: int) -> torch.Tensor:
    """Group up to ``k`` neighbour indices per centre.

    Takes the first ``k`` points in index order within ``radius``; short
    groups are padded with their first member; a centre with no neighbour
    gets its nearest point repeated ``k`` times.
    """
    squeeze = points.dim() == 2
    pts = points.unsqueeze(0) if squeeze else points
    ctr = centers.unsqueeze(0) if squeeze else centers
    with torch.no_grad():
        n = pts.shape[1]
        d = square_distance(ctr, pts)  # (B, M, N)
        inside = d <= radius * radius
        order = torch.arange(n, device=pts.device).expand_as(d)
        keyed = torch.where(inside, order, torch.full_like(order, n))
        first_k = keyed.sort(dim=-1).values[..., :k]
        if first_k.shape[-1] < k:
            pad = torch.full((*first_k.shape[:-1], k - first_k.shape[-1]), n, dtype=first_k.dtype, device=pts.device)
            first_k = torch.cat([first_k, pad], dim=-1)
        nearest = d.argmin(dim=-1, keepdim=True)
        head = torch.where(first_k[..., :1] == n, nearest, first_k[..., :1])
        idx = torch.where(first_k == n, head.expand_as(first_k), first_k)
    return idx[0] if squeeze else idx


def gather_points(x: torch.Tensor, idx: torch.Tensor) -> torch.Tensor:
    """x: (B, N, C); idx: (B, ...) -> (B, ..., C)."""
    b = x.shape[0]
    flat = idx.reshape(b, -1)
    out = torch.gather(x, 1, flat.unsqueeze(-1).expand(-1, -1, x.shape[-1]))
    return out.reshape(*idx.shape, x.shape[-1])


def _mlp(widths, in_ch, batch_norm, dim=2):
    conv = nn.Conv2d if dim == 2 else nn.Conv1d
    bn = nn.BatchNorm2d if dim == 2 else nn.BatchNorm1d
    layers = []
    for w in widths:
        layers.append(conv(in_ch, w, 1))
        if batch_norm:
            layers.append(bn(w))
        layers.append(nn.ReLU())
        in_ch = w
    return nn.Sequential(*layers)


class SetAbstraction(nn.Module):
    def __init__(self, params: SetAbstractionParams, in_features: int, batch_norm: bool = True):
        super().__init__()
        self.params = params
        self.in_features = in_features
        self.mlp = _mlp(params.mlp_widths, in_features + 2, batch_norm)
        self.out_features = params.mlp_widths[-1]

    def forward(self, xyz, features=None, start=0):
        """xyz: (B, N, 2); features: (B, N, C) or None -> centres (B, M, 2), features (B, M, C_out)."""
        p = self.params
        centers_idx = farthest_point_sample(xyz, p.point_num, start)
        centers = gather_points(xyz, centers_idx)
        group_idx = ball_query(xyz, centers, p.radius, p.sample_num)
        grouped = gather_points(xyz, group_idx) - centers.unsqueeze(2)  # (B, M, K, 2)
        if features is not None:
            grouped = torch.cat([grouped, gather_points(features, group_idx)], dim=-1)
        out = self.mlp(grouped.permute(0, 3, 1, 2))  # (B, C, M, K)
        return centers, out.max(dim=-1).values.transpose(1, 2)


class PointSelfAttention(nn.Module):
    """``F * sigmoid(MLP(F))`` with a shared C -> C/2 -> C per-point MLP."""

    def __init__(self, channels: int):
        super().__init__()
        hidden = max(1, channels // 2)
        self.fc1 = nn.Linear(channels, hidden)
        self.fc2 = nn.Linear(hidden, channels)

    def gate(self, f):
        return torch.sigmoid(self.fc2(torch.relu(self.fc1(f))))

    def forward(self, f):
        return f * self.gate(f).expand_as(f)


class GroupAll(nn.Module):
    """Shared per-point MLP to ``d_P`` channels, then max over points."""

    def __init__(self, in_features: int, d_P: int, batch_norm: bool = True):
        super().__init__()
        self.mlp = _mlp((d_P, d_P), in_features, batch_norm, dim=1)

    def forward(self, f):
        """f: (B, M, C) -> (B, d_P)."""
        return self.mlp(f.transpose(1, 2)).max(dim=-1).values


class PointBranch(nn.Module):
    """scan (B, N, 2) -> f_P (B, d_P).

    In training the first FPS centre of the first layer is drawn at random
    per sample; in eval it is index 0.
    """

    def __init__(self, cfg: PointBranchConfig):
        super().__init__()
        self.cfg = cfg
        layers = []
        ch = 0
        for p in cfg.sa:
            layers.append(SetAbstraction(p, ch, cfg.batch_norm))
            ch = p.mlp_widths[-1]
        self.sa = nn.ModuleList(layers)
        self.attention = PointSelfAttention(ch)
        self.group_all = GroupAll(ch, cfg.d_P, cfg.batch_norm)

    def features(self, xyz, start=None):
        """Feature matrix after the set abstraction stack: (B, M, C)."""
        if start is None:
            if self.training:
                start = torch.randint(0, xyz.shape[1], (xyz.shape[0],), device=xyz.device)
            else:
                start = 0
        f = None
        for i, layer in enumerate(self.sa):
            xyz, f = layer(xyz, f, start if i == 0 else 0)
        return f

    def forward(self, xyz, start=None):
        return self.group_all(self.attention(self.features(xyz, start)))
