"""Position and orientation regression branches."""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

HIDDEN = 128


@dataclass
class PosePrediction:
    p: torch.Tensor  # (..., 2) metres
    q_raw: torch.Tensor  # (..., 2) unconstrained heading vector

    @property
    def q_unit(self) -> torch.Tensor:
        return self.q_raw / self.q_raw.norm(dim=-1, keepdim=True).clamp_min(1e-8)

    @property
    def theta(self) -> torch.Tensor:
        return torch.atan2(self.q_raw[..., 1], self.q_raw[..., 0])


def _branch(dim: int) -> nn.Sequential:
    half = max(1, dim // 2)
    return nn.Sequential(
        nn.Linear(dim, half),
        nn.ReLU(),
        nn.Linear(half, HIDDEN),
        nn.ReLU(),
        nn.Linear(HIDDEN, 2),
    )


class RegressionHead(nn.Module):
    """Two independent MLP branches ``d -> d/2 -> 128 -> 2``."""

    def __init__(self, dim: int):
        super().__init__()
        self.position = _branch(dim)
        self.orientation = _branch(dim)

    def forward(self, f) -> PosePrediction:
        return PosePrediction(self.position(f), self.orientation(f))
