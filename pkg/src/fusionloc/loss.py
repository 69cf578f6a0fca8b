"""Pose loss with learnable position/orientation balance."""
from __future__ import annotations

import math

import torch
import torch.nn as nn

BETA0 = 0.0
GAMMA0 = -3.0


def pose_loss(p, q, p_hat, q_hat, beta, gamma):
    """``|p - p_hat|_1 e^-beta + beta + |q - q_hat|_1 e^-gamma + gamma``.

    Inputs may carry leading batch dimensions; the L1 norms are averaged over
    them. ``q`` is the unit ground-truth heading vector, ``q_hat`` the raw
    regressed one.
    """
    # plain-number balance terms follow the prediction dtype
    beta = beta if torch.is_tensor(beta) else torch.tensor(float(beta), dtype=p_hat.dtype)
    gamma = gamma if torch.is_tensor(gamma) else torch.tensor(float(gamma), dtype=p_hat.dtype)
    pos = (p - p_hat).abs().sum(-1).mean()
    ori = (q - q_hat).abs().sum(-1).mean()
    return pos * torch.exp(-beta) + beta + ori * torch.exp(-gamma) + gamma


def loss_grad_state(pos_l1: float, ori_l1: float, beta: float, gamma: float) -> tuple[float, float]:
    """Closed-form derivatives of :func:`pose_loss` w.r.t. ``beta`` and ``gamma``."""
    return 1.0 - pos_l1 * math.exp(-beta), 1.0 - ori_l1 * math.exp(-gamma)


class PoseLoss(nn.Module):
    """Holds the learnable ``beta`` / ``gamma`` balance parameters."""

    def __init__(self, beta0: float = BETA0, gamma0: float = GAMMA0):
        super().__init__()
        self.beta = nn.Parameter(torch.tensor(float(beta0)))
        self.gamma = nn.Parameter(torch.tensor(float(gamma0)))

    def forward(self, pred, p, q):
        return pose_loss(p, q, pred.p, pred.q_raw, self.beta, self.gamma)
