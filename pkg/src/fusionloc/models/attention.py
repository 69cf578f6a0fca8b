"""Scalar-token self-attention over a single feature vector.

Each coordinate of the input vector is a token. Query, key and value are the
projected vectors; the score matrix is the outer product of query and key, so
row ``i`` holds how strongly coordinate ``i`` attends to every coordinate ``j``.
"""
from __future__ import annotations

import math

import torch
import torch.nn as nn

from ..errors import InvalidInputError


def _check_scores(scores: torch.Tensor):
    if scores.device.type == "meta":
        return
    if not torch.isfinite(scores).all():
        raise InvalidInputError("non-finite attention scores")


def vector_self_attention(f, w_q, w_k, w_v, w_p, return_weights=False):
    """``W_p softmax(q k^T) v + f`` with ``q = W_q f``, ``k = W_k f``, ``v = W_v f``.

    f: (..., d). Weight matrices: (d, d). No score scaling.
    """
    q = f @ w_q.transpose(-1, -2)
    k = f @ w_k.transpose(-1, -2)
    v = f @ w_v.transpose(-1, -2)
    scores = q.unsqueeze(-1) * k.unsqueeze(-2)
    _check_scores(scores)
    weights = torch.softmax(scores, dim=-1)
    f_att = (weights @ v.unsqueeze(-1)).squeeze(-1)
    out = f_att @ w_p.transpose(-1, -2) + f
    return (out, weights) if return_weights else out


def multi_head_attention(g, w_q, w_k, w_v, w_p, return_weights=False):
    """Multi-head scalar-token attention without the residual.

    g: (..., d) is split into ``n_heads`` contiguous segments of ``d_head``
    coordinates. Head ``h`` projects its own segment with the (d_head, d_head)
    matrices ``w_q[h]``, ``w_k[h]``, ``w_v[h]`` and uses scaled dot-product
    scores ``q_i k_j / sqrt(d_head)``. Head outputs are concatenated in order
    and projected by ``w_p`` (d, d).
    """
    n_heads, d_head = w_q.shape[0], w_q.shape[1]
    d = g.shape[-1]
    if n_heads * d_head != d:
        raise ValueError(f"{n_heads} heads of size {d_head} do not tile a {d}-vector")
    seg = g.reshape(*g.shape[:-1], n_heads, d_head)
    q = torch.einsum("...hj,hij->...hi", seg, w_q)
    k = torch.einsum("...hj,hij->...hi", seg, w_k)
    v = torch.einsum("...hj,hij->...hi", seg, w_v)
    scores = q.unsqueeze(-1) * k.unsqueeze(-2) / math.sqrt(d_head)
    _check_scores(scores)
    weights = torch.softmax(scores, dim=-1)  # (..., H, dh, dh)
    heads = (weights @ v.unsqueeze(-1)).squeeze(-1)
    out = heads.reshape(*g.shape[:-1], d) @ w_p.transpose(-1, -2)
    return (out, weights) if return_weights else out


class VectorSelfAttention(nn.Module):
    """Learnable ``W_q``, ``W_k``, ``W_v``, ``W_p`` for :func:`vector_self_attention`."""

    def __init__(self, dim: int):
        super().__init__()
        self.dim = dim
        self.w_q = nn.Parameter(torch.empty(dim, dim))
        self.w_k = nn.Parameter(torch.empty(dim, dim))
        self.w_v = nn.Parameter(torch.empty(dim, dim))
        self.w_p = nn.Parameter(torch.empty(dim, dim))
        self.reset_parameters()

    def reset_parameters(self):
        bound = 1.0 / math.sqrt(self.dim)
        for w in (self.w_q, self.w_k, self.w_v, self.w_p):
            nn.init.uniform_(w, -bound, bound)

    def forward(self, f, return_weights=False):
        return vector_self_attention(f, self.w_q, self.w_k, self.w_v, self.w_p, return_weights)
