from .attention import VectorSelfAttention, multi_head_attention, vector_self_attention
from .fusion import FusionConfig, FusionStack, MhsaBlock, fuse_concat
from .image_branch import ImageBranch, ImageBranchConfig, ResNetTrunk
from .network import FusionLocNet, ModelConfig
from .point_branch import (
    PointBranch,
    PointBranchConfig,
    SetAbstractionParams,
    ball_query,
    farthest_point_sample,
)
from .regression import PosePrediction, RegressionHead

__all__ = [
    "ball_query",
    "farthest_point_sample",
    "fuse_concat",
    "FusionConfig",
    "FusionLocNet",
    "FusionStack",
    "ImageBranch",
    "ImageBranchConfig",
    "MhsaBlock",
    "ModelConfig",
    "multi_head_attention",
    "PointBranch",
    "PointBranchConfig",
    "PosePrediction",
    "RegressionHead",
    "ResNetTrunk",
    "SetAbstractionParams",
    "vector_self_attention",
    "VectorSelfAttention",
]
