import numpy as np
import pytest
import torch

from fusionloc.errors import ConfigError
from fusionloc.models import FusionConfig, FusionStack, MhsaBlock, fuse_concat
from fusionloc.models.attention import multi_head_attention


def test_fuse_concat_order():
    a, b = torch.tensor([[1.0, 2.0]]), torch.tensor([[3.0]])
    assert fuse_concat(a, b).tolist() == [[1.0, 2.0, 3.0]]


@pytest.mark.parametrize("norm", ["BN", "LN"])
def test_block_is_prenorm_residual(norm):
    torch.manual_seed(0)
    blk = MhsaBlock(8, 2, norm).double()
    f = torch.randn(4, 8, dtype=torch.float64)
    g = blk.norm(f)
    want = multi_head_attention(g, blk.w_q, blk.w_k, blk.w_v, blk.w_p) + f
    torch.testing.assert_close(blk(f), want)


def test_layer_norm_block_batch_independent():
    torch.manual_seed(0)
    blk = MhsaBlock(8, 4, "LN").train()
    f = torch.randn(5, 8)
    full = blk(f)
    torch.testing.assert_close(full[2:3], blk(f[2:3]))


def test_bn_train_needs_two_samples():
    blk = MhsaBlock(8, 2, "BN").train()
    with pytest.raises(ConfigError):
        blk(torch.randn(1, 8))
    blk.eval()
    assert blk(torch.randn(1, 8)).shape == (1, 8)


def test_stack_layers_independent():
    stack = FusionStack(FusionConfig(4, 4, 2, 3, "LN"))
    assert len(stack.blocks) == 3
    assert stack.blocks[0].w_q.data_ptr() != stack.blocks[1].w_q.data_ptr()
    assert not torch.equal(stack.blocks[0].w_p, stack.blocks[1].w_p)


def test_stack_sequential_composition():
    torch.manual_seed(3)
    stack = FusionStack(FusionConfig(4, 4, 2, 2, "LN"))
    f = torch.randn(3, 8)
    torch.testing.assert_close(stack(f), stack.blocks[1](stack.blocks[0](f)))


def test_config_validation():
    with pytest.raises(ConfigError):
        FusionConfig(3, 2, n_heads=2)
    with pytest.raises(ConfigError):
        FusionConfig(norm_kind="GN")
    assert FusionConfig(256, 256, 8, 6).dim == 512


def test_weights_rows_sum_to_one():
    stack = FusionStack(FusionConfig(8, 8, 4, 2, "BN")).train()
    _, weights = stack(torch.randn(6, 16), return_weights=True)
    for w in weights:
        assert w.shape == (6, 4, 4, 4)
        np.testing.assert_allclose(w.sum(-1).detach().numpy(), 1.0, atol=1e-6)
