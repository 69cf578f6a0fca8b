import pytest
import torch

from fusionloc.errors import ConfigError
from fusionloc.models import FusionLocNet, ImageBranch, ImageBranchConfig, ModelConfig, RegressionHead, ResNetTrunk
from fusionloc.models.image_branch import load_named_arrays

from conftest import tiny_model_config


def resnet34_param_count():
    """Conv and batch-norm parameters of the 34-layer trunk, from layer shapes."""
    total = 3 * 64 * 7 * 7 + 2 * 64  # stem conv + bn
    in_ch = 64
    for blocks, width in ((3, 64), (4, 128), (6, 256), (3, 512)):
        for b in range(blocks):
            total += in_ch * width * 9 + 2 * width  # conv1 + bn1
            total += width * width * 9 + 2 * width  # conv2 + bn2
            if in_ch != width:
                total += in_ch * width + 2 * width  # 1x1 projection + bn
            in_ch = width
    return total


def test_resnet34_size():
    expected = resnet34_param_count()
    assert expected == 21_284_672
    trunk = ResNetTrunk()
    assert sum(p.numel() for p in trunk.parameters()) == expected
    assert trunk.out_channels == 512


def test_image_branch_output():
    cfg = ImageBranchConfig(d_I=16, layers=(1, 1), widths=(4, 8), strict_dims=False)
    br = ImageBranch(cfg).eval()
    out = br(torch.randn(2, 3, 32, 32))
    assert out.shape == (2, 16)


def test_image_branch_strict_dims():
    with pytest.raises(ConfigError):
        ImageBranchConfig(d_I=100)


def test_load_named_arrays(tmp_path):
    import numpy as np

    src = ResNetTrunk((1,), (4,))
    np.savez(tmp_path / "w.npz", **{k: v.numpy() for k, v in src.state_dict().items()}, extra=np.zeros(1))
    dst = ResNetTrunk((1,), (4,))
    loaded = load_named_arrays(dst, tmp_path / "w.npz")
    assert "extra" not in loaded and "conv1.weight" in loaded
    assert torch.equal(dst.conv1.weight, src.conv1.weight)


def test_regression_head_shapes():
    head = RegressionHead(64)
    assert [m.out_features for m in head.position if isinstance(m, torch.nn.Linear)] == [32, 128, 2]
    pred = head(torch.randn(3, 64))
    assert pred.p.shape == (3, 2) and pred.q_raw.shape == (3, 2)
    torch.testing.assert_close(pred.q_unit.norm(dim=-1), torch.ones(3))


@pytest.mark.parametrize("kind,dim", [("fusionloc", 128), ("concat", 128), ("image", 64), ("point", 64)])
def test_model_kinds(kind, dim):
    cfg = tiny_model_config(kind)
    assert cfg.feature_dim == dim
    net = FusionLocNet(cfg).eval()
    img = torch.randn(2, 3, 32, 32)
    scan = torch.randn(2, 256, 2)
    assert net.features(img, scan).shape == (2, dim)
    assert (net.fusion is not None) == (kind == "fusionloc")
    assert (net.image_branch is None) == (kind == "point")
    assert (net.point_branch is None) == (kind == "image")


def test_dropout_rule():
    bn = FusionLocNet(tiny_model_config("fusionloc", norm_kind="BN"))
    ln = FusionLocNet(tiny_model_config("fusionloc", norm_kind="LN"))
    concat = FusionLocNet(tiny_model_config("concat"))
    assert isinstance(bn.image_branch.dropout, torch.nn.Identity)
    assert isinstance(ln.image_branch.dropout, torch.nn.Dropout)
    assert isinstance(concat.image_branch.dropout, torch.nn.Dropout)


def test_param_groups_exclude_norms():
    net = FusionLocNet(tiny_model_config())
    decay, no_decay = net.param_groups(1e-4)
    norm_ids = {
        id(p)
        for m in net.modules()
        if isinstance(m, (torch.nn.BatchNorm1d, torch.nn.BatchNorm2d, torch.nn.LayerNorm))
        for p in m.parameters(recurse=False)
    }
    assert {id(p) for p in no_decay["params"]} == norm_ids
    assert decay["weight_decay"] == 1e-4 and no_decay["weight_decay"] == 0.0
    assert len(decay["params"]) + len(no_decay["params"]) == len(list(net.parameters()))


def test_config_dict_round_trip():
    cfg = tiny_model_config()
    again = ModelConfig(**cfg.to_dict())
    assert again == cfg
