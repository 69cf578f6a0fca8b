import numpy as np
import pytest
import torch

from fusionloc.data import SequenceSpec, WorldConfig, generate_dataset
from fusionloc.models import ImageBranchConfig, ModelConfig, PointBranchConfig

TINY_SA = ((64, 0.2, 16, (16, 16, 32)), (32, 0.4, 8, (32, 32, 64)), (16, 0.8, 8, (64, 64, 64)))


def tiny_model_config(kind="fusionloc", d=64, n_heads=2, n_layers=2, norm_kind="BN", **kw):
    return ModelConfig(
        kind=kind,
        image=ImageBranchConfig(d_I=d, layers=(1, 1, 1, 1), widths=(8, 16, 32, 64), strict_dims=False),
        point=PointBranchConfig(d_P=d, sa=TINY_SA, n_points=256, strict_dims=False),
        n_heads=n_heads,
        n_layers=n_layers,
        norm_kind=norm_kind,
        crop_size=32,
        **kw,
    )


@pytest.fixture
def tiny_cfg():
    return tiny_model_config()


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Two short sequences (one train, one eval) in a small world."""
    root = tmp_path_factory.mktemp("data")
    cfg = WorldConfig(seed=3, extent=(6.0, 5.0), obstacle_count=2, image_size=(84, 48), trajectory_step=0.25)
    seqs = generate_dataset(root, cfg, [SequenceSpec("seq-01", 12, "train"), SequenceSpec("seq-02", 6, "eval")])
    return root, cfg, seqs


@pytest.fixture(autouse=True)
def _seed():
    torch.manual_seed(0)
    np.random.seed(0)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance check (tens of minutes on CPU)")


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
