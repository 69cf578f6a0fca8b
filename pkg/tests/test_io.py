import numpy as np
import pytest

from fusionloc.data import SET01_SPECS, Sample, Sequence, dataset_hash, load_dataset, load_sequence, write_sequence
from fusionloc.data.io import default_sequence_specs, find_norm, read_norm, write_norm
from fusionloc.errors import ConsistencyError, DatasetFormatError
from fusionloc.geometry import Pose2D


def _seq(n=3, split="train"):
    rng = np.random.default_rng(0)
    samples = [
        Sample(
            scan=rng.normal(size=(5 + i, 2)),
            pose=Pose2D(*rng.normal(size=2), rng.uniform(-3, 3)),
            frame_index=i,
            _image=rng.integers(0, 256, (6, 8, 3), dtype=np.uint8),
        )
        for i in range(n)
    ]
    return Sequence("seq-01", samples, split)


def test_set01_layout():
    assert len(SET01_SPECS) == 10
    assert sum(s.length for s in SET01_SPECS) == 3964
    assert [s.id for s in SET01_SPECS if s.split == "eval"] == ["seq-03", "seq-06", "seq-09"]


def test_round_trip_exact(tmp_path):
    seq = _seq()
    write_sequence(seq, tmp_path / "seq-01")
    back = load_sequence(tmp_path / "seq-01")
    assert back.id == "seq-01" and back.split == "train" and len(back) == 3
    for a, b in zip(seq.samples, back.samples):
        assert a.frame_index == b.frame_index
        np.testing.assert_array_equal(a.scan, b.scan)
        np.testing.assert_array_equal(a.image, b.image)
        assert (a.pose.x, a.pose.y, a.pose.theta) == (b.pose.x, b.pose.y, b.pose.theta)


def test_missing_scan_names_frame(tmp_path):
    write_sequence(_seq(), tmp_path / "s")
    (tmp_path / "s" / "scan" / "000001.txt").unlink()
    with pytest.raises(ConsistencyError) as exc:
        load_sequence(tmp_path / "s")
    assert exc.value.frame == 1
    assert "frame 1" in str(exc.value)


def test_missing_image_names_frame(tmp_path):
    write_sequence(_seq(), tmp_path / "s")
    (tmp_path / "s" / "rgb" / "000002.png").unlink()
    with pytest.raises(ConsistencyError) as exc:
        load_sequence(tmp_path / "s")
    assert exc.value.frame == 2


def test_orphan_scan_rejected(tmp_path):
    write_sequence(_seq(), tmp_path / "s")
    (tmp_path / "s" / "scan" / "000009.txt").write_text("0 0\n")
    with pytest.raises(ConsistencyError):
        load_sequence(tmp_path / "s")


def test_malformed_pose_line(tmp_path):
    write_sequence(_seq(), tmp_path / "s")
    (tmp_path / "s" / "poses.txt").write_text("0 1.0 2.0\n")
    with pytest.raises(DatasetFormatError):
        load_sequence(tmp_path / "s")


def test_bad_split_rejected():
    with pytest.raises(DatasetFormatError):
        _seq(split="test")


def test_non_increasing_frames_rejected():
    s = _seq().samples
    with pytest.raises(ConsistencyError):
        Sequence("x", [s[1], s[0]])


def test_norm_round_trip(tmp_path):
    write_norm(tmp_path / "norm.txt", (0.1, 0.2, 0.3), (0.4, 0.5, 0.6))
    assert read_norm(tmp_path / "norm.txt") == ((0.1, 0.2, 0.3), (0.4, 0.5, 0.6))
    (tmp_path / "sub").mkdir()
    assert find_norm(tmp_path / "sub") == (tmp_path / "norm.txt").resolve()


def test_default_specs_interleave():
    specs = default_sequence_specs(5, 2, 200)
    assert [s.split for s in specs].count("eval") == 2
    assert specs[0].split == "train" and specs[-1].split == "train"


def test_generated_dataset(small_dataset):
    root, cfg, seqs = small_dataset
    loaded = load_dataset(root)
    assert [s.id for s in loaded] == ["seq-01", "seq-02"]
    assert [s.split for s in loaded] == ["train", "eval"]
    assert [s.id for s in load_dataset(root, "eval")] == ["seq-02"]
    for a, b in zip(seqs, loaded):
        np.testing.assert_array_equal(a.poses_array(), b.poses_array())
        for sa, sb in zip(a.samples, b.samples):
            np.testing.assert_array_equal(sa.scan, sb.scan)
    img = loaded[0].samples[0].image
    assert img.shape == (cfg.image_size[1], cfg.image_size[0], 3)
    mean, std = read_norm(root / "norm.txt")
    assert all(0 < m < 1 for m in mean) and all(s > 0 for s in std)


def test_generation_deterministic(tmp_path):
    from fusionloc.data import SequenceSpec, WorldConfig, generate_dataset

    cfg = WorldConfig(seed=11, obstacle_count=1, image_size=(32, 24))
    specs = [SequenceSpec("seq-01", 3, "train")]
    generate_dataset(tmp_path / "a", cfg, specs)
    generate_dataset(tmp_path / "b", cfg, specs)
    assert dataset_hash(tmp_path / "a") == dataset_hash(tmp_path / "b")
