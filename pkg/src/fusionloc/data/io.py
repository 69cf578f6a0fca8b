"""On-disk dataset layout, loading and synthetic dataset generation.

Layout::

    <root>/norm.txt                      per-channel mean (3) and std (3)
    <root>/<set-id>/world.json           generator world (for plotting)
    <root>/<set-id>/<seq-id>/rgb/<frame:06d>.png
    <root>/<set-id>/<seq-id>/scan/<frame:06d>.txt
    <root>/<set-id>/<seq-id>/poses.txt   "<frame> <x> <y> <theta>"
    <root>/<set-id>/<seq-id>/split.txt   "train" | "eval"
"""
from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import ConsistencyError, DatasetFormatError
from ..geometry import Pose2D
from .world import MAX_SCAN_POINTS, World, WorldConfig, generate_trajectory, generate_world, raycast_scan, render_view

log = logging.getLogger(__name__)

SPLITS = ("train", "eval")


@dataclass
class Sample:
    """One synchronised (image, scan, pose) tuple.

    ``image`` is read from ``image_path`` on access when it was not supplied in
    memory, so long sequences do not pin every frame in RAM.
    """

    scan: np.ndarray
    pose: Pose2D
    frame_index: int
    image_path: Path | None = None
    _image: np.ndarray | None = field(default=None, repr=False)

    @property
    def image(self) -> np.ndarray:
        if self._image is not None:
            return self._image
        if self.image_path is None:
            raise DatasetFormatError(f"frame {self.frame_index} has no image", frame=self.frame_index)
        return read_image(self.image_path, self.frame_index)


@dataclass
class Sequence:
    id: str
    samples: list[Sample]
    split: str = "train"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise DatasetFormatError(f"sequence {self.id}: split must be one of {SPLITS}, got {self.split!r}")
        idx = [s.frame_index for s in self.samples]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ConsistencyError(f"sequence {self.id}: frame indices not strictly increasing")

    def __len__(self):
        return len(self.samples)

    def poses_array(self) -> np.ndarray:
        return np.array([[s.pose.x, s.pose.y, s.pose.theta] for s in self.samples]).reshape(-1, 3)


@dataclass(frozen=True)
class SequenceSpec:
    id: str
    length: int
    split: str


# Sequence lengths and train/eval split of the reference indoor set.
SET01_SPECS = (
    SequenceSpec("seq-01", 394, "train"),
    SequenceSpec("seq-02", 374, "train"),
    SequenceSpec("seq-03", 389, "eval"),
    SequenceSpec("seq-04", 359, "train"),
    SequenceSpec("seq-05", 429, "train"),
    SequenceSpec("seq-06", 401, "eval"),
    SequenceSpec("seq-07", 390, "train"),
    SequenceSpec("seq-08", 404, "train"),
    SequenceSpec("seq-09", 408, "eval"),
    SequenceSpec("seq-10", 416, "train"),
)


def _fmt(v: float) -> str:
    # 17 significant digits round-trips every float64 exactly
    return format(float(v), ".17g")


def read_image(path: Path, frame: int) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except FileNotFoundError:
        raise ConsistencyError(f"frame {frame}: missing image {path}", frame=frame) from None
    except OSError as exc:
        raise DatasetFormatError(f"frame {frame}: unreadable image {path}: {exc}", frame=frame) from exc


def read_scan(path: Path, frame: int) -> np.ndarray:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConsistencyError(f"frame {frame}: missing scan {path}", frame=frame) from None
    pts = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        try:
            if len(parts) != 2:
                raise ValueError
            pts.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise DatasetFormatError(f"frame {frame}: malformed scan line {lineno} in {path}", frame=frame) from None
    arr = np.array(pts, dtype=np.float64).reshape(-1, 2)
    if len(arr) > MAX_SCAN_POINTS:
        raise DatasetFormatError(f"frame {frame}: {len(arr)} scan points exceeds {MAX_SCAN_POINTS}", frame=frame)
    return arr


def read_poses(path: Path) -> list[tuple[int, Pose2D]]:
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DatasetFormatError(f"missing pose file {path}") from None
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        try:
            if len(parts) != 4:
                raise ValueError
            frame = int(parts[0])
            pose = Pose2D(float(parts[1]), float(parts[2]), float(parts[3]))
        except ValueError:
            raise DatasetFormatError(f"malformed pose line {lineno} in {path}: {line!r}") from None
        out.append((frame, pose))
    return out


def load_sequence(dir_path) -> Sequence:
    """Load one sequence directory. Images are read lazily."""
    d = Path(dir_path)
    if not d.is_dir():
        raise DatasetFormatError(f"sequence directory not found: {d}")
    try:
        split = (d / "split.txt").read_text(encoding="utf-8").strip()
    except FileNotFoundError:
        raise DatasetFormatError(f"missing split.txt in {d}") from None
    poses = read_poses(d / "poses.txt")

    scan_files = sorted((d / "scan").glob("*.txt")) if (d / "scan").is_dir() else []
    rgb_files = sorted((d / "rgb").glob("*.png")) if (d / "rgb").is_dir() else []
    frames = {f for f, _ in poses}
    for kind, files in (("scan", scan_files), ("rgb", rgb_files)):
        extra = sorted(int(p.stem) for p in files if p.stem.isdigit() and int(p.stem) not in frames)
        if extra:
            raise ConsistencyError(f"{d}: {kind} file for frame {extra[0]} has no pose line", frame=extra[0])

    samples = []
    for frame, pose in poses:
        image_path = d / "rgb" / f"{frame:06d}.png"
        if not image_path.exists():
            raise ConsistencyError(f"frame {frame}: missing image {image_path}", frame=frame)
        scan = read_scan(d / "scan" / f"{frame:06d}.txt", frame)
        samples.append(Sample(scan=scan, pose=pose, frame_index=frame, image_path=image_path))
    return Sequence(d.name, samples, split)


def write_sequence(seq: Sequence, dir_path) -> Path:
    d = Path(dir_path)
    try:
        (d / "rgb").mkdir(parents=True, exist_ok=True)
        (d / "scan").mkdir(parents=True, exist_ok=True)
        lines = []
        for s in seq.samples:
            Image.fromarray(np.asarray(s.image, dtype=np.uint8)).save(d / "rgb" / f"{s.frame_index:06d}.png")
            scan_text = "".join(f"{_fmt(x)} {_fmt(y)}\n" for x, y in np.asarray(s.scan).reshape(-1, 2))
            (d / "scan" / f"{s.frame_index:06d}.txt").write_text(scan_text, encoding="utf-8")
            lines.append(f"{s.frame_index} {_fmt(s.pose.x)} {_fmt(s.pose.y)} {_fmt(s.pose.theta)}\n")
        (d / "poses.txt").write_text("".join(lines), encoding="utf-8")
        (d / "split.txt").write_text(seq.split + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"failed writing sequence {seq.id} to {d}: {exc}") from exc
    return d


def write_norm(path, mean, std):
    Path(path).write_text(" ".join(_fmt(v) for v in (*mean, *std)) + "\n", encoding="utf-8")


def read_norm(path) -> tuple[tuple[float, ...], tuple[float, ...]]:
    try:
        vals = [float(v) for v in Path(path).read_text(encoding="utf-8").split()]
    except FileNotFoundError:
        raise DatasetFormatError(f"missing normalisation file {path}") from None
    except ValueError:
        raise DatasetFormatError(f"malformed normalisation file {path}") from None
    if len(vals) != 6 or any(v <= 0 for v in vals[3:]):
        raise DatasetFormatError(f"{path}: expected 3 means and 3 positive stds")
    return tuple(vals[:3]), tuple(vals[3:])


def list_sequences(root) -> list[Path]:
    """All sequence directories (those holding poses.txt) below ``root``, sorted."""
    root = Path(root)
    if (root / "poses.txt").exists():
        return [root]
    return sorted(p.parent for p in root.glob("**/poses.txt"))


def load_dataset(root, split: str | None = None) -> list[Sequence]:
    seqs = [load_sequence(p) for p in list_sequences(root)]
    if split is not None:
        seqs = [s for s in seqs if s.split == split]
    return seqs


def find_norm(root) -> Path | None:
    p = Path(root).resolve()
    for cand in (p, *p.parents):
        if (cand / "norm.txt").exists():
            return cand / "norm.txt"
    return None


def dataset_hash(root, exclude=("manifest.txt",)) -> str:
    """SHA-256 over every file's relative path and bytes, in sorted order.

    Files named in ``exclude`` (run manifests carry timestamps) are skipped.
    """
    h = hashlib.sha256()
    root = Path(root)
    for p in sorted(q for q in root.rglob("*") if q.is_file() and q.name not in exclude):
        h.update(p.relative_to(root).as_posix().encode())
        h.update(b"\0")
        h.update(p.read_bytes())
    return h.hexdigest()


def generate_dataset(
    out_root,
    cfg: WorldConfig,
    specs=SET01_SPECS,
    set_id: str = "set-01",
) -> list[Sequence]:
    """Generate a synthetic set and write it in the dataset layout.

    The sequences are consecutive chunks of one continuous random walk,
    mirroring a single long recording split into shorter pieces. Per-channel
    image statistics over the training split are written to ``norm.txt``.
    """
    out_root = Path(out_root)
    world = generate_world(cfg)
    total = sum(s.length for s in specs)
    traj_rng = np.random.default_rng([cfg.seed, 1])
    poses = generate_trajectory(world, total, cfg.trajectory_step, traj_rng)

    set_dir = out_root / set_id
    try:
        set_dir.mkdir(parents=True, exist_ok=True)
        (set_dir / "world.json").write_text(world.to_json(), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write to {set_dir}: {exc}") from exc

    pix_sum = np.zeros(3)
    pix_sq = np.zeros(3)
    pix_n = 0
    sequences = []
    start = 0
    for spec in specs:
        samples = []
        for k in range(spec.length):
            g = start + k
            pose = poses[g]
            noise_rng = np.random.default_rng([cfg.seed, 2, g])
            scan = raycast_scan(world, pose, cfg, noise_rng)
            image = render_view(world, pose, cfg)
            samples.append(Sample(scan=scan, pose=pose, frame_index=k, _image=image))
            if spec.split == "train":
                x = image.reshape(-1, 3).astype(np.float64) / 255.0
                pix_sum += x.sum(0)
                pix_sq += (x * x).sum(0)
                pix_n += len(x)
        start += spec.length
        seq = Sequence(spec.id, samples, spec.split)
        write_sequence(seq, set_dir / spec.id)
        # drop in-memory images once on disk
        for s, frame in zip(seq.samples, range(spec.length)):
            s.image_path = set_dir / spec.id / "rgb" / f"{frame:06d}.png"
            s._image = None
        sequences.append(seq)
        log.info("wrote %s/%s (%d frames, %s)", set_id, spec.id, spec.length, spec.split)

    if pix_n:
        mean = pix_sum / pix_n
        std = np.sqrt(np.maximum(pix_sq / pix_n - mean * mean, 1e-12))
    else:
        from .transforms import DEFAULT_MEAN, DEFAULT_STD

        mean, std = np.array(DEFAULT_MEAN), np.array(DEFAULT_STD)
    write_norm(out_root / "norm.txt", mean, std)
    return sequences


def load_world(path) -> World:
    return World.from_json(Path(path).read_text(encoding="utf-8"))


def default_sequence_specs(n_train: int, n_eval: int, length: int) -> list[SequenceSpec]:
    """Evenly interleave eval sequences among train sequences."""
    n = n_train + n_eval
    eval_slots = {min(n - 1, (i + 1) * n // (n_eval + 1)) for i in range(n_eval)}
    specs = []
    for i in range(n):
        specs.append(SequenceSpec(f"seq-{i + 1:02d}", length, "eval" if i in eval_slots else "train"))
    return specs


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
