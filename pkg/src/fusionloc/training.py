"""Training loop, checkpoints, evaluation helpers and ablation runs."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
import torch

from .data.io import Sequence
from .data.transforms import DEFAULT_MEAN, DEFAULT_STD, color_jitter, crop, normalize, resize_short_side, sample_scan
from .errors import ConfigError, DivergenceError, InvalidInputError
from .loss import PoseLoss
from .metrics import EvalReport, evaluate
from .models.network import FusionLocNet, ModelConfig

log = logging.getLogger(__name__)

CHECKPOINT_ARCHIVE = "checkpoint.npz"
CHECKPOINT_MANIFEST = "checkpoint.txt"
LOSS_CURVE = "loss_curve.csv"


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    max_epochs: int = 1000
    max_steps: int | None = None
    batch_size: int | None = None  # None: 256, or 64 for 2048/2048 features
    seed: int = 0
    eval_every: int = 100
    checkpoint_every: int = 100
    color_jitter: bool = True
    random_crop: bool = True
    random_scan: bool = True
    init_position_bias: bool = True

    def __post_init__(self):
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ConfigError("learning_rate and weight_decay must be non-negative")
        if self.max_epochs < 1 or self.max_epochs > 1000:
            raise ConfigError("max_epochs must be in [1, 1000]")
        if self.max_steps is not None and self.max_steps < 0:
            raise ConfigError("max_steps must be >= 0")
        if self.batch_size is not None and self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (batch statistics need two samples)")

    def resolved_batch_size(self, model_cfg: ModelConfig) -> int:
        if self.batch_size is not None:
            return self.batch_size
        if model_cfg.image.d_I == 2048 and model_cfg.point.d_P == 2048:
            return 64
        return 256


def config_hash(model_cfg: ModelConfig, train_cfg: TrainConfig) -> str:
    blob = json.dumps({"model": model_cfg.to_dict(), "train": asdict(train_cfg)}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class PoseDataset:
    """Turns sequences into network-ready arrays.

    Resized images (short side = crop size) are cached on first use; cropping,
    jitter and scan sampling happen per access from a caller-supplied RNG.
    """

    def __init__(self, sequences: list[Sequence], model_cfg: ModelConfig, mean=DEFAULT_MEAN, std=DEFAULT_STD):
        self.items = [(seq.id, s) for seq in sequences for s in seq.samples]
        self.cfg = model_cfg
        self.mean, self.std = tuple(mean), tuple(std)
        self._resized: list[np.ndarray | None] = [None] * len(self.items)

    def __len__(self):
        return len(self.items)

    def _image(self, i):
        if self._resized[i] is None:
            self._resized[i] = resize_short_side(self.items[i][1].image, self.cfg.crop_size)
        return self._resized[i]

    def targets(self, indices):
        poses = np.array([[self.items[i][1].pose.x, self.items[i][1].pose.y, self.items[i][1].pose.theta] for i in indices])
        p = torch.tensor(poses[:, :2], dtype=torch.float32)
        q = torch.tensor(np.stack([np.cos(poses[:, 2]), np.sin(poses[:, 2])], -1), dtype=torch.float32)
        return p, q, poses

    def batch(self, indices, mode="eval", rngs=None, train_cfg: TrainConfig | None = None):
        images, scans = [], []
        jitter = mode == "train" and (train_cfg is None or train_cfg.color_jitter)
        img_mode = "train" if mode == "train" and (train_cfg is None or train_cfg.random_crop) else "eval"
        scan_mode = "train" if mode == "train" and (train_cfg is None or train_cfg.random_scan) else "eval"
        for j, i in enumerate(indices):
            rng = rngs[j] if rngs is not None else None
            if self.cfg.uses_image:
                img = self._image(i)
                if jitter:
                    img = color_jitter(img, rng)
                images.append(normalize(crop(img, self.cfg.crop_size, img_mode, rng), self.mean, self.std))
            if self.cfg.uses_point:
                scans.append(sample_scan(self.items[i][1].scan, self.cfg.point.n_points, scan_mode, rng))
        image = torch.from_numpy(np.stack(images)) if images else None
        scan = torch.from_numpy(np.stack(scans)) if scans else None
        return image, scan


@dataclass
class TrainState:
    model: FusionLocNet
    loss: PoseLoss
    optimizer: torch.optim.Optimizer
    model_cfg: ModelConfig
    train_cfg: TrainConfig
    epoch: int = 0
    batch_index: int = 0
    step: int = 0

    def named_parameters(self):
        yield from (("model/" + k, p) for k, p in self.model.named_parameters())
        yield from (("loss/" + k, p) for k, p in self.loss.named_parameters())


@dataclass
class TrainResult:
    state: TrainState
    history: list[tuple[int, float, float, float]] = field(default_factory=list)
    reports: dict[int, EvalReport] = field(default_factory=dict)
    checkpoint: Path | None = None
    seconds: float = 0.0


def build_state(model_cfg: ModelConfig, train_cfg: TrainConfig) -> TrainState:
    torch.manual_seed(train_cfg.seed)
    model = FusionLocNet(model_cfg)
    loss = PoseLoss()
    groups = model.param_groups(train_cfg.weight_decay)
    # the balance parameters are never decayed
    groups.append({"params": list(loss.parameters()), "weight_decay": 0.0})
    opt = torch.optim.Adam(groups, lr=train_cfg.learning_rate)
    return TrainState(model, loss, opt, model_cfg, train_cfg)


def save_checkpoint(state: TrainState, out_dir) -> Path:
    """Write ``checkpoint.npz`` (named arrays) and ``checkpoint.txt`` (manifest)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    arrays = {"model/" + k: v.detach().cpu().numpy() for k, v in state.model.state_dict().items()}
    arrays.update({"loss/" + k: v.detach().cpu().numpy() for k, v in state.loss.state_dict().items()})
    for name, p in state.named_parameters():
        st = state.optimizer.state.get(p)
        if st:
            arrays[f"optim/{name}/exp_avg"] = st["exp_avg"].numpy()
            arrays[f"optim/{name}/exp_avg_sq"] = st["exp_avg_sq"].numpy()
            arrays[f"optim/{name}/step"] = np.asarray(float(st["step"]), dtype=np.float32)
    arrays["rng/torch"] = torch.get_rng_state().numpy()
    np.savez(out / CHECKPOINT_ARCHIVE, **arrays)
    manifest = {
        "epoch": state.epoch,
        "batch_index": state.batch_index,
        "step": state.step,
        "config_hash": config_hash(state.model_cfg, state.train_cfg),
        "rng_state": "rng/torch",
        "model": state.model_cfg.to_dict(),
        "train": asdict(state.train_cfg),
    }
    (out / CHECKPOINT_MANIFEST).write_text(json.dumps(manifest, indent=2, default=list) + "\n", encoding="utf-8")
    return out


def load_checkpoint(ckpt_dir, train_cfg: TrainConfig | None = None) -> TrainState:
    d = Path(ckpt_dir)
    if d.is_file():
        d = d.parent
    manifest = json.loads((d / CHECKPOINT_MANIFEST).read_text(encoding="utf-8"))
    model_cfg = ModelConfig(**manifest["model"])
    tcfg = train_cfg or TrainConfig(**manifest["train"])
    state = build_state(model_cfg, tcfg)
    with np.load(d / CHECKPOINT_ARCHIVE) as arch:
        msd = {k[len("model/") :]: torch.from_numpy(arch[k].copy()) for k in arch.files if k.startswith("model/")}
        state.model.load_state_dict(msd)
        lsd = {k[len("loss/") :]: torch.from_numpy(arch[k].copy()) for k in arch.files if k.startswith("loss/")}
        state.loss.load_state_dict(lsd)
        for name, p in state.named_parameters():
            key = f"optim/{name}/exp_avg"
            if key in arch.files:
                state.optimizer.state[p] = {
                    "step": torch.tensor(float(arch[f"optim/{name}/step"])),
                    "exp_avg": torch.from_numpy(arch[key].copy()),
                    "exp_avg_sq": torch.from_numpy(arch[f"optim/{name}/exp_avg_sq"].copy()),
                }
        torch.set_rng_state(torch.from_numpy(arch["rng/torch"].copy()))
    state.epoch = manifest["epoch"]
    state.batch_index = manifest["batch_index"]
    state.step = manifest["step"]
    return state


def epoch_batches(n: int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Shuffled mini-batches for one epoch; a trailing batch of one sample is dropped."""
    perm = np.random.default_rng([seed, epoch]).permutation(n)
    batches = [perm[i : i + batch_size] for i in range(0, n, batch_size)]
    if len(batches[-1]) < 2:
        batches.pop()
    return batches


@torch.no_grad()
def predict(model: FusionLocNet, dataset: PoseDataset, batch_size: int = 64):
    """Eval-mode predictions: returns (pred (N, 3), gt (N, 3), sequence ids, frame indices)."""
    was_training = model.training
    model.eval()
    preds, gts = [], []
    for start in range(0, len(dataset), batch_size):
        idx = list(range(start, min(start + batch_size, len(dataset))))
        image, scan = dataset.batch(idx, "eval")
        out = model(image, scan)
        theta = out.theta.numpy().astype(np.float64)
        preds.append(np.column_stack([out.p.numpy().astype(np.float64), theta]))
        gts.append(dataset.targets(idx)[2])
    model.train(was_training)
    ids = [sid for sid, _ in dataset.items]
    frames = [s.frame_index for _, s in dataset.items]
    return np.concatenate(preds), np.concatenate(gts), ids, frames


def evaluate_model(model: FusionLocNet, dataset: PoseDataset) -> EvalReport:
    pred, gt, ids, _ = predict(model, dataset)
    return evaluate(pred, gt, ids)


def train(
    train_sequences: list[Sequence],
    train_cfg: TrainConfig,
    model_cfg: ModelConfig,
    eval_sequences: list[Sequence] | None = None,
    out_dir=None,
    resume=None,
    norm=(DEFAULT_MEAN, DEFAULT_STD),
    on_step: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Minimise the mean pose loss over shuffled mini-batches with Adam.

    Network weights and the loss balance parameters share one optimiser.
    With ``out_dir`` set, the loss curve is written as CSV and a checkpoint is
    saved every ``checkpoint_every`` epochs and at the end.
    """
    if not train_sequences or not any(len(s) for s in train_sequences):
        raise ConfigError("no training samples")
    t0 = time.time()
    state = load_checkpoint(resume, train_cfg) if resume else build_state(model_cfg, train_cfg)
    model_cfg = state.model_cfg
    data = PoseDataset(train_sequences, model_cfg, *norm)
    eval_data = PoseDataset(eval_sequences, model_cfg, *norm) if eval_sequences else None
    bs = train_cfg.resolved_batch_size(model_cfg)
    if len(data) < 2:
        raise ConfigError("batch statistics need at least two training samples")

    result = TrainResult(state)
    curve_fh = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        curve_path = out / LOSS_CURVE
        fresh = resume is None or not curve_path.exists()
        curve_fh = open(curve_path, "w" if fresh else "a", newline="", encoding="utf-8")
        writer = csv.writer(curve_fh)
        if fresh:
            writer.writerow(["step", "loss", "beta", "gamma"])

    model, loss_fn, opt = state.model, state.loss, state.optimizer
    if resume is None and train_cfg.init_position_bias:
        # start the position branch at the mean training position
        with torch.no_grad():
            model.head.position[-1].bias.copy_(data.targets(range(len(data)))[0].mean(0))
    model.train()
    try:
        while state.epoch < train_cfg.max_epochs:
            batches = epoch_batches(len(data), bs, train_cfg.seed, state.epoch)
            while state.batch_index < len(batches):
                if train_cfg.max_steps is not None and state.step >= train_cfg.max_steps:
                    break
                idx = batches[state.batch_index]
                rngs = [np.random.default_rng([train_cfg.seed, state.epoch, int(i)]) for i in idx]
                image, scan = data.batch(idx, "train", rngs, train_cfg)
                p, q, _ = data.targets(idx)
                opt.zero_grad(set_to_none=True)
                try:
                    loss = loss_fn(model(image, scan), p, q)
                except InvalidInputError as exc:
                    # non-finite activations inside attention mean the weights blew up
                    raise DivergenceError(f"step {state.step}: {exc}") from exc
                value = float(loss.detach())
                if not math.isfinite(value):
                    raise DivergenceError(
                        f"non-finite loss at step {state.step} (epoch {state.epoch}, batch {state.batch_index}); "
                        f"beta={float(loss_fn.beta):.4g} gamma={float(loss_fn.gamma):.4g}"
                    )
                loss.backward()
                opt.step()
                state.step += 1
                state.batch_index += 1
                rec = (state.step, value, float(loss_fn.beta.detach()), float(loss_fn.gamma.detach()))
                result.history.append(rec)
                if curve_fh is not None:
                    writer.writerow([rec[0], format(rec[1], ".9g"), format(rec[2], ".9g"), format(rec[3], ".9g")])
                if on_step is not None:
                    on_step(state.step, value)
            else:
                state.epoch += 1
                state.batch_index = 0
                if eval_data is not None and train_cfg.eval_every and state.epoch % train_cfg.eval_every == 0:
                    result.reports[state.epoch] = evaluate_model(model, eval_data)
                    log.info("epoch %d: %s", state.epoch, result.reports[state.epoch].average)
                if out_dir is not None and train_cfg.checkpoint_every and state.epoch % train_cfg.checkpoint_every == 0:
                    save_checkpoint(state, out_dir)
                continue
            break  # max_steps reached
    finally:
        if curve_fh is not None:
            curve_fh.close()
    if out_dir is not None:
        result.checkpoint = save_checkpoint(state, out_dir)
    result.seconds = time.time() - t0
    return result


@dataclass
class AblationRow:
    cell: dict
    report: EvalReport | None = None
    error: str | None = None
    seconds: float = 0.0


def apply_cell(base: ModelConfig, cell: dict) -> ModelConfig:
    """Model config with grid-cell overrides (``kind``, ``d_I``, ``d_P``, ``n_heads``, ``n_layers``, ``norm_kind``)."""
    image = replace(base.image, d_I=cell.get("d_I", base.image.d_I))
    point = replace(base.point, d_P=cell.get("d_P", base.point.d_P))
    return replace(
        base,
        kind=cell.get("kind", base.kind),
        image=image,
        point=point,
        n_heads=cell.get("n_heads", base.n_heads),
        n_layers=cell.get("n_layers", base.n_layers),
        norm_kind=cell.get("norm_kind", base.norm_kind),
    )


def run_ablation(
    cells: list[dict],
    train_sequences,
    eval_sequences,
    train_cfg: TrainConfig,
    base_model: ModelConfig,
    norm=(DEFAULT_MEAN, DEFAULT_STD),
) -> list[AblationRow]:
    """Train and evaluate one model per grid cell; failures are recorded and the grid continues."""
    rows = []
    for cell in cells:
        t0 = time.time()
        try:
            res = train(train_sequences, train_cfg, apply_cell(base_model, cell), norm=norm)
            rows.append(AblationRow(dict(cell), evaluate_model(res.state.model, PoseDataset(eval_sequences, res.state.model_cfg, *norm)), seconds=time.time() - t0))
        except Exception as exc:  # noqa: BLE001 - one bad cell must not stop the grid
            log.warning("ablation cell %s failed: %s", cell, exc)
            rows.append(AblationRow(dict(cell), error=f"{type(exc).__name__}: {exc}", seconds=time.time() - t0))
    return rows


def grid_cells(
    d_I=(256,), d_P=(256,), n_heads=(2,), n_layers=(6,), norm_kind=("BN",), kind="fusionloc"
) -> list[dict]:
    return [
        {"kind": kind, "d_I": a, "d_P": b, "n_heads": h, "n_layers": n_l, "norm_kind": nk}
        for a in d_I
        for b in d_P
        for h in n_heads
        for n_l in n_layers
        for nk in norm_kind
    ]


def write_ablation_table(rows: list[AblationRow], path) -> None:
    """Tab-separated table: grid axes, then median and mean (position m, orientation deg)."""
    keys = ["kind", "d_I", "d_P", "n_heads", "n_layers", "norm_kind"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(keys + ["median_pos_m", "median_ori_deg", "mean_pos_m", "mean_ori_deg", "status"]) + "\n")
        for r in rows:
            axes = [str(r.cell.get(k, "")) for k in keys]
            if r.report is not None:
                a = r.report.average
                vals = [f"{a.median_pos_m:.4f}", f"{a.median_ori_deg:.4f}", f"{a.mean_pos_m:.4f}", f"{a.mean_ori_deg:.4f}", "ok"]
            else:
                vals = ["nan"] * 4 + [r.error or "failed"]
            fh.write("\t".join(axes + vals) + "\n")


def compare_norms(
    train_sequences,
    trace_sequences,
    train_cfg: TrainConfig,
    model_cfg: ModelConfig,
    out_dir=None,
    norm=(DEFAULT_MEAN, DEFAULT_STD),
) -> dict[str, dict[str, np.ndarray]]:
    """Train the same network with BN and with LN in the fusion stack and trace predicted positions.

    Returns ``{norm_kind: {"pred": (N, 3), "gt": (N, 3), "sequence": ids}}`` and,
    with ``out_dir``, writes ``trajectory_<norm>.csv`` per normalisation.
    """
    out = {}
    for nk in ("BN", "LN"):
        cfg = replace(model_cfg, kind="fusionloc", norm_kind=nk)
        res = train(train_sequences, train_cfg, cfg, norm=norm)
        pred, gt, ids, frames = predict(res.state.model, PoseDataset(trace_sequences, cfg, *norm))
        out[nk] = {"pred": pred, "gt": gt, "sequence": np.array(ids), "frame": np.array(frames)}
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            with open(Path(out_dir) / f"trajectory_{nk}.csv", "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["sequence", "frame", "gt_x", "gt_y", "pred_x", "pred_y"])
                for i in range(len(ids)):
                    w.writerow([ids[i], frames[i], *(format(v, ".9g") for v in (gt[i, 0], gt[i, 1], pred[i, 0], pred[i, 1]))])
    return out
