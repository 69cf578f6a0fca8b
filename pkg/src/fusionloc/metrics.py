"""Relocalisation error metrics and report files."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import angular_errors_deg

COLUMNS = ("median_pos_m", "mean_pos_m", "median_ori_deg", "mean_ori_deg")
AVG_ROW = "avg"


@dataclass
class SequenceErrors:
    median_pos_m: float
    mean_pos_m: float
    median_ori_deg: float
    mean_ori_deg: float
    n: int = 0

    def values(self) -> tuple[float, float, float, float]:
        return (self.median_pos_m, self.mean_pos_m, self.median_ori_deg, self.mean_ori_deg)


@dataclass
class EvalReport:
    per_sequence: dict[str, SequenceErrors]
    average: SequenceErrors
    frame_errors: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict, repr=False)

    def rows(self):
        for sid, e in self.per_sequence.items():
            yield sid, e.values()
        yield AVG_ROW, self.average.values()

    def format_table(self) -> str:
        width = max([len(AVG_ROW), *(len(s) for s in self.per_sequence)]) + 2
        lines = ["sequence".ljust(width) + "  ".join(c.rjust(14) for c in COLUMNS)]
        for sid, vals in self.rows():
            lines.append(sid.ljust(width) + "  ".join(f"{v:14.4f}" for v in vals))
        return "\n".join(lines)

    def write(self, path):
        """Whitespace-separated key/value table: one row per sequence plus ``avg``."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("sequence " + " ".join(COLUMNS) + "\n")
            for sid, vals in self.rows():
                fh.write(sid + " " + " ".join(format(v, ".17g") for v in vals) + "\n")

    @classmethod
    def read(cls, path) -> "EvalReport":
        rows = {}
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if tuple(header[1:]) != COLUMNS:
                raise ValueError(f"{path}: unexpected header {header}")
            for line in fh:
                parts = line.split()
                if parts:
                    rows[parts[0]] = SequenceErrors(*map(float, parts[1:5]))
        avg = rows.pop(AVG_ROW)
        return cls(rows, avg)


def _summarise(pos: np.ndarray, ori: np.ndarray) -> SequenceErrors:
    return SequenceErrors(
        float(np.median(pos)), float(np.mean(pos)), float(np.median(ori)), float(np.mean(ori)), len(pos)
    )


def evaluate(predictions, ground_truths, sequence_ids) -> EvalReport:
    """Per-sequence median/mean errors, then an unweighted average over sequences.

    predictions, ground_truths: (N, 3) arrays of ``x, y, theta``.
    sequence_ids: length-N labels.
    """
    pred = np.asarray(predictions, dtype=np.float64).reshape(-1, 3)
    gt = np.asarray(ground_truths, dtype=np.float64).reshape(-1, 3)
    ids = np.asarray(list(sequence_ids))
    if not (len(pred) == len(gt) == len(ids)):
        raise ValueError(f"length mismatch: {len(pred)} predictions, {len(gt)} ground truths, {len(ids)} ids")
    if len(pred) == 0:
        raise ValueError("nothing to evaluate")
    pos_err = np.hypot(pred[:, 0] - gt[:, 0], pred[:, 1] - gt[:, 1])
    ori_err = angular_errors_deg(pred[:, 2], gt[:, 2])
    per_seq, frames = {}, {}
    for sid in sorted(set(ids.tolist())):
        m = ids == sid
        per_seq[sid] = _summarise(pos_err[m], ori_err[m])
        frames[sid] = (pos_err[m], ori_err[m])
    vals = np.array([e.values() for e in per_seq.values()])
    avg = SequenceErrors(*vals.mean(axis=0).tolist(), n=len(pred))
    return EvalReport(per_seq, avg, frames)


DUMP_FIELDS = ("sequence", "frame", "gt_x", "gt_y", "gt_theta", "pred_x", "pred_y", "pred_theta", "pos_err_m", "ori_err_deg")


def write_eval_dump(path, sequence_ids, frames, gt, pred):
    """Per-frame CSV used by the error-map plots."""
    gt = np.asarray(gt, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    pos_err = np.hypot(pred[:, 0] - gt[:, 0], pred[:, 1] - gt[:, 1])
    ori_err = angular_errors_deg(pred[:, 2], gt[:, 2])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(DUMP_FIELDS)
        for i, (sid, fr) in enumerate(zip(sequence_ids, frames)):
            w.writerow([sid, int(fr), *(format(v, ".17g") for v in (*gt[i], *pred[i], pos_err[i], ori_err[i]))])


def read_eval_dump(path) -> dict[str, np.ndarray]:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if rows and set(DUMP_FIELDS) - set(rows[0]):
        raise ValueError(f"{path}: missing columns {sorted(set(DUMP_FIELDS) - set(rows[0]))}")
    out = {"sequence": np.array([r["sequence"] for r in rows])}
    for k in DUMP_FIELDS[1:]:
        out[k] = np.array([float(r[k]) for r in rows])
    return out
