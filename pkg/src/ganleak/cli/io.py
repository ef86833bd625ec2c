"""Text formats for checkpoints, loss curves, ROC points and result tables."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = "ganleak-checkpoint 1"
CURVE_COLUMNS = ("iteration", "train_loss_d", "heldout_loss_d", "train_loss_g")
ATTACK_COLUMNS = ("strategy", "objective", "mode", "f1", "auc", "threshold", "n_members", "n_nonmembers", "seed")


def write_checkpoint(path, iteration: int, tensors: dict[str, np.ndarray]) -> None:
    """One ``tensor <name> <ndim> <dims...>`` header per array, then its values in row-major order."""
    with open(path, "w") as fh:
        fh.write(f"{CHECKPOINT_MAGIC}\niteration {iteration}\n")
        for name in sorted(tensors):
            arr = np.asarray(tensors[name], dtype=np.float64)
            fh.write(f"tensor {name} {arr.ndim} {' '.join(map(str, arr.shape))}\n")
            fh.write(" ".join(repr(float(v)) for v in arr.ravel()) + "\n")


def read_checkpoint(path) -> tuple[int, dict[str, np.ndarray]]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    key, value = lines[1].split()
    if key != "iteration":
        raise ValueError(f"{path}: missing iteration line")
    tensors = {}
    for header, body in zip(lines[2::2], lines[3::2]):
        parts = header.split()
        if parts[0] != "tensor":
            raise ValueError(f"{path}: bad tensor header {header!r}")
        ndim = int(parts[2])
        shape = tuple(int(d) for d in parts[3:3 + ndim])
        values = np.array([float(v) for v in body.split()], dtype=np.float64)
        if values.size != int(np.prod(shape)):
            raise ValueError(f"{path}: {parts[1]} has {values.size} values for shape {shape}")
        tensors[parts[1]] = values.reshape(shape)
    return int(value), tensors


def write_curves(path, curves: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CURVE_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for row in curves:
            w.writerow({k: (row[k] if k == "iteration" else f"{row[k]:.10g}") for k in CURVE_COLUMNS})


def write_roc(path, roc: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fpr", "tpr"])
        for fpr, tpr in roc:
            w.writerow([f"{fpr:.10g}", f"{tpr:.10g}"])


def write_rows(path, columns, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow(row)


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def markdown_table(columns, rows: list[dict]) -> str:
    out = ["| " + " | ".join(columns) + " |", "|" + "|".join("---" for _ in columns) + "|"]
    for row in rows:
        out.append("| " + " | ".join(str(row.get(c, "")) for c in columns) + " |")
    return "\n".join(out) + "\n"
