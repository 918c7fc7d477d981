"""Non-parametric meta-path importance: init, evaluate, update, normalize."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


def parse_norm(name: str) -> tuple[str, float]:
    """Map ``softmax`` / ``l1`` / ``l2`` / ``lp`` (e.g. ``l3``) to ``(mode, p)``."""
    key = str(name).strip().lower()
    if key == "softmax":
        return "softmax", 1.0
    if key.startswith("l"):
        try:
            p = float(key[1:])
        except ValueError:
            pass
        else:
            if p >= 1:
                return "pnorm", p
    raise ValueError(f"unknown normalization {name!r} (softmax, l1, l2, ...)")


def norm_name(mode: str, p: float) -> str:
    return "softmax" if mode == "softmax" else f"l{p:g}"


@dataclass(frozen=True)
class ImportanceVector:
    mu: np.ndarray
    gamma: float = 0.5
    norm_mode: str = "pnorm"
    p: float = 1.0
    t: int = 0

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        if mu.ndim != 1 or len(mu) == 0:
            raise ValueError("mu must be a non-empty vector")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.norm_mode not in ("softmax", "pnorm"):
            raise ValueError(f"unknown norm mode {self.norm_mode!r}")

    @property
    def M(self) -> int:
        return len(self.mu)

    def __len__(self) -> int:
        return len(self.mu)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.mu, dtype=dtype)


def init(M: int, gamma: float = 0.5, norm: str = "l1") -> ImportanceVector:
    """Every weight starts at ``1/M``."""
    if M < 1:
        raise ValueError("M must be at least 1")
    mode, p = parse_norm(norm)
    return ImportanceVector(np.full(M, 1.0 / M), gamma=gamma, norm_mode=mode, p=p)


def update(prev: ImportanceVector, immediate: Mapping[int, float]) -> ImportanceVector:
    """``mu_t = gamma * mu_{t-1} + acc_t``; paths absent from ``immediate`` only decay."""
    acc = np.zeros(prev.M)
    for m, value in immediate.items():
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"accuracy for path {m} outside [0, 1]: {value}")
        acc[int(m)] = value
    return replace(prev, mu=prev.mu * prev.gamma + acc, t=prev.t + 1)


def normalize(iv: ImportanceVector) -> ImportanceVector:
    """Softmax or ``mu / ||mu||_p``.

    A p-norm of zero (nothing evaluated and gamma = 0) resets to uniform.
    """
    mu = iv.mu
    if iv.norm_mode == "softmax":
        e = np.exp(mu - mu.max())
        out = e / e.sum()
    else:
        denom = np.linalg.norm(mu, ord=iv.p)
        out = mu / denom if denom > 0 else np.full(iv.M, 1.0 / iv.M)
    return replace(iv, mu=out)


def top_k(mu, K: int) -> list[int]:
    """Indices of the ``K`` largest weights, descending; ties go to the lower index."""
    mu = np.asarray(getattr(mu, "mu", mu), dtype=float)
    if not 1 <= K <= len(mu):
        raise ValueError(f"K must lie in [1, {len(mu)}], got {K}")
    order = np.lexsort((np.arange(len(mu)), -mu))
    return [int(i) for i in order[:K]]


def evaluate_path(model, features, path_index: int, val_idx: Sequence[int], labels, mu) -> float:
    """Validation accuracy of the frozen model with only ``path_index`` active."""
    from lts.backbone import predict

    val_idx = np.asarray(val_idx, dtype=np.int64)
    if len(val_idx) == 0:
        raise ValueError("validation set is empty")
    pred = predict(model, features, mu, [path_index], rows=val_idx)
    gold = np.asarray(labels)[val_idx]
    return float(np.mean(pred == gold))


# --------------------------------------------------------------------------
# snapshots
# --------------------------------------------------------------------------

def write_trajectory(path: str | Path, names: Sequence[str], trajectory: Sequence[np.ndarray]) -> None:
    """CSV with columns ``iteration,canonical_name,weight``; row 0 is the initial vector."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "canonical_name", "weight"])
        for it, mu in enumerate(trajectory):
            for name, v in zip(names, mu):
                w.writerow([it, name, repr(float(v))])


def read_trajectory(path: str | Path) -> tuple[list[str], list[np.ndarray]]:
    rows: dict[int, list[tuple[str, float]]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"iteration", "canonical_name", "weight"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing column(s) {sorted(missing)}")
        for row in reader:
            rows.setdefault(int(row["iteration"]), []).append((row["canonical_name"], float(row["weight"])))
    if not rows:
        raise ValueError(f"{path}: no importance snapshots")
    names = [n for n, _ in rows[min(rows)]]
    traj = [np.array([v for _, v in rows[it]]) for it in sorted(rows)]
    return names, traj
