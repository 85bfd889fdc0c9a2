"""Splitting, confusion matrices, F1 / precision, learning-rate sweeps and plot data."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .features import FeatureTable

DEFAULT_GRID = (0.2, 0.4, 0.6, 0.8, 1.0)


def split(labels: Sequence, ratio: float = 0.8, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Stratified split into (train, test) row indices.

    Each class contributes ``floor(ratio * n_c + 0.5)`` rows to the training
    side.  Both index arrays come back sorted.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    labels = np.asarray(labels, dtype=object)
    rng = np.random.default_rng([seed, 5])
    train, test = [], []
    for lab in sorted(set(labels.tolist()), key=str):
        rows = np.flatnonzero(labels == lab)
        rows = rows[rng.permutation(len(rows))]
        cut = math.floor(ratio * len(rows) + 0.5)
        train.append(rows[:cut])
        test.append(rows[cut:])
    return (np.sort(np.concatenate(train)) if train else np.array([], int),
            np.sort(np.concatenate(test)) if test else np.array([], int))


@dataclass
class ConfusionMatrix:
    classes: list[str]
    counts: np.ndarray        # rows: true class, columns: predicted class

    @classmethod
    def from_labels(cls, y_true: Sequence, y_pred: Sequence,
                    classes: Sequence[str]) -> "ConfusionMatrix":
        classes = list(classes)
        index = {c: i for i, c in enumerate(classes)}
        extra = sorted({str(v) for v in list(y_true) + list(y_pred)} - set(classes))
        for c in extra:
            index[c] = len(classes)
            classes.append(c)
        m = np.zeros((len(classes), len(classes)), dtype=int)
        for t, p in zip(y_true, y_pred):
            m[index[str(t)], index[str(p)]] += 1
        return cls(classes, m)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_dict(self) -> dict:
        return {"classes": self.classes, "counts": self.counts.tolist()}


def precision(cm: ConfusionMatrix, cls: str) -> float:
    i = cm.classes.index(cls)
    predicted = cm.counts[:, i].sum()
    return float(cm.counts[i, i] / predicted) if predicted else 0.0


def recall(cm: ConfusionMatrix, cls: str) -> float:
    i = cm.classes.index(cls)
    support = cm.counts[i, :].sum()
    return float(cm.counts[i, i] / support) if support else 0.0


def class_f1(cm: ConfusionMatrix, cls: str) -> float:
    p, r = precision(cm, cls), recall(cm, cls)
    return 2 * p * r / (p + r) if p + r else 0.0


def f1(cm: ConfusionMatrix, average: str = "macro", positive: str | None = None) -> float:
    """Macro F1 over all classes, or binary F1 of ``positive``."""
    if average == "macro":
        return float(np.mean([class_f1(cm, c) for c in cm.classes])) if cm.classes else 0.0
    if average == "binary":
        if positive is None:
            raise ValueError("binary F1 needs a positive class")
        return class_f1(cm, positive)
    raise ValueError(f"unknown averaging mode {average!r}")


def metric_mode(kind: str, classes: Sequence[str], mode: str = "auto") -> tuple[str, str | None]:
    """Resolve ``auto``: macro for DNS, binary on ``Malicious`` for TCP."""
    if mode == "auto":
        if kind == "tcp" and "Malicious" in classes:
            return "binary", "Malicious"
        return "macro", None
    if mode == "macro":
        return "macro", None
    if mode.startswith("binary:"):
        return "binary", mode.split(":", 1)[1]
    raise ValueError(f"unknown metric mode {mode!r}")


def evaluate(y_true: Sequence, y_pred: Sequence, classes: Sequence[str], kind: str = "",
             mode: str = "auto") -> dict:
    cm = ConfusionMatrix.from_labels(y_true, y_pred, classes)
    average, positive = metric_mode(kind, cm.classes, mode)
    return {
        "rows": cm.total,
        "confusion": cm.to_dict(),
        "f1": f1(cm, average, positive),
        "f1_mode": average if positive is None else f"binary:{positive}",
        "macro_f1": f1(cm, "macro"),
        "precision": {c: precision(cm, c) for c in cm.classes},
        "recall": {c: recall(cm, c) for c in cm.classes},
        "accuracy": float(np.trace(cm.counts) / cm.total) if cm.total else 0.0,
    }


def write_report(report: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def sweep(train: FeatureTable, test: FeatureTable, grid: Sequence[float], config,
          balance: bool = True) -> list[tuple[float, float]]:
    """Fit and score one model per learning rate; returns (eta, F1) rows."""
    from dataclasses import replace

    from .pipeline import predict_table, train_model

    rows = []
    for eta in grid:
        cfg = replace(config, boost=replace(config.boost, eta=float(eta)))
        model = train_model(train, cfg, balance=balance)
        pred = predict_table(model, test)
        rep = evaluate(test.labels, pred, model.classes, test.kind, cfg.run.metric)
        rows.append((float(eta), rep["f1"]))
    return rows


def write_sweep(rows: Sequence[tuple[float, float]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eta", "f1"])
        for eta, score in rows:
            w.writerow([f"{eta:g}", f"{score:.6f}"])


def emit_plot_data(table: FeatureTable, feature: str, path: str | Path) -> int:
    """Write ``index,value,label`` rows in chronological order; returns the row count."""
    if feature not in table.columns:
        raise DataError(f"no feature column named {feature!r}")
    col = table.columns.index(feature)
    order = list(range(len(table)))
    if "ts" in table.provenance_columns and table.provenance:
        t = table.provenance_columns.index("ts")
        order.sort(key=lambda i: (float(table.provenance[i][t]), i))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", feature, "label"])
        for n, i in enumerate(order):
            w.writerow([n, f"{table.X[i, col]:.6f}", table.labels[i] or ""])
    return len(order)
