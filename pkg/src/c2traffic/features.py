"""Feature tables shared by the DNS and TCP extractors.

A table is a float matrix with named columns, an optional label per row and
string provenance columns identifying where each row came from.  One-hot
blocks are columns named ``prefix=value``.

CSV layout: feature columns, then ``label``, then provenance columns.  Floats
are written with six decimals so output is byte-stable.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, ParseError

DNS_LABELS = ("Normal", "MaliciousDns", "DnsTunnel")
TCP_LABELS = ("Normal", "Malicious")
LABEL_COLUMN = "label"


@dataclass
class FeatureTable:
    kind: str
    columns: list[str]
    X: np.ndarray
    labels: list[str | None]
    provenance_columns: list[str] = field(default_factory=list)
    provenance: list[tuple[str, ...]] = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(len(self.labels), len(self.columns))
        if self.provenance and len(self.provenance) != len(self.labels):
            raise ValueError("provenance length does not match rows")

    def __len__(self) -> int:
        return len(self.labels)

    def onehot_blocks(self) -> list[list[int]]:
        """Column-index groups that form one-hot blocks, in column order."""
        return onehot_blocks(self.columns)

    def drop(self, names: Sequence[str]) -> "FeatureTable":
        """Copy without the given columns.  A one-hot prefix drops the whole block."""
        gone = set()
        for name in names:
            hits = [c for c in self.columns if c == name or c.startswith(name + "=")]
            if not hits:
                raise DataError(f"no feature column named {name!r}")
            gone.update(hits)
        keep = [i for i, c in enumerate(self.columns) if c not in gone]
        return FeatureTable(self.kind, [self.columns[i] for i in keep], self.X[:, keep],
                            list(self.labels), list(self.provenance_columns),
                            list(self.provenance))

    def subset(self, rows: Sequence[int]) -> "FeatureTable":
        rows = list(rows)
        return FeatureTable(self.kind, list(self.columns), self.X[rows],
                            [self.labels[i] for i in rows], list(self.provenance_columns),
                            [self.provenance[i] for i in rows] if self.provenance else [])

    def labelled(self) -> bool:
        return bool(self.labels) and all(lab is not None for lab in self.labels)

    def y(self) -> np.ndarray:
        if not self.labelled():
            raise DataError("feature table has unlabelled rows")
        return np.array(self.labels, dtype=object)


def onehot_blocks(columns: Sequence[str]) -> list[list[int]]:
    blocks: dict[str, list[int]] = {}
    for i, c in enumerate(columns):
        if "=" in c:
            blocks.setdefault(c.split("=", 1)[0], []).append(i)
    return list(blocks.values())


def _fmt(v: float) -> str:
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


def write_table(table: FeatureTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(table.columns) + [LABEL_COLUMN] + list(table.provenance_columns))
        for i in range(len(table)):
            prov = list(table.provenance[i]) if table.provenance else []
            w.writerow([_fmt(v) for v in table.X[i]]
                       + [table.labels[i] or ""] + prov)


def read_table(path: str | Path, kind: str | None = None) -> FeatureTable:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(fh)
        try:
            header = next(rows)
        except StopIteration:
            raise ParseError(1, "empty feature file") from None
        if LABEL_COLUMN not in header:
            raise ParseError(1, "header has no label column")
        split = header.index(LABEL_COLUMN)
        columns, prov_cols = header[:split], header[split + 1:]
        X, labels, prov = [], [], []
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(lineno, f"expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(v) for v in row[:split]]
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
            if not all(np.isfinite(vals)):
                raise ParseError(lineno, "non-finite feature value")
            X.append(vals)
            labels.append(row[split] or None)
            prov.append(tuple(row[split + 1:]))
    if kind is None:
        kind = "dns" if any(c.startswith("Response_type=") for c in columns) else "tcp"
    return FeatureTable(kind, columns, np.array(X, dtype=float).reshape(len(X), len(columns)),
                        labels, prov_cols, prov if prov_cols else [])


def read_label_sidecar(path: str | Path) -> list[tuple[tuple[str, ...], str]]:
    """Rows of ``key fields..., label``; ``*`` in a key field matches anything."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or header[-1] != LABEL_COLUMN:
            raise ParseError(1, "label file header must end with 'label'")
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(lineno, f"expected {len(header)} fields, got {len(row)}")
            out.append((tuple(row[:-1]), row[-1]))
    return out


def label_key_columns(path: str | Path) -> list[str]:
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if not header:
        raise ParseError(1, "empty label file")
    return header[:-1]


def apply_labels(table: FeatureTable, path: str | Path, default: str | None = None) -> None:
    """Fill ``table.labels`` from a sidecar keyed by provenance columns.

    Exact keys are matched first, then wildcard rows in file order.  Rows with
    no match get ``default``.
    """
    keys = label_key_columns(path)
    missing = [k for k in keys if k not in table.provenance_columns]
    if missing:
        raise DataError(f"label keys {missing} are not provenance columns")
    idx = [table.provenance_columns.index(k) for k in keys]
    # wildcard rows are indexed by which positions they fix; the earliest
    # matching row in file order wins
    exact: dict = {}
    wild: dict[tuple, dict] = {}
    for n, (key, label) in enumerate(read_label_sidecar(path)):
        if "*" in key:
            fixed = tuple(i for i, p in enumerate(key) if p != "*")
            wild.setdefault(fixed, {}).setdefault(tuple(key[i] for i in fixed), (n, label))
        else:
            exact[key] = label
    for r, prov in enumerate(table.provenance):
        key = tuple(prov[i] for i in idx)
        label = exact.get(key)
        if label is None:
            hits = [m[tuple(key[i] for i in fixed)] for fixed, m in wild.items()
                    if tuple(key[i] for i in fixed) in m]
            if hits:
                label = min(hits)[1]
        table.labels[r] = label if label is not None else default


def write_label_sidecar(path: str | Path, key_columns: Sequence[str],
                        rows: Sequence[tuple[tuple[str, ...], str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(key_columns) + [LABEL_COLUMN])
        for key, label in rows:
            w.writerow(list(key) + [label])
