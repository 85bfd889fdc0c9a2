"""Glue between the stages: records -> feature table -> balanced subsets -> model."""
from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import Config
from .dns_features import dns_table
from .errors import DataError
from .features import (DNS_LABELS, TCP_LABELS, FeatureTable, _fmt, apply_labels,
                       read_table)
from .ingest import PacketRecord, read_pcap, read_records
from .intel import IntelMaps, load_maps
from . import padasyn
from .padasyn import BalancedSubset
from .samme import Model, fit
from .tcp_features import tcp_table

log = logging.getLogger(__name__)

PCAP_MAGICS = (b"\xd4\xc3\xb2\xa1", b"\xa1\xb2\xc3\xd4")
SUBSET_COLUMN = "subset"
SYNTHETIC_COLUMN = "synthetic"


def vocabulary(kind: str) -> tuple[str, ...]:
    return DNS_LABELS if kind == "dns" else TCP_LABELS


def load_packets(path: str | Path) -> list[PacketRecord]:
    """Read a pcap file or a line-record file, chosen by the leading magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head in PCAP_MAGICS:
        reader = read_pcap(path)
        records = list(reader)
        if reader.skip_count:
            log.info("skipped %d non-IPv4/UDP/TCP frames", reader.skip_count)
        return records
    return list(read_records(path))


def intel_maps(config: Config) -> IntelMaps:
    return load_maps(config.intel.alexa, config.intel.vt, config.intel.geo)


def extract(records: Sequence[PacketRecord], kind: str, config: Config,
            maps: IntelMaps | None = None, labels_path: str | Path | None = None,
            default_label: str | None = None) -> FeatureTable:
    """Build the DNS or TCP feature table, optionally labelled from a sidecar."""
    maps = maps if maps is not None else intel_maps(config)
    f = config.features
    if kind == "dns":
        table = dns_table(records, maps, f.window, f.port_weights)
    elif kind == "tcp":
        table = tcp_table(records, maps, f.max_duration, f.idle_timeout, f.port_weights)
    else:
        raise DataError(f"unknown traffic kind {kind!r}")
    if labels_path is not None:
        apply_labels(table, labels_path, default_label)
    return table


def balance_table(table: FeatureTable, config: Config) -> list[BalancedSubset]:
    return padasyn.balance(table.X, table.y(), config.balance_config(), table.onehot_blocks())


def write_balanced(subsets: Sequence[BalancedSubset], columns: Sequence[str],
                   path: str | Path) -> None:
    """Feature columns, label, then ``synthetic`` (0/1) and ``subset`` index."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(columns) + ["label", SYNTHETIC_COLUMN, SUBSET_COLUMN])
        for i, s in enumerate(subsets):
            for row, lab, syn in zip(s.X, s.y, s.synthetic):
                w.writerow([_fmt(v) for v in row] + [lab, int(bool(syn)), i])


def subsets_from_table(table: FeatureTable) -> list[BalancedSubset] | None:
    """Recover balanced subsets from a table read back from a balanced file."""
    if SUBSET_COLUMN not in table.provenance_columns:
        return None
    si = table.provenance_columns.index(SUBSET_COLUMN)
    yi = table.provenance_columns.index(SYNTHETIC_COLUMN)
    groups: dict[int, list[int]] = {}
    for r, prov in enumerate(table.provenance):
        groups.setdefault(int(prov[si]), []).append(r)
    y = table.y()
    return [BalancedSubset(table.X[rows], y[rows],
                           np.array([table.provenance[r][yi] == "1" for r in rows]), g)
            for g, rows in sorted(groups.items())]


def train_model(table: FeatureTable, config: Config, balance: bool = True) -> Model:
    """Fit on ``table``; balance first unless disabled or the table is already balanced."""
    subsets = subsets_from_table(table)
    if subsets is None:
        if balance:
            subsets = balance_table(table, config)
        else:
            subsets = [BalancedSubset(table.X, table.y(), np.zeros(len(table), bool), 0)]
    b = config.boost
    return fit(subsets, table.columns, b.T, b.eta, b.max_depth, config.run.seed,
               vocabulary(table.kind), table.kind)


def align(model: Model, table: FeatureTable) -> np.ndarray:
    """Feature matrix of ``table`` in the model's column order (missing one-hot slots are 0)."""
    index = {c: i for i, c in enumerate(table.columns)}
    X = np.zeros((len(table), len(model.features)))
    for j, name in enumerate(model.features):
        if name in index:
            X[:, j] = table.X[:, index[name]]
        elif "=" not in name:
            raise DataError(f"feature table lacks column {name!r}")
    return X


def predict_table(model: Model, table: FeatureTable) -> np.ndarray:
    if len(table) == 0:
        return np.array([], dtype=object)
    return model.predict(align(model, table))


def load_table(path: str | Path) -> FeatureTable:
    return read_table(path)
