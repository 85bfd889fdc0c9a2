"""Multi-class AdaBoost (SAMME) over weighted Gini decision trees.

One ensemble is trained per balanced subset; prediction sums the weighted
votes of every learner of every ensemble and takes the argmax, ties going to
the first class in the model's class order.

The learning rate ``eta`` scales each learner weight both in the sample
weight update and in the stored vote.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, SingleClassSubset, TooWeak

log = logging.getLogger(__name__)

MODEL_FORMAT = "c2traffic-samme"
MODEL_VERSION = 1
EPS_CLAMP = 1e-10


# -- base learner -----------------------------------------------------------

@dataclass
class DecisionTree:
    """Axis-aligned tree stored as parallel node arrays.

    Node ``i`` is a leaf when ``feature[i] == -1``; otherwise rows with
    ``x[feature] <= threshold`` go to ``left[i]``.
    """

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[int] = field(default_factory=list)

    def _add(self, feature=-1, threshold=0.0, value=-1) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1

    def predict_index(self, X: np.ndarray) -> np.ndarray:
        """Class indices for the rows of ``X``."""
        feat = np.array(self.feature)
        thr = np.array(self.threshold)
        left = np.array(self.left)
        right = np.array(self.right)
        node = np.zeros(len(X), dtype=int)
        rows = np.arange(len(X))
        while True:
            f = feat[node]
            inner = f >= 0
            if not inner.any():
                break
            go_left = X[rows[inner], f[inner]] <= thr[node[inner]]
            node[inner] = np.where(go_left, left[node[inner]], right[node[inner]])
        return np.array(self.value)[node]

    @property
    def depth(self) -> int:
        def d(i):
            return 0 if self.feature[i] < 0 else 1 + max(d(self.left[i]), d(self.right[i]))
        return d(0)

    def to_dict(self) -> dict:
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left, "right": self.right, "value": self.value}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls([int(v) for v in d["feature"]], [float(v) for v in d["threshold"]],
                   [int(v) for v in d["left"]], [int(v) for v in d["right"]],
                   [int(v) for v in d["value"]])


def _split_threshold(lo: float, hi: float) -> float:
    mid = (lo + hi) / 2.0
    return lo if mid >= hi else mid


def fit_tree(X: np.ndarray, yi: np.ndarray, w: np.ndarray, K: int, max_depth: int = 3,
             order: np.ndarray | None = None, feature_order: Sequence[int] | None = None
             ) -> DecisionTree:
    """Weighted-Gini CART tree.

    ``yi`` holds class indices in ``[0, K)``.  ``order`` may carry the
    per-feature argsort of ``X`` (shape features x rows) to reuse across
    boosting rounds.  Among equally good splits the earliest feature in
    ``feature_order`` wins, then the lowest threshold.
    """
    n, F = X.shape
    if order is None:
        order = np.argsort(X, axis=0, kind="stable").T
    if feature_order is None:
        feature_order = range(F)
    fo = np.asarray(list(feature_order), dtype=int)
    order = order[fo]
    onehot = np.eye(K)[yi]
    tree = DecisionTree()

    def leaf_value(mask):
        mass = np.bincount(yi[mask], weights=w[mask], minlength=K)
        return int(np.argmax(mass))

    def grow(mask: np.ndarray, depth: int) -> int:
        node = tree._add(value=leaf_value(mask))
        classes = np.unique(yi[mask])
        if depth >= max_depth or len(classes) < 2:
            return node
        m = int(mask.sum())
        idx = order[mask[order]].reshape(len(fo), m)       # per-feature sorted node rows
        xs = X[idx, fo[:, None]]
        cw = np.cumsum(onehot[idx] * w[idx][..., None], axis=1)
        total = cw[:, -1:, :]
        lw = cw.sum(axis=2)[:, :-1]
        rw = total.sum(axis=2) - lw
        left, right = cw[:, :-1, :], total - cw[:, :-1, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            imp = (lw - (left ** 2).sum(axis=2) / lw) + (rw - (right ** 2).sum(axis=2) / rw)
        valid = (xs[:, 1:] > xs[:, :-1]) & (lw > 0) & (rw > 0)
        if not valid.any():
            return node
        imp = np.where(valid, imp, np.inf)
        W = float(total[0].sum())
        parent = W - float((total[0, 0] ** 2).sum()) / W
        best = imp.min()
        if not best < parent - 1e-12 * W:
            return node
        cand = np.flatnonzero(imp.ravel() <= best + 1e-12 * W)[0]
        fi, j = divmod(int(cand), m - 1)
        f = int(fo[fi])
        thr = _split_threshold(float(xs[fi, j]), float(xs[fi, j + 1]))
        go_left = X[:, f] <= thr
        tree.feature[node] = f
        tree.threshold[node] = thr
        tree.left[node] = grow(mask & go_left, depth + 1)
        tree.right[node] = grow(mask & ~go_left, depth + 1)
        return node

    grow(np.ones(n, dtype=bool), 0)
    return tree


# -- boosting formulas ------------------------------------------------------

def weighted_error(miss: np.ndarray, w: np.ndarray) -> float:
    return float(np.sum(w[miss]) / np.sum(w))


def alpha(eps: float, K: int, eta: float = 1.0) -> float:
    """Learner weight ``eta * (ln((1-eps)/eps) + ln(K-1))`` with eps clamped."""
    e = min(max(eps, EPS_CLAMP), 1.0 - EPS_CLAMP)
    return eta * (math.log((1.0 - e) / e) + math.log(K - 1))


def update_weights(w: np.ndarray, miss: np.ndarray, a: float) -> np.ndarray:
    out = w * np.exp(a * miss.astype(float))
    return out / out.sum()


@dataclass
class Ensemble:
    trees: list[DecisionTree]
    alphas: list[float]
    errors: list[float] = field(default_factory=list)

    def votes(self, X: np.ndarray, K: int) -> np.ndarray:
        scores = np.zeros((len(X), K))
        rows = np.arange(len(X))
        for tree, a in zip(self.trees, self.alphas):
            scores[rows, tree.predict_index(X)] += a
        return scores


def boost(X: np.ndarray, yi: np.ndarray, K: int, T: int = 200, eta: float = 1.0,
          max_depth: int = 3, seed: int = 0) -> Ensemble:
    """SAMME boosting on normalized ``X`` with class indices ``yi``."""
    if T < 1:
        raise ValueError("T must be at least 1")
    if len(np.unique(yi)) < 2:
        raise SingleClassSubset("boosting needs at least two classes in every subset")
    rng = np.random.default_rng(seed)
    order = np.argsort(X, axis=0, kind="stable").T
    w = np.full(len(X), 1.0 / len(X))
    ens = Ensemble([], [], [])
    for _ in range(T):
        try:
            tree, miss, eps = _round(X, yi, w, K, max_depth, order, None)
        except TooWeak:
            perm = rng.permutation(X.shape[1])
            try:
                tree, miss, eps = _round(X, yi, w, K, max_depth, order, perm)
            except TooWeak:
                log.debug("boosting stopped early after %d rounds", len(ens.trees))
                break
        a = alpha(eps, K, eta)
        ens.trees.append(tree)
        ens.alphas.append(a)
        ens.errors.append(eps)
        if eps == 0.0:
            break
        w = update_weights(w, miss, a)
    return ens


def _round(X, yi, w, K, max_depth, order, feature_order):
    tree = fit_tree(X, yi, w, K, max_depth, order, feature_order)
    miss = tree.predict_index(X) != yi
    eps = weighted_error(miss, w)
    if eps >= (K - 1) / K:
        raise TooWeak(f"weighted error {eps:.6f} is no better than chance")
    return tree, miss, eps


# -- model ------------------------------------------------------------------

def class_order(labels: Sequence[str], vocabulary: Sequence[str] = ()) -> list[str]:
    """Known vocabulary labels first in their fixed order, others sorted after."""
    present = set(labels)
    known = [c for c in vocabulary if c in present]
    return known + sorted(present - set(known))


@dataclass
class Model:
    classes: list[str]
    features: list[str]
    lo: list[float]
    hi: list[float]
    ensembles: list[Ensemble]
    eta: float
    T: int
    max_depth: int
    seed: int
    kind: str = ""

    @property
    def K(self) -> int:
        return len(self.classes)

    def normalize(self, X: np.ndarray) -> np.ndarray:
        lo, hi = np.array(self.lo), np.array(self.hi)
        span = hi - lo
        out = np.zeros_like(X, dtype=float)
        nz = span > 0
        out[:, nz] = (X[:, nz] - lo[nz]) / span[nz]
        return out

    def scores(self, X: np.ndarray) -> np.ndarray:
        Xn = self.normalize(np.asarray(X, dtype=float))
        total = np.zeros((len(Xn), self.K))
        for ens in self.ensembles:
            total += ens.votes(Xn, self.K)
        return total

    def predict(self, X: np.ndarray) -> np.ndarray:
        idx = np.argmax(self.scores(X), axis=1)
        return np.array(self.classes, dtype=object)[idx]

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT, "version": MODEL_VERSION, "kind": self.kind,
            "K": self.K, "classes": self.classes, "features": self.features,
            "normalization": {"lo": self.lo, "hi": self.hi},
            "eta": self.eta, "T": self.T, "max_depth": self.max_depth, "seed": self.seed,
            "ensembles": [{"alphas": e.alphas, "errors": e.errors,
                           "trees": [t.to_dict() for t in e.trees]} for e in self.ensembles],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Model":
        if d.get("format") != MODEL_FORMAT:
            raise DataError("not a model file")
        if d.get("version") != MODEL_VERSION:
            raise DataError(f"unsupported model version {d.get('version')}")
        ens = [Ensemble([DecisionTree.from_dict(t) for t in e["trees"]],
                        [float(a) for a in e["alphas"]], [float(x) for x in e["errors"]])
               for e in d["ensembles"]]
        return cls(list(d["classes"]), list(d["features"]),
                   [float(v) for v in d["normalization"]["lo"]],
                   [float(v) for v in d["normalization"]["hi"]], ens, float(d["eta"]),
                   int(d["T"]), int(d["max_depth"]), int(d["seed"]), d.get("kind", ""))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "Model":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: malformed model file ({exc})") from None


def fit(subsets: Sequence, features: Sequence[str], T: int = 200, eta: float = 1.0,
        max_depth: int = 3, seed: int = 0, vocabulary: Sequence[str] = (),
        kind: str = "") -> Model:
    """Train one SAMME ensemble per balanced subset.

    ``subsets`` are objects with ``X`` and ``y`` attributes.  Normalization
    bounds come from all subset rows together.
    """
    if not subsets:
        raise DataError("no training subsets")
    allX = np.vstack([s.X for s in subsets])
    labels = [str(v) for s in subsets for v in s.y]
    classes = class_order(labels, vocabulary)
    if len(classes) < 2:
        raise SingleClassSubset("training data holds a single class")
    index = {c: i for i, c in enumerate(classes)}
    lo, hi = allX.min(axis=0), allX.max(axis=0)
    model = Model(classes, list(features), lo.tolist(), hi.tolist(), [], eta, T, max_depth,
                  seed, kind)
    for i, s in enumerate(subsets):
        yi = np.array([index[str(v)] for v in s.y], dtype=int)
        rng_seed = int(np.random.default_rng([seed, i]).integers(2**63))
        model.ensembles.append(boost(model.normalize(np.asarray(s.X, float)), yi,
                                     len(classes), T, eta, max_depth, rng_seed))
    return model
