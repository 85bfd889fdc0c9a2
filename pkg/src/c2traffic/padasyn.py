"""Imbalance correction: gated, EasyEnsemble-style majority subsampling with
border-focused adaptive synthesis of the minority classes.

Pipeline for a labelled dataset with up to three classes (roles ``max``,
``mid``, ``min`` by descending count):

1. imbalance ``d = M_min/M_mid + (M_mid + M_min)/M_max``; refuse unless
   ``0 < d < d_th``.
2. ``n = ceil(M_max / M_mid)`` generators.  Generator ``i`` (1-based) draws
   ``floor(rho * M_mid)`` majority rows with replacement.
3. Synthesis targets per class, then per-sample counts proportional to the
   foreign-neighbour ratio of border samples.
4. Interpolation ``x + lam * (tau - x)`` toward a same-class neighbour.

Randomness protocol (shared with the reference implementation in the tests):
generator ``i`` uses ``np.random.default_rng(seed ^ i)``; it first draws the
majority indices with one ``integers(0, M_max, size=M~)`` call, then for each
synthetic row one ``integers(len(candidates))`` and one ``random()`` call, mid
class before min class, samples in pool order.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import CannotCorrect, DataError, DegenerateCounts, NegativeTarget

log = logging.getLogger(__name__)

ISOLATED, INTERIOR, BORDER = "Isolated", "Interior", "Border"


@dataclass(frozen=True)
class ClassCounts:
    M_max: int
    M_mid: int
    M_min: int = 0


@dataclass(frozen=True)
class BalanceConfig:
    d_th3: float = 0.9
    d_th2: float = 0.95
    rho: float = 1.0
    alpha: float = 1.0
    k: int = 5
    delta_type_th: int = 1
    delta_another_th: int = 1
    seed: int = 0
    passthrough: bool = False

    def __post_init__(self):
        if not 1.0 <= self.rho <= 1.5:
            raise ValueError(f"rho must lie in [1, 1.5], got {self.rho}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.delta_type_th < 0 or self.delta_another_th < 0:
            raise ValueError("neighbour thresholds must be non-negative")
        if not (self.d_th2 > 0 and self.d_th3 > 0):
            raise ValueError("imbalance thresholds must be positive")


@dataclass(frozen=True)
class BorderStatus:
    status: str
    delta_type: int
    delta_another: int


@dataclass
class BalancedSubset:
    X: np.ndarray
    y: np.ndarray
    synthetic: np.ndarray
    generator_index: int
    border: dict = field(default_factory=dict)     # minority label -> border sample count

    def counts(self) -> dict:
        labels, n = np.unique(self.y, return_counts=True)
        return dict(zip(labels.tolist(), n.tolist()))


# -- formulas ---------------------------------------------------------------

def imbalance(counts: ClassCounts) -> float:
    """Imbalance degree ``d``; 0 for a single class."""
    if counts.M_max < 1:
        raise DegenerateCounts("no majority samples")
    if counts.M_mid == 0:
        if counts.M_min > 0:
            raise DegenerateCounts("min class present without a mid class")
        return 0.0
    return counts.M_min / counts.M_mid + (counts.M_mid + counts.M_min) / counts.M_max


def gate(d: float, counts: ClassCounts, config: BalanceConfig) -> bool:
    """True iff ``0 < d < d_th`` for the dataset's class arity."""
    threshold = config.d_th3 if counts.M_min > 0 else config.d_th2
    return 0.0 < d < threshold


def generator_count(counts: ClassCounts) -> int:
    return -(-counts.M_max // counts.M_mid)


def subsample_size(M_mid: int, rho: float) -> int:
    return math.floor(rho * M_mid)


def synthesis_targets(M_tilde: int, counts: ClassCounts, alpha: float,
                      two_class: bool | None = None) -> tuple[Fraction, Fraction, Fraction]:
    """(G_mid, G_min_type, G_min_mid) as exact fractions.

    In the two-class case the single minority target is ``M_tilde - M_mid``
    regardless of alpha and the min-class targets are zero.
    """
    if two_class is None:
        two_class = counts.M_min == 0
    if M_tilde < counts.M_mid or counts.M_mid < counts.M_min:
        raise NegativeTarget(f"targets undefined for M~={M_tilde}, counts={counts}")
    a = Fraction(alpha)
    if two_class:
        return Fraction(M_tilde - counts.M_mid), Fraction(0), Fraction(0)
    g_type = a * (M_tilde - counts.M_mid)
    g_min_mid = (1 - a) * M_tilde + a * counts.M_mid - counts.M_min
    return g_type, g_type, g_min_mid


def classify_neighbors(delta_type: int, delta_another: int, k: int, config: BalanceConfig,
                       two_class: bool) -> BorderStatus:
    """Isolated / Interior / Border from the foreign-neighbour counts."""
    if two_class:
        delta_another = 0
    if delta_type + delta_another == k:
        return BorderStatus(ISOLATED, delta_type, delta_another)
    interior = delta_type < config.delta_type_th
    if not two_class:
        interior = interior or delta_another < config.delta_another_th
    return BorderStatus(INTERIOR if interior else BORDER, delta_type, delta_another)


def per_sample_counts(deltas: Sequence[int], k: int, G: Fraction,
                      extra: Sequence[int] | None = None, G_extra: Fraction = Fraction(0)
                      ) -> list[int]:
    """``ceil(r~_i * G + r~extra_i * G_extra)`` with ``r = delta / k`` normalized.

    ``extra`` supplies a second ratio (mid-class neighbours around min-class
    samples) used to spread ``G_extra``; when its ratios sum to zero the
    primary ratios are reused.  Zero primary ratios fall back to uniform.
    """
    n = len(deltas)
    if n == 0:
        return []
    r = [Fraction(dl, k) for dl in deltas]
    total = sum(r)
    rt = [x / total for x in r] if total else [Fraction(1, n)] * n
    rm = rt
    if extra is not None:
        re = [Fraction(dl, k) for dl in extra]
        etotal = sum(re)
        if etotal:
            rm = [x / etotal for x in re]
    return [math.ceil(a * G + b * G_extra) for a, b in zip(rt, rm)]


def synthesize(x: np.ndarray, tau: np.ndarray, lam: float,
               blocks: Sequence[Sequence[int]] = ()) -> np.ndarray:
    """Interpolate ``x + lam * (tau - x)``; one-hot blocks snap to an endpoint."""
    s = x + lam * (tau - x)
    s = np.minimum(np.maximum(s, np.minimum(x, tau)), np.maximum(x, tau))
    src = x if lam <= 0.5 else tau
    for block in blocks:
        s[list(block)] = src[list(block)]
    return s


# -- pipeline ---------------------------------------------------------------

def class_roles(y: Sequence) -> list:
    """Labels ordered max, mid, min by count; ties by label order."""
    labels, counts = np.unique(np.asarray(y, dtype=object), return_counts=True)
    order = sorted(range(len(labels)), key=lambda i: (-counts[i], str(labels[i])))
    return [labels[i] for i in order]


def minmax_normalize(X: np.ndarray) -> np.ndarray:
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = hi - lo
    out = np.zeros_like(X, dtype=float)
    nz = span > 0
    out[:, nz] = (X[:, nz] - lo[nz]) / span[nz]
    return out


def _sq_dist(P: np.ndarray, x: np.ndarray) -> np.ndarray:
    acc = np.zeros(P.shape[0])
    for j in range(P.shape[1]):
        acc += (P[:, j] - x[j]) ** 2
    return acc


def _neighbors(Pn: np.ndarray, i: int, k: int) -> np.ndarray:
    d = _sq_dist(Pn, Pn[i])
    d[i] = np.inf
    return np.argsort(d, kind="stable")[:k]


def balance(X: np.ndarray, y: Sequence, config: BalanceConfig = BalanceConfig(),
            blocks: Sequence[Sequence[int]] = ()) -> list[BalancedSubset]:
    """Run the full balancing pipeline and return the n balanced subsets."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=object)
    if X.ndim != 2 or len(X) != len(y):
        raise DataError("feature matrix and labels disagree in length")
    roles = class_roles(y)
    if len(roles) > 3:
        raise DataError(f"at most three classes are supported, got {len(roles)}")
    n_of = {lab: int(np.sum(y == lab)) for lab in roles}
    counts = ClassCounts(n_of[roles[0]] if roles else 0,
                         n_of[roles[1]] if len(roles) > 1 else 0,
                         n_of[roles[2]] if len(roles) > 2 else 0)
    if counts.M_max == 0:
        raise DegenerateCounts("empty dataset")
    d = imbalance(counts)
    if not gate(d, counts, config):
        threshold = config.d_th3 if counts.M_min > 0 else config.d_th2
        if config.passthrough:
            log.warning("imbalance d=%.6f outside (0, %s); passing data through", d, threshold)
            return [BalancedSubset(X.copy(), y.copy(), np.zeros(len(y), bool), 1)]
        raise CannotCorrect(d, threshold)

    two_class = len(roles) == 2
    n = generator_count(counts)
    M_tilde = subsample_size(counts.M_mid, config.rho)
    g_mid, g_min, g_mm = synthesis_targets(M_tilde, counts, config.alpha, two_class)
    Xn = minmax_normalize(X)
    major_rows = np.flatnonzero(y == roles[0])
    minority = [np.flatnonzero(y == lab) for lab in roles[1:]]
    log.info("balancing: counts=%s d=%.6f generators=%d M~=%d", counts, d, n, M_tilde)
    return [_generate(i, X, Xn, y, roles, major_rows, minority, M_tilde,
                      (g_mid, g_min, g_mm), config, blocks, two_class)
            for i in range(1, n + 1)]


def _generate(i, X, Xn, y, roles, major_rows, minority, M_tilde, targets, config, blocks,
              two_class) -> BalancedSubset:
    rng = np.random.default_rng(config.seed ^ i)
    draw = major_rows[rng.integers(0, len(major_rows), size=M_tilde)]
    pool = np.concatenate([draw] + minority)
    pool_y = y[pool]
    Pn = Xn[pool]
    k = min(config.k, len(pool) - 1)
    g_mid, g_min, g_mm = targets

    synth_X: list[np.ndarray] = []
    synth_y: list = []
    border: dict = {}
    offset = len(draw)
    for c, label in enumerate(roles[1:]):
        size = len(minority[c])
        positions = np.arange(offset, offset + size)
        offset += size
        if c == 0:
            G, G_extra = g_mid, Fraction(0)
        else:
            G, G_extra = g_min, g_mm
        if G + G_extra <= 0:
            continue
        other = roles[2] if c == 0 and len(roles) > 2 else roles[1] if c == 1 else None

        neigh, status = {}, {}
        for p in positions:
            nb = _neighbors(Pn, p, k) if k > 0 else np.array([], dtype=int)
            neigh[p] = nb
            dt = int(np.sum(pool_y[nb] == roles[0]))
            da = int(np.sum(pool_y[nb] == other)) if other is not None else 0
            status[p] = classify_neighbors(dt, da, k, config, two_class)

        chosen = [p for p in positions if status[p].status == BORDER]
        border[label] = len(chosen)
        if chosen:
            deltas = [status[p].delta_type for p in chosen]
            extra = [status[p].delta_another for p in chosen] if c == 1 else None
            g = per_sample_counts(deltas, k, G, extra, G_extra)
        else:
            chosen = [p for p in positions if status[p].status != ISOLATED] or list(positions)
            total = G + G_extra
            g = [math.ceil(total / len(chosen))] * len(chosen)
            log.debug("generator %d: no border samples in class %r; uniform allocation",
                        i, label)

        same = pool_y == label
        for p, count in zip(chosen, g):
            if count <= 0:
                continue
            nb = neigh[p]
            cands = nb[same[nb]]
            if len(cands) == 0:
                # isolated: fall back to the nearest same-class rows
                d = _sq_dist(Pn, Pn[p])
                d[p] = np.inf
                d[~same] = np.inf
                order = np.argsort(d, kind="stable")
                cands = order[:min(config.k, int(same.sum()) - 1)]
            x = X[pool[p]]
            for _ in range(count):
                if len(cands) == 0:
                    synth_X.append(x.copy())
                    continue
                j = int(rng.integers(len(cands)))
                lam = float(rng.random())
                synth_X.append(synthesize(x, X[pool[cands[j]]], lam, blocks))
            synth_y.extend([label] * count)

    n_orig = len(pool)
    out_X = np.vstack([X[pool]] + synth_X) if synth_X else X[pool].copy()
    out_y = np.concatenate([pool_y, np.array(synth_y, dtype=object)])
    synthetic = np.zeros(len(out_y), dtype=bool)
    synthetic[n_orig:] = True
    return BalancedSubset(out_X, out_y, synthetic, i, border)
