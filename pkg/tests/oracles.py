"""Straight-line reference implementations used as test oracles.

The balancing reference shares only the random-number protocol with the
package code: everything else (counting, neighbour search, allocation,
interpolation) is written out independently with plain Python lists.  The
boosting references share only the weak learner and implement the textbook
two-class AdaBoost updates.
"""
import math
from fractions import Fraction

import numpy as np

from c2traffic.samme import fit_tree


def ref_balance(rows, labels, *, rho, alpha, k, th_type, th_another, seed, blocks=()):
    """Brute-force balancing.  Returns a list of (rows, labels, synthetic_flags)."""
    names = sorted(set(labels), key=lambda c: (-labels.count(c), str(c)))
    M = [labels.count(c) for c in names]
    while len(M) < 3:
        M.append(0)
    M_max, M_mid, M_min = M
    two = len(names) == 2

    # normalize each column to [0, 1]; constant columns become 0
    dims = len(rows[0])
    norm = [list(r) for r in rows]
    for j in range(dims):
        col = [r[j] for r in rows]
        lo, hi = min(col), max(col)
        for r in norm:
            r[j] = (r[j] - lo) / (hi - lo) if hi > lo else 0.0

    n = math.ceil(Fraction(M_max, M_mid))
    M_t = math.floor(rho * M_mid)
    a = Fraction(alpha)
    if two:
        G = {names[1]: (Fraction(M_t - M_mid), Fraction(0))}
    else:
        G = {names[1]: (a * (M_t - M_mid), Fraction(0)),
             names[2]: (a * (M_t - M_mid), (1 - a) * M_t + a * M_mid - M_min)}

    major = [i for i, lab in enumerate(labels) if lab == names[0]]
    out = []
    for gen in range(1, n + 1):
        rng = np.random.default_rng(seed ^ gen)
        picks = rng.integers(0, len(major), size=M_t)
        pool = [major[int(p)] for p in picks]
        for c in names[1:]:
            pool += [i for i, lab in enumerate(labels) if lab == c]
        kk = min(k, len(pool) - 1)

        def knn(p):
            dist = []
            for q in range(len(pool)):
                if q == p:
                    continue
                s = 0.0
                for j in range(dims):
                    s += (norm[pool[p]][j] - norm[pool[q]][j]) ** 2
                dist.append((s, q))
            dist.sort()
            return [q for _, q in dist[:kk]]

        new_rows, new_labels = [], []
        for ci, c in enumerate(names[1:]):
            G_main, G_extra = G[c]
            if G_main + G_extra <= 0:
                continue
            other = None
            if not two:
                other = names[2] if ci == 0 else names[1]
            members = [p for p in range(len(pool)) if labels[pool[p]] == c]
            info = []
            for p in members:
                nb = knn(p)
                dt = sum(labels[pool[q]] == names[0] for q in nb)
                da = sum(labels[pool[q]] == other for q in nb) if other else 0
                if dt + da == kk:
                    kind = "iso"
                elif dt < th_type or (not two and da < th_another):
                    kind = "int"
                else:
                    kind = "bor"
                info.append((p, nb, dt, da, kind))

            border = [t for t in info if t[4] == "bor"]
            if border:
                rt = [Fraction(t[2], kk) for t in border]
                s = sum(rt)
                rt = [x / s for x in rt] if s else [Fraction(1, len(border))] * len(border)
                rm = rt
                if ci == 1:
                    re = [Fraction(t[3], kk) for t in border]
                    if sum(re):
                        rm = [x / sum(re) for x in re]
                counts = [math.ceil(x * G_main + y * G_extra) for x, y in zip(rt, rm)]
                chosen = border
            else:
                chosen = [t for t in info if t[4] != "iso"] or info
                counts = [math.ceil((G_main + G_extra) / len(chosen))] * len(chosen)

            for (p, nb, _, _, _), cnt in zip(chosen, counts):
                cands = [q for q in nb if labels[pool[q]] == c]
                if not cands:
                    same = []
                    for q in range(len(pool)):
                        if q != p and labels[pool[q]] == c:
                            s = 0.0
                            for j in range(dims):
                                s += (norm[pool[p]][j] - norm[pool[q]][j]) ** 2
                            same.append((s, q))
                    same.sort()
                    cands = [q for _, q in same[:k]]
                x = rows[pool[p]]
                for _ in range(cnt):
                    if not cands:
                        new_rows.append(list(x))
                        new_labels.append(c)
                        continue
                    tau = rows[pool[cands[int(rng.integers(len(cands)))]]]
                    lam = float(rng.random())
                    s = []
                    for xj, tj in zip(x, tau):
                        v = xj + lam * (tj - xj)
                        s.append(min(max(v, min(xj, tj)), max(xj, tj)))
                    src = x if lam <= 0.5 else tau
                    for block in blocks:
                        for j in block:
                            s[j] = src[j]
                    new_rows.append(s)
                    new_labels.append(c)
        out.append(([list(rows[i]) for i in pool] + new_rows,
                    [labels[i] for i in pool] + new_labels,
                    [False] * len(pool) + [True] * len(new_rows)))
    return out


# -- boosting ---------------------------------------------------------------

def noisy_two_class(seed, n=120, dims=4):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, dims))
    y = ((X[:, 0] + 0.8 * X[:, 1] ** 2 + rng.normal(0, 0.7, n)) > 0.5).astype(int)
    return X, y


def ref_adaboost_m1(X, y, T, max_depth):
    """Classic two-class AdaBoost (AdaBoost.M1 weight form)."""
    w = np.full(len(y), 1.0 / len(y))
    order = np.argsort(X, axis=0, kind="stable").T
    alphas, post_errors = [], []
    for _ in range(T):
        tree = fit_tree(X, y, w, 2, max_depth, order)
        miss = tree.predict_index(X) != y
        eps = float(np.sum(w[miss]) / np.sum(w))
        if eps >= 0.5:
            break
        e = min(max(eps, 1e-10), 1 - 1e-10)
        a = math.log((1 - e) / e)
        alphas.append(a)
        if eps == 0:
            break
        w = w * np.exp(a * miss.astype(float))
        w = w / w.sum()
        post_errors.append(float(np.sum(w[miss])))
    return alphas, post_errors


def ref_adaboost_exponential(X, y, T, max_depth):
    """Classic +/-1 form: alpha = 1/2 ln((1-e)/e), w *= exp(-alpha * y * h)."""
    s = np.where(y == 1, 1.0, -1.0)
    w = np.full(len(y), 1.0 / len(y))
    out = []
    for _ in range(T):
        tree = fit_tree(X, y, w, 2, max_depth)
        h = np.where(tree.predict_index(X) == 1, 1.0, -1.0)
        eps = float(w[h != s].sum())
        if eps >= 0.5 or eps == 0:
            break
        a = 0.5 * math.log((1 - eps) / eps)
        out.append(a)
        w = w * np.exp(-a * s * h)
        w /= w.sum()
    return out
