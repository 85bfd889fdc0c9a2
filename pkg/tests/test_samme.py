import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from c2traffic.errors import DataError, SingleClassSubset
from c2traffic.samme import (DecisionTree, Ensemble, Model, alpha, boost, class_order, fit,
                             fit_tree, update_weights, weighted_error)

from oracles import noisy_two_class, ref_adaboost_exponential, ref_adaboost_m1


class Subset:
    def __init__(self, X, y):
        self.X, self.y = np.asarray(X, float), np.asarray(y, dtype=object)


def blobs(seed, n=60, K=3, sigma=0.3, dims=2):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-5, 5, size=(K, dims))
    y = np.repeat(np.arange(K), n)
    X = centers[y] + rng.normal(0, sigma, size=(len(y), dims))
    return X, y


# -- formulas ---------------------------------------------------------------

def test_weighted_error_examples():
    w = np.full(9, 1 / 9)
    y = np.repeat([0, 1, 2], 3)
    assert weighted_error(np.zeros(9, bool), w) == 0
    assert weighted_error(y != 0, w) == pytest.approx(2 / 3, abs=1e-15)
    assert weighted_error(np.array([False, True, True]), np.array([0.5, 0.25, 0.25])) == 0.5


def test_alpha_values():
    assert abs(alpha(0.5, 3) - math.log(2)) <= 1e-12
    assert abs(alpha(2 / 3, 3)) <= 1e-12
    assert alpha(0.2, 2) == pytest.approx(math.log(4))
    assert alpha(0.2, 3, eta=0.5) == pytest.approx(0.5 * (math.log(4) + math.log(2)))
    assert math.isfinite(alpha(0.0, 3))


@given(st.floats(0.001, 0.999), st.integers(2, 6))
def test_alpha_positive_iff_better_than_chance(eps, K):
    a = alpha(eps, K)
    if eps < (K - 1) / K - 1e-9:
        assert a > 0
    elif eps > (K - 1) / K + 1e-9:
        assert a < 0


def test_update_weights_examples():
    w = np.array([0.5, 0.5])
    assert np.allclose(update_weights(w, np.array([False, True]), math.log(2)), [1 / 3, 2 / 3])
    assert np.array_equal(update_weights(w, np.array([False, True]), 0.0), w)
    w3 = np.array([0.2, 0.3, 0.5])
    assert np.allclose(update_weights(w3, np.ones(3, bool), 1.7), w3, atol=1e-15)


# -- tree -------------------------------------------------------------------

def test_tree_stump_threshold_midpoint():
    X = np.array([[0.0], [1.0], [3.0], [4.0]])
    t = fit_tree(X, np.array([0, 0, 1, 1]), np.full(4, 0.25), 2, max_depth=1)
    assert t.feature[0] == 0 and t.threshold[0] == 2.0
    assert t.predict_index(X).tolist() == [0, 0, 1, 1]


def test_tree_respects_weights():
    X = np.array([[0.0], [1.0], [2.0]])
    y = np.array([0, 1, 0])
    t = fit_tree(X, y, np.array([0.1, 0.8, 0.1]), 2, max_depth=0)
    assert t.predict_index(X).tolist() == [1, 1, 1]


def test_tree_tie_prefers_lowest_feature():
    X = np.array([[0.0, 0.0], [1.0, 1.0]])
    t = fit_tree(X, np.array([0, 1]), np.array([0.5, 0.5]), 2, max_depth=1)
    assert t.feature[0] == 0
    t2 = fit_tree(X, np.array([0, 1]), np.array([0.5, 0.5]), 2, max_depth=1,
                  feature_order=[1, 0])
    assert t2.feature[0] == 1


def test_tree_depth_limit_and_constant_features():
    X, y = blobs(1, n=30, K=3)
    assert fit_tree(X, y, np.full(len(y), 1 / len(y)), 3, max_depth=2).depth <= 2
    t = fit_tree(np.zeros((5, 2)), np.array([0, 1, 0, 1, 1]), np.full(5, 0.2), 2)
    assert t.depth == 0 and t.value[0] == 1


def _brute_gini_stump(X, y, w, K):
    """Exhaustive single-split search written directly from the definition."""
    best = None
    for f in range(X.shape[1]):
        vals = sorted(set(X[:, f]))
        for a, b in zip(vals, vals[1:]):
            thr = (a + b) / 2
            cost = 0.0
            for side in (X[:, f] <= thr, X[:, f] > thr):
                mass = [w[side & (y == c)].sum() for c in range(K)]
                tot = sum(mass)
                cost += tot - sum(m * m for m in mass) / tot
            if best is None or cost < best[0] - 1e-12:
                best = (cost, f, thr)
    return best


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_stump_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(25, 3)), 1)
    y = rng.integers(0, 3, 25)
    w = rng.uniform(0.1, 1, 25)
    w /= w.sum()
    t = fit_tree(X, y, w, 3, max_depth=1)
    ref = _brute_gini_stump(X, y, w, 3)
    if t.depth == 1:
        assert (t.feature[0], t.threshold[0]) == pytest.approx((ref[1], ref[2]))


# -- boosting ---------------------------------------------------------------

def test_separable_single_round():
    X = np.array([[0.0], [0.1], [0.9], [1.0]])
    ens = boost(X, np.array([0, 0, 1, 1]), 2, T=1, max_depth=1)
    assert len(ens.trees) == 1
    assert ens.errors == [0.0]
    assert ens.alphas[0] == pytest.approx(math.log((1 - 1e-10) / 1e-10))


def test_blobs_generalize():
    X, y = blobs(7, n=100, sigma=0.4)
    rng = np.random.default_rng(0)
    idx = rng.permutation(len(y))
    tr, te = idx[:200], idx[200:]
    model = fit([Subset(X[tr], y[tr].astype(str))], ["a", "b"], T=10, seed=1)
    acc = np.mean(model.predict(X[te]) == y[te].astype(str).astype(object))
    assert acc >= 0.95


def test_eta_scales_first_alpha_only_trees_shared_first_round():
    X, y = noisy_two_class(3)
    a = boost(X, y, 2, T=5, eta=1.0)
    b = boost(X, y, 2, T=5, eta=0.5)
    assert b.alphas[0] == pytest.approx(a.alphas[0] / 2, rel=1e-15)
    assert a.trees[0] == b.trees[0]


def test_single_class_subset():
    with pytest.raises(SingleClassSubset):
        boost(np.zeros((3, 1)), np.zeros(3, int), 2)


@pytest.mark.parametrize("seed", range(10))
def test_two_class_matches_classic_adaboost(seed):
    X, y = noisy_two_class(seed)
    ens = boost(X, y, 2, T=25, eta=1.0, max_depth=2, seed=seed)
    ref, post = ref_adaboost_m1(X, y, 25, 2)
    assert ens.alphas == ref
    assert all(abs(e - 0.5) <= 1e-9 for e in post)
    expo = ref_adaboost_exponential(X, y, 25, 2)
    n = min(len(expo), len(ens.alphas))
    assert n > 5
    assert np.allclose(ens.alphas[:n], 2 * np.array(expo[:n]), rtol=1e-9, atol=0)


@pytest.mark.parametrize("seed", range(5))
def test_weights_normalized_every_round(seed, monkeypatch):
    import c2traffic.samme as samme
    seen = []
    real = samme.update_weights

    def spy(w, miss, a):
        out = real(w, miss, a)
        seen.append(out)
        return out

    monkeypatch.setattr(samme, "update_weights", spy)
    X, y = blobs(seed, n=40, sigma=1.5)
    boost(X, y, 3, T=15, eta=0.8)
    assert seen
    for w in seen:
        assert abs(w.sum() - 1.0) <= 1e-12 and w.min() > 0


# -- prediction and model file ---------------------------------------------

def _const_tree(c):
    t = DecisionTree()
    t._add(value=c)
    return t


def _model(ensembles, classes=("A", "B")):
    return Model(list(classes), ["f"], [0.0], [1.0], ensembles, 1.0, 1, 1, 0)


def test_predict_weighted_vote():
    m = _model([Ensemble([_const_tree(0), _const_tree(1)], [1.0, 2.0])])
    assert m.predict(np.zeros((1, 1))).tolist() == ["B"]
    single = _model([Ensemble([_const_tree(1)], [0.3])])
    assert single.predict(np.zeros((1, 1))).tolist() == ["B"]


def test_predict_tie_first_class():
    m = _model([Ensemble([_const_tree(1), _const_tree(0)], [1.0, 1.0])])
    assert m.predict(np.zeros((2, 1))).tolist() == ["A", "A"]


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 100))
def test_predict_invariant_to_alpha_scaling(c):
    X, y = blobs(2, n=30, sigma=1.0)
    m = fit([Subset(X, y.astype(str))], ["a", "b"], T=5)
    p = m.predict(X)
    for e in m.ensembles:
        e.alphas = [a * c for a in e.alphas]
    assert np.array_equal(m.predict(X), p)


def test_class_order():
    assert class_order(["DnsTunnel", "Normal", "MaliciousDns"],
                       ["Normal", "MaliciousDns", "DnsTunnel"]) == \
        ["Normal", "MaliciousDns", "DnsTunnel"]
    assert class_order(["b", "a"]) == ["a", "b"]


def test_model_round_trip(tmp_path):
    X, y = blobs(4, n=40)
    m = fit([Subset(X, y.astype(str)), Subset(X[::2], y[::2].astype(str))], ["a", "b"],
            T=8, eta=0.8, seed=9)
    p1, p2 = tmp_path / "m.json", tmp_path / "m2.json"
    m.save(p1)
    back = Model.load(p1)
    assert np.array_equal(back.scores(X), m.scores(X))
    back.save(p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_model_load_rejects_garbage(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{\"format\": \"other\"}")
    with pytest.raises(DataError):
        Model.load(p)
    p.write_text("not json")
    with pytest.raises(DataError):
        Model.load(p)
