import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fscalecp.learners import (KINDS, Dataset, DimensionError, NotFittedError, classifier_from_dict,
                               cross_val_accuracy, fit, logistic_loss_grad, make_classifier, stratified_folds)

XOR_X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
XOR_Y = np.array([-1, 1, 1, -1])


def blobs(n=200, d=3, seed=0, shift=2.0):
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1, -1)
    X = rng.normal(size=(n, d))
    X[:, 0] += shift * y
    return Dataset(X, y)


def finite_difference_errors(n_points=10, seed=0):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(60, 4))
    y01 = (rng.random(60) < 0.5).astype(float)
    errs = []
    for _ in range(n_points):
        params = rng.normal(size=5)
        _, grad = logistic_loss_grad(params, Z, y01, 0.01)
        h = 1e-6
        num = np.array([(logistic_loss_grad(params + h * e, Z, y01, 0.01)[0]
                         - logistic_loss_grad(params - h * e, Z, y01, 0.01)[0]) / (2 * h) for e in np.eye(5)])
        errs.append(np.linalg.norm(num - grad) / max(np.linalg.norm(grad), 1e-12))
    return errs


def test_gradient_matches_finite_differences():
    assert max(finite_difference_errors()) < 1e-5


def test_logreg_separable_1d():
    X = np.array([[-3.0], [-2.0], [-1.0], [-0.5], [0.5], [1.0], [2.0], [3.0]])
    y = np.where(X[:, 0] > 0, 1, -1)
    clf = fit("logreg", Dataset(X, y))
    assert np.array_equal(clf.predict(X), y)


def test_xor_cart_solves_logreg_cannot():
    cart = make_classifier("cart", min_leaf=1, max_depth=None).fit(XOR_X, XOR_Y)
    assert np.array_equal(cart.predict(XOR_X), XOR_Y)
    logreg = make_classifier("logreg").fit(XOR_X, XOR_Y)
    assert np.mean(logreg.predict(XOR_X) == XOR_Y) <= 0.75


def test_single_class_rejected():
    with pytest.raises(ValueError):
        fit("cart", Dataset(np.ones((4, 1)), np.ones(4)))


def test_zero_logreg_gives_half():
    clf = make_classifier("logreg").fit(XOR_X, XOR_Y)
    clf.coef[:] = 0.0
    clf.intercept = 0.0
    assert clf.predict_proba(np.array([5.0, -7.0])) == 0.5
    assert clf.predict(np.array([[5.0, -7.0]]))[0] == -1


def test_gnb_symmetric_classes_give_half():
    X = np.array([[0.0], [1.0], [0.0], [1.0]])
    y = np.array([1, 1, -1, -1])
    clf = fit("gnb", Dataset(X, y))
    assert clf.predict_proba(np.array([0.3])) == pytest.approx(0.5)


def test_laplace_leaf():
    X = np.zeros((4, 1))
    y = np.array([1, 1, 1, -1])
    clf = make_classifier("cart").fit(X, y)
    assert clf.predict_proba(np.array([0.0])) == pytest.approx(4 / 6)
    assert round(clf.predict_proba(np.array([0.0])), 4) == 0.6667


def test_cart_fits_consistent_data_exactly():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(300, 5))
    y = np.where(np.sin(3 * X[:, 0]) + X[:, 1] * X[:, 2] > 0, 1, -1)
    clf = make_classifier("cart", max_depth=None, min_leaf=1).fit(X, y)
    assert np.array_equal(clf.predict(X), y)


def test_single_tree_forest_equals_cart():
    data = blobs(300, 4, seed=2, shift=0.8)
    hyper = dict(max_depth=8, min_leaf=3)
    cart = make_classifier("cart", **hyper).fit(data.X, data.y, seed=5)
    forest = make_classifier("rforest", n_trees=1, bootstrap=False, max_features=None, **hyper).fit(
        data.X, data.y, seed=5)
    probe = np.random.default_rng(9).normal(size=(500, 4))
    assert np.array_equal(cart.predict_proba(probe), forest.predict_proba(probe))
    assert np.allclose(cart.feature_weights(), forest.feature_weights())


def test_cart_weight_on_only_informative_feature():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(400, 4))
    y = np.where(X[:, 0] > 0.2, 1, -1)
    X[:, 3] = 7.0
    w = fit("cart", Dataset(X, y)).feature_weights()
    assert w[0] > 0.9 and w[3] == 0.0


@pytest.mark.parametrize("kind", KINDS)
def test_weights_normalised_and_deterministic(kind):
    data = blobs(seed=4)
    a = fit(kind, data, seed=3)
    b = fit(kind, data, seed=3)
    assert a.feature_weights().sum() == pytest.approx(1.0, abs=1e-9)
    assert (a.feature_weights() >= 0).all()
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


@pytest.mark.parametrize("kind", KINDS)
def test_json_round_trip_is_exact(kind):
    data = blobs(seed=6)
    clf = fit(kind, data, seed=1)
    back = classifier_from_dict(json.loads(json.dumps(clf.to_dict())))
    probe = np.random.default_rng(0).normal(size=(50, data.d)) * 3
    assert np.array_equal(clf.predict_proba(probe), back.predict_proba(probe))
    assert json.dumps(back.to_dict()) == json.dumps(clf.to_dict())


@pytest.mark.parametrize("kind", KINDS)
def test_dimension_mismatch(kind):
    clf = fit(kind, blobs(seed=1))
    with pytest.raises(DimensionError):
        clf.predict_proba(np.zeros((2, 5)))


def test_unfitted():
    with pytest.raises(NotFittedError):
        make_classifier("gnb").predict_proba(np.zeros(3))
    with pytest.raises(NotFittedError):
        make_classifier("cart").feature_weights()


def test_unknown_kind():
    with pytest.raises(ValueError):
        make_classifier("svm")


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.array([[np.nan]]), np.array([1]))
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 1)), np.array([0, 1]))


def test_stratified_folds_partition():
    y = np.array([1] * 23 + [-1] * 17)
    folds = stratified_folds(y, 5, seed=0)
    assert sorted(np.concatenate(folds).tolist()) == list(range(40))
    for f in folds:
        assert abs((y[f] == 1).sum() - 23 / 5) < 1


def test_cross_val_easy_problem():
    assert cross_val_accuracy("logreg", blobs(shift=6.0), folds=5) > 0.98


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(KINDS))
def test_probabilities_in_unit_interval(seed, kind):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 3)) * rng.uniform(0.1, 100)
    y = np.where(rng.random(40) < 0.5, 1, -1)
    y[:2] = [1, -1]
    clf = make_classifier(kind, n_trees=3) if kind == "rforest" else make_classifier(kind)
    clf.fit(X, y, seed=seed)
    p = clf.predict_proba(rng.normal(size=(100, 3)) * 1e3)
    assert ((p >= 0) & (p <= 1)).all()
