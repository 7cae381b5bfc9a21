"""Binary classifiers producing activation probabilities.

Labels are ``+1`` (activated) / ``-1`` (not activated). Every classifier
exposes ``predict_proba`` (probability of ``+1``), ``predict`` (threshold
0.5, ties go to ``-1``), ``feature_weights`` (non-negative, sums to one) and
``to_dict`` / :func:`classifier_from_dict` for JSON round trips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.special import expit

KINDS = ("logreg", "gnb", "cart", "rforest")
# simpler first; used to break near-ties during model selection
COMPLEXITY_ORDER = {"logreg": 0, "gnb": 1, "cart": 2, "rforest": 3}


class NotFittedError(RuntimeError):
    pass


class DimensionError(ValueError):
    """Feature count of the input does not match the model."""


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: list[str] = field(default_factory=list)
    meta: list[tuple[str, int, float]] = field(default_factory=list)  # (message, node, time)

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise ValueError("X must be a 2-D matrix")
        self.y = np.asarray(self.y, dtype=np.int64)
        if len(self.y) != len(self.X):
            raise ValueError("X and y have different lengths")
        if not np.isin(self.y, (-1, 1)).all():
            raise ValueError("labels must be +1 or -1")
        if not np.isfinite(self.X).all():
            raise ValueError("X contains NaN or Inf")
        if not self.feature_names:
            self.feature_names = [f"x{i}" for i in range(self.X.shape[1])]

    def __len__(self) -> int:
        return len(self.y)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, rows=None, cols=None) -> "Dataset":
        X, y, names = self.X, self.y, self.feature_names
        meta = self.meta
        if rows is not None:
            X, y = X[rows], y[rows]
            meta = [meta[i] for i in np.arange(len(self.y))[rows]] if meta else []
        if cols is not None:
            cols = list(cols)
            X = X[:, cols]
            names = [names[c] for c in cols]
        return Dataset(X, y, list(names), list(meta))


def _check_training(X: np.ndarray, y: np.ndarray) -> None:
    if len(y) < 2 or X.shape[1] < 1:
        raise ValueError("need at least 2 instances and 1 feature")
    if len(np.unique(y)) < 2:
        raise ValueError("training set contains a single class")


def _normalize(w: np.ndarray) -> np.ndarray:
    w = np.abs(np.asarray(w, dtype=float))
    s = w.sum()
    if not s > 0 or not np.isfinite(s):
        return np.full(len(w), 1.0 / len(w))
    return w / s


class Classifier:
    kind = "base"

    def __init__(self, **hyper):
        self.hyper = {**self.defaults(), **hyper}
        self.n_features: int | None = None
        self.seed: int | None = None

    @classmethod
    def defaults(cls) -> dict[str, Any]:
        return {}

    def _rows(self, X) -> tuple[np.ndarray, bool]:
        if self.n_features is None:
            raise NotFittedError(f"{self.kind} classifier is not fitted")
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise DimensionError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X, single

    def predict_proba(self, X):
        X, single = self._rows(X)
        p = np.clip(self._proba(X), 0.0, 1.0)
        return float(p[0]) if single else p

    def predict(self, X):
        p = np.atleast_1d(self.predict_proba(X))
        return np.where(p > 0.5, 1, -1)

    def feature_weights(self) -> np.ndarray:
        if self.n_features is None:
            raise NotFittedError(f"{self.kind} classifier is not fitted")
        return _normalize(self._raw_weights())

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "hyper": dict(self.hyper), "seed": self.seed,
                "n_features": self.n_features, "params": self._params()}

    # subclass hooks
    def fit(self, X, y, seed: int = 0) -> "Classifier":
        raise NotImplementedError

    def _proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _raw_weights(self) -> np.ndarray:
        raise NotImplementedError

    def _params(self) -> dict[str, Any]:
        raise NotImplementedError

    def _load(self, params: dict[str, Any]) -> None:
        raise NotImplementedError


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def logistic_loss_grad(params: np.ndarray, Z: np.ndarray, y01: np.ndarray, l2: float) -> tuple[float, np.ndarray]:
    """Mean log-loss plus ``l2/2 * |w|^2`` and its gradient.

    ``params`` is ``[w..., bias]``; the bias is not penalised.
    """
    w, b = params[:-1], params[-1]
    z = Z @ w + b
    # log(1 + e^z) - y z, computed stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y01 * z) + 0.5 * l2 * w @ w)
    return loss, _logistic_grad(params, Z, y01, l2, z)


def _logistic_grad(params, Z, y01, l2, z=None):
    w = params[:-1]
    if z is None:
        z = Z @ w + params[-1]
    r = sigmoid(z) - y01
    grad = np.empty_like(params)
    grad[:-1] = Z.T @ r / len(y01) + l2 * w
    grad[-1] = r.mean()
    return grad


class LogisticRegression(Classifier):
    """Full-batch gradient descent on internally standardised features.

    Step size is ``1/L`` with ``L`` the gradient Lipschitz bound, so no
    learning rate needs tuning. Coefficients are kept on the standardised
    scale; that is also the scale :meth:`feature_weights` reports.
    """

    kind = "logreg"

    @classmethod
    def defaults(cls):
        return {"l2": 1e-4, "epochs": 500, "tol": 1e-6}

    def fit(self, X, y, seed: int = 0):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        _check_training(X, y)
        self.seed = seed
        self.n_features = X.shape[1]
        self.mean = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale = np.where(scale > 0, scale, 1.0)
        Z = (X - self.mean) / self.scale
        y01 = (y > 0).astype(float)
        l2 = self.hyper["l2"]
        aug = np.hstack([Z, np.ones((len(Z), 1))])
        lip = 0.25 * np.linalg.eigvalsh(aug.T @ aug / len(Z)).max() + l2
        params = np.zeros(self.n_features + 1)
        # same update as _logistic_grad, inlined: this loop dominates feature selection time
        augT = np.ascontiguousarray(aug.T) / len(Z)
        penalty = np.full(self.n_features + 1, l2)
        penalty[-1] = 0.0
        tol2 = self.hyper["tol"] ** 2
        for _ in range(int(self.hyper["epochs"])):
            grad = augT @ (expit(aug @ params) - y01) + penalty * params
            if grad @ grad < tol2:
                break
            params -= grad / lip
        self.coef, self.intercept = params[:-1].copy(), float(params[-1])
        return self

    def decision(self, X: np.ndarray) -> np.ndarray:
        return ((X - self.mean) / self.scale) @ self.coef + self.intercept

    def _proba(self, X):
        return sigmoid(self.decision(X))

    def _raw_weights(self):
        return np.abs(self.coef)

    def _params(self):
        return {"coef": self.coef.tolist(), "intercept": self.intercept,
                "mean": self.mean.tolist(), "scale": self.scale.tolist()}

    def _load(self, p):
        self.coef = np.array(p["coef"], dtype=float)
        self.intercept = float(p["intercept"])
        self.mean = np.array(p["mean"], dtype=float)
        self.scale = np.array(p["scale"], dtype=float)


class GaussianNB(Classifier):
    kind = "gnb"

    @classmethod
    def defaults(cls):
        return {"var_floor": 1e-9}

    def fit(self, X, y, seed: int = 0):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        _check_training(X, y)
        self.seed = seed
        self.n_features = X.shape[1]
        self.theta = np.zeros((2, self.n_features))
        self.var = np.zeros((2, self.n_features))
        self.log_prior = np.zeros(2)
        for k, label in enumerate((-1, 1)):
            rows = X[y == label]
            self.theta[k] = rows.mean(axis=0)
            self.var[k] = np.maximum(rows.var(axis=0), self.hyper["var_floor"])
            self.log_prior[k] = math.log(len(rows) / len(y))
        return self

    def _proba(self, X):
        ll = np.empty((len(X), 2))
        for k in range(2):
            ll[:, k] = self.log_prior[k] - 0.5 * np.sum(
                np.log(2 * np.pi * self.var[k]) + (X - self.theta[k]) ** 2 / self.var[k], axis=1)
        return np.exp(ll[:, 1] - np.logaddexp(ll[:, 0], ll[:, 1]))

    def _raw_weights(self):
        m0, m1 = self.theta
        v0, v1 = self.var
        kl01 = 0.5 * (np.log(v1 / v0) + (v0 + (m0 - m1) ** 2) / v1 - 1)
        kl10 = 0.5 * (np.log(v0 / v1) + (v1 + (m0 - m1) ** 2) / v0 - 1)
        return 0.5 * (kl01 + kl10)

    def _params(self):
        return {"theta": self.theta.tolist(), "var": self.var.tolist(), "log_prior": self.log_prior.tolist()}

    def _load(self, p):
        self.theta = np.array(p["theta"], dtype=float)
        self.var = np.array(p["var"], dtype=float)
        self.log_prior = np.array(p["log_prior"], dtype=float)


def _best_split(Xn: np.ndarray, yn: np.ndarray, min_leaf: int):
    """Lowest weighted Gini split over the columns of ``Xn``.

    Returns ``(column, threshold, impurity)`` or ``None`` when no split keeps
    ``min_leaf`` samples on both sides.
    """
    n = len(yn)
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    ys = yn[order]
    pos_left = np.cumsum(ys, axis=0)[:-1]           # split after row i
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    pos_right = ys.sum(axis=0) - pos_left
    p_l = pos_left / n_left
    p_r = pos_right / n_right
    imp = (n_left * 2 * p_l * (1 - p_l) + n_right * 2 * p_r * (1 - p_r)) / n
    valid = xs[1:] > xs[:-1]
    if min_leaf > 1:
        valid[: min_leaf - 1] = False
        valid[n - min_leaf:] = False
    if not valid.any():
        return None
    imp = np.where(valid, imp, np.inf)
    flat = int(np.argmin(imp.T))  # column-major: first feature wins ties
    col, i = divmod(flat, n - 1)
    lo, hi = xs[i, col], xs[i + 1, col]
    thr = lo + (hi - lo) / 2
    if not thr < hi:
        thr = lo
    return col, float(thr), float(imp[i, col])


class DecisionTree(Classifier):
    """CART with Gini impurity and Laplace-smoothed leaf probabilities.

    Node arrays: ``feature`` (-1 at leaves), ``threshold`` (go left when
    ``x <= threshold``), ``left``/``right`` child indices, ``value`` leaf
    probability of the positive class.
    """

    kind = "cart"

    @classmethod
    def defaults(cls):
        return {"max_depth": 12, "min_leaf": 5, "max_features": None}

    def fit(self, X, y, seed: int = 0, rng: np.random.Generator | None = None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        _check_training(X, y)
        self.seed = seed
        self.n_features = d = X.shape[1]
        y01 = (y > 0).astype(float)
        max_depth = self.hyper["max_depth"]
        max_depth = math.inf if max_depth is None else max_depth
        min_leaf = max(1, int(self.hyper["min_leaf"]))
        mf = self.hyper["max_features"]
        if mf is not None and rng is None:
            rng = np.random.default_rng(seed)
        feature, threshold, left, right, value = [], [], [], [], []
        importance = np.zeros(d)
        total = len(y01)

        def new_node(rows):
            pos = y01[rows].sum()
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append((pos + 1.0) / (len(rows) + 2.0))
            return len(feature) - 1

        stack = [(new_node(np.arange(total)), np.arange(total), 0)]
        while stack:
            node, rows, depth = stack.pop()
            yn = y01[rows]
            n = len(rows)
            pos = yn.sum()
            if depth >= max_depth or n < 2 * min_leaf or pos == 0 or pos == n:
                continue
            cols = np.arange(d)
            if mf is not None:
                cols = np.sort(rng.choice(d, size=min(d, int(mf)), replace=False))
            found = _best_split(X[np.ix_(rows, cols)], yn, min_leaf)
            if found is None:
                continue
            j, thr, imp = found
            f = int(cols[j])
            go_left = X[rows, f] <= thr
            p = pos / n
            importance[f] += n / total * (2 * p * (1 - p) - imp)
            feature[node], threshold[node] = f, thr
            lrows, rrows = rows[go_left], rows[~go_left]
            left[node] = new_node(lrows)
            right[node] = new_node(rrows)
            stack.append((right[node], rrows, depth + 1))
            stack.append((left[node], lrows, depth + 1))
        self.feature = np.array(feature, dtype=np.int64)
        self.threshold = np.array(threshold, dtype=float)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.value = np.array(value, dtype=float)
        self.importance = np.maximum(importance, 0.0)
        return self

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active[idx] = self.feature[node[idx]] >= 0
        return node

    def _proba(self, X):
        return self.value[self.apply(X)]

    def _raw_weights(self):
        return self.importance

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def _params(self):
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist(), "importance": self.importance.tolist()}

    def _load(self, p):
        self.feature = np.array(p["feature"], dtype=np.int64)
        self.threshold = np.array(p["threshold"], dtype=float)
        self.left = np.array(p["left"], dtype=np.int64)
        self.right = np.array(p["right"], dtype=np.int64)
        self.value = np.array(p["value"], dtype=float)
        self.importance = np.array(p["importance"], dtype=float)


class RandomForest(Classifier):
    kind = "rforest"

    @classmethod
    def defaults(cls):
        return {"n_trees": 50, "max_features": "sqrt", "bootstrap": True,
                "max_depth": 12, "min_leaf": 5}

    def fit(self, X, y, seed: int = 0):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        _check_training(X, y)
        self.seed = seed
        self.n_features = d = X.shape[1]
        mf = self.hyper["max_features"]
        if mf == "sqrt":
            mf = max(1, int(math.sqrt(d)))
        self.trees: list[DecisionTree] = []
        streams = np.random.SeedSequence(seed).spawn(int(self.hyper["n_trees"]))
        for ss in streams:
            rng = np.random.default_rng(ss)
            rows = np.arange(len(y))
            if self.hyper["bootstrap"]:
                rows = rng.integers(0, len(y), size=len(y))
                # a one-class bootstrap sample cannot be split; redraw
                while len(np.unique(y[rows])) < 2:
                    rows = rng.integers(0, len(y), size=len(y))
            tree = DecisionTree(max_depth=self.hyper["max_depth"], min_leaf=self.hyper["min_leaf"],
                                max_features=mf)
            tree.fit(X[rows], y[rows], seed=seed, rng=rng)
            self.trees.append(tree)
        return self

    def _proba(self, X):
        return np.mean([t._proba(X) for t in self.trees], axis=0)

    def _raw_weights(self):
        return np.mean([_normalize(t.importance) for t in self.trees], axis=0)

    def _params(self):
        return {"trees": [t.to_dict() for t in self.trees]}

    def _load(self, p):
        self.trees = [classifier_from_dict(t) for t in p["trees"]]


_REGISTRY: dict[str, type[Classifier]] = {
    cls.kind: cls for cls in (LogisticRegression, GaussianNB, DecisionTree, RandomForest)
}


def make_classifier(kind: str, **hyper) -> Classifier:
    try:
        return _REGISTRY[kind](**hyper)
    except KeyError:
        raise ValueError(f"unknown classifier kind {kind!r}; choose from {sorted(_REGISTRY)}") from None


def fit(kind: str, train: Dataset, hyper: dict[str, Any] | None = None, seed: int = 0) -> Classifier:
    return make_classifier(kind, **(hyper or {})).fit(train.X, train.y, seed=seed)


def classifier_from_dict(d: dict[str, Any]) -> Classifier:
    clf = make_classifier(d["kind"], **d.get("hyper", {}))
    clf.seed = d.get("seed")
    clf.n_features = d["n_features"]
    clf._load(d["params"])
    return clf


def accuracy(y_true: Sequence[int], y_pred: Sequence[int]) -> float:
    return float(np.mean(np.asarray(y_true) == np.asarray(y_pred)))


def stratified_folds(y: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Seeded stratified fold assignment; returns the test indices of each fold."""
    if k < 2:
        raise ValueError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(y), dtype=np.int64)
    for label in (-1, 1):
        idx = np.nonzero(y == label)[0]
        idx = idx[rng.permutation(len(idx))]
        fold_of[idx] = np.arange(len(idx)) % k
    return [np.nonzero(fold_of == f)[0] for f in range(k)]


def cross_val_accuracy(kind: str, data: Dataset, folds: int = 10, seed: int = 0,
                       hyper: dict[str, Any] | None = None, cols: Sequence[int] | None = None) -> float:
    X = data.X if cols is None else data.X[:, list(cols)]
    y = data.y
    accs = []
    for f, test in enumerate(stratified_folds(y, folds, seed)):
        train = np.ones(len(y), dtype=bool)
        train[test] = False
        if len(test) == 0 or len(np.unique(y[train])) < 2:
            continue
        clf = make_classifier(kind, **(hyper or {})).fit(X[train], y[train], seed=seed + f)
        accs.append(accuracy(y[test], clf.predict(X[test])))
    return float(np.mean(accs))
