"""Gradient-boosted regression trees with histogram splits and missing routing.

A self-contained second-order boosting learner for the squared-error
objective (gradient = residual, hessian = 1), written against numpy only.
Design points that matter for reproducibility:

* Candidate split thresholds are per-feature training quantiles (``n_bins``
  of them, method "lower" so thresholds are actual data values). This makes
  split decisions invariant to strictly monotone feature transforms whenever
  the bin budget covers the distinct values.
* Ties at a threshold go left: value <= threshold routes left.
* Rows with a missing value in the split feature are tried on both sides of
  every candidate split; the gain-maximizing side is stored on the node as
  its default direction and reused at prediction time.
* Split gain is 0.5 * [GL^2/(HL+l2) + GR^2/(HR+l2) - (GL+GR)^2/(HL+HR+l2)];
  only strictly positive gains produce splits.
* All randomness (row/column subsampling) flows from the ``seed`` parameter;
  identical inputs and seed give bit-identical JSON serializations.

The estimator follows scikit-learn conventions (``fit`` returns self,
parameters live on ``__init__``, fitted state uses trailing underscores), so
it composes with ``sklearn.clone``, pipelines, and model-selection helpers.
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .errors import DataError, SchemaError


def _as_matrix(X, feature_names=None):
    """Coerce X to (float64 matrix, feature name list); NaN marks missing."""
    if hasattr(X, "columns"):
        names = [str(c) for c in X.columns]
        mat = X.to_numpy(dtype=np.float64)
    else:
        mat = np.asarray(X, dtype=np.float64)
        if mat.ndim != 2:
            raise DataError(f"X must be 2-D, got shape {mat.shape}")
        names = None
    if feature_names is not None:
        names = [str(c) for c in feature_names]
    if names is None:
        names = [f"f{j}" for j in range(mat.shape[1])]
    if len(names) != mat.shape[1]:
        raise SchemaError(
            f"{len(names)} feature names for {mat.shape[1]} columns"
        )
    return mat, names


def _as_target(y, n_rows: int) -> np.ndarray:
    vec = np.asarray(y, dtype=np.float64).reshape(-1)
    if vec.shape[0] != n_rows:
        raise DataError(f"y has {vec.shape[0]} rows, X has {n_rows}")
    if not np.all(np.isfinite(vec)):
        raise DataError("non-finite target values")
    return vec


def _quantile_thresholds(column: np.ndarray, n_bins: int) -> np.ndarray:
    """Candidate thresholds: unique lower-quantiles of the finite values."""
    finite = column[~np.isnan(column)]
    if finite.size == 0:
        return np.empty(0, dtype=np.float64)
    qs = np.arange(1, n_bins) / n_bins
    return np.unique(np.quantile(finite, qs, method="lower"))


def _leaf_value(grad_sum: float, hess_sum: float, l2_reg: float) -> float:
    return -grad_sum / (hess_sum + l2_reg)


class GradientBoostedTrees(BaseEstimator, RegressorMixin):
    """Boosted regression-tree ensemble for squared-error regression.

    Parameters
    ----------
    n_rounds : number of boosting rounds (trees).
    max_depth : maximum tree depth; depth 0 is the root.
    learning_rate : shrinkage applied to every tree's output.
    min_child_weight : minimum hessian sum per child, which under squared
        loss equals the minimum sample count per leaf.
    l2_reg : L2 regularization on leaf values (lambda).
    subsample_rows, subsample_cols : per-tree sampling fractions in (0, 1].
    n_bins : histogram bin budget per feature (>= 2).
    seed : RNG seed governing all subsampling.
    """

    def __init__(
        self,
        n_rounds: int = 500,
        max_depth: int = 6,
        learning_rate: float = 0.05,
        min_child_weight: float = 5.0,
        l2_reg: float = 1.0,
        subsample_rows: float = 0.8,
        subsample_cols: float = 0.8,
        n_bins: int = 256,
        seed: int = 0,
    ):
        self.n_rounds = n_rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.min_child_weight = min_child_weight
        self.l2_reg = l2_reg
        self.subsample_rows = subsample_rows
        self.subsample_cols = subsample_cols
        self.n_bins = n_bins
        self.seed = seed

    # ------------------------------------------------------------------ fit

    def _validate_params(self):
        if self.n_rounds < 1:
            raise DataError("n_rounds must be >= 1")
        if self.max_depth < 1:
            raise DataError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise DataError("learning_rate must be in (0, 1]")
        for name in ("subsample_rows", "subsample_cols"):
            frac = getattr(self, name)
            if not 0.0 < frac <= 1.0:
                raise DataError(f"{name} must be in (0, 1]")
        if self.n_bins < 2:
            raise DataError("n_bins must be >= 2")
        if self.min_child_weight < 0:
            raise DataError("min_child_weight must be >= 0")
        if self.l2_reg < 0:
            raise DataError("l2_reg must be >= 0")

    def fit(self, X, y, feature_names=None):
        """Fit the ensemble on a feature matrix that may contain NaN."""
        self._validate_params()
        mat, names = _as_matrix(X, feature_names)
        n, p = mat.shape
        if n < 2:
            raise DataError("need at least 2 training rows")
        target = _as_target(y, n)

        thresholds = [_quantile_thresholds(mat[:, j], self.n_bins) for j in range(p)]
        if all(np.isnan(mat[:, j]).all() for j in range(p)):
            raise DataError("zero usable features: every column is fully missing")

        base_score = float(np.mean(target))
        pred = np.full(n, base_score)
        rng = np.random.default_rng(np.random.SeedSequence(self.seed))

        n_rows = max(1, int(round(self.subsample_rows * n)))
        n_cols = max(1, int(round(self.subsample_cols * p)))

        trees: list[list[dict]] = []
        loss_path: list[float] = []
        for _ in range(self.n_rounds):
            grad = pred - target
            if self.subsample_rows < 1.0:
                rows = np.sort(rng.choice(n, size=n_rows, replace=False))
            else:
                rows = np.arange(n)
            if self.subsample_cols < 1.0:
                cols = np.sort(rng.choice(p, size=n_cols, replace=False))
            else:
                cols = np.arange(p)
            nodes: list[dict] = []
            self._grow(nodes, mat, grad, thresholds, rows, cols, depth=0)
            trees.append(nodes)
            pred = pred + self.learning_rate * self._tree_values(nodes, mat)
            loss_path.append(float(np.mean((pred - target) ** 2)))

        self.base_score_ = base_score
        self.trees_ = trees
        self.feature_names_ = names
        self.n_features_in_ = p
        self.train_loss_path_ = loss_path
        return self

    def _grow(self, nodes, mat, grad, thresholds, rows, cols, depth) -> int:
        """Grow one node (and recursively its subtree); returns its index."""
        grad_sum = float(grad[rows].sum())
        hess_sum = float(rows.size)
        index = len(nodes)
        nodes.append({})  # reserve preorder slot

        best = None
        if depth < self.max_depth and hess_sum >= 2 * self.min_child_weight:
            best = self._best_split(mat, grad, thresholds, rows, cols, grad_sum, hess_sum)
        if best is None:
            nodes[index] = {"leaf_value": _leaf_value(grad_sum, hess_sum, self.l2_reg)}
            return index

        feature, threshold, default_left, gain = best
        x = mat[rows, feature]
        missing = np.isnan(x)
        go_left = np.where(missing, default_left, x <= threshold)
        left_rows = rows[go_left]
        right_rows = rows[~go_left]
        left_index = self._grow(nodes, mat, grad, thresholds, left_rows, cols, depth + 1)
        right_index = self._grow(nodes, mat, grad, thresholds, right_rows, cols, depth + 1)
        nodes[index] = {
            "split_feature": int(feature),
            "split_threshold": float(threshold),
            "default_direction": "left" if default_left else "right",
            "split_gain": float(gain),
            "left": left_index,
            "right": right_index,
        }
        return index

    def _best_split(self, mat, grad, thresholds, rows, cols, grad_sum, hess_sum):
        """Best (feature, threshold, default_direction, gain) or None.

        Deterministic tie-breaking: the first feature in ascending column
        order wins, then the lowest threshold, and missing defaults to left
        when both routings give equal gain.
        """
        l2 = self.l2_reg
        mcw = self.min_child_weight
        parent_score = grad_sum * grad_sum / (hess_sum + l2)
        best = None
        best_gain = 0.0
        for j in cols:
            t = thresholds[j]
            if t.size == 0:
                continue
            x = mat[rows, j]
            missing = np.isnan(x)
            finite = ~missing
            if not finite.any():
                continue
            n_cand = t.size
            # bin(x) = count of thresholds < x, so bin <= k  <=>  x <= t[k]
            bins = np.searchsorted(t, x[finite], side="left")
            hist_g = np.bincount(bins, weights=grad[rows][finite], minlength=n_cand + 1)
            hist_h = np.bincount(bins, minlength=n_cand + 1).astype(np.float64)
            grad_left = np.cumsum(hist_g)[:n_cand]
            hess_left = np.cumsum(hist_h)[:n_cand]
            grad_miss = float(grad[rows][missing].sum())
            hess_miss = float(missing.sum())

            for default_left in (True, False):
                if default_left:
                    gl = grad_left + grad_miss
                    hl = hess_left + hess_miss
                else:
                    gl = grad_left
                    hl = hess_left
                gr = grad_sum - gl
                hr = hess_sum - hl
                valid = (hl >= mcw) & (hr >= mcw) & (hr > 0) & (hl > 0)
                if not valid.any():
                    continue
                with np.errstate(invalid="ignore", divide="ignore"):
                    # invalid candidates may divide by zero when l2 == 0;
                    # they are overwritten before the argmax
                    gains = 0.5 * (
                        gl * gl / (hl + l2) + gr * gr / (hr + l2) - parent_score
                    )
                gains[~valid] = -np.inf
                k = int(np.argmax(gains))
                if gains[k] > best_gain:
                    best_gain = float(gains[k])
                    best = (int(j), float(t[k]), default_left, best_gain)
        return best

    # -------------------------------------------------------------- predict

    def _tree_values(self, nodes: list[dict], mat: np.ndarray) -> np.ndarray:
        out = np.empty(mat.shape[0])
        stack = [(0, np.arange(mat.shape[0]))]
        while stack:
            node_index, idx = stack.pop()
            node = nodes[node_index]
            if "leaf_value" in node:
                out[idx] = node["leaf_value"]
                continue
            x = mat[idx, node["split_feature"]]
            missing = np.isnan(x)
            default_left = node["default_direction"] == "left"
            go_left = np.where(missing, default_left, x <= node["split_threshold"])
            stack.append((node["left"], idx[go_left]))
            stack.append((node["right"], idx[~go_left]))
        return out

    def _check_fitted(self):
        if not hasattr(self, "trees_"):
            raise DataError("model is not fitted")

    def predict(self, X) -> np.ndarray:
        """Prediction = base_score + learning_rate * sum of tree outputs."""
        self._check_fitted()
        if hasattr(X, "columns"):
            names = [str(c) for c in X.columns]
            if names != self.feature_names_:
                if sorted(names) != sorted(self.feature_names_):
                    raise SchemaError(
                        "prediction columns do not match training columns"
                    )
                X = X[self.feature_names_]
            mat = X.to_numpy(dtype=np.float64)
        else:
            mat = np.asarray(X, dtype=np.float64)
            if mat.ndim != 2 or mat.shape[1] != self.n_features_in_:
                raise SchemaError(
                    f"expected {self.n_features_in_} feature columns, "
                    f"got shape {mat.shape}"
                )
        pred = np.full(mat.shape[0], self.base_score_)
        for nodes in self.trees_:
            pred = pred + self.learning_rate * self._tree_values(nodes, mat)
        return pred

    # ---------------------------------------------------------- importances

    def gain_importance(self) -> dict[str, float]:
        """Per-feature split-gain totals normalized to percentages.

        Percentages sum to 100 when any split exists; a split-free ensemble
        yields all zeros with a warning.
        """
        self._check_fitted()
        totals = np.zeros(self.n_features_in_)
        for nodes in self.trees_:
            for node in nodes:
                if "split_feature" in node:
                    totals[node["split_feature"]] += node["split_gain"]
        grand = totals.sum()
        if grand <= 0.0:
            warnings.warn("ensemble contains no splits; importances are all zero")
            shares = np.zeros_like(totals)
        else:
            shares = totals / grand * 100.0
        return {name: float(shares[j]) for j, name in enumerate(self.feature_names_)}

    # --------------------------------------------------------- serialization

    def _node_to_json(self, node: dict) -> dict:
        if "leaf_value" in node:
            return {"leaf_value": node["leaf_value"]}
        out = dict(node)
        out["split_feature"] = self.feature_names_[node["split_feature"]]
        return out

    def to_json(self) -> str:
        """Canonical JSON: stable key order, exact float round-trip."""
        self._check_fitted()
        payload = {
            "base_score": self.base_score_,
            "params": self.get_params(),
            "feature_names": self.feature_names_,
            "trees": [
                {"nodes": [self._node_to_json(n) for n in nodes]}
                for nodes in self.trees_
            ],
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_json(cls, text: str) -> "GradientBoostedTrees":
        payload = json.loads(text)
        model = cls(**payload["params"])
        names = [str(c) for c in payload["feature_names"]]
        index = {name: j for j, name in enumerate(names)}
        trees = []
        for tree in payload["trees"]:
            nodes = []
            for node in tree["nodes"]:
                if "leaf_value" in node:
                    nodes.append({"leaf_value": float(node["leaf_value"])})
                else:
                    nodes.append(
                        {
                            "split_feature": index[node["split_feature"]],
                            "split_threshold": float(node["split_threshold"]),
                            "default_direction": node["default_direction"],
                            "split_gain": float(node["split_gain"]),
                            "left": int(node["left"]),
                            "right": int(node["right"]),
                        }
                    )
            trees.append(nodes)
        model.base_score_ = float(payload["base_score"])
        model.trees_ = trees
        model.feature_names_ = names
        model.n_features_in_ = len(names)
        return model

    @classmethod
    def load(cls, path) -> "GradientBoostedTrees":
        return cls.from_json(Path(path).read_text())
