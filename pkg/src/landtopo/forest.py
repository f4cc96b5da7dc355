"""Random-forest classifier built from scratch.

Bootstrap sampling, Gini-index splitting with per-node feature subsets,
majority-vote prediction, vote-fraction class probabilities, and
normalized mean impurity-decrease feature importances. Trees are grown
by a compiled kernel; everything is deterministic given (data, params,
seed): tree t draws from an rng stream keyed by (seed, t), so changing
the tree count never reshuffles earlier trees.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ModelFormatError, ModelMismatchError, ValidationError

MODEL_FORMAT_VERSION = "1.0"


# ---------------------------------------------------------------------------
# Impurity primitives
# ---------------------------------------------------------------------------


def gini_impurity(labels) -> float:
    """Gini index 1 - sum(p_j^2) over class proportions."""
    labels = list(labels)
    if not labels:
        raise ValidationError("gini_impurity of an empty label set")
    n = len(labels)
    return 1.0 - sum((c / n) ** 2 for c in Counter(labels).values())


def delta_gini(parent, left, right) -> float:
    """Impurity decrease of a split; left and right must partition parent."""
    parent, left, right = list(parent), list(left), list(right)
    if Counter(left) + Counter(right) != Counter(parent):
        raise ValidationError("left/right do not partition parent")
    n = len(parent)
    rho_l = len(left) / n
    rho_r = len(right) / n
    return (
        gini_impurity(parent)
        - rho_l * gini_impurity(left)
        - rho_r * gini_impurity(right)
    )


def bootstrap_indices(n: int, rng: np.random.Generator) -> np.ndarray:
    """n indices drawn uniformly with replacement."""
    if n < 1:
        raise ValidationError("bootstrap requires n >= 1")
    return rng.integers(0, n, size=n)


# ---------------------------------------------------------------------------
# Tree growing kernel
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _grow_tree(X, y, n_classes, boot, feat_subs, max_depth, min_leaf):
    """Grow one tree on a bootstrap sample; explicit-stack recursion.

    feat_subs[node] holds the candidate feature subset for each node id
    (sorted ascending so delta ties resolve to the lowest feature index).
    Thresholds are midpoints between consecutive distinct sorted values;
    threshold ties resolve to the lowest threshold. Splitting stops on
    purity, depth, min_leaf, or no positive impurity decrease.
    """
    nb = len(boot)
    m = X.shape[1]
    max_nodes = 2 * nb + 1
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    counts = np.zeros((max_nodes, n_classes), np.int64)
    importance = np.zeros(m, np.float64)

    idx = boot.copy()
    tmp = np.empty(nb, np.int64)
    svals = np.empty(nb, np.float64)
    slabs = np.empty(nb, np.int64)
    lc = np.empty(n_classes, np.int64)
    rc = np.empty(n_classes, np.int64)

    stack = np.empty((max_nodes, 4), np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = nb
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack[top, 0]
        lo = stack[top, 1]
        hi = stack[top, 2]
        depth = stack[top, 3]
        size = hi - lo

        for i in range(lo, hi):
            counts[node, y[idx[i]]] += 1
        present = 0
        sum_sq = 0.0
        for c in range(n_classes):
            if counts[node, c] > 0:
                present += 1
            sum_sq += counts[node, c] * counts[node, c]
        if (
            present <= 1
            or size < 2 * min_leaf
            or (max_depth >= 0 and depth >= max_depth)
        ):
            continue
        g_parent = 1.0 - sum_sq / (size * size)

        best_delta = 0.0
        best_f = -1
        best_thr = 0.0
        for fi in range(feat_subs.shape[1]):
            f = feat_subs[node, fi]
            for i in range(size):
                svals[i] = X[idx[lo + i], f]
            order = np.argsort(svals[:size])
            for i in range(size):
                slabs[i] = y[idx[lo + order[i]]]
            sorted_vals = svals[:size][order]

            ssl = 0.0
            ssr = sum_sq
            for c in range(n_classes):
                lc[c] = 0
                rc[c] = counts[node, c]
            for i in range(size - 1):
                c = slabs[i]
                ssl += 2.0 * lc[c] + 1.0
                lc[c] += 1
                ssr -= 2.0 * rc[c] - 1.0
                rc[c] -= 1
                if sorted_vals[i] != sorted_vals[i + 1]:
                    nl = i + 1
                    nr = size - nl
                    if nl >= min_leaf and nr >= min_leaf:
                        delta = (
                            g_parent
                            - (nl / size) * (1.0 - ssl / (nl * nl))
                            - (nr / size) * (1.0 - ssr / (nr * nr))
                        )
                        if delta > best_delta:
                            best_delta = delta
                            best_f = f
                            best_thr = 0.5 * (sorted_vals[i] + sorted_vals[i + 1])

        if best_f < 0:
            continue  # no positive impurity decrease: leaf

        # stable partition by the chosen threshold
        nl = 0
        nr = 0
        for i in range(lo, hi):
            if X[idx[i], best_f] <= best_thr:
                tmp[nl] = idx[i]
                nl += 1
            else:
                tmp[nb - 1 - nr] = idx[i]
                nr += 1
        for i in range(nl):
            idx[lo + i] = tmp[i]
        for i in range(nr):
            idx[lo + nl + i] = tmp[nb - 1 - (nr - 1 - i)]

        importance[best_f] += (size / nb) * best_delta
        feature[node] = best_f
        threshold[node] = best_thr
        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        left[node] = left_id
        right[node] = right_id
        stack[top, 0] = right_id
        stack[top, 1] = lo + nl
        stack[top, 2] = hi
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = left_id
        stack[top, 1] = lo
        stack[top, 2] = lo + nl
        stack[top, 3] = depth + 1
        top += 1

    return (
        feature[:n_nodes],
        threshold[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        counts[:n_nodes],
        importance,
    )


@njit(cache=True, nogil=True)
def _accumulate_votes(X, feature, threshold, left, right, leaf_class, votes):
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        votes[r, leaf_class[node]] += 1


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 500
    p_features: int | None = None  # default ceil(sqrt(m)) at fit time
    max_depth: int | None = None  # None = unlimited
    min_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValidationError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise ValidationError("min_leaf must be >= 1")
        if self.p_features is not None and self.p_features < 1:
            raise ValidationError("p_features must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValidationError("max_depth must be >= 1 or None")


@dataclass
class _Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    leaf_class: np.ndarray


@dataclass
class ForestModel:
    trees: list[_Tree]
    classes: tuple[str, ...]
    feature_names: tuple[str, ...]
    params: ForestParams
    p_resolved: int
    importances: np.ndarray

    def _check_columns(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ModelMismatchError(
                f"expected {len(self.feature_names)} feature columns, got {X.shape}"
            )
        return np.ascontiguousarray(X)

    def predict_proba(self, X) -> np.ndarray:
        """Per-class vote fractions; rows sum to 1."""
        X = self._check_columns(X)
        votes = np.zeros((X.shape[0], len(self.classes)), np.int64)
        for tree in self.trees:
            _accumulate_votes(
                X,
                tree.feature,
                tree.threshold,
                tree.left,
                tree.right,
                tree.leaf_class,
                votes,
            )
        return votes / float(len(self.trees))

    def predict(self, X) -> np.ndarray:
        """Majority-vote class labels; ties go to the lowest class index."""
        proba = self.predict_proba(X)
        return np.array([self.classes[k] for k in proba.argmax(axis=1)])


def fit(
    X,
    y,
    params: ForestParams = ForestParams(),
    feature_names=None,
) -> ForestModel:
    """Train a random forest.

    Args:
        X: (n, m) finite feature matrix.
        y: n class labels (any hashables; stored as strings, ordered
            lexicographically).
        params: hyperparameters; p_features defaults to ceil(sqrt(m)).
        feature_names: optional column names (default f0..f{m-1}).
    """
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if X.ndim != 2:
        raise ValidationError("X must be a 2D feature matrix")
    n, m = X.shape
    y = [str(v) for v in y]
    if len(y) != n or n < 2:
        raise ValidationError("X rows and y length must match and be >= 2")
    if not np.isfinite(X).all():
        raise ValidationError("X contains non-finite values")
    classes = tuple(sorted(set(y)))
    if len(classes) < 2:
        warnings.warn("training labels contain a single class; trees are single leaves")
    class_index = {c: k for k, c in enumerate(classes)}
    y_codes = np.array([class_index[v] for v in y], dtype=np.int64)

    if feature_names is None:
        feature_names = tuple(f"f{j}" for j in range(m))
    else:
        feature_names = tuple(feature_names)
        if len(feature_names) != m:
            raise ValidationError("feature_names length must match columns")

    p = params.p_features if params.p_features is not None else math.ceil(math.sqrt(m))
    if not 1 <= p <= m:
        raise ValidationError(f"p_features must be in [1, {m}]")
    max_depth = -1 if params.max_depth is None else params.max_depth

    trees: list[_Tree] = []
    importance_sum = np.zeros(m)
    max_nodes = 2 * n + 1
    for t in range(params.n_trees):
        rng = np.random.default_rng([params.seed, t])
        boot = bootstrap_indices(n, rng)
        feat_subs = np.sort(
            rng.random((max_nodes, m)).argsort(axis=1)[:, :p].astype(np.int64), axis=1
        )
        feature, threshold, left, right, counts, imp = _grow_tree(
            X, y_codes, len(classes), boot, feat_subs, max_depth, params.min_leaf
        )
        trees.append(
            _Tree(
                feature=feature,
                threshold=threshold,
                left=left,
                right=right,
                counts=counts,
                leaf_class=counts.argmax(axis=1).astype(np.int64),
            )
        )
        importance_sum += imp

    importances = importance_sum / params.n_trees
    total = importances.sum()
    if total > 0:
        importances = importances / total
    else:
        warnings.warn("no split had positive impurity decrease; importances are zero")
    return ForestModel(
        trees=trees,
        classes=classes,
        feature_names=feature_names,
        params=params,
        p_resolved=p,
        importances=importances,
    )


def predict(model: ForestModel, X) -> np.ndarray:
    return model.predict(X)


def predict_proba(model: ForestModel, X) -> np.ndarray:
    return model.predict_proba(X)


# ---------------------------------------------------------------------------
# Versioned JSON persistence
# ---------------------------------------------------------------------------


def _tree_to_nested(tree: _Tree) -> dict:
    n = len(tree.feature)
    nodes: list[dict | None] = [None] * n
    for i in range(n - 1, -1, -1):  # children always have higher ids
        if tree.feature[i] >= 0:
            nodes[i] = {
                "feature_index": int(tree.feature[i]),
                "threshold": float(tree.threshold[i]),
                "left": nodes[int(tree.left[i])],
                "right": nodes[int(tree.right[i])],
            }
        else:
            nodes[i] = {"class_counts": [int(c) for c in tree.counts[i]]}
    assert nodes[0] is not None
    return nodes[0]


def _tree_from_nested(node: dict, n_classes: int) -> _Tree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    counts: list[list[int]] = []
    # DFS with explicit stack; children get ids after their parent
    stack = [(node, -1, "root")]
    while stack:
        current, parent, side = stack.pop()
        nid = len(feature)
        if parent >= 0:
            (left if side == "left" else right)[parent] = nid
        if "class_counts" in current:
            cc = current["class_counts"]
            if len(cc) != n_classes:
                raise ModelFormatError("leaf class_counts length mismatch")
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            counts.append([int(c) for c in cc])
        else:
            feature.append(int(current["feature_index"]))
            threshold.append(float(current["threshold"]))
            left.append(-1)
            right.append(-1)
            counts.append([0] * n_classes)
            stack.append((current["right"], nid, "right"))
            stack.append((current["left"], nid, "left"))
    counts_arr = np.array(counts, dtype=np.int64)
    return _Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        counts=counts_arr,
        leaf_class=counts_arr.argmax(axis=1).astype(np.int64),
    )


def model_to_dict(model: ForestModel) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "classes": list(model.classes),
        "feature_names": list(model.feature_names),
        "params": {
            "n_trees": model.params.n_trees,
            "p_features": model.p_resolved,
            "max_depth": model.params.max_depth,
            "min_leaf": model.params.min_leaf,
            "seed": model.params.seed,
        },
        "importances": [float(v) for v in model.importances],
        "trees": [_tree_to_nested(t) for t in model.trees],
    }


def model_from_dict(doc: dict) -> ForestModel:
    version = str(doc.get("format_version", ""))
    major = version.split(".", 1)[0]
    if major != MODEL_FORMAT_VERSION.split(".", 1)[0]:
        raise ModelFormatError(f"unsupported model format version {version!r}")
    classes = tuple(doc["classes"])
    params = ForestParams(
        n_trees=int(doc["params"]["n_trees"]),
        p_features=doc["params"]["p_features"],
        max_depth=doc["params"]["max_depth"],
        min_leaf=int(doc["params"]["min_leaf"]),
        seed=int(doc["params"]["seed"]),
    )
    trees = [_tree_from_nested(t, len(classes)) for t in doc["trees"]]
    if len(trees) != params.n_trees:
        raise ModelFormatError("tree count does not match params.n_trees")
    return ForestModel(
        trees=trees,
        classes=classes,
        feature_names=tuple(doc["feature_names"]),
        params=params,
        p_resolved=int(doc["params"]["p_features"]),
        importances=np.array(doc["importances"], dtype=np.float64),
    )


def save_model(model: ForestModel, path) -> None:
    """Atomic write of the versioned JSON model file (stable byte layout)."""
    payload = json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
            fh.write("\n")
        os.chmod(tmp_path, 0o644)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def load_model(path) -> ForestModel:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(doc)
