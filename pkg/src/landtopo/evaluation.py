"""Feature selection, cross-validation, metrics, and probe experiments.

Covers correlation pruning, recursive feature elimination down to a
target count, repeated stratified k-fold cross-validation, the
one-vs-rest metric suite (TPR/TNR/FPR/FNR/precision/F1, micro and
macro), per-class-probability decomposition of composite records, and
sample-efficiency sweeps against a fixed held-out test set.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelMismatchError, ValidationError
from .forest import ForestModel, ForestParams, fit


# ---------------------------------------------------------------------------
# Confusion matrix and metric suite
# ---------------------------------------------------------------------------


@dataclass
class ConfusionMatrix:
    classes: tuple[str, ...]
    counts: np.ndarray  # (k, k), rows = true, columns = predicted

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.classes)
        if self.counts.shape != (k, k):
            raise ValidationError("confusion counts must be k x k")
        if (self.counts < 0).any():
            raise ValidationError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_from_predictions(classes, y_true, y_pred) -> ConfusionMatrix:
    classes = tuple(classes)
    index = {c: k for k, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), np.int64)
    for t, p in zip(y_true, y_pred):
        counts[index[str(t)], index[str(p)]] += 1
    return ConfusionMatrix(classes=classes, counts=counts)


def compute_metrics(cm: ConfusionMatrix) -> dict:
    """One-vs-rest metric suite of a confusion matrix.

    Per class: TPR (= recall), TNR, FPR, FNR, precision, F1. micro_F1
    pools TP/FP/FN over classes (equals overall accuracy for
    single-label data); macro_F1 is the unweighted class mean. Undefined
    ratios (zero denominators) yield 0 and are flagged.
    """
    if cm.total == 0:
        raise ValidationError("empty confusion matrix")
    counts = cm.counts
    per_class: dict[str, dict[str, float]] = {}
    flags: list[str] = []

    def ratio(num: float, den: float, cls: str, name: str) -> float:
        if den == 0:
            flags.append(f"{cls}:{name}")
            return 0.0
        return num / den

    tp_pool = fp_pool = fn_pool = 0
    f1_values = []
    for k, cls in enumerate(cm.classes):
        tp = int(counts[k, k])
        fn = int(counts[k].sum() - tp)
        fp = int(counts[:, k].sum() - tp)
        tn = cm.total - tp - fn - fp
        tpr = ratio(tp, tp + fn, cls, "TPR")
        tnr = ratio(tn, tn + fp, cls, "TNR")
        fpr = ratio(fp, tn + fp, cls, "FPR")
        fnr = ratio(fn, tp + fn, cls, "FNR")
        precision = ratio(tp, tp + fp, cls, "precision")
        f1 = ratio(2 * precision * tpr, precision + tpr, cls, "F1")
        per_class[cls] = {
            "TPR": tpr,
            "TNR": tnr,
            "FPR": fpr,
            "FNR": fnr,
            "precision": precision,
            "recall": tpr,
            "F1": f1,
        }
        f1_values.append(f1)
        tp_pool += tp
        fp_pool += fp
        fn_pool += fn

    micro_precision = ratio(tp_pool, tp_pool + fp_pool, "micro", "precision")
    micro_recall = ratio(tp_pool, tp_pool + fn_pool, "micro", "recall")
    micro_f1 = ratio(
        2 * micro_precision * micro_recall, micro_precision + micro_recall, "micro", "F1"
    )
    return {
        "per_class": per_class,
        "micro_F1": micro_f1,
        "macro_F1": float(np.mean(f1_values)),
        "accuracy": tp_pool / cm.total,
        "zero_division_flags": flags,
    }


# ---------------------------------------------------------------------------
# Stratified k-fold cross-validation
# ---------------------------------------------------------------------------


@dataclass
class EvaluationReport:
    classes: tuple[str, ...]
    confusion: np.ndarray  # summed over repeats and folds
    per_class: dict
    micro_f1_mean: float
    micro_f1_std: float
    macro_f1_mean: float
    macro_f1_std: float
    per_repeat: list = field(default_factory=list)
    zero_division_flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "confusion": self.confusion.tolist(),
            "per_class": self.per_class,
            "micro_F1": {"mean": self.micro_f1_mean, "std": self.micro_f1_std},
            "macro_F1": {"mean": self.macro_f1_mean, "std": self.macro_f1_std},
            "per_repeat": self.per_repeat,
            "zero_division_flags": self.zero_division_flags,
        }


def stratified_folds(
    y: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    """Fold id per sample; within each class, fold sizes differ by <= 1."""
    y = np.asarray(y)
    folds = np.empty(len(y), np.int64)
    for cls in sorted(set(y.tolist())):
        members = np.nonzero(y == cls)[0]
        if len(members) < k:
            raise ValidationError(
                f"class {cls!r} has {len(members)} members, fewer than {k} folds"
            )
        members = members[rng.permutation(len(members))]
        folds[members] = np.arange(len(members)) % k
    return folds


def balance_indices(
    y: np.ndarray, indices: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Down-sample `indices` so each class appears the minority count."""
    y = np.asarray(y)
    per_class = {
        cls: indices[y[indices] == cls] for cls in sorted(set(y[indices].tolist()))
    }
    minority = min(len(v) for v in per_class.values())
    kept = []
    for cls in sorted(per_class):
        members = per_class[cls]
        pick = rng.permutation(len(members))[:minority]
        kept.append(members[np.sort(pick)])
    return np.concatenate(kept)


def kfold_cv(
    X,
    y,
    k: int,
    repeats: int,
    params: ForestParams,
    seed: int,
    feature_names=None,
    balance: bool = False,
) -> EvaluationReport:
    """Repeated stratified k-fold cross-validation.

    Per repeat, samples are shuffled with rng([seed, repeat]) and dealt
    into k class-stratified folds; the confusion matrix is aggregated
    across folds, then means and standard deviations are taken across
    repeats.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.array([str(v) for v in y])
    classes = tuple(sorted(set(y.tolist())))
    micro_scores, macro_scores = [], []
    per_repeat = []
    confusion_total = np.zeros((len(classes), len(classes)), np.int64)
    for r in range(repeats):
        rng = np.random.default_rng([seed, r])
        folds = stratified_folds(y, k, rng)
        counts = np.zeros((len(classes), len(classes)), np.int64)
        fold_scores = []
        for f in range(k):
            train = np.nonzero(folds != f)[0]
            test = np.nonzero(folds == f)[0]
            if balance:
                train = balance_indices(y, train, np.random.default_rng([seed, r, f]))
            model = fit(X[train], y[train], params, feature_names)
            pred = model.predict(X[test])
            cm_fold = confusion_from_predictions(classes, y[test], pred)
            counts += cm_fold.counts
            fold_scores.append(compute_metrics(cm_fold)["micro_F1"])
        metrics = compute_metrics(ConfusionMatrix(classes=classes, counts=counts))
        micro_scores.append(metrics["micro_F1"])
        macro_scores.append(metrics["macro_F1"])
        per_repeat.append(
            {
                "repeat": r,
                "micro_F1": metrics["micro_F1"],
                "macro_F1": metrics["macro_F1"],
                "fold_micro_F1": fold_scores,
            }
        )
        confusion_total += counts
    overall = compute_metrics(ConfusionMatrix(classes=classes, counts=confusion_total))
    return EvaluationReport(
        classes=classes,
        confusion=confusion_total,
        per_class=overall["per_class"],
        micro_f1_mean=float(np.mean(micro_scores)),
        micro_f1_std=float(np.std(micro_scores)),
        macro_f1_mean=float(np.mean(macro_scores)),
        macro_f1_std=float(np.std(macro_scores)),
        per_repeat=per_repeat,
        zero_division_flags=overall["zero_division_flags"],
    )


# ---------------------------------------------------------------------------
# Feature selection
# ---------------------------------------------------------------------------


@dataclass
class SelectionTrace:
    dropped_by_correlation: list = field(default_factory=list)  # (kept, dropped, r)
    elimination_order: list = field(default_factory=list)  # (feature, importance)
    selected: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "dropped_by_correlation": [
                {"kept": a, "dropped": b, "r": r}
                for a, b, r in self.dropped_by_correlation
            ],
            "elimination_order": [
                {"feature": f, "importance": v} for f, v in self.elimination_order
            ],
            "selected": list(self.selected),
        }


def correlation_prune(
    X, names, threshold: float = 0.9
) -> tuple[list[str], list[tuple[str, str, float]]]:
    """Drop the later of each highly correlated feature pair.

    Pairs are visited by decreasing |r|; a pair only fires when both
    features are still alive, and the feature later in canonical
    (column) order is dropped. Constant columns have undefined r,
    are treated as |r| = 0, kept, and warned about.

    Returns (kept names in canonical order, [(kept, dropped, r), ...]).
    """
    X = np.asarray(X, dtype=np.float64)
    names = list(names)
    n, m = X.shape
    if m < 2 or n < 3:
        raise ValidationError("correlation pruning needs >= 2 features and >= 3 rows")
    std = X.std(axis=0)
    constant = std == 0
    for j in np.nonzero(constant)[0]:
        warnings.warn(f"feature {names[j]!r} is constant; correlation undefined, kept")
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(X, rowvar=False)
    corr = np.nan_to_num(corr, nan=0.0)
    iu, ju = np.triu_indices(m, 1)
    order = np.lexsort((ju, iu, -np.abs(corr[iu, ju])))
    alive = [True] * m
    dropped: list[tuple[str, str, float]] = []
    for k in order:
        i, j = int(iu[k]), int(ju[k])
        r = float(corr[i, j])
        if abs(r) < threshold:
            break
        if alive[i] and alive[j]:
            alive[j] = False  # j is later in canonical order
            dropped.append((names[i], names[j], r))
    kept = [names[j] for j in range(m) if alive[j]]
    return kept, dropped


def rfe_to_k(
    X, names, y, k: int, params: ForestParams
) -> SelectionTrace:
    """Recursive feature elimination down to k features.

    Each round fits a forest on the surviving features and removes the
    one with minimum importance (ties resolve to the later canonical
    position). The full elimination order is recorded.
    """
    X = np.asarray(X, dtype=np.float64)
    names = list(names)
    if len(names) < k:
        raise ValidationError(f"cannot select {k} features from {len(names)}")
    trace = SelectionTrace()
    surviving = list(range(len(names)))
    while len(surviving) > k:
        model = fit(X[:, surviving], y, params, [names[j] for j in surviving])
        imp = model.importances
        worst_pos = 0
        for pos in range(1, len(surviving)):
            if imp[pos] <= imp[worst_pos]:  # ties -> later canonical order
                worst_pos = pos
        trace.elimination_order.append(
            (names[surviving[worst_pos]], float(imp[worst_pos]))
        )
        surviving.pop(worst_pos)
    trace.selected = [names[j] for j in surviving]
    return trace


# ---------------------------------------------------------------------------
# Probe experiments
# ---------------------------------------------------------------------------


def decompose_complex(
    model: ForestModel,
    X,
    ids,
    groups=None,
) -> tuple[list[dict], dict]:
    """Class-probability decomposition of composite records.

    The model must be trained on exactly {slide, flow, fall}. Returns
    per-record probability rows and, per group, quartile summaries of
    each class probability.
    """
    if set(model.classes) != {"slide", "flow", "fall"}:
        raise ModelMismatchError(
            f"decomposition requires a slide/flow/fall model, got {model.classes}"
        )
    X = np.asarray(X, dtype=np.float64)
    ids = list(ids)
    groups = list(groups) if groups is not None else ["all"] * len(ids)
    proba = model.predict_proba(X)
    records = []
    for rid, grp, row in zip(ids, groups, proba):
        rec = {"id": rid, "group": grp}
        rec.update(
            {f"p_{cls}": float(p) for cls, p in zip(model.classes, row)}
        )
        records.append(rec)
    summary: dict[str, dict[str, dict[str, float]]] = {}
    for grp in sorted(set(groups)):
        rows = proba[[i for i, g in enumerate(groups) if g == grp]]
        summary[grp] = {}
        for c, cls in enumerate(model.classes):
            q1, med, q3 = np.percentile(rows[:, c], [25, 50, 75])
            summary[grp][cls] = {
                "q1": float(q1),
                "median": float(med),
                "q3": float(q3),
                "n": int(len(rows)),
            }
    return records, summary


def sample_efficiency_sweep(
    X,
    y,
    sizes,
    repeats: int,
    params: ForestParams,
    seed: int,
    feature_names=None,
    test_fraction: float = 0.25,
) -> list[dict]:
    """Accuracy versus per-class training-set size.

    A stratified test set (`test_fraction` of each class) is held out
    once; per size s and repeat, s training samples per class are drawn
    from the remaining pool, a forest is trained, and the fixed test set
    is scored. Returns one row per size with mean/std micro-F1 (equal to
    accuracy for single-label data) and per-class recall means.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.array([str(v) for v in y])
    classes = tuple(sorted(set(y.tolist())))
    rng_split = np.random.default_rng([seed, 0])
    test_mask = np.zeros(len(y), bool)
    for cls in classes:
        members = np.nonzero(y == cls)[0]
        n_test = max(1, int(round(len(members) * test_fraction)))
        pick = rng_split.permutation(len(members))[:n_test]
        test_mask[members[pick]] = True
    pool = np.nonzero(~test_mask)[0]
    test = np.nonzero(test_mask)[0]
    pool_per_class = {cls: pool[y[pool] == cls] for cls in classes}
    available = {cls: len(v) for cls, v in pool_per_class.items()}

    rows = []
    for s_idx, s in enumerate(sizes):
        s = int(s)
        for cls, avail in available.items():
            if s > avail:
                raise ValidationError(
                    f"size {s} exceeds available {avail} samples for class {cls!r}"
                )
        micro, per_class_tpr = [], []
        for r in range(repeats):
            rng = np.random.default_rng([seed, 1 + s_idx, r])
            train = np.concatenate(
                [
                    pool_per_class[cls][
                        np.sort(rng.permutation(available[cls])[:s])
                    ]
                    for cls in classes
                ]
            )
            model = fit(X[train], y[train], params, feature_names)
            pred = model.predict(X[test])
            metrics = compute_metrics(
                confusion_from_predictions(classes, y[test], pred)
            )
            micro.append(metrics["micro_F1"])
            per_class_tpr.append(
                [metrics["per_class"][cls]["TPR"] for cls in classes]
            )
        tpr_mean = np.mean(per_class_tpr, axis=0)
        row = {
            "size": s,
            "micro_F1_mean": float(np.mean(micro)),
            "micro_F1_std": float(np.std(micro)),
            "accuracy_mean": float(np.mean(micro)),
        }
        row.update(
            {f"TPR_{cls}": float(v) for cls, v in zip(classes, tpr_mean)}
        )
        rows.append(row)
    return rows
