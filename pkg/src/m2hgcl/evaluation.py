"""Downstream evaluation: linear-probe classification and K-means clustering.

Classification trains a multinomial logistic probe on frozen embeddings with
the in-package optimizer (Adam, lr 1e-2, 300 steps, L2 weight decay 1e-4 on
the weight matrix), selecting the snapshot with the best validation Macro-F1.
AUC is one-vs-rest, macro-averaged over classes on predicted probabilities
(printed report headers declare this, since multi-class AUC is ambiguous).
Clustering runs K-means (k-means++ seeding, 10 restarts keeping best inertia)
and reports NMI (arithmetic-mean normalization) and ARI.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.cluster import KMeans
from sklearn.metrics import (adjusted_rand_score, f1_score,
                             normalized_mutual_info_score, roc_auc_score)

from .autodiff import AdamState, Tensor, adam_step, glorot_init

AUC_DEFINITION = "one-vs-rest, macro-averaged over classes"


# ---------------------------------------------------------------------------
# splits

@dataclass
class SplitSpec:
    train_fraction: float
    n_val: int
    n_test: int
    seed: int

    def __post_init__(self):
        if not (0 < self.train_fraction < 1):
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.n_val < 1 or self.n_test < 1:
            raise ValueError("validation and test partitions must be non-empty")


def make_split_spec(n_labeled: int, train_fraction: float, seed: int) -> SplitSpec:
    """Fixed 1000/1000 validation/test when feasible, else 10%/10%."""
    n_train = int(train_fraction * n_labeled)
    if n_train + 2000 <= n_labeled:
        return SplitSpec(train_fraction, 1000, 1000, seed)
    scaled = max(1, n_labeled // 10)
    return SplitSpec(train_fraction, scaled, scaled, seed)


def split(labels: np.ndarray, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Disjoint, seed-deterministic (train, val, test) index arrays."""
    labeled = np.flatnonzero(np.asarray(labels) >= 0)
    n = labeled.size
    n_train = int(spec.train_fraction * n)
    if n_train < 1:
        raise ValueError("training partition is empty")
    if n_train + spec.n_val + spec.n_test > n:
        raise ValueError(
            f"infeasible split: {n_train} train + {spec.n_val} val + "
            f"{spec.n_test} test > {n} labeled nodes")
    order = np.random.default_rng(spec.seed).permutation(n)
    shuffled = labeled[order]
    train = np.sort(shuffled[:n_train])
    val = np.sort(shuffled[n_train:n_train + spec.n_val])
    test = np.sort(shuffled[n_train + spec.n_val:n_train + spec.n_val + spec.n_test])
    return train, val, test


# ---------------------------------------------------------------------------
# linear probe

@dataclass
class LinearClassifier:
    weights: np.ndarray          # (dim, n_classes)
    bias: np.ndarray             # (1, n_classes)
    classes: np.ndarray

    def predict_proba(self, embeddings: np.ndarray) -> np.ndarray:
        logits = np.asarray(embeddings, dtype=np.float64) @ self.weights + self.bias
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, embeddings: np.ndarray) -> np.ndarray:
        return self.classes[self.predict_proba(embeddings).argmax(axis=1)]


def train_linear_classifier(z_train: np.ndarray, y_train: np.ndarray,
                            z_val: np.ndarray | None = None,
                            y_val: np.ndarray | None = None, *,
                            steps: int = 300, lr: float = 1e-2,
                            weight_decay: float = 1e-4, seed: int = 0) -> LinearClassifier:
    """Multinomial logistic regression on frozen embeddings."""
    z_train = np.asarray(z_train, dtype=np.float64)
    classes = np.unique(np.asarray(y_train))
    if classes.size < 2:
        raise ValueError("classifier training needs at least 2 classes")
    class_pos = {c: i for i, c in enumerate(classes)}
    one_hot = np.zeros((len(y_train), classes.size))
    one_hot[np.arange(len(y_train)), [class_pos[c] for c in y_train]] = 1.0

    rng = np.random.default_rng(seed)
    w = glorot_init((z_train.shape[1], classes.size), rng)
    b = Tensor.parameter(np.zeros((1, classes.size)))
    state = AdamState.for_params([w, b])
    x = Tensor.constant(z_train)
    targets = Tensor.constant(one_hot)

    def snapshot() -> LinearClassifier:
        return LinearClassifier(w.values.copy(), b.values.copy(), classes)

    best = snapshot()
    best_score = -np.inf
    for step_idx in range(steps):
        w.zero_grad()
        b.zero_grad()
        probs = (x @ w + b).row_softmax().clamp(1e-12, 1.0)
        ce = -(probs.log() * targets).sum().scale(1.0 / len(y_train))
        loss = ce + (w * w).sum().scale(weight_decay)
        loss.backward()
        adam_step([w, b], state, lr)
        if z_val is not None and (step_idx % 10 == 9 or step_idx == steps - 1):
            current = snapshot()
            score = f1_score(y_val, current.predict(z_val), average="macro")
            if score > best_score:
                best_score = score
                best = current
    return best if z_val is not None else snapshot()


def classify_metrics(classifier: LinearClassifier, embeddings: np.ndarray,
                     y_true: np.ndarray) -> tuple[float, float, float]:
    """(macro_f1, micro_f1, auc) of a trained probe on frozen embeddings.

    AUC averages the per-class one-vs-rest scores over the classes that have
    both positives and negatives in ``y_true`` (nan if none do).
    """
    y_true = np.asarray(y_true)
    probs = classifier.predict_proba(embeddings)
    preds = classifier.classes[probs.argmax(axis=1)]
    macro = f1_score(y_true, preds, average="macro")
    micro = f1_score(y_true, preds, average="micro")
    if classifier.classes.size == 2:
        positive = y_true == classifier.classes[1]
        auc = roc_auc_score(positive, probs[:, 1]) if 0 < positive.sum() < len(y_true) \
            else float("nan")
    else:
        per_class = [roc_auc_score(y_true == c, probs[:, i])
                     for i, c in enumerate(classifier.classes)
                     if 0 < (y_true == c).sum() < len(y_true)]
        auc = float(np.mean(per_class)) if per_class else float("nan")
    return float(macro), float(micro), float(auc)


# ---------------------------------------------------------------------------
# clustering

def kmeans(embeddings: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Lloyd's algorithm, k-means++ seeding, 10 restarts keeping best inertia."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > embeddings.shape[0]:
        raise ValueError(f"k={k} exceeds {embeddings.shape[0]} samples")
    model = KMeans(n_clusters=k, init="k-means++", n_init=10, algorithm="lloyd",
                   random_state=int(seed) % (2 ** 32))
    return model.fit_predict(embeddings)


def cluster_metrics(assignments: np.ndarray, y_true: np.ndarray) -> tuple[float, float]:
    """(nmi, ari); NMI uses arithmetic-mean normalization."""
    nmi = normalized_mutual_info_score(y_true, assignments, average_method="arithmetic")
    ari = adjusted_rand_score(y_true, assignments)
    return float(nmi), float(ari)


# ---------------------------------------------------------------------------
# aggregated reports

@dataclass
class EvalReport:
    """Per-metric mean and standard deviation over evaluation runs."""

    metrics: dict[str, dict] = field(default_factory=dict)

    def add(self, name: str, samples: list[float]) -> None:
        arr = np.asarray(samples, dtype=np.float64)
        self.metrics[name] = {"mean": float(arr.mean()),
                              "std": float(arr.std()),
                              "runs": int(arr.size)}

    def to_dict(self) -> dict:
        return dict(self.metrics)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format_table(self, header: str = "") -> str:
        lines = []
        if header:
            lines.append(header)
        for name in sorted(self.metrics):
            m = self.metrics[name]
            lines.append(f"  {name:<10} {m['mean']:.4f} +/- {m['std']:.4f}  (n={m['runs']})")
        return "\n".join(lines)


def evaluate_classification(embeddings: np.ndarray, labels: np.ndarray,
                            train_fraction: float, seeds: list[int]) -> EvalReport:
    """Split / probe / score once per seed; report mean +/- std on the test set."""
    labels = np.asarray(labels)
    n_labeled = int((labels >= 0).sum())
    macro, micro, auc = [], [], []
    for seed in seeds:
        spec = make_split_spec(n_labeled, train_fraction, seed)
        train_idx, val_idx, test_idx = split(labels, spec)
        clf = train_linear_classifier(embeddings[train_idx], labels[train_idx],
                                      embeddings[val_idx], labels[val_idx], seed=seed)
        ma, mi, au = classify_metrics(clf, embeddings[test_idx], labels[test_idx])
        macro.append(ma)
        micro.append(mi)
        auc.append(au)
    report = EvalReport()
    report.add("macro_f1", macro)
    report.add("micro_f1", micro)
    report.add("auc", auc)
    return report


def evaluate_clustering(embeddings: np.ndarray, labels: np.ndarray,
                        seeds: list[int], k: int | None = None) -> EvalReport:
    """K-means over labeled nodes once per seed; reports NMI and ARI."""
    labels = np.asarray(labels)
    mask = labels >= 0
    y = labels[mask]
    if k is None:
        k = int(np.unique(y).size)
    nmi, ari = [], []
    for seed in seeds:
        assignments = kmeans(embeddings[mask], k, seed)
        n, a = cluster_metrics(assignments, y)
        nmi.append(n)
        ari.append(a)
    report = EvalReport()
    report.add("nmi", nmi)
    report.add("ari", ari)
    return report
