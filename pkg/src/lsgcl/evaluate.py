"""Downstream evaluation: node classification and link prediction with a linear probe."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import softmax
from scipy.stats import rankdata

from .errors import SamplingError
from .graph import Graph

log = logging.getLogger(__name__)


@dataclass
class NodeSplit:
    train: np.ndarray
    test: np.ndarray


@dataclass
class EdgeSplit:
    train_pos: np.ndarray
    test_pos: np.ndarray
    train_neg: np.ndarray
    test_neg: np.ndarray


def split_nodes(g: Graph, per_class: int = 20, seed=None) -> NodeSplit:
    """Sample ``per_class`` training nodes from every class; the rest are test nodes."""
    if g.labels is None:
        raise RuntimeError("graph has no labels")
    rng = np.random.default_rng(seed)
    train = []
    for c in range(g.num_classes):
        members = np.flatnonzero(g.labels == c)
        if len(members) == 0:
            raise ValueError(f"class {c} has no nodes")
        take = min(per_class, len(members))
        train.append(rng.choice(members, size=take, replace=False))
    train = np.sort(np.concatenate(train))
    test = np.setdiff1d(np.arange(g.num_nodes), train)
    if len(test) == 0:
        raise ValueError(f"per_class={per_class} leaves no test nodes")
    return NodeSplit(train, test)


def split_edges(g: Graph, test_frac: float = 0.4, seed=None, max_attempts: int = 100):
    """Hold out a fraction of edges and sample as many non-edges.

    Returns ``(split, reduced_graph)`` where the reduced graph no longer
    contains the held-out positives. Negatives are distinct non-edges of the
    full graph, stored like positives with the smaller id first.
    """
    if not 0.0 < test_frac < 1.0:
        raise ValueError("test_frac must lie in (0, 1)")
    edges = g.edge_list()
    e = len(edges)
    if e < 5:
        raise ValueError("link prediction needs at least 5 edges")
    rng = np.random.default_rng(seed)
    n_test = max(1, int(np.floor(test_frac * e)))
    perm = rng.permutation(e)
    test_pos, train_pos = edges[np.sort(perm[:n_test])], edges[np.sort(perm[n_test:])]

    n = g.num_nodes
    need = e
    existing = set((edges[:, 0] * n + edges[:, 1]).tolist())
    chosen: list[int] = []
    seen: set[int] = set()
    for _ in range(max_attempts):
        u = rng.integers(n, size=2 * need)
        v = rng.integers(n, size=2 * need)
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        for key in (lo * n + hi)[lo != hi].tolist():
            if key not in existing and key not in seen:
                seen.add(key)
                chosen.append(key)
                if len(chosen) == need:
                    break
        if len(chosen) == need:
            break
    else:
        raise SamplingError(f"found only {len(chosen)} of {need} non-edges")
    keys = np.asarray(chosen, dtype=np.int64)
    neg = np.column_stack([keys // n, keys % n])
    split = EdgeSplit(train_pos, test_pos, neg[n_test:], neg[:n_test])
    return split, g.without_edges(test_pos)


@dataclass
class LinearProbe:
    weight: np.ndarray  # (C, D')
    bias: np.ndarray  # (C,)

    def proba(self, x: np.ndarray) -> np.ndarray:
        return softmax(x @ self.weight.T + self.bias, axis=1)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(x @ self.weight.T + self.bias, axis=1)


def train_linear_probe(
    x: np.ndarray,
    y: np.ndarray,
    num_classes: int | None = None,
    seed=None,
    lr: float = 0.01,
    weight_decay: float = 1e-4,
    iters: int = 300,
) -> LinearProbe:
    """Softmax regression fit by full-batch gradient descent on frozen inputs."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    c = int(y.max()) + 1 if num_classes is None else num_classes
    if len(np.unique(y)) < 2:
        raise ValueError("training rows cover a single class")
    rng = np.random.default_rng(seed)
    w = rng.normal(scale=0.01, size=(c, x.shape[1]))
    b = np.zeros(c)
    onehot = np.eye(c)[y]
    n = len(y)
    for _ in range(iters):
        p = softmax(x @ w.T + b, axis=1)
        err = (p - onehot) / n
        w -= lr * (err.T @ x + weight_decay * w)
        b -= lr * err.sum(axis=0)
    return LinearProbe(w, b)


LINK_OPS = ("concat", "hadamard")


def link_features(emb: np.ndarray, pairs, op: str = "concat") -> np.ndarray:
    """Pair features, one row per ``(u, v)`` pair, order kept.

    ``concat`` stacks the two endpoint embeddings side by side. ``hadamard``
    takes their elementwise product, which lets a linear probe see similarity.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if op == "concat":
        return np.hstack([emb[pairs[:, 0]], emb[pairs[:, 1]]])
    if op == "hadamard":
        return emb[pairs[:, 0]] * emb[pairs[:, 1]]
    raise ValueError(f"unknown pair operator {op!r}; expected one of {LINK_OPS}")


def canonical_pairs(pairs) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return np.sort(pairs, axis=1)


def auc_score(pos_scores, neg_scores) -> float:
    """Probability that a random positive outscores a random negative; ties count 1/2."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    ranks = rankdata(np.concatenate([pos, neg]))
    n_pos, n_neg = len(pos), len(neg)
    return float((ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def precision_recall_f1(y_true, y_pred) -> tuple[float, float, float]:
    y_true = np.asarray(y_true, dtype=bool)
    y_pred = np.asarray(y_pred, dtype=bool)
    tp = np.sum(y_true & y_pred)
    fp = np.sum(~y_true & y_pred)
    fn = np.sum(y_true & ~y_pred)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return float(precision), float(recall), float(f1)


def standardize(train: np.ndarray, *others):
    """Z-score columns with training statistics; constant columns are only centered."""
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd[sd == 0] = 1.0
    return tuple((a - mu) / sd for a in (train, *others))


@dataclass
class MetricRow:
    task: str
    metric: str
    mean: float
    std: float
    seeds: int
    runs: list = field(default_factory=list, repr=False)


def _row(task, metric, values) -> MetricRow:
    v = np.asarray(values, dtype=np.float64)
    return MetricRow(task, metric, float(v.mean()), float(v.std()), len(v), v.tolist())


def node_classification_accuracy(emb: np.ndarray, g: Graph, per_class: int = 20, seed=None) -> float:
    split = split_nodes(g, per_class, seed)
    x_train, x_test = standardize(emb[split.train], emb[split.test])
    probe = train_linear_probe(x_train, g.labels[split.train], g.num_classes, seed)
    return float(np.mean(probe.predict(x_test) == g.labels[split.test]))


def evaluate_nc(emb: np.ndarray, g: Graph, per_class: int = 20, seeds=range(10)) -> list[MetricRow]:
    """Accuracy of a linear probe over repeated class-balanced splits."""
    if g.labels is None:
        raise RuntimeError("graph has no labels")
    accs = [node_classification_accuracy(emb, g, per_class, s) for s in seeds]
    return [_row("nc", "accuracy", accs)]


def link_prediction_scores(emb: np.ndarray, split: EdgeSplit, seed=None, op: str = "concat") -> dict:
    """Fit the probe on training pairs and score the held-out pairs."""
    train_pairs = canonical_pairs(np.vstack([split.train_pos, split.train_neg]))
    test_pairs = canonical_pairs(np.vstack([split.test_pos, split.test_neg]))
    y_train = np.r_[np.ones(len(split.train_pos)), np.zeros(len(split.train_neg))].astype(np.int64)
    y_test = np.r_[np.ones(len(split.test_pos)), np.zeros(len(split.test_neg))].astype(bool)
    x_train, x_test = standardize(link_features(emb, train_pairs, op), link_features(emb, test_pairs, op))
    probe = train_linear_probe(x_train, y_train, 2, seed)
    prob = probe.proba(x_test)[:, 1]
    precision, recall, f1 = precision_recall_f1(y_test, prob >= 0.5)
    return {
        "auc": auc_score(prob[y_test], prob[~y_test]),
        "recall": recall,
        "precision": precision,
        "f1": f1,
    }


def evaluate_lp(
    g: Graph,
    cfg,
    seeds=range(10),
    test_frac: float = 0.4,
    view: str = "GLOBAL",
    op: str = "concat",
) -> list[MetricRow]:
    """Leakage-safe link prediction: embeddings are retrained per split on the reduced graph."""
    from .sampler import precompute_subgraphs
    from .trainer import export_embeddings, train

    runs = {k: [] for k in ("auc", "recall", "precision", "f1")}
    for s in seeds:
        split, reduced = split_edges(g, test_frac, s)
        subs = precompute_subgraphs(reduced, cfg.ppr, cfg.sampler, hops=cfg.hops, seed=s)
        params, _ = train(reduced, subs, replace(cfg, seed=s))
        emb = export_embeddings(reduced, subs, params, view)
        scores = link_prediction_scores(emb, split, s, op)
        log.info("lp seed %s: %s", s, scores)
        for k, v in scores.items():
            runs[k].append(v)
    names = {"auc": "AUC", "recall": "Recall", "precision": "Precision", "f1": "F1"}
    return [_row("lp", names[k], v) for k, v in runs.items()]


def write_report(rows, path: str | os.PathLike) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["task", "metric", "mean", "std", "seeds"])
        for r in rows:
            w.writerow([r.task, r.metric, repr(r.mean), repr(r.std), r.seeds])
    os.replace(tmp, path)
