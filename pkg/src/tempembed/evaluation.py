"""ROC-AUC, average precision, model scoring and a synthetic graph generator."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from tempembed.errors import DataError
from tempembed.graph_store import DataSplit, TemporalGraph
from tempembed.numerics import SplitMix64, derive_seed


class ScoredPair(NamedTuple):
    src: int
    dst: int
    label: int
    score: float


def _unpack(pairs_or_labels, scores=None):
    if scores is None:
        items = list(pairs_or_labels)
        labels = np.array([p.label for p in items], dtype=np.float64)
        scores = np.array([p.score for p in items], dtype=np.float64)
    else:
        labels = np.asarray(pairs_or_labels, dtype=np.float64)
        scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape:
        raise DataError("labels and scores differ in length")
    if not np.all(np.isfinite(scores)):
        raise DataError("scores must be finite")
    return labels, scores


def average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values sharing the mean of their positions."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], xs.size]
    mean_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(x.size)
    ranks[order] = np.repeat(mean_rank, ends - starts)
    return ranks


def roc_auc(pairs_or_labels, scores=None) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic.

    Accepts either a sequence of :class:`ScoredPair` or ``(labels, scores)``.
    """
    labels, scores = _unpack(pairs_or_labels, scores)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC-AUC needs at least one positive and one negative")
    ranks = average_ranks(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def pr_auc(pairs_or_labels, scores=None) -> float:
    """Average precision: mean of precision at each positive's rank.

    Equal scores keep their input order.
    """
    labels, scores = _unpack(pairs_or_labels, scores)
    n_pos = int((labels == 1).sum())
    if n_pos == 0:
        raise DataError("PR-AUC needs at least one positive")
    order = np.lexsort((np.arange(scores.size), -scores))
    hits = (labels[order] == 1).astype(np.float64)
    precision = np.cumsum(hits) / np.arange(1, hits.size + 1)
    return float(np.sum(precision * hits) / n_pos)


def roc_curve(labels, scores):
    """False and true positive rates at every distinct threshold."""
    labels, scores = _unpack(labels, scores)
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    cut = np.r_[np.flatnonzero(s[1:] != s[:-1]), s.size - 1]
    tp = np.cumsum(y)[cut]
    fp = (cut + 1) - tp
    return np.r_[0.0, fp / max(fp[-1], 1)], np.r_[0.0, tp / max(tp[-1], 1)]


def pr_curve(labels, scores):
    """Recall and precision after each item of the ranked list."""
    labels, scores = _unpack(labels, scores)
    order = np.lexsort((np.arange(scores.size), -scores))
    hits = labels[order] == 1
    tp = np.cumsum(hits)
    return tp / max(tp[-1], 1), tp / np.arange(1, hits.size + 1)


REPORT_SCHEMA = {
    "type": "object",
    "required": ["tool_version", "roc_auc", "pr_auc", "positives", "negatives", "scorer", "config"],
    "properties": {
        "tool_version": {"type": "string"},
        "roc_auc": {"type": "number", "minimum": 0, "maximum": 1},
        "pr_auc": {"type": "number", "minimum": 0, "maximum": 1},
        "pr_auc_method": {"type": "string"},
        "positives": {"type": "integer", "minimum": 0},
        "negatives": {"type": "integer", "minimum": 0},
        "scorer": {"type": "string"},
        "pivot_time": {"type": "number"},
        "config": {"type": "object"},
        "inputs": {"type": "object"},
    },
}


@dataclass
class MetricReport:
    roc_auc: float
    pr_auc: float
    positives: int
    negatives: int
    scorer: str = "model"
    config: dict = field(default_factory=dict)
    wall_clock_seconds: float = 0.0
    pivot_time: float | None = None

    def to_json(self, include_timing: bool = False) -> dict:
        from tempembed import __version__

        doc = {
            "tool_version": __version__,
            "scorer": self.scorer,
            "roc_auc": self.roc_auc,
            "pr_auc": self.pr_auc,
            "pr_auc_method": "average_precision",
            "positives": self.positives,
            "negatives": self.negatives,
        }
        if self.pivot_time is not None:
            doc["pivot_time"] = self.pivot_time
        doc["config"] = dict(self.config)
        if include_timing:
            doc["wall_clock_seconds"] = self.wall_clock_seconds
        return doc


def random_scores(n: int, seed: int = 0) -> np.ndarray:
    return SplitMix64(derive_seed(seed, 31)).uniform(n)


def evaluate_model(model, aligned, split: DataSplit, scorer: str = "model", seed: int = 0, config=None):
    """Score every test pair and compute the metrics.

    ``scorer`` is ``"model"`` (needs ``model``), ``"random"`` (seeded uniform
    scores) or ``"oracle"`` (score equals label). Returns the report and the
    list of :class:`ScoredPair`.
    """
    start = time.perf_counter()
    pairs, labels = split.test_examples()
    n = aligned.num_nodes if aligned is not None else None
    if n is not None and pairs.size and pairs.max() >= n:
        raise DataError("test pair references a node missing from the embedding series")
    if scorer == "model":
        if model is None:
            raise DataError("model scorer needs a trained model")
        scores = model.predict(aligned, pairs)
    elif scorer == "random":
        scores = random_scores(len(pairs), seed)
    elif scorer == "oracle":
        scores = labels.copy()
    else:
        raise DataError(f"unknown scorer {scorer!r}")
    scored = [ScoredPair(int(u), int(v), int(y), float(s)) for (u, v), y, s in zip(pairs, labels, scores)]
    report = MetricReport(
        roc_auc(labels, scores),
        pr_auc(labels, scores),
        int(labels.sum()),
        int(len(labels) - labels.sum()),
        scorer,
        dict(config or {}),
        time.perf_counter() - start,
        float(split.pivot_time),
    )
    return report, scored


def scored_pairs_csv(scored) -> str:
    lines = ["src,dst,label,score"]
    lines += [f"{p.src},{p.dst},{p.label},{p.score!r}" for p in scored]
    return "\n".join(lines) + "\n"


def generate_synthetic(
    num_nodes: int = 100,
    num_snapshots: int = 10,
    communities: int = 2,
    p_in: float = 0.2,
    p_out: float = 0.02,
    seed: int = 0,
) -> TemporalGraph:
    """Planted-partition graph whose edges arrive over ``num_snapshots`` steps.

    Communities are equal-sized blocks of a seeded random node permutation
    (see :func:`planted_communities`), so node ids carry no community
    information. Each unordered pair links
    with probability ``p_in`` (same block) or ``p_out`` (different blocks);
    a linked pair appears once, at a snapshot drawn uniformly from
    ``0..num_snapshots-1`` which becomes its timestamp. Edges are emitted in
    time order.
    """
    if not (0.0 <= p_in <= 1.0 and 0.0 <= p_out <= 1.0):
        raise DataError("probabilities must lie in [0, 1]")
    if communities < 2 or num_nodes < communities or num_snapshots < 1:
        raise DataError("need communities >= 2, num_nodes >= communities and num_snapshots >= 1")
    block = planted_communities(num_nodes, communities, seed)
    u, v = np.triu_indices(num_nodes, k=1)
    prob = np.where(block[u] == block[v], p_in, p_out)
    rng = SplitMix64(derive_seed(seed, 41))
    hit = rng.uniform(u.size) < prob
    when = rng.integers(num_snapshots, u.size)
    u, v, when = u[hit], v[hit], when[hit]
    order = np.argsort(when, kind="stable")
    return TemporalGraph(num_nodes, u[order], v[order], when[order].astype(np.float64), False)


def planted_communities(num_nodes: int, communities: int, seed: int = 0) -> np.ndarray:
    """Community index per node as used by :func:`generate_synthetic`."""
    perm = SplitMix64(derive_seed(seed, 40)).permutation(num_nodes)
    block = np.empty(num_nodes, dtype=np.int64)
    block[perm] = (np.arange(num_nodes) * communities) // num_nodes
    return block
