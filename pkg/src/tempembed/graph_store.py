"""Timestamped edge lists, cumulative snapshots, temporal split and negatives."""

from __future__ import annotations

import io
import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, NamedTuple, TextIO

import numpy as np

from tempembed.errors import DataError, ParseError
from tempembed.numerics import SplitMix64, derive_seed

_SPLIT = re.compile(r"[,\s]+")
_INT = re.compile(r"^\d+$")

# exhaustive candidate enumeration below this many pairs, rejection above
_ENUMERATE_LIMIT = 4_000_000


class TemporalEdge(NamedTuple):
    src: int
    dst: int
    timestamp: float


@dataclass(frozen=True, eq=False)
class TemporalGraph:
    """Node universe ``0..num_nodes-1`` plus edges kept in input order.

    Undirected graphs store every edge as ``src <= dst``.
    """

    num_nodes: int
    src: np.ndarray
    dst: np.ndarray
    ts: np.ndarray
    directed: bool = False
    node_labels: tuple = ()

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64)
        dst = np.asarray(self.dst, dtype=np.int64)
        ts = np.asarray(self.ts, dtype=np.float64)
        if not (src.shape == dst.shape == ts.shape) or src.ndim != 1:
            raise DataError("src, dst and ts must be equal-length 1-d arrays")
        if self.num_nodes < 1:
            raise DataError("graph needs at least one node")
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= self.num_nodes):
            raise DataError("edge endpoint outside node universe")
        if not np.all(np.isfinite(ts)):
            raise DataError("timestamps must be finite")
        if not self.directed:
            src, dst = np.minimum(src, dst), np.maximum(src, dst)
        for name, arr in (("src", src), ("dst", dst), ("ts", ts)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not self.node_labels:
            object.__setattr__(self, "node_labels", tuple(str(i) for i in range(self.num_nodes)))

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    @property
    def edges(self) -> list[TemporalEdge]:
        return [TemporalEdge(int(s), int(d), float(t)) for s, d, t in zip(self.src, self.dst, self.ts)]

    def __eq__(self, other):
        if not isinstance(other, TemporalGraph):
            return NotImplemented
        return (
            self.num_nodes == other.num_nodes
            and self.directed == other.directed
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.ts, other.ts)
        )

    def symmetrized(self) -> "TemporalGraph":
        if not self.directed:
            return self
        return TemporalGraph(self.num_nodes, self.src, self.dst, self.ts, False, self.node_labels)

    def pair_keys(self) -> np.ndarray:
        return pair_key(self.src, self.dst, self.num_nodes, self.directed)

    def stats(self) -> dict:
        n, e = self.num_nodes, self.num_edges
        avg = (e if self.directed else 2 * e) / n
        return {"num_nodes": n, "num_edges": e, "average_degree": round(avg, 4), "directed": self.directed}


def pair_key(u, v, num_nodes: int, directed: bool) -> np.ndarray:
    """Integer key per node pair; unordered pairs share one key when undirected."""
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    if not directed:
        u, v = np.minimum(u, v), np.maximum(u, v)
    return u * num_nodes + v


def _format_ts(t: float) -> str:
    return str(int(t)) if float(t).is_integer() and abs(t) < 2**53 else repr(float(t))


def parse_edge_list(stream: TextIO | str, directed: bool = False) -> TemporalGraph:
    """Read ``src dst timestamp`` lines into a :class:`TemporalGraph`.

    Node ids are re-indexed densely in order of first appearance. Fields may
    be separated by whitespace or commas; ``#`` lines are comments.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    index: dict[str, int] = {}
    src, dst, ts = [], [], []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f for f in _SPLIT.split(line) if f]
        if len(fields) < 3:
            raise ParseError(f"expected 'src dst timestamp', got {line!r}", lineno)
        a, b, t = fields[:3]
        for tok in (a, b):
            if not _INT.match(tok):
                raise ParseError(f"node id {tok!r} is not a non-negative integer", lineno)
        try:
            t = float(t)
        except ValueError:
            raise ParseError(f"timestamp {t!r} is not a number", lineno) from None
        if not math.isfinite(t):
            raise ParseError("timestamp must be finite", lineno)
        if t < 0:
            raise ParseError(f"negative timestamp {t}", lineno)
        ids = []
        for tok in (a, b):
            key = str(int(tok))
            if key not in index:
                index[key] = len(index)
            ids.append(index[key])
        src.append(ids[0])
        dst.append(ids[1])
        ts.append(t)
    if not index:
        raise DataError("no edges")
    return TemporalGraph(len(index), np.array(src), np.array(dst), np.array(ts), directed, tuple(index))


def format_edge_list(g: TemporalGraph) -> str:
    lines = [f"{s} {d} {_format_ts(t)}" for s, d, t in zip(g.src.tolist(), g.dst.tolist(), g.ts.tolist())]
    return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True, eq=False)
class SnapshotSeries:
    """Cumulative snapshots of a graph.

    ``edge_bin[k]`` is the snapshot index at which edge ``k`` first belongs;
    snapshot ``s`` holds every edge with ``edge_bin <= s`` (equivalently
    ``ts <= boundaries[s]``).
    """

    graph: TemporalGraph
    boundaries: np.ndarray
    edge_bin: np.ndarray
    granularity: str = "count:10"

    def __post_init__(self):
        for name in ("boundaries", "edge_bin"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_snapshots(self) -> int:
        return int(self.boundaries.size)

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    def edge_mask(self, s: int) -> np.ndarray:
        return self.edge_bin <= s

    def snapshot_edges(self, s: int) -> np.ndarray:
        """Indices into the graph's edge arrays present at snapshot ``s``."""
        return np.flatnonzero(self.edge_mask(s))

    def last_seen(self, s: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Distinct pairs of snapshot ``s`` with the latest index each (re)appeared."""
        g = self.graph
        mask = self.edge_mask(s)
        keys = pair_key(g.src[mask], g.dst[mask], g.num_nodes, g.directed)
        bins = self.edge_bin[mask]
        order = np.lexsort((bins, keys))
        keys, bins = keys[order], bins[order]
        last = np.ones(keys.size, dtype=bool)
        last[:-1] = keys[1:] != keys[:-1]
        keys, bins = keys[last], bins[last]
        return keys // g.num_nodes, keys % g.num_nodes, bins

    def truncate(self, pivot_time: float) -> "SnapshotSeries":
        """Series restricted to edges at or before ``pivot_time``."""
        g = self.graph
        keep = g.ts <= pivot_time
        sub = TemporalGraph(g.num_nodes, g.src[keep], g.dst[keep], g.ts[keep], g.directed, g.node_labels)
        bins = self.edge_bin[keep]
        t = int(bins.max()) + 1 if bins.size else 0
        bounds = np.minimum(self.boundaries[:t], pivot_time)
        return SnapshotSeries(sub, bounds, bins, self.granularity)

    def to_json(self) -> dict:
        g = self.graph
        return {
            "num_nodes": g.num_nodes,
            "directed": g.directed,
            "granularity": self.granularity,
            "boundaries": self.boundaries.tolist(),
            "node_labels": list(g.node_labels),
            "edges": [[s, d, t] for s, d, t in zip(g.src.tolist(), g.dst.tolist(), g.ts.tolist())],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SnapshotSeries":
        try:
            edges = np.asarray(doc["edges"], dtype=np.float64).reshape(-1, 3)
            g = TemporalGraph(
                int(doc["num_nodes"]),
                edges[:, 0].astype(np.int64),
                edges[:, 1].astype(np.int64),
                edges[:, 2],
                bool(doc.get("directed", False)),
                tuple(doc.get("node_labels", ())),
            )
            bounds = np.asarray(doc["boundaries"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed snapshot document: {exc}") from exc
        bins = np.searchsorted(bounds, g.ts, side="left")
        if bins.size and bins.max() >= bounds.size:
            raise DataError("edge timestamp beyond last snapshot boundary")
        return cls(g, bounds, bins, doc.get("granularity", "custom"))

    def dumps(self, **extra) -> str:
        doc = dict(extra)
        doc.update(self.to_json())
        return json.dumps(doc, indent=None, separators=(",", ":"))


_CALENDAR = ("day", "week", "month")


def _calendar_bin(ts: np.ndarray, unit: str) -> np.ndarray:
    if unit == "day":
        return np.floor(ts / 86400.0).astype(np.int64)
    if unit == "week":
        return np.floor(ts / 604800.0).astype(np.int64)
    months = [
        (d.year * 12 + d.month - 1)
        for d in (datetime.fromtimestamp(float(t), tz=timezone.utc) for t in ts)
    ]
    return np.asarray(months, dtype=np.int64)


def bin_snapshots(g: TemporalGraph, granularity: str = "count:10") -> SnapshotSeries:
    """Assign every edge to a snapshot.

    ``day``/``week``/``month`` use UTC calendar bins on epoch-second
    timestamps and keep empty interior bins, so snapshot indices track
    elapsed time. ``count:K`` makes ``K`` equal-count bins in time order and
    ``index`` one bin per distinct timestamp; both drop empty bins. Edges
    sharing a timestamp always land in the same bin.
    """
    if g.num_edges == 0:
        raise DataError("no edges")
    ts = g.ts
    if granularity in _CALENDAR:
        raw = _calendar_bin(ts, granularity)
        bins = raw - raw.min()
    elif granularity == "index":
        _, bins = np.unique(ts, return_inverse=True)
    elif granularity.startswith("count:"):
        try:
            k = int(granularity.split(":", 1)[1])
        except ValueError:
            raise DataError(f"bad granularity {granularity!r}") from None
        if k < 1:
            raise DataError("count:K needs K >= 1")
        order = np.argsort(ts, kind="stable")
        e = ts.size
        rank_bin = np.empty(e, dtype=np.int64)
        rank_bin[order] = (np.arange(e) * k) // e
        # equal timestamps join the latest bin any of them was given
        uniq, inv = np.unique(ts, return_inverse=True)
        group_max = np.full(uniq.size, -1, dtype=np.int64)
        np.maximum.at(group_max, inv, rank_bin)
        _, bins = np.unique(group_max[inv], return_inverse=True)
    else:
        raise DataError(f"unknown granularity {granularity!r}")
    bins = np.asarray(bins, dtype=np.int64).reshape(-1)
    t = int(bins.max()) + 1
    if t == 0:
        raise DataError("zero snapshots")
    per_bin_max = np.full(t, -np.inf)
    np.maximum.at(per_bin_max, bins, ts)
    boundaries = np.maximum.accumulate(per_bin_max)
    return SnapshotSeries(g, boundaries, bins, granularity)


@dataclass(frozen=True)
class DataSplit:
    """Labelled node pairs on either side of the pivot time.

    Pair arrays have shape ``(M, 2)``; positive timestamps hold the first
    time each pair appeared on its side of the pivot.
    """

    pivot_time: float
    train_positives: np.ndarray
    test_positives: np.ndarray
    train_negatives: np.ndarray
    test_negatives: np.ndarray
    train_positive_ts: np.ndarray = field(default_factory=lambda: np.empty(0))
    test_positive_ts: np.ndarray = field(default_factory=lambda: np.empty(0))

    def train_examples(self) -> tuple[np.ndarray, np.ndarray]:
        pairs = np.vstack([self.train_positives, self.train_negatives])
        labels = np.concatenate([np.ones(len(self.train_positives)), np.zeros(len(self.train_negatives))])
        return pairs, labels

    def test_examples(self) -> tuple[np.ndarray, np.ndarray]:
        pairs = np.vstack([self.test_positives, self.test_negatives])
        labels = np.concatenate([np.ones(len(self.test_positives)), np.zeros(len(self.test_negatives))])
        return pairs, labels


def _first_occurrence(keys: np.ndarray, ts: np.ndarray, num_nodes: int):
    order = np.lexsort((ts, keys))
    keys, ts = keys[order], ts[order]
    first = np.ones(keys.size, dtype=bool)
    first[1:] = keys[1:] != keys[:-1]
    keys, ts = keys[first], ts[first]
    by_time = np.lexsort((keys, ts))
    keys, ts = keys[by_time], ts[by_time]
    return np.column_stack([keys // num_nodes, keys % num_nodes]), ts, keys


def temporal_split(series: SnapshotSeries, train_fraction: float = 0.7, seed: int = 0) -> DataSplit:
    """Split at the time of the ``ceil(fraction * |E|)``-th edge.

    Edges at the pivot go to training. Test positives are pairs first seen
    after the pivot that were never seen at or before it. Negatives are
    drawn 1:1 per side from pairs that never appear at any time; train and
    test negatives are disjoint.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must lie strictly between 0 and 1")
    g = series.graph
    if g.num_edges == 0:
        raise DataError("no edges")
    ts_sorted = np.sort(g.ts, kind="stable")
    k = max(1, math.ceil(train_fraction * g.num_edges - 1e-9))
    pivot = float(ts_sorted[k - 1])
    if not np.any(g.ts > pivot):
        raise DataError("empty test partition: no edge after the pivot time")

    keys = g.pair_keys()
    loops = g.src == g.dst
    before = (g.ts <= pivot) & ~loops
    after = (g.ts > pivot) & ~loops
    train_pos, train_ts, train_keys = _first_occurrence(keys[before], g.ts[before], g.num_nodes)
    after_keys = keys[after]
    fresh = ~np.isin(after_keys, train_keys)
    test_pos, test_ts, _ = _first_occurrence(after_keys[fresh], g.ts[after][fresh], g.num_nodes)
    if len(test_pos) == 0:
        raise DataError("empty test partition: every later pair already appeared before the pivot")

    all_pos = np.unique(keys)
    train_neg = sample_negatives(g, len(train_pos), derive_seed(seed, 1), exclusion=all_pos)
    excl = np.union1d(all_pos, pair_key(train_neg[:, 0], train_neg[:, 1], g.num_nodes, g.directed))
    test_neg = sample_negatives(g, len(test_pos), derive_seed(seed, 2), exclusion=excl)
    return DataSplit(pivot, train_pos, test_pos, train_neg, test_neg, train_ts, test_ts)


def _as_keys(exclusion, num_nodes: int, directed: bool) -> np.ndarray:
    if exclusion is None:
        return np.empty(0, dtype=np.int64)
    if isinstance(exclusion, np.ndarray) and exclusion.ndim == 1:
        return exclusion.astype(np.int64)
    pairs = np.asarray(list(exclusion) if not isinstance(exclusion, np.ndarray) else exclusion, dtype=np.int64)
    if pairs.size == 0:
        return np.empty(0, dtype=np.int64)
    pairs = pairs.reshape(-1, 2)
    return pair_key(pairs[:, 0], pairs[:, 1], num_nodes, directed)


def sample_negatives(
    g: TemporalGraph,
    count: int,
    seed: int,
    exclusion: Iterable | np.ndarray | None = None,
) -> np.ndarray:
    """Draw ``count`` distinct never-linked pairs uniformly, shape ``(count, 2)``.

    ``exclusion`` is either an iterable of ``(u, v)`` pairs or a 1-d array of
    pair keys as produced by :func:`pair_key`.
    """
    n = g.num_nodes
    count = int(count)
    banned = np.union1d(g.pair_keys(), _as_keys(exclusion, n, g.directed))
    total = n * (n - 1) if g.directed else n * (n - 1) // 2
    # self-pairs never enter the candidate space, so drop any from the ban list
    banned = banned[(banned // n) != (banned % n)]
    available = total - banned.size
    if count < 0 or count > available:
        raise DataError(f"cannot sample {count} negatives: only {available} non-edges available")
    if count == 0:
        return np.empty((0, 2), dtype=np.int64)
    rng = SplitMix64(seed)

    if total <= _ENUMERATE_LIMIT:
        u, v = (np.nonzero(~np.eye(n, dtype=bool)) if g.directed else np.triu_indices(n, k=1))
        cand = u.astype(np.int64) * n + v
        cand = cand[~np.isin(cand, banned)]
        chosen = cand[rng.permutation(cand.size)[:count]]
    else:
        chosen_list: list[int] = []
        seen = set(banned.tolist())
        while len(chosen_list) < count:
            draw = rng.integers(n, 2 * (count - len(chosen_list)) + 16).reshape(-1, 2)
            for a, b in draw.tolist():
                if a == b:
                    continue
                if not g.directed and a > b:
                    a, b = b, a
                key = a * n + b
                if key in seen:
                    continue
                seen.add(key)
                chosen_list.append(key)
                if len(chosen_list) == count:
                    break
        chosen = np.asarray(chosen_list, dtype=np.int64)
    return np.column_stack([chosen // n, chosen % n])
