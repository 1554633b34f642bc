"""Decayed influence matrices and untrained linear graph convolution."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from tempembed.errors import DataError
from tempembed.graph_store import SnapshotSeries
from tempembed.numerics import derive_seed, glorot_init, matmul


@dataclass(frozen=True)
class InfluenceMatrix:
    snapshot_index: int
    matrix: sp.csr_array
    decay_tau: float


def influence_matrix(
    series: SnapshotSeries,
    s: int,
    tau: float = 1.0,
    scalar_decay: bool = False,
    t_now: int | None = None,
) -> InfluenceMatrix:
    """Adjacency plus self-loops with every edge decayed by its age.

    Entry ``(i, j)`` is ``exp((last_seen(i, j) - s) / tau)`` where
    ``last_seen`` is the latest snapshot index ``<= s`` in which the pair
    occurred; the diagonal is exactly 1.

    With ``scalar_decay`` the whole binary ``A + I`` is instead scaled by one
    factor ``exp((s - t_now) / tau)``, ``t_now`` defaulting to the last
    snapshot.
    """
    if not 0 <= s < series.num_snapshots:
        raise DataError(f"snapshot index {s} outside [0, {series.num_snapshots})")
    if not tau > 0:
        raise DataError("tau must be positive")
    n = series.num_nodes
    rows, cols, last = series.last_seen(s)
    off = rows != cols
    rows, cols, last = rows[off], cols[off], last[off]
    if scalar_decay:
        now = series.num_snapshots - 1 if t_now is None else t_now
        factor = float(np.exp((s - now) / tau))
        w = np.full(rows.size, factor)
        diag = factor
    else:
        w = np.exp((last - s) / tau)
        diag = 1.0
    if not series.graph.directed:
        rows, cols, w = np.concatenate([rows, cols]), np.concatenate([cols, rows]), np.concatenate([w, w])
    idx = np.arange(n)
    rows = np.concatenate([rows, idx])
    cols = np.concatenate([cols, idx])
    w = np.concatenate([w, np.full(n, diag)])
    mat = sp.csr_array((w, (rows, cols)), shape=(n, n))
    mat.sum_duplicates()
    return InfluenceMatrix(s, mat, tau)


def layer_weights(n: int, dim: int, num_layers: int, seed: int) -> list[np.ndarray]:
    """Fixed random weights: first ``n x dim``, the rest ``dim x dim``."""
    shapes = [(n, dim)] + [(dim, dim)] * (num_layers - 1)
    return [glorot_init(r, c, derive_seed(seed, layer)) for layer, (r, c) in enumerate(shapes)]


def static_forward(
    a_et,
    dim: int = 128,
    num_layers: int = 3,
    seed: int = 0,
    features=None,
    weights: list[np.ndarray] | None = None,
) -> np.ndarray:
    """Propagate ``R <- A R W`` for ``num_layers`` layers, no activation.

    With no ``features`` the initial representation is the identity, so the
    first layer is ``A @ W0`` with ``W0`` of shape ``(N, dim)``. Passing a
    feature matrix ``X`` (``N x F``) makes ``W0`` ``F x dim`` instead.
    """
    mat = a_et.matrix if isinstance(a_et, InfluenceMatrix) else a_et
    n = mat.shape[0]
    if num_layers < 1:
        raise DataError("num_layers must be >= 1")
    if dim >= n:
        raise DataError(f"embedding dim {dim} must be smaller than the node count {n}")
    in_rows = n if features is None else np.asarray(features).shape[1]
    if weights is None:
        weights = layer_weights(in_rows, dim, num_layers, seed)
    if features is None:
        r = matmul(mat, weights[0])
    else:
        r = matmul(mat, np.asarray(features, dtype=np.float64) @ weights[0])
    for w in weights[1:]:
        r = matmul(mat, r @ w)
    return r


@dataclass
class EmbeddingSeries:
    """Per-snapshot ``N x dim`` matrices stacked as ``(T, N, dim)``."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise DataError("embedding series must be a (T, N, dim) array")

    @property
    def num_snapshots(self) -> int:
        return self.data.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]

    def __len__(self):
        return self.num_snapshots

    def __getitem__(self, t):
        return self.data[t]

    def to_json(self) -> dict:
        t, n, d = self.data.shape
        return {"dim": d, "T": t, "N": n, "data": [m.ravel().tolist() for m in self.data]}

    @classmethod
    def from_json(cls, doc: dict) -> "EmbeddingSeries":
        t, n, d = int(doc["T"]), int(doc["N"]), int(doc["dim"])
        return cls(np.asarray(doc["data"], dtype=np.float64).reshape(t, n, d))

    def save(self, path) -> None:
        path = str(path)
        if path.endswith(".npy"):
            np.save(path, self.data)
        else:
            with open(path, "w") as fh:
                json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "EmbeddingSeries":
        path = str(path)
        if path.endswith(".npy"):
            return cls(np.load(path))
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def embed_series(
    series: SnapshotSeries,
    dim: int = 128,
    tau: float = 1.0,
    seed: int = 0,
    num_layers: int = 3,
    scalar_decay: bool = False,
    features=None,
) -> EmbeddingSeries:
    """One static embedding per snapshot, all sharing the same weights."""
    n = series.num_nodes
    in_rows = n if features is None else np.asarray(features).shape[1]
    if dim >= n:
        raise DataError(f"embedding dim {dim} must be smaller than the node count {n}")
    weights = layer_weights(in_rows, dim, num_layers, seed)
    out = np.empty((series.num_snapshots, n, dim))
    for s in range(series.num_snapshots):
        a = influence_matrix(series, s, tau, scalar_decay=scalar_decay)
        out[s] = static_forward(a, dim, num_layers, features=features, weights=weights)
    return EmbeddingSeries(out)
