"""Rotate each snapshot embedding into the frame of its predecessor.

For consecutive snapshots the per-feature Givens cosines form two ``N x d``
matrices; ``C = cos_beta.T @ cos_alpha`` is factored as ``C = Q R`` and the
later snapshot is right-multiplied by ``Q``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from tempembed.errors import DataError, NumericalError
from tempembed.numerics import givens_angles_array, qr_decompose
from tempembed.static_embed import EmbeddingSeries

ORTHO_TOL = 1e-10


class AngleMatrices(NamedTuple):
    cos_alpha: np.ndarray
    cos_beta: np.ndarray


def angle_matrices(theta_t, theta_t1, zero_tol: float = 1e-12) -> AngleMatrices:
    theta_t = np.asarray(theta_t, dtype=np.float64)
    theta_t1 = np.asarray(theta_t1, dtype=np.float64)
    if theta_t.shape != theta_t1.shape:
        raise DataError(f"shape mismatch: {theta_t.shape} vs {theta_t1.shape}")
    return AngleMatrices(*givens_angles_array(theta_t, theta_t1, zero_tol))


def correlation_matrix(angles: AngleMatrices) -> np.ndarray:
    return angles.cos_beta.T @ angles.cos_alpha


def stable_basis(c) -> np.ndarray:
    """Orthogonal factor of ``c``; raises if it drifts from orthogonality."""
    q, _ = qr_decompose(c)
    err = np.max(np.abs(q.T @ q - np.eye(q.shape[0])))
    if err > ORTHO_TOL:
        raise NumericalError(f"basis lost orthogonality ({err:.3e})")
    return q


def align_series(
    series: EmbeddingSeries,
    zero_tol: float = 1e-12,
    direction: str = "q",
    reference: str = "aligned",
    return_bases: bool = False,
):
    """Recursively align a series of static embeddings.

    ``direction`` picks ``Q`` or its transpose for the right multiplication;
    ``reference`` chooses whether angles compare against the aligned
    predecessor (``"aligned"``) or the raw one (``"raw"``).
    """
    if direction not in ("q", "qt"):
        raise ValueError(f"direction must be 'q' or 'qt', not {direction!r}")
    if reference not in ("aligned", "raw"):
        raise ValueError(f"reference must be 'aligned' or 'raw', not {reference!r}")
    raw = series.data
    if raw.shape[0] < 2:
        raise DataError("alignment needs at least two snapshots")
    out = np.empty_like(raw)
    out[0] = raw[0]
    bases = []
    for t in range(raw.shape[0] - 1):
        prev = out[t] if reference == "aligned" else raw[t]
        q = stable_basis(correlation_matrix(angle_matrices(prev, raw[t + 1], zero_tol)))
        if direction == "qt":
            q = q.T
        bases.append(q)
        out[t + 1] = raw[t + 1] @ q
    aligned = EmbeddingSeries(out)
    return (aligned, bases) if return_bases else aligned
