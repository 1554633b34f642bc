"""Matrix primitives, Householder QR, the Givens angle kernel and seeded RNG.

Dense matrices are plain float64 ``numpy`` arrays; sparse matrices are
``scipy.sparse`` CSR arrays. Randomness comes from :class:`SplitMix64`, a
counter-based generator implemented here so that every draw is
bit-reproducible across platforms and numpy versions.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *stream: int) -> int:
    """Derive an independent 64-bit seed for a named sub-stream."""
    state = int(seed) & _MASK64
    for s in stream:
        z = np.array([(state + (int(s) + 1) * _GAMMA) & _MASK64], dtype=np.uint64)
        state = int(_mix64(z)[0])
    return state


class SplitMix64:
    """SplitMix64 generator with vectorised output.

    Output ``i`` after the current state ``s`` is ``mix(s + (i + 1) * gamma)``,
    so a block of ``n`` values is computed in one numpy expression and is
    identical to drawing them one at a time.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_u64(self, n: int) -> np.ndarray:
        n = int(n)
        base = np.uint64(self.state)
        steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GAMMA)
        out = _mix64(steps + base)
        self.state = (self.state + n * _GAMMA) & _MASK64
        return out

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles in [0, 1) with 53 random bits each."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (2.0**-53)

    def integers(self, high: int, n: int) -> np.ndarray:
        """``n`` integers in [0, high)."""
        if high <= 0:
            raise ValueError("high must be positive")
        idx = np.floor(self.uniform(n) * high).astype(np.int64)
        return np.minimum(idx, high - 1)

    def permutation(self, n: int) -> np.ndarray:
        keys = self.next_u64(n)
        return np.argsort(keys, kind="stable")


def matmul(a, b):
    """Product ``a @ b`` for dense or sparse ``a`` and dense ``b``.

    Sparse left operands only touch their stored non-zeros.
    """
    b = np.asarray(b, dtype=np.float64)
    a_rows, a_cols = a.shape
    if b.ndim != 2 or a_cols != b.shape[0]:
        raise ValueError(f"shape mismatch: {a.shape} @ {b.shape}")
    if sp.issparse(a):
        return np.asarray(a @ b, dtype=np.float64)
    return np.asarray(a, dtype=np.float64) @ b


def qr_decompose(c):
    """Householder QR of a square matrix.

    Returns ``(Q, R)`` with ``Q`` orthogonal, ``R`` upper triangular with a
    non-negative diagonal, and ``Q @ R == c`` to rounding.
    """
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"qr_decompose needs a square matrix, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("qr_decompose input contains non-finite entries")
    n = c.shape[0]
    r = c.copy()
    q = np.eye(n)
    for k in range(n - 1):
        x = r[k:, k]
        if not np.any(x[1:]):
            continue
        normx = np.linalg.norm(x)
        v = x.copy()
        # reflect x onto -sign(x0)*|x|e1 to avoid cancellation
        v[0] += normx if x[0] >= 0 else -normx
        v /= np.linalg.norm(v)
        r[k:, k:] -= 2.0 * np.outer(v, v @ r[k:, k:])
        q[:, k:] -= 2.0 * np.outer(q[:, k:] @ v, v)
        r[k + 1 :, k] = 0.0
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    r *= signs[:, None]
    q *= signs[None, :]
    return q, np.triu(r)


class AnglePair(NamedTuple):
    cos_alpha: float
    cos_beta: float


def givens_angles(x_t: float, x_t1: float, zero_tol: float = 1e-12) -> AnglePair:
    """Rotation cosines taking feature value ``x_t`` toward ``x_t1``."""
    if abs(x_t1) < zero_tol or x_t1 == 0.0:
        return AnglePair(1.0, 0.0)
    if abs(x_t) < zero_tol:
        x_t = 0.0
    if abs(x_t1) > abs(x_t):
        tmp = -x_t / x_t1
        cos_beta = 1.0 / np.sqrt(1.0 + tmp * tmp)
        return AnglePair(float(tmp * cos_beta), float(cos_beta))
    tmp = -x_t1 / x_t
    cos_alpha = 1.0 / np.sqrt(1.0 + tmp * tmp)
    return AnglePair(float(cos_alpha), float(tmp * cos_alpha))


def givens_angles_array(x_t, x_t1, zero_tol: float = 1e-12):
    """Elementwise :func:`givens_angles` over equally shaped arrays."""
    x_t = np.asarray(x_t, dtype=np.float64)
    x_t1 = np.asarray(x_t1, dtype=np.float64)
    if x_t.shape != x_t1.shape:
        raise ValueError(f"shape mismatch: {x_t.shape} vs {x_t1.shape}")
    x_t = np.where(np.abs(x_t) < zero_tol, 0.0, x_t)
    x_t1 = np.where(np.abs(x_t1) < zero_tol, 0.0, x_t1)
    zero = x_t1 == 0.0
    later_bigger = (np.abs(x_t1) > np.abs(x_t)) & ~zero
    earlier = ~zero & ~later_bigger

    cos_a = np.ones_like(x_t)
    cos_b = np.zeros_like(x_t)
    with np.errstate(divide="ignore", invalid="ignore"):
        tmp = np.where(later_bigger, -x_t / np.where(later_bigger, x_t1, 1.0), 0.0)
        cb = 1.0 / np.sqrt(1.0 + tmp * tmp)
        cos_b = np.where(later_bigger, cb, cos_b)
        cos_a = np.where(later_bigger, tmp * cb, cos_a)

        tmp = np.where(earlier, -x_t1 / np.where(earlier, x_t, 1.0), 0.0)
        ca = 1.0 / np.sqrt(1.0 + tmp * tmp)
        cos_a = np.where(earlier, ca, cos_a)
        cos_b = np.where(earlier, tmp * ca, cos_b)
    return cos_a, cos_b


def glorot_init(rows: int, cols: int, seed: int) -> np.ndarray:
    """Uniform Glorot matrix, entries in +-sqrt(6 / (rows + cols))."""
    if rows < 1 or cols < 1:
        raise ValueError("glorot_init needs rows, cols >= 1")
    limit = np.sqrt(6.0 / (rows + cols))
    u = SplitMix64(seed).uniform(rows * cols)
    return (limit * (2.0 * u - 1.0)).reshape(rows, cols)
