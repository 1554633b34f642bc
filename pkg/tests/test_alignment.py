import numpy as np
import pytest

from tempembed.alignment import align_series, angle_matrices, correlation_matrix, stable_basis
from tempembed.errors import DataError
from tempembed.numerics import givens_angles
from tempembed.static_embed import EmbeddingSeries


def test_single_entry_correlation():
    ang = angle_matrices(np.array([[3.0]]), np.array([[4.0]]))
    c = correlation_matrix(ang)
    assert c[0, 0] == pytest.approx(-0.48, abs=1e-15)


def test_correlation_brute_force(rng):
    a, b = rng.normal(size=(7, 4)), rng.normal(size=(7, 4))
    c = correlation_matrix(angle_matrices(a, b))
    want = np.zeros((4, 4))
    for i in range(4):
        for j in range(4):
            for k in range(7):
                want[i, j] += givens_angles(a[k, i], b[k, i])[1] * givens_angles(a[k, j], b[k, j])[0]
    np.testing.assert_allclose(c, want, rtol=0, atol=1e-13)


def test_identical_snapshots_unchanged():
    # x_{t+1} = x_t gives cos_alpha = -cos_beta, C = -sum(cb_i cb_j); QR of a
    # positive-diagonal triangular is trivial only in special cases, so check
    # norms and orthogonality rather than identity here
    x = np.array([[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]])
    out, (q,) = align_series(EmbeddingSeries(np.stack([x, x])), return_bases=True)
    np.testing.assert_allclose(q.T @ q, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(out[1], axis=1), np.linalg.norm(x, axis=1), rtol=1e-12)


def test_later_zero_gives_identity_basis():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    out, (q,) = align_series(EmbeddingSeries(np.stack([x, np.zeros_like(x)])), return_bases=True)
    # cos_beta is zero so C = 0 and no reflection is applied
    assert np.array_equal(q, np.eye(2))
    assert np.array_equal(out[1], np.zeros_like(x))


def test_diagonal_positive_c_gives_identity():
    assert np.array_equal(stable_basis(np.diag([2.0, 1.0, 0.5])), np.eye(3))


def test_norm_preservation(rng):
    data = rng.normal(size=(5, 20, 6))
    out = align_series(EmbeddingSeries(data))
    assert np.array_equal(out[0], data[0])
    np.testing.assert_allclose(np.linalg.norm(out.data, axis=2), np.linalg.norm(data, axis=2), rtol=1e-12)
    # pairwise inner products within a snapshot survive an orthogonal map
    for t in range(5):
        np.testing.assert_allclose(out[t] @ out[t].T, data[t] @ data[t].T, atol=1e-10)


def test_one_dimensional_sign(rng):
    data = rng.normal(size=(3, 8, 1))
    out, bases = align_series(EmbeddingSeries(data), return_bases=True)
    for t, q in enumerate(bases):
        assert q.shape == (1, 1) and abs(q[0, 0]) == 1.0
        assert np.array_equal(out[t + 1], data[t + 1] * q[0, 0])


def test_signed_permutation_input(rng):
    x = rng.normal(size=(10, 3))
    p = np.array([[0.0, -1, 0], [0, 0, 1], [1, 0, 0]])
    out, (q,) = align_series(EmbeddingSeries(np.stack([x, x @ p])), return_bases=True)
    np.testing.assert_allclose(q.T @ q, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(out[1], x @ p @ q, atol=1e-14)


def test_direction_and_reference(rng):
    data = EmbeddingSeries(rng.normal(size=(3, 6, 2)))
    _, bq = align_series(data, return_bases=True)
    _, bqt = align_series(data, direction="qt", return_bases=True)
    np.testing.assert_allclose(bqt[0], bq[0].T)
    raw = align_series(data, reference="raw")
    assert raw.data.shape == data.data.shape
    with pytest.raises(ValueError):
        align_series(data, direction="x")


def test_needs_two_snapshots(rng):
    with pytest.raises(DataError):
        align_series(EmbeddingSeries(rng.normal(size=(1, 4, 2))))
