import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import givens_transcribed

from tempembed.numerics import (
    SplitMix64,
    derive_seed,
    givens_angles,
    givens_angles_array,
    glorot_init,
    matmul,
    qr_decompose,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def test_splitmix_reference_values():
    # first outputs of SplitMix64 seeded with 0, as published with the algorithm
    out = SplitMix64(0).next_u64(3)
    assert [int(x) for x in out] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_splitmix_blocks_equal_single_draws():
    a = SplitMix64(99).next_u64(10)
    g = SplitMix64(99)
    b = np.concatenate([g.next_u64(1) for _ in range(10)])
    assert np.array_equal(a, b)


def test_derive_seed_separates_streams():
    assert derive_seed(1, 0) != derive_seed(1, 1)
    assert derive_seed(1, 0) == derive_seed(1, 0)


def test_uniform_and_integers_ranges():
    g = SplitMix64(5)
    u = g.uniform(10_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    k = g.integers(7, 10_000)
    assert set(np.unique(k)) == set(range(7))
    assert sorted(g.permutation(20).tolist()) == list(range(20))


class TestMatmul:
    def test_identity(self, rng):
        m = rng.normal(size=(3, 4))
        assert np.array_equal(matmul(np.eye(3), m), m)

    def test_hand_product(self):
        assert np.array_equal(matmul(np.array([[1.0, 2], [3, 4]]), np.array([[5.0], [6]])), [[17.0], [39.0]])

    def test_sparse_matches_dense(self, rng):
        a = rng.normal(size=(8, 8))
        a[rng.random((8, 8)) < 0.5] = 0.0
        b = rng.normal(size=(8, 5))
        np.testing.assert_allclose(matmul(sp.csr_array(a), b), matmul(a, b), rtol=0, atol=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_associativity(self, rng):
        for _ in range(20):
            a, b, c = rng.normal(size=(6, 7)), rng.normal(size=(7, 5)), rng.normal(size=(5, 4))
            left, right = matmul(matmul(a, b), c), matmul(a, matmul(b, c))
            assert np.max(np.abs(left - right)) <= 1e-9 * np.max(np.abs(left))


class TestQR:
    def test_identity(self):
        q, r = qr_decompose(np.eye(4))
        assert np.array_equal(q, np.eye(4)) and np.array_equal(r, np.eye(4))

    def test_permutation(self):
        c = np.array([[0.0, 1.0], [1.0, 0.0]])
        q, r = qr_decompose(c)
        assert np.max(np.abs(q @ r - c)) < 1e-12
        assert np.max(np.abs(q.T @ q - np.eye(2))) < 1e-12

    @pytest.mark.parametrize("n", [1, 2, 5, 16, 33])
    def test_random(self, rng, n):
        c = rng.normal(size=(n, n))
        q, r = qr_decompose(c)
        assert np.max(np.abs(q @ r - c)) < 1e-10
        assert np.max(np.abs(q.T @ q - np.eye(n))) < 1e-10
        assert np.all(np.tril(r, -1) == 0) and np.all(np.diag(r) >= 0)

    def test_positive_diagonal_gives_identity_q(self):
        q, r = qr_decompose(np.diag([3.0, 0.5, 2.0]))
        assert np.array_equal(q, np.eye(3))
        assert np.array_equal(r, np.diag([3.0, 0.5, 2.0]))

    def test_rank_deficient(self, rng):
        c = np.outer(rng.normal(size=5), rng.normal(size=5))
        q, r = qr_decompose(c)
        assert np.max(np.abs(q @ r - c)) < 1e-10
        assert np.max(np.abs(q.T @ q - np.eye(5))) < 1e-10

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            qr_decompose(np.ones((2, 3)))


class TestGivens:
    def test_zero_later_value(self):
        assert givens_angles(7.0, 0.0) == (1.0, 0.0)

    def test_worked_pair(self):
        ca, cb = givens_angles(3.0, 4.0)
        assert ca == pytest.approx(-0.6, abs=1e-15) and cb == pytest.approx(0.8, abs=1e-15)

    def test_both_zero(self):
        assert givens_angles(0.0, 0.0) == (1.0, 0.0)

    def test_zero_tol(self):
        assert givens_angles(1.0, 1e-14) == (1.0, 0.0)
        assert givens_angles(1.0, 1e-14, zero_tol=0.0) != (1.0, 0.0)

    @given(finite, finite)
    def test_pythagorean(self, a, b):
        ca, cb = givens_angles(a, b)
        assert abs(ca * ca + cb * cb - 1.0) <= 1e-12

    @given(finite, finite)
    @settings(max_examples=300)
    def test_scalar_matches_transcription(self, a, b):
        assert givens_angles(a, b) == givens_transcribed(a, b)

    def test_array_matches_scalar(self, rng):
        x = rng.normal(size=(40, 3))
        y = rng.normal(size=(40, 3))
        y[0, 0] = 0.0
        x[1, 1] = 0.0
        x[2, 2] = y[2, 2]
        ca, cb = givens_angles_array(x, y)
        for idx in np.ndindex(x.shape):
            assert (ca[idx], cb[idx]) == givens_angles(x[idx], y[idx])


class TestGlorot:
    def test_deterministic(self):
        assert np.array_equal(glorot_init(5, 3, 11), glorot_init(5, 3, 11))
        assert not np.array_equal(glorot_init(5, 3, 11), glorot_init(5, 3, 12))

    def test_bound(self):
        for seed in range(20):
            assert np.all(np.abs(glorot_init(4, 2, seed)) <= 1.0)

    def test_mean(self):
        assert abs(glorot_init(100, 100, 3).mean()) < 0.02

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            glorot_init(0, 3, 1)
