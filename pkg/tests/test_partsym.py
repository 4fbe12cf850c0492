import numpy as np
import pytest

from biquad import forms, linalg
from biquad.errors import InvalidInput, NotPSD
from biquad.forms import evaluate, verify_sos
from biquad.partsym import (
    InvalidReduction,
    MonicReduction,
    XSymmetricData,
    assemble_m_matrix,
    check_psd_monic,
    detect_x_symmetric,
    evaluate_xsym,
    helmert_basis,
    qr_pair,
    random_psd_instance,
    rank_bound,
    reconstruct,
    reduce_general,
    sos_decompose_general,
    sos_decompose_naive,
    sos_decompose_structured,
    undo_reduction,
)
from conftest import random_monic, sym_uniform

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])
Z2 = np.zeros((2, 2))


def monic(m, A, B=None):
    n = A.shape[0]
    return XSymmetricData(m, np.ones(n), A, Z2 if (B is None and n == 2) else (B if B is not None else np.zeros((n, n))))


def decomposition_gram(dec):
    if not dec.factors:
        return np.zeros((dec.m * dec.n, dec.m * dec.n))
    stack = np.stack([w.ravel() for w in dec.factors])
    return stack.T @ stack


class TestDetectReconstruct:
    def test_all_squares(self):
        p = reconstruct(XSymmetricData(2, np.ones(2), Z2, Z2))
        data = detect_x_symmetric(p)
        assert data is not None
        np.testing.assert_array_equal(data.d, [1.0, 1.0])
        np.testing.assert_array_equal(data.A, Z2)
        np.testing.assert_array_equal(data.B, Z2)

    def test_simple_form_not_x_symmetric(self):
        from biquad.simple import gen_simple, to_form

        assert detect_x_symmetric(to_form(gen_simple(2, 2, 3))) is None

    def test_round_trip_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            data = random_monic(rng, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
            recovered = detect_x_symmetric(reconstruct(data))
            assert recovered is not None
            np.testing.assert_array_equal(recovered.d, data.d)
            np.testing.assert_array_equal(recovered.A, data.A if data.m >= 2 else 0.0 * data.A)
            np.testing.assert_array_equal(recovered.B, data.B)

    def test_cross_term_polynomial(self):
        # ((1'x)^2 - x'x)(y'Ay) with A the swap expands to 4 x1 x2 y1 y2
        data = monic(2, SWAP)
        p = reconstruct(data)
        terms = {(t.i, t.k, t.j, t.l): t.c for t in forms.to_terms(p)}
        assert terms[(1, 2, 1, 2)] == pytest.approx(4.0)
        assert terms[(1, 1, 1, 1)] == terms[(2, 2, 2, 2)] == 1.0

    def test_evaluation_identity(self):
        rng = np.random.default_rng(1)
        data = XSymmetricData(3, np.array([1.0, 2.0, 0.5]), sym_uniform(rng, 3), sym_uniform(rng, 3, zero_diag=True))
        p = reconstruct(data)
        for _ in range(20):
            x = rng.standard_normal(3)
            y = rng.standard_normal(3)
            assert evaluate_xsym(data, x, y) == pytest.approx(evaluate(p, x, y), rel=1e-12, abs=1e-12)

    def test_zero_diagonal_round_trip(self):
        data = XSymmetricData(2, np.array([1.0, 0.0]), Z2, Z2)
        recovered = detect_x_symmetric(reconstruct(data))
        np.testing.assert_array_equal(recovered.d, [1.0, 0.0])

    def test_b_diagonal_enforced(self):
        with pytest.raises(InvalidInput):
            XSymmetricData(2, np.ones(2), Z2, np.eye(2))


class TestCheckPsdMonic:
    def test_plain_squares(self):
        cert = check_psd_monic(XSymmetricData(2, np.ones(2), Z2, Z2))
        assert cert.psd
        np.testing.assert_allclose(cert.q_eigenvalues, [1.0, 1.0])
        np.testing.assert_allclose(cert.r_eigenvalues, [1.0, 1.0])

    def test_swap_coupling_is_psd(self):
        cert = check_psd_monic(monic(2, SWAP))
        assert cert.psd
        np.testing.assert_allclose(cert.q_eigenvalues, [2.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(cert.r_eigenvalues, [2.0, 0.0], atol=1e-14)

    def test_strong_coupling_not_psd(self):
        data = monic(2, 2.0 * SWAP)
        cert = check_psd_monic(data)
        assert not cert.psd
        x, y = cert.witness
        np.testing.assert_allclose(np.abs(x), [1.0, 1.0] / np.sqrt(2.0), atol=1e-14)
        np.testing.assert_allclose(np.abs(y), [1.0, 1.0] / np.sqrt(2.0), atol=1e-12)
        assert cert.witness_value == pytest.approx(-1.0)
        assert evaluate(reconstruct(data), x, y) == pytest.approx(-1.0)

    def test_non_monic_rejected(self):
        data = XSymmetricData(2, np.array([1.0, 2.0]), Z2, Z2)
        with pytest.raises(InvalidInput):
            check_psd_monic(data)

    def test_verdict_matches_sampling(self):
        from biquad.meig import psd_sample_check

        rng = np.random.default_rng(2)
        for _ in range(30):
            data = random_monic(rng, int(rng.integers(2, 5)), int(rng.integers(2, 4)))
            cert = check_psd_monic(data)
            p = reconstruct(data)
            if cert.psd:
                low, _ = psd_sample_check(p, samples=20000, seed=3)
                assert low >= -1e-8
            else:
                x, y = cert.witness
                assert evaluate(p, x, y) < -1e-10


class TestDecompositions:
    def test_plain_squares_naive(self):
        data = XSymmetricData(2, np.ones(2), Z2, Z2)
        dec = sos_decompose_naive(data)
        assert len(dec) == 4
        assert verify_sos(reconstruct(data), dec)[0]

    def test_swap_coupling_two_factors(self):
        data = monic(2, SWAP)
        dec = sos_decompose_naive(data)
        assert len(dec) == 2
        assert verify_sos(reconstruct(data), dec)[0]

    def test_m3_half_swap_five_factors(self):
        a = 0.5 * SWAP
        data = XSymmetricData(3, np.ones(2), a, Z2)
        # Q = I - A has eigenvalues (1.5, 0.5), R = I + 2A has (2, 0)
        dec = sos_decompose_naive(data)
        assert len(dec) == 5
        assert rank_bound(data) == 5
        assert verify_sos(reconstruct(data), dec)[0]

    def test_structured_counts(self):
        data = XSymmetricData(2, np.ones(2), Z2, Z2)
        assert len(sos_decompose_structured(data)) == 4
        data = monic(2, SWAP)
        dec = sos_decompose_structured(data)
        assert len(dec) == 2
        assert verify_sos(reconstruct(data), dec)[0]

    def test_structured_low_rank_count(self):
        rng = np.random.default_rng(4)
        data = random_psd_instance(5, 3, rng, rank_q=2, rank_r=3)
        dec = sos_decompose_structured(data)
        assert len(dec) == 3 + 4 * 2
        assert len(dec) == rank_bound(data)

    def test_not_psd_raises(self):
        data = monic(2, 2.0 * SWAP)
        with pytest.raises(NotPSD):
            sos_decompose_naive(data)
        with pytest.raises(NotPSD):
            sos_decompose_structured(data)

    def test_gram_agreement_random(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            m = int(rng.integers(2, 7))
            n = int(rng.integers(2, 6))
            data = random_psd_instance(m, n, rng, rank_q=int(rng.integers(1, n + 1)), rank_r=int(rng.integers(1, n + 1)))
            g_naive = decomposition_gram(sos_decompose_naive(data))
            g_struct = decomposition_gram(sos_decompose_structured(data))
            scale = np.linalg.norm(g_naive)
            assert np.linalg.norm(g_naive - g_struct) <= 1e-9 * max(scale, 1.0)
            # both equal the assembled matrix
            assert np.linalg.norm(g_struct - assemble_m_matrix(data)) <= 1e-9 * max(scale, 1.0)

    def test_factor_ordering_deterministic(self):
        rng = np.random.default_rng(6)
        data = random_psd_instance(4, 3, rng)
        d1 = sos_decompose_structured(data)
        d2 = sos_decompose_structured(data)
        for w1, w2 in zip(d1.factors, d2.factors):
            np.testing.assert_array_equal(w1, w2)


class TestBlockStructure:
    def test_helmert_basis(self):
        for m in range(2, 8):
            v = helmert_basis(m)
            np.testing.assert_allclose(v.T @ v, np.eye(m - 1), atol=1e-12)
            np.testing.assert_allclose(np.ones(m) @ v, 0.0, atol=1e-12)

    def test_block_diagonalization(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            m = int(rng.integers(2, 6))
            n = int(rng.integers(2, 5))
            data = random_monic(rng, m, n)
            pair = qr_pair(data)
            big = assemble_m_matrix(data)
            u = np.column_stack([np.full(m, 1.0 / np.sqrt(m)), helmert_basis(m)])
            rotated = np.kron(u.T, np.eye(n)) @ big @ np.kron(u, np.eye(n))
            expected = np.zeros_like(big)
            expected[:n, :n] = pair.R
            for b in range(1, m):
                expected[b * n:(b + 1) * n, b * n:(b + 1) * n] = pair.Q
            assert np.linalg.norm(rotated - expected) <= 1e-9 * np.linalg.norm(big)

    def test_rank_identity(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            m = int(rng.integers(2, 6))
            n = int(rng.integers(2, 5))
            data = random_psd_instance(m, n, rng, rank_q=int(rng.integers(1, n + 1)), rank_r=int(rng.integers(1, n + 1)))
            pair = qr_pair(data)
            expected = linalg.numerical_rank(pair.R) + (m - 1) * linalg.numerical_rank(pair.Q)
            assert linalg.numerical_rank(assemble_m_matrix(data)) == expected
            assert rank_bound(data) == expected


class TestReduceGeneral:
    def test_monic_identity(self):
        data = monic(2, SWAP)
        red = reduce_general(data)
        assert isinstance(red, MonicReduction)
        assert red.active == (0, 1)
        np.testing.assert_allclose(red.scale, [1.0, 1.0])
        np.testing.assert_array_equal(red.monic.A, data.A)

    def test_positive_scaling(self):
        data = XSymmetricData(2, np.array([4.0, 1.0]), 2.0 * SWAP, Z2)
        red = reduce_general(data)
        assert isinstance(red, MonicReduction)
        np.testing.assert_allclose(red.monic.A, SWAP, atol=1e-14)
        np.testing.assert_allclose(red.scale, [2.0, 1.0])

    def test_zero_weight_with_coupling_invalid(self):
        b = np.array([[0.0, 1.0], [1.0, 0.0]])
        data = XSymmetricData(2, np.array([1.0, 0.0]), Z2, b)
        red = reduce_general(data)
        assert isinstance(red, InvalidReduction)
        assert red.value < 0.0
        assert evaluate(reconstruct(data), red.x, red.y) == pytest.approx(red.value, rel=1e-9)

    def test_zero_weight_clean_drop(self):
        data = XSymmetricData(2, np.array([1.0, 0.0]), Z2, Z2)
        red = reduce_general(data)
        assert isinstance(red, MonicReduction)
        assert red.active == (0,)

    def test_negative_weight_invalid(self):
        data = XSymmetricData(2, np.array([1.0, -0.5]), Z2, Z2)
        red = reduce_general(data)
        assert isinstance(red, InvalidReduction)
        assert red.value == pytest.approx(-0.5)

    def test_a_column_violation_invalid(self):
        a = np.array([[0.0, 0.3], [0.3, 0.0]])
        data = XSymmetricData(3, np.array([1.0, 0.0]), a, Z2)
        red = reduce_general(data)
        assert isinstance(red, InvalidReduction)
        assert evaluate(reconstruct(data), red.x, red.y) < 0.0

    def test_a_diagonal_violation_invalid(self):
        a = np.array([[0.0, 0.0], [0.0, 0.4]])
        data = XSymmetricData(3, np.array([1.0, 0.0]), a, Z2)
        red = reduce_general(data)
        assert isinstance(red, InvalidReduction)
        assert evaluate(reconstruct(data), red.x, red.y) < 0.0

    def test_all_zero_form(self):
        data = XSymmetricData(2, np.zeros(2), Z2, Z2)
        red = reduce_general(data)
        assert isinstance(red, MonicReduction)
        assert red.active == ()


class TestDecomposeGeneral:
    def test_monic_matches_structured(self):
        data = monic(2, SWAP)
        d_gen = sos_decompose_general(data)
        d_str = sos_decompose_structured(data)
        np.testing.assert_allclose(decomposition_gram(d_gen), decomposition_gram(d_str), atol=1e-12)

    def test_scaled_instance(self):
        data = XSymmetricData(2, np.array([4.0, 1.0]), 2.0 * SWAP, Z2)
        dec = sos_decompose_general(data)
        assert len(dec) == 2
        ok, resid = verify_sos(reconstruct(data), dec)
        assert ok, resid

    def test_dropped_variable(self):
        data = XSymmetricData(2, np.array([1.0, 0.0]), Z2, Z2)
        dec = sos_decompose_general(data)
        assert len(dec) == 2
        for w in dec.factors:
            np.testing.assert_array_equal(w[:, 1], 0.0)
        assert verify_sos(reconstruct(data), dec)[0]

    def test_not_psd_raises(self):
        b = np.array([[0.0, 1.0], [1.0, 0.0]])
        data = XSymmetricData(2, np.array([1.0, 0.0]), Z2, b)
        with pytest.raises(NotPSD):
            sos_decompose_general(data)

    def test_random_scaled_corpus(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            m = int(rng.integers(2, 5))
            n = int(rng.integers(2, 5))
            base = random_psd_instance(m, n, rng)
            d = rng.uniform(0.3, 3.0, n)
            roots = np.sqrt(d)
            a = base.A * np.outer(roots, roots)
            b = base.B * np.outer(roots, roots)
            np.fill_diagonal(b, 0.0)
            data = XSymmetricData(m, d, a, b)
            dec = sos_decompose_general(data)
            ok, resid = verify_sos(reconstruct(data), dec)
            assert ok, resid

    def test_naive_path_through_reduction(self):
        data = XSymmetricData(2, np.array([4.0, 1.0]), 2.0 * SWAP, Z2)
        red = reduce_general(data)
        dec = undo_reduction(red, sos_decompose_naive(red.monic), 2, 2)
        assert verify_sos(reconstruct(data), dec)[0]
