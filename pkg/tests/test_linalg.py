import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from switchdwell import linalg
from switchdwell.linalg import (
    NotHurwitzError,
    NotPositiveDefiniteError,
    SpdMatrix,
    eigvals_general,
    expm,
    gen_eig_max,
    lyap_solve,
    matrix_from_json,
    matrix_to_json,
    spectral_abscissa,
    symmetric_eigh,
)

A1 = np.array([[-0.1, 1.0], [-2.0, -0.1]])
A2 = np.array([[-0.03, 1.0], [-1.0, -0.03]])

dims = st.integers(1, 6)
seeds = st.integers(0, 2**32 - 1)


def rand_spd(rng, n, cond=1e3):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.geomspace(1.0, cond, n) * rng.uniform(0.5, 2.0)
    return (q * w) @ q.T


def is_psd(m, tol=0.0):
    try:
        np.linalg.cholesky(0.5 * (m + m.T) + tol * np.eye(m.shape[0]))
        return True
    except np.linalg.LinAlgError:
        return False


class TestExpm:
    def test_zero_time_is_identity(self):
        assert np.array_equal(expm(A1, 0.0), np.eye(2))

    def test_diagonal(self):
        np.testing.assert_allclose(expm(np.diag([1.0, -2.0]), 0.5), np.diag([math.exp(0.5), math.exp(-1.0)]), rtol=1e-14)

    def test_rotation(self):
        r = expm([[0.0, 1.0], [-1.0, 0.0]], math.pi / 2)
        np.testing.assert_allclose(r, [[0.0, 1.0], [-1.0, 0.0]], atol=1e-15)

    def test_large_norm_uses_squaring(self):
        a = np.array([[-30.0, 40.0], [0.0, -20.0]])
        np.testing.assert_allclose(expm(a, 1.3), sla.expm(1.3 * a), rtol=1e-10, atol=1e-300)

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            expm(np.ones((2, 3)))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            expm([[np.nan]])

    @settings(max_examples=200)
    @given(dims, seeds, st.floats(-3, 3))
    def test_matches_scipy(self, n, seed, t):
        a = np.random.default_rng(seed).standard_normal((n, n))
        ref = sla.expm(a * t)
        np.testing.assert_allclose(expm(a, t), ref, rtol=1e-11, atol=1e-12 * np.abs(ref).max())

    @settings(max_examples=200)
    @given(dims, seeds, st.floats(0, 2), st.floats(0, 2))
    def test_semigroup(self, n, seed, s, t):
        a = np.random.default_rng(seed).standard_normal((n, n))
        lhs = expm(a, s + t)
        np.testing.assert_allclose(expm(a, s) @ expm(a, t), lhs, rtol=0, atol=1e-10 * max(1.0, np.abs(lhs).max()))


class TestSymmetricEig:
    def test_known(self):
        w, v = symmetric_eigh([[2.0, 1.0], [1.0, 2.0]])
        np.testing.assert_allclose(w, [1.0, 3.0], rtol=1e-15)
        assert abs(abs(v[0, 1]) - 1 / math.sqrt(2)) < 1e-14

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            symmetric_eigh([[1.0, 2.0], [0.0, 1.0]])

    @settings(max_examples=200)
    @given(dims, seeds)
    def test_trace_det_and_reconstruction(self, n, seed):
        rng = np.random.default_rng(seed)
        b = rng.standard_normal((n, n))
        s = b + b.T
        w, v = symmetric_eigh(s)
        assert np.all(np.diff(w) >= 0)
        assert math.isclose(w.sum(), np.trace(s), rel_tol=1e-8, abs_tol=1e-10)
        assert math.isclose(np.prod(w), np.linalg.det(s), rel_tol=1e-8, abs_tol=1e-10)
        np.testing.assert_allclose(v @ np.diag(w) @ v.T, s, atol=1e-11 * max(1, np.abs(s).max()))
        np.testing.assert_allclose(w, np.linalg.eigvalsh(s), atol=1e-11 * max(1, np.abs(s).max()))


class TestSpd:
    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            SpdMatrix([[1.0, 0.0], [0.0, -1e-3]])

    def test_quad_and_norm(self):
        p = SpdMatrix([[2.0, 0.0], [0.0, 8.0]])
        assert p.quad([1.0, 1.0]) == 10.0
        assert p.norm([0.0, 0.5]) == math.sqrt(2.0)
        assert p.eig_bounds() == (2.0, 8.0)

    def test_json_round_trip(self):
        m = np.array([[1.5, -2.0, 0.25], [3.0, 4.0, 1e-17]])
        np.testing.assert_array_equal(matrix_from_json(matrix_to_json(m)), m)

    def test_json_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            matrix_from_json({"rows": 2, "cols": 2, "data": [1, 2, 3]})


class TestGenEig:
    def test_identical(self):
        assert gen_eig_max(np.eye(3), np.eye(3)) == 1.0

    def test_scalar_multiple(self):
        assert gen_eig_max(4 * np.eye(2), np.eye(2)) == 4.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            gen_eig_max(np.eye(2), np.eye(3))

    @settings(max_examples=1000)
    @given(dims, seeds)
    def test_bracketing_oracle(self, n, seed):
        rng = np.random.default_rng(seed)
        p, q = rand_spd(rng, n), rand_spd(rng, n)
        lam = gen_eig_max(p, q)
        # P <= (lam + 1e-8) Q holds, P <= (lam - 1e-6) Q does not
        assert is_psd((lam + 1e-8 * lam) * q - p)
        assert not is_psd((lam - 1e-6 * lam) * q - p)
        assert math.isclose(lam, sla.eigh(p, q, eigvals_only=True)[-1], rel_tol=1e-10)

    @settings(max_examples=200)
    @given(dims, seeds)
    def test_reciprocal_product(self, n, seed):
        rng = np.random.default_rng(seed)
        p, q = rand_spd(rng, n), rand_spd(rng, n)
        assert gen_eig_max(p, q) * gen_eig_max(q, p) >= 1.0 - 1e-12
        assert math.isclose(gen_eig_max(3.0 * q, q) * gen_eig_max(q, 3.0 * q), 1.0, rel_tol=1e-12)


class TestGeneralEig:
    def test_companion(self):
        # x^2 + 3x + 2
        w = np.sort_complex(eigvals_general([[0.0, 1.0], [-2.0, -3.0]]))
        np.testing.assert_allclose(w, [-2.0, -1.0], atol=1e-12)

    def test_example_modes(self):
        assert spectral_abscissa(A1) == pytest.approx(-0.1, abs=1e-12)
        assert spectral_abscissa(A2) == pytest.approx(-0.03, abs=1e-12)

    @settings(max_examples=200)
    @given(st.integers(1, 8), seeds)
    def test_matches_numpy(self, n, seed):
        a = np.random.default_rng(seed).standard_normal((n, n))
        ours = np.sort_complex(eigvals_general(a))
        ref = np.sort_complex(np.linalg.eigvals(a))
        # match each reference eigenvalue to its nearest computed one
        for z in ref:
            assert np.min(np.abs(ours - z)) < 1e-8 * max(1.0, abs(z))

    def test_dimension_cap(self):
        with pytest.raises(ValueError):
            eigvals_general(np.eye(linalg.MAX_DIM + 1))


class TestLyapunov:
    def test_closed_form(self):
        # entrywise: 2(b - a) = -1, c - 2b = 0, -2c = -1
        p = lyap_solve([[-1.0, 0.0], [1.0, -1.0]], np.eye(2))
        np.testing.assert_allclose(p.matrix, [[0.75, 0.25], [0.25, 0.5]], rtol=1e-13)

    def test_closed_form_upper(self):
        p = lyap_solve([[-1.0, 1.0], [0.0, -1.0]], np.eye(2))
        np.testing.assert_allclose(p.matrix, [[0.5, 0.25], [0.25, 0.75]], rtol=1e-13)

    def test_not_hurwitz(self):
        with pytest.raises(NotHurwitzError) as info:
            lyap_solve([[0.1, 0.0], [0.0, -1.0]], np.eye(2))
        assert info.value.eigenvalue.real == pytest.approx(0.1)

    @settings(max_examples=200)
    @given(dims, seeds)
    def test_residual_and_scipy(self, n, seed):
        rng = np.random.default_rng(seed)
        b = rng.standard_normal((n, n))
        a = b - (np.max(np.linalg.eigvals(b).real) + rng.uniform(0.1, 2.0)) * np.eye(n)
        q = rand_spd(rng, n, cond=10)
        p = lyap_solve(a, q).matrix
        ref = sla.solve_continuous_lyapunov(a.T, -q)
        np.testing.assert_allclose(p, ref, rtol=1e-8, atol=1e-9 * np.abs(ref).max())
        assert np.abs(a.T @ p + p @ a + q).max() <= 1e-9 * np.abs(q).max() * max(1.0, np.abs(p).max())
