import numpy as np
import pytest

from incpod.errors import InvalidInputError, ZeroColumnError
from incpod.incremental import (
    SvdState,
    Tolerances,
    error_bound,
    initialize,
    pod_output,
    reconstruct,
    run_stream,
    update,
)
from incpod.oracle import exact_weighted_svd
from incpod.weighted_linalg import (
    WeightMatrix,
    m_norm,
    m_orthonormality_defect,
    small_svd,
    weighted_operator_norm,
)

from conftest import m_orthonormal_columns, random_weight

EXACT = Tolerances(tol=1e-300, tol_sv=1e-300)


def stream_matrix(U, M, tols, **kw):
    state, _ = run_stream(iter(np.asarray(U, dtype=float).T), M, tols, **kw)
    return state


class TestTolerances:
    def test_defaults(self):
        t = Tolerances()
        assert t.tol == 1e-10 and t.tol_sv == 1e-10

    @pytest.mark.parametrize("bad", [dict(tol=0.0), dict(tol_sv=-1.0)])
    def test_rejects_nonpositive(self, bad):
        with pytest.raises(ValueError):
            Tolerances(**bad)


class TestInitialize:
    def test_euclidean(self):
        s = initialize([3.0, 4.0], WeightMatrix(np.eye(2)))
        assert np.allclose(s.sigma, [5.0], atol=0)
        assert np.allclose(s.V[:, 0], [0.6, 0.8], atol=1e-16)
        assert s.W.shape == (1, 1) and s.W[0, 0] == 1.0
        assert s.e == 0.0 and s.k == 1 and s.n == 1
        assert s.T_p == 0 and s.T_sv == 0

    def test_weighted(self):
        s = initialize([1.0, 0.0], WeightMatrix(np.diag([4.0, 1.0])))
        assert np.allclose(s.sigma, [2.0], atol=0)
        assert s.V[0, 0] == 0.5

    def test_zero_column(self):
        with pytest.raises(ZeroColumnError):
            initialize(np.zeros(3), WeightMatrix(np.eye(3)))

    def test_skip_w(self):
        s = initialize([1.0, 1.0], WeightMatrix(np.eye(2)), keep_w=False)
        assert s.W is None


class TestUpdate:
    def test_orthogonal_growth(self):
        M = WeightMatrix(np.eye(2))
        s = initialize([1.0, 0.0], M)
        s, rep = update(s, np.array([0.0, 1.0]), M, Tolerances(1e-12, 1e-12))
        assert s.k == 2
        assert np.allclose(s.sigma, [1.0, 1.0], atol=1e-15)
        assert s.e == 0.0
        assert rep.rank_grew and rep.e_p == 0.0

    def test_column_in_span_keeps_rank(self, rng):
        M = random_weight(rng, 8)
        U = rng.standard_normal((8, 3))
        s = stream_matrix(U, M, EXACT)
        d = rng.standard_normal(3)
        c = s.V @ d  # exactly representable in the basis
        prev = reconstruct(s).copy()
        proj = s.V @ (s.V.T @ M.matvec(c))
        s, rep = update(s, c, M, Tolerances(tol=1e-8, tol_sv=1e-300))
        assert s.k == 3 and not rep.rank_grew
        assert rep.p <= 1e-12
        assert np.max(np.abs(reconstruct(s) - np.column_stack([prev, proj]))) <= 1e-10

    def test_exactness_oracle_random_streams(self, rng):
        # oracle: exact weighted SVD of the assembled matrix
        for _ in range(5):
            m = int(rng.integers(10, 31))
            n = int(rng.integers(2, 13))
            M = random_weight(rng, m)
            U = rng.standard_normal((m, n))
            state = stream_matrix(U, M, Tolerances(1e-15, 1e-15))
            ex = exact_weighted_svd(U, M)
            assert state.k == ex.k
            assert np.max(np.abs(state.sigma - ex.sigma)) <= 1e-11 * ex.sigma[0]

    def test_planted_p_truncation(self, rng):
        M = random_weight(rng, 12)
        U = rng.standard_normal((12, 4))
        s = stream_matrix(U, M, EXACT)
        v_perp = rng.standard_normal(12)
        v_perp -= s.V @ (s.V.T @ M.matvec(v_perp))
        v_perp -= s.V @ (s.V.T @ M.matvec(v_perp))
        v_perp /= m_norm(v_perp, M)
        magnitude = 1e-9
        c = s.V @ rng.standard_normal(4) + magnitude * v_perp
        e_before, tp_before = s.e, s.T_p
        s, rep = update(s, c, M, Tolerances(tol=1e-8, tol_sv=1e-300))
        assert s.T_p == tp_before + 1
        assert 0.0 < rep.e_p < 1e-8
        assert rep.p == pytest.approx(magnitude, abs=1e-14)
        assert s.e == pytest.approx(e_before + rep.p, rel=1e-15)

    def test_rank_capped_at_dimension(self, rng):
        M = random_weight(rng, 4)
        U = rng.standard_normal((4, 10))
        s = stream_matrix(U, M, Tolerances(1e-12, 1e-300))
        assert s.k <= 4
        assert s.n == 10

    def test_invariants_along_stream(self, rng):
        M = random_weight(rng, 15)
        U = rng.standard_normal((15, 20))
        tols = Tolerances(tol=1e-6, tol_sv=1e-6)
        s = initialize(U[:, 0], M)
        e_prev = 0.0
        for i in range(1, 20):
            s, rep = update(s, U[:, i], M, tols)
            assert m_orthonormality_defect(s.V, M) <= 1e-10 * s.k
            assert np.max(np.abs(s.W.T @ s.W - np.eye(s.k))) <= 1e-10 * s.k
            assert np.all(s.sigma > 0)
            assert np.all(np.diff(s.sigma) <= 0)
            assert s.e >= e_prev
            assert s.e == pytest.approx(e_prev + rep.e_p + rep.e_sv, abs=1e-18, rel=1e-12)
            assert s.k <= min(15, s.n)
            assert 0.0 <= rep.e_p < tols.tol
            assert 0.0 <= rep.e_sv <= tols.tol_sv
            assert rep.e_p == 0.0 or not rep.rank_grew
            e_prev = s.e

    def test_layout_independent_arithmetic(self, rng):
        # strided column views and contiguous copies must produce
        # bit-identical update sequences
        M = random_weight(rng, 12)
        U = rng.standard_normal((12, 15))
        tols = Tolerances(1e-6, 1e-6)
        a = initialize(U[:, 0], M)
        b = initialize(np.ascontiguousarray(U[:, 0]), M)
        for i in range(1, 15):
            a, ra = update(a, U[:, i], M, tols)  # strided view
            b, rb = update(b, U[:, i].copy(), M, tols)  # contiguous
            assert ra.p == rb.p and ra.e_p == rb.e_p and ra.e_sv == rb.e_sv
        assert a.e == b.e
        assert np.array_equal(a.V, b.V)

    def test_reorth_threshold_override(self, rng):
        M = random_weight(rng, 6)
        s = initialize(rng.standard_normal(6), M)
        s, rep = update(s, rng.standard_normal(6), M, Tolerances(), reorth_threshold=0.0)
        assert rep.reorthogonalized
        s2 = initialize(rng.standard_normal(6), M)
        s2, rep2 = update(
            s2, rng.standard_normal(6), M, Tolerances(), reorth_threshold=np.inf
        )
        assert not rep2.reorthogonalized

    def test_aggressive_truncation_counters_and_cap(self, rng):
        M = random_weight(rng, 20)
        base = m_orthonormal_columns(rng, M, 3)
        coeffs = rng.standard_normal((3, 30))
        U = base @ coeffs + 1e-6 * rng.standard_normal((20, 30))
        tols = Tolerances(tol=1e-4, tol_sv=1e-4)
        s = stream_matrix(U, M, tols)
        assert s.T_p > 0
        assert s.e <= s.T_p * tols.tol + s.T_sv * tols.tol_sv

    def test_sv_truncation_records_first_discarded(self, rng):
        M = WeightMatrix(np.eye(6))
        s = initialize(np.array([10.0, 0, 0, 0, 0, 0]), M)
        c = np.array([0.0, 1e-6, 0, 0, 0, 0])
        s, rep = update(s, c, M, Tolerances(tol=1e-12, tol_sv=1e-3))
        assert s.k == 1
        assert rep.e_sv == pytest.approx(1e-6, rel=1e-12)
        assert s.T_sv == 1

    def test_all_values_below_tolsv_keeps_rank_one(self, rng):
        M = WeightMatrix(np.eye(4))
        s = initialize(np.array([1e-6, 0, 0, 0.0]), M)
        s, rep = update(s, np.array([0, 1e-7, 0, 0.0]), M, Tolerances(tol=1e-12, tol_sv=1.0))
        assert s.k == 1
        assert rep.e_sv == pytest.approx(1e-7, rel=1e-10)

    def test_wrong_length_column(self):
        M = WeightMatrix(np.eye(3))
        s = initialize([1.0, 0.0, 0.0], M)
        with pytest.raises(ValueError):
            update(s, np.ones(4), M, Tolerances())

    def test_nonfinite_column(self):
        M = WeightMatrix(np.eye(2))
        s = initialize([1.0, 0.0], M)
        with pytest.raises(InvalidInputError):
            update(s, np.array([np.inf, 0.0]), M, Tolerances())

    def test_keep_w_false_update(self, rng):
        M = random_weight(rng, 6)
        U = rng.standard_normal((6, 4))
        s = stream_matrix(U, M, EXACT, keep_w=False)
        assert s.W is None and s.k == 4
        with pytest.raises(ValueError):
            reconstruct(s)


class TestZeroRowStructure:
    def test_exactly_one_zero_singular_value(self, rng):
        # bordered matrix with zero bottom row: null space is span{e_{k+1}}
        for _ in range(20):
            k = int(rng.integers(1, 9))
            Q = np.zeros((k + 1, k + 1))
            Q[:k, :k] = np.diag(np.sort(rng.uniform(0.5, 10.0, k))[::-1])
            Q[:k, k] = rng.standard_normal(k)
            V_Q, s, _ = small_svd(Q)
            assert np.count_nonzero(s < 1e-13 * s[0]) == 1
            last = V_Q[:, -1]
            e_last = np.zeros(k + 1)
            e_last[-1] = 1.0
            assert min(
                np.max(np.abs(last - e_last)), np.max(np.abs(last + e_last))
            ) <= 1e-12


class TestErrorBound:
    def test_fresh_state_zero(self):
        s = initialize([1.0, 2.0], WeightMatrix(np.eye(2)))
        assert error_bound(s) == 0.0

    def test_zero_after_exact_updates(self, rng):
        M = random_weight(rng, 10)
        s = stream_matrix(rng.standard_normal((10, 6)), M, EXACT)
        assert error_bound(s) == 0.0
        assert s.T_p == 0 and s.T_sv == 0

    def test_capped_by_event_counts(self, rng):
        M = random_weight(rng, 12)
        tols = Tolerances(tol=1e-3, tol_sv=1e-3)
        base = m_orthonormal_columns(rng, M, 2)
        U = base @ rng.standard_normal((2, 25)) + 1e-5 * rng.standard_normal((12, 25))
        s = stream_matrix(U, M, tols)
        assert error_bound(s) <= s.T_p * tols.tol + s.T_sv * tols.tol_sv


class TestReconstruct:
    def test_rank_one_roundtrip(self):
        s = initialize([3.0, 4.0], WeightMatrix(np.eye(2)))
        assert np.allclose(reconstruct(s), [[3.0], [4.0]], atol=1e-15)

    def test_two_orthogonal_columns(self):
        M = WeightMatrix(np.eye(2))
        U = np.array([[2.0, 0.0], [0.0, 3.0]])
        s = stream_matrix(U, M, Tolerances(1e-14, 1e-14))
        assert np.max(np.abs(reconstruct(s) - U)) <= 1e-14

    def test_random_stream(self, rng):
        M = random_weight(rng, 25)
        U = rng.standard_normal((25, 12))
        s = stream_matrix(U, M, Tolerances(1e-15, 1e-15))
        err = weighted_operator_norm(U - reconstruct(s), M)
        assert err <= 1e-11 * weighted_operator_norm(U, M)


class TestPodOutput:
    def test_single_mode(self):
        s = initialize([3.0, 4.0], WeightMatrix(np.eye(2)))
        modes, eigs = pod_output(s)
        assert np.allclose(eigs, [25.0], atol=0)
        assert modes.shape == (2, 1)

    def test_two_modes(self):
        s = SvdState(
            V=np.eye(2), sigma=np.array([3.0, 1.0]), W=np.eye(2), k=2, n=2
        )
        _, eigs = pod_output(s)
        assert np.allclose(eigs, [9.0, 1.0], atol=0)

    def test_eigenvalues_nonincreasing(self, rng):
        M = random_weight(rng, 10)
        s = stream_matrix(rng.standard_normal((10, 8)), M, Tolerances())
        _, eigs = pod_output(s)
        assert np.all(np.diff(eigs) <= 0)


class TestRunStream:
    def test_skips_leading_zero_columns(self, rng):
        M = random_weight(rng, 5)
        U = rng.standard_normal((5, 4))
        U[:, 0] = 0.0
        state, skipped = run_stream(iter(U.T), M, EXACT)
        assert skipped == 1
        assert state.n == 3

    def test_all_zero_stream_rejected(self):
        M = WeightMatrix(np.eye(3))
        with pytest.raises(InvalidInputError):
            run_stream(iter(np.zeros((3, 3)).T), M, EXACT)
