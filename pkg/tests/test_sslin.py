import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcac_lure.errors import DimensionMismatch, NearSingularResolvent, NotHermitian
from pcac_lure.sslin import (
    FrequencyGrid,
    ResponseEvaluator,
    StateSpace,
    freq_response,
    hermitian_min_eig,
    hermitian_min_eig_batch,
    observability_rank,
    spectral_radius,
)

A1 = np.array([[1.0, -0.5], [1.0, 0.0]])
B1 = np.array([[1.0], [0.0]])
C1 = np.array([[1.0, -1.0]])
G1 = StateSpace(A1, B1, C1)


def poly_tf(sys, z):
    """SISO transfer value from independently expanded polynomials.

    den = det(zI - A) from the characteristic polynomial; the numerator is
    C adj(zI - A) B, expanded via the Faddeev-LeVerrier recursion.
    """
    A = sys.A
    n = A.shape[0]
    coeffs = [1.0]
    Mk = np.zeros_like(A)
    adj_terms = []
    for k in range(1, n + 1):
        Mk = A @ Mk + coeffs[-1] * np.eye(n)
        adj_terms.append(Mk)
        coeffs.append(-np.trace(A @ Mk) / k)
    den = np.polyval(coeffs, z)
    # adj(zI - A) = sum_k z^{n-k} M_k
    num = sum((sys.C @ Mk @ sys.B)[0, 0] * z ** (n - k) for k, Mk in enumerate(adj_terms, start=1))
    return num / den + sys.D[0, 0]


class TestStateSpace:
    def test_shapes_and_defaults(self):
        assert (G1.n, G1.m, G1.p) == (2, 1, 1)
        assert G1.strictly_proper
        assert np.array_equal(G1.D, np.zeros((1, 1)))

    def test_feedthrough_flag(self):
        assert not StateSpace(A1, B1, C1, [[0.5]]).strictly_proper

    def test_vector_inputs_reshaped(self):
        s = StateSpace(A1, [1.0, 0.0], [1.0, -1.0])
        assert s.B.shape == (2, 1) and s.C.shape == (1, 2)

    @pytest.mark.parametrize(
        "A,B,C,D",
        [
            (np.eye(2), np.ones((3, 1)), np.ones((1, 2)), None),
            (np.eye(2), np.ones((2, 1)), np.ones((1, 3)), None),
            (np.ones((2, 3)), np.ones((2, 1)), np.ones((1, 2)), None),
            (np.eye(2), np.ones((2, 1)), np.ones((1, 2)), np.ones((2, 2))),
        ],
    )
    def test_inconsistent_dimensions(self, A, B, C, D):
        with pytest.raises(DimensionMismatch):
            StateSpace(A, B, C, D)

    def test_read_only(self):
        with pytest.raises(ValueError):
            G1.A[0, 0] = 3.0


class TestFrequencyGrid:
    def test_default(self):
        g = FrequencyGrid()
        assert g.count == 4096 and len(g.points) == 4096
        assert g.points[0] == 0.0 and g.points[-1] == np.pi
        assert np.all(np.diff(g.points) > 0)

    def test_too_small(self):
        with pytest.raises(ValueError):
            FrequencyGrid(1)


class TestFreqResponse:
    def test_example_at_pi(self):
        assert freq_response(G1, np.pi)[0, 0] == pytest.approx(-0.8, abs=1e-13)

    def test_example_at_zero(self):
        assert abs(freq_response(G1, 0.0)[0, 0]) < 1e-14

    def test_feedthrough_only(self):
        s = StateSpace(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros((1, 2)), [[3.5]])
        assert freq_response(s, 1.234)[0, 0] == pytest.approx(3.5)

    def test_empty_state(self):
        s = StateSpace(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[2.0]])
        assert freq_response(s, 0.3)[0, 0] == 2.0

    def test_vector_shape(self):
        out = freq_response(G1, np.linspace(0, np.pi, 7))
        assert out.shape == (7, 1, 1)

    @pytest.mark.parametrize("method", ["auto", "schur", "hessenberg", "modal"])
    def test_methods_agree_with_dense_solve(self, method):
        rng = np.random.default_rng(4)
        A = 0.25 * rng.standard_normal((8, 8))
        B = rng.standard_normal((8, 2))
        C = rng.standard_normal((3, 8))
        s = StateSpace(A, B, C, rng.standard_normal((3, 2)))
        psi = np.linspace(0, np.pi, 33)
        ref = np.array([C @ np.linalg.solve(np.exp(1j * q) * np.eye(8) - A, B) + s.D for q in psi])
        got = freq_response(s, psi, method=method)
        assert np.max(np.abs(got - ref)) < 1e-10 * np.max(np.abs(ref))

    def test_defective_matrix(self):
        J = np.diag(np.ones(9), 1)  # nilpotent Jordan block
        s = StateSpace(J, np.ones(10), np.ones(10))
        for q in (0.1, 1.0, 3.0):
            ref = np.ones(10) @ np.linalg.solve(np.exp(1j * q) * np.eye(10) - J, np.ones(10))
            assert freq_response(s, q)[0, 0] == pytest.approx(ref, rel=1e-12)

    def test_pole_on_circle_raises(self):
        s = StateSpace([[1.0]], [[1.0]], [[1.0]])
        with pytest.raises(NearSingularResolvent) as info:
            freq_response(s, np.array([0.0, 0.5]))
        assert info.value.mask.tolist() == [True, False]

    def test_pole_on_circle_nan(self):
        s = StateSpace([[-1.0]], [[1.0]], [[1.0]])
        out = freq_response(s, np.array([0.5, np.pi]), on_singular="nan")
        assert np.isfinite(out[0, 0, 0]) and np.isnan(out[1, 0, 0])

    def test_point_evaluation_matches_sweep(self):
        rng = np.random.default_rng(1)
        s = StateSpace(0.3 * rng.standard_normal((6, 6)), rng.standard_normal((6, 1)), rng.standard_normal((1, 6)))
        for method in ("modal", "schur", "hessenberg"):
            ev = ResponseEvaluator(s, method)
            assert ev.at(0.7)[0, 0] == pytest.approx(ev(np.array([0.7]))[0][0, 0, 0], rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), psi=st.floats(0.0, np.pi))
    def test_conjugate_symmetry(self, seed, psi):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        A = rng.standard_normal((n, n))
        A *= 0.9 / max(spectral_radius(A), 1e-3)
        s = StateSpace(A, rng.standard_normal((n, 2)), rng.standard_normal((2, n)))
        pos = freq_response(s, psi)
        z = np.exp(-1j * psi)
        neg = s.C @ np.linalg.solve(z * np.eye(n) - A, s.B)
        assert np.allclose(pos, np.conj(neg), rtol=1e-9, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_matches_polynomial_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 6))
        A = rng.standard_normal((n, n))
        A *= 0.8 / max(spectral_radius(A), 1e-3)
        s = StateSpace(A, rng.standard_normal((n, 1)), rng.standard_normal((1, n)), [[rng.standard_normal()]])
        psi = np.linspace(0, np.pi, 17)
        got = freq_response(s, psi)[:, 0, 0]
        ref = np.array([poly_tf(s, np.exp(1j * q)) for q in psi])
        assert np.all(np.abs(got - ref) <= 1e-8 * np.maximum(np.abs(ref), 1.0))


class TestSpectralRadius:
    def test_example(self):
        assert spectral_radius(A1) == pytest.approx(np.sqrt(0.5), abs=1e-14)

    def test_scaled_identity(self):
        assert spectral_radius(0.5 * np.eye(3)) == pytest.approx(0.5)

    def test_zero(self):
        assert spectral_radius(np.zeros((4, 4))) == 0.0

    def test_non_square(self):
        with pytest.raises(DimensionMismatch):
            spectral_radius(np.ones((2, 3)))

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_transpose_invariant(self, seed):
        M = np.random.default_rng(seed).standard_normal((20, 20))
        assert abs(spectral_radius(M) - spectral_radius(M.T)) <= 1e-10 * max(1.0, spectral_radius(M))


class TestHermitianMinEig:
    def test_identity(self):
        assert hermitian_min_eig(np.eye(2)) == pytest.approx(1.0)

    def test_diag(self):
        assert hermitian_min_eig(np.diag([3.0, -2.0])) == pytest.approx(-2.0)

    def test_siso_twice_real_part(self):
        h = freq_response(G1, 0.6)[0, 0]
        assert hermitian_min_eig([[h + np.conj(h)]]) == pytest.approx(2 * h.real)

    def test_rejects_asymmetric(self):
        with pytest.raises(NotHermitian):
            hermitian_min_eig([[1.0, 2.0], [0.0, 1.0]])

    def test_tolerates_roundoff(self):
        X = np.array([[2.0, 1.0 + 1e-12], [1.0, 2.0]])
        assert hermitian_min_eig(X) == pytest.approx(1.0)

    def test_batch_propagates_nan(self):
        X = np.stack([np.eye(2), np.full((2, 2), np.nan), np.diag([1.0, -4.0])])
        out = hermitian_min_eig_batch(X)
        assert out[0] == pytest.approx(1.0) and np.isnan(out[1]) and out[2] == pytest.approx(-4.0)


class TestObservabilityRank:
    def test_identity_dynamics(self):
        assert observability_rank(np.eye(2), [[1.0, 0.0]]) == 1

    def test_example(self):
        assert observability_rank(A1, C1) == 2

    def test_zero_output(self):
        assert observability_rank(A1, np.zeros((1, 2))) == 0

    def test_bad_tol(self):
        with pytest.raises(ValueError):
            observability_rank(A1, C1, tol=0.0)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_monotone_in_tol(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 8))
        A = rng.standard_normal((n, n))
        Cm = rng.standard_normal((1, n))
        ranks = [observability_rank(A, Cm, tol) for tol in np.logspace(-14, 0, 15)]
        assert all(a >= b for a, b in zip(ranks, ranks[1:]))
