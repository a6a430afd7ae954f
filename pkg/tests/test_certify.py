import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcac_lure.certify import (
    certificate_trace,
    circle_certificate,
    circle_realization,
    scan_N,
    sweep_min_eig,
    tsypkin_certificate,
    tsypkin_realization,
)
from pcac_lure.lure import LurePlant, SectorBound, Tanh, simulate
from pcac_lure.sslin import FrequencyGrid, StateSpace, freq_response

A1 = np.array([[1.0, -0.5], [1.0, 0.0]])
B1 = np.array([[1.0], [0.0]])
C1 = np.array([[1.0, -1.0]])
G1 = StateSpace(A1, B1, C1)
UNIT = SectorBound(0.0, 1.0)
GRID = FrequencyGrid(2048)


def random_stable(rng, n, p=1, m=1, radius=0.9):
    A = rng.standard_normal((n, n))
    A *= radius / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-12)
    return StateSpace(A, rng.standard_normal((n, m)), rng.standard_normal((p, n)))


def direct_response(sys, z):
    n = sys.n
    return np.array([sys.C @ np.linalg.solve(zi * np.eye(n) - sys.A, sys.B) + sys.D for zi in z])


class TestCircle:
    def test_open_loop_example(self):
        rep = circle_certificate(G1, UNIT, GRID)
        assert rep.alpha == pytest.approx(np.sqrt(0.5), abs=1e-5)
        assert rep.cc1_pass and not rep.cc2_pass and not rep.passed
        # dense-grid oracle: 2 Re(1 - G) dips below zero
        psi = np.linspace(0, np.pi, 20001)
        G = direct_response(G1, np.exp(1j * psi))[:, 0, 0]
        oracle = np.min(2 * (1 - G.real))
        assert rep.beta < 0 and rep.beta == pytest.approx(oracle, abs=1e-6)
        assert 0.3 < rep.argmin_psi < 1.0

    def test_zero_output_matrix(self):
        sys = StateSpace(A1, B1, np.zeros((1, 2)))
        rep = circle_certificate(sys, UNIT, GRID)
        assert rep.alpha == pytest.approx(np.sqrt(0.5))
        assert rep.beta == pytest.approx(2.0)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 5))
    def test_h_realization(self, seed, n):
        rng = np.random.default_rng(seed)
        sys = random_stable(rng, n, 2, 2)
        M1 = 0.1 * rng.standard_normal((2, 2))
        bound = SectorBound(M1, M1 + np.eye(2))
        H = circle_realization(sys, bound)
        z = np.exp(1j * np.linspace(0.1, 3.0, 9))
        G = direct_response(sys, z)
        I = np.eye(2)
        for Gi, Hi in zip(G, direct_response(H, z)):
            ref = (I - bound.M2 @ Gi) @ np.linalg.inv(I - bound.M1 @ Gi)
            assert np.allclose(Hi, ref, rtol=1e-8, atol=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 6))
    def test_siso_reduction(self, seed, n):
        rng = np.random.default_rng(seed)
        sys = random_stable(rng, n)
        grid = FrequencyGrid(256)
        rep = circle_certificate(sys, UNIT, grid, refine=False)
        G = direct_response(sys, np.exp(1j * grid.points))[:, 0, 0]
        assert rep.beta == pytest.approx(np.min(2 * (1 - G.real)), rel=1e-8, abs=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), m2a=st.floats(0.1, 5.0), m2b=st.floats(0.1, 5.0))
    def test_wider_sector_is_harder(self, seed, m2a, m2b):
        rng = np.random.default_rng(seed)
        sys = random_stable(rng, 3)
        lo, hi = sorted((m2a, m2b))
        b_lo = circle_certificate(sys, SectorBound(0.0, lo), GRID, refine=False).beta
        b_hi = circle_certificate(sys, SectorBound(0.0, hi), GRID, refine=False).beta
        # with M1 = 0 the sweep value is 2 - 2 M2 max Re G
        G = direct_response(sys, np.exp(1j * GRID.points))[:, 0, 0]
        if np.max(G.real) > 0:
            assert b_hi <= b_lo + 1e-12
        assert b_lo == pytest.approx(2 - 2 * lo * np.max(G.real), rel=1e-9, abs=1e-9)

    def test_pole_on_circle(self):
        sys = StateSpace([[1.0]], [[1.0]], [[1.0]])
        rep = circle_certificate(sys, SectorBound(0.0, 0.5), GRID)
        assert rep.beta == -np.inf and rep.singular_points >= 1 and not rep.cc2_pass

    def test_refinement_never_worse(self):
        coarse = sweep_min_eig(circle_realization(G1, UNIT), FrequencyGrid(64), refine=False)[0]
        fine = sweep_min_eig(circle_realization(G1, UNIT), FrequencyGrid(64), refine=True)[0]
        assert fine <= coarse

    def test_soundness_spot_check(self):
        """A certified linear part with tanh feedback converges from random states."""
        sys = StateSpace([[0.5, 0.2], [0.0, 0.3]], [[1.0], [0.5]], [[0.3, 0.1]])
        assert circle_certificate(sys, UNIT, GRID).passed
        plant = LurePlant(sys, Tanh())
        rng = np.random.default_rng(0)
        for _ in range(100):
            tr = simulate(plant, rng.uniform(-100, 100, 2), steps=300)
            assert np.max(np.abs(tr.x[-10:])) < 1e-8


class TestTsypkin:
    def test_open_loop_example(self):
        rep = tsypkin_certificate(G1, 1.0, 0.08, GRID)
        assert rep.zeta1 == pytest.approx(2.0, rel=1e-12)
        assert rep.zeta3_min_eig == pytest.approx(2.0)
        assert rep.zeta2 == 2 and rep.tc1_pass

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), M=st.floats(0.1, 10.0))
    def test_zeta3_is_two_over_M(self, seed, M):
        sys = random_stable(np.random.default_rng(seed), 3)
        assert tsypkin_certificate(sys, M, 0.08, FrequencyGrid(16)).zeta3_min_eig == pytest.approx(2.0 / M)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 5), N=st.floats(0.01, 2.0))
    def test_l_realization(self, seed, n, N):
        rng = np.random.default_rng(seed)
        sys = random_stable(rng, n)
        L = tsypkin_realization(sys, np.array([[1.5]]), np.array([[N]]))
        z = np.exp(1j * np.linspace(0.1, 3.0, 9))
        G = direct_response(sys, z)[:, 0, 0]
        ref = 1 / 1.5 - (1 + (1 - 1 / z) * N) * G
        assert np.allclose(direct_response(L, z)[:, 0, 0], ref, rtol=1e-8, atol=1e-10)

    def test_l_spectrum(self):
        L = tsypkin_realization(G1, np.eye(1), 0.08 * np.eye(1))
        ev = np.sort_complex(np.linalg.eigvals(L.A))
        ref = np.sort_complex(np.concatenate([np.linalg.eigvals(A1), [0.0]]))
        assert np.allclose(ev, ref, atol=1e-12)

    def test_singular_state_matrix(self):
        sys = StateSpace([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]], [[1.0, 0.0]])
        rep = tsypkin_certificate(sys, 1.0, 0.08, GRID)
        assert not rep.tc1_pass and "singular" in rep.reason

    def test_unobservable_pair(self):
        sys = StateSpace(np.diag([0.5, 0.3]), [[1.0], [1.0]], [[1.0, 0.0]])
        rep = tsypkin_certificate(sys, 1.0, 0.08, GRID)
        assert rep.zeta2 == 1 and not rep.tc1_pass

    def test_invalid_N(self):
        with pytest.raises(ValueError):
            tsypkin_certificate(G1, 1.0, -0.1)

    def test_scan_N(self):
        best_N, best, reports = scan_N(G1, 1.0, Ns=[0.01, 0.08, 1.0], grid=FrequencyGrid(256))
        assert len(reports) == 3 and best.beta == max(r.beta for r in reports)
        assert best_N in (0.01, 0.08, 1.0)


class TestTrace:
    def test_serial_order_and_errors(self):
        bad = StateSpace(np.full((2, 2), np.nan), B1, C1)
        entries = certificate_trace([(5, G1), (6, bad)], UNIT, grid=FrequencyGrid(128))
        assert [e.k for e in entries] == [5, 6]
        assert entries[0].circle is not None and not entries[0].error
        assert entries[1].error and entries[1].circle is None

    def test_pool_matches_serial(self):
        systems = [(k, random_stable(np.random.default_rng(k), 3)) for k in range(4)]
        serial = certificate_trace(systems, UNIT, grid=FrequencyGrid(128))
        pooled = certificate_trace(systems, UNIT, grid=FrequencyGrid(128), workers=2)
        for a, b in zip(serial, pooled):
            assert a.circle == b.circle
            assert a.tsypkin.beta == b.tsypkin.beta
