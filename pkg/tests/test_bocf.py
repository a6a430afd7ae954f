import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcac_lure.bocf import assemble_model, assemble_state, markov_parameters, unpack_theta
from pcac_lure.errors import DimensionMismatch
from pcac_lure.sslin import spectral_radius


def arx_impulse(F, G, count):
    """h_i = -sum_j F_j h_{i-j} + G_i (G_i = 0 beyond the order)."""
    n = F.shape[0]
    h = []
    for i in range(1, count + 1):
        acc = G[i - 1].copy() if i <= n else np.zeros_like(G[0])
        for j in range(1, min(i - 1, n) + 1):
            acc -= F[j - 1] @ h[i - j - 1]
        h.append(acc)
    return np.array(h)


def test_scalar_layout():
    f1, f2, g1, g2 = 0.3, -0.2, 1.5, 0.7
    mod = assemble_model([f1, f2, g1, g2], 2)
    assert np.array_equal(mod.A, [[-f1, 1.0], [-f2, 0.0]])
    assert np.array_equal(mod.B, [[g1], [g2]])
    assert np.array_equal(mod.C, [[1.0, 0.0]])


def test_zero_theta_is_shift():
    mod = assemble_model(np.zeros(20), 10)
    assert np.array_equal(mod.A, np.diag(np.ones(9), 1))
    assert spectral_radius(mod.A) == 0.0
    assert not np.any(np.linalg.matrix_power(mod.A, 10))


def test_two_output_structure():
    mod = assemble_model(np.arange(12.0), 2, p=2, m=1)
    assert mod.A.shape == (4, 4)
    assert np.array_equal(mod.A[:2, 2:], np.eye(2))
    assert np.array_equal(mod.C, [[1, 0, 0, 0], [0, 1, 0, 0]])


def test_column_major_unpacking():
    # theta = vec([F1 F2 G1 G2]) with p = 2, m = 1
    F1 = np.array([[1.0, 2.0], [3.0, 4.0]])
    F2 = np.array([[5.0, 6.0], [7.0, 8.0]])
    G1 = np.array([[9.0], [10.0]])
    G2 = np.array([[11.0], [12.0]])
    X = np.hstack([F1, F2, G1, G2])
    F, G = unpack_theta(X.reshape(-1, order="F"), 2, 2, 1)
    assert np.array_equal(F[0], F1) and np.array_equal(F[1], F2)
    assert np.array_equal(G[0], G1) and np.array_equal(G[1], G2)


def test_wrong_length():
    with pytest.raises(DimensionMismatch):
        assemble_model(np.zeros(5), 2)


def test_state_zero_history():
    mod = assemble_model(np.random.default_rng(0).standard_normal(20), 10)
    x = assemble_state(mod, 2.5, [], [])
    assert x[0] == 2.5 and not np.any(x[1:])


def test_state_substitution():
    f1, f2, g1, g2 = 0.3, -0.2, 1.5, 0.7
    mod = assemble_model([f1, f2, g1, g2], 2)
    x = assemble_state(mod, 1.0, [2.0, 0.0], [3.0, 0.0])
    assert np.allclose(x, [1.0, -2.0 * f2 + 3.0 * g2])


def test_markov_first_and_zero():
    rng = np.random.default_rng(2)
    th = rng.standard_normal(8)
    mod = assemble_model(th, 4)
    assert markov_parameters(mod, 1)[0, 0, 0] == pytest.approx(th[4])
    assert not np.any(markov_parameters(assemble_model(np.zeros(8), 4), 6))


def test_markov_first_order_geometric():
    f1, g1 = -0.6, 2.0
    h = markov_parameters(assemble_model([f1, g1], 1), 8)[:, 0, 0]
    assert np.allclose(h, g1 * (-f1) ** np.arange(8))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), order=st.integers(1, 10), p=st.integers(1, 2), m=st.integers(1, 2))
def test_markov_matches_arx_recursion(seed, order, p, m):
    rng = np.random.default_rng(seed)
    th = rng.standard_normal(order * p * (p + m)) * 0.3
    mod = assemble_model(th, order, p, m)
    h = markov_parameters(mod, 50)
    ref = arx_impulse(mod.F, mod.G, 50)
    assert np.all(np.abs(h - ref) <= 1e-10 * np.maximum(np.abs(ref), 1.0))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_update_form_agreement(seed):
    """Iterating x+ = (A - F C) x + B u + F y reproduces the explicit state."""
    rng = np.random.default_rng(seed)
    n = 5
    mod = assemble_model(rng.standard_normal(2 * n) * 0.3, n)
    F = mod.first_column
    steps = 30
    u = rng.standard_normal(steps)
    y = np.zeros(steps)
    # outputs generated by the ARX model itself
    for k in range(steps):
        y[k] = sum(-mod.F[i, 0, 0] * y[k - 1 - i] + mod.G[i, 0, 0] * u[k - 1 - i] for i in range(n) if k - 1 - i >= 0)
    x = assemble_state(mod, y[0], [], [])
    for k in range(steps - 1):
        x = (mod.A - F @ mod.C) @ x + mod.B[:, 0] * u[k] + F[:, 0] * y[k]
        past_y = y[k::-1][:n]
        past_u = u[k::-1][:n]
        explicit = assemble_state(mod, y[k + 1], past_y, past_u)
        assert np.allclose(x, explicit, atol=1e-10)
        assert x[0] == pytest.approx(y[k + 1])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_first_block_is_output(seed):
    rng = np.random.default_rng(seed)
    mod = assemble_model(rng.standard_normal(20), 10)
    yk = rng.standard_normal()
    x = assemble_state(mod, yk, rng.standard_normal(10), rng.standard_normal(10))
    assert (mod.C @ x)[0] == yk
