from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brakeindex.errors import DBlockNotPositive, DegenerateEndpoint, NotPositiveDefinite
from brakeindex.golden import primitive_mode_errors
from brakeindex.index_engine import L0, maslov
from brakeindex.matrizant import constant_path, matrizant, trig_path
from brakeindex.symcore import signature, std_J
from brakeindex.variational import (
    ConvexMap,
    FourierVector,
    common_kernel_residual,
    conjugate_points,
    convexifying_lambda,
    dual_form,
    fenchel,
    pi_operator,
    quadratic_map,
    quartic_map,
    relative_morse,
    stabilized_morse_index,
    weyl_gap,
)


def _random_fourier(rng, n: int, modes: int, T: float) -> FourierVector:
    return FourierVector(n, T, rng.standard_normal((modes, 2 * n)), rng.standard_normal((modes, 2 * n)))


def test_fenchel_quadratic_is_self_conjugate():
    y = np.array([1.5, -2.0, 0.25])
    value, x = fenchel(quadratic_map(3), y)
    assert value == pytest.approx(0.5 * y @ y, rel=1e-12)
    assert np.allclose(x, y, atol=1e-12)


@pytest.mark.parametrize("y", [-3.0, -0.2, 0.7, 5.0])
def test_fenchel_quartic_closed_form(y):
    value, x = fenchel(quartic_map(1), [y])
    assert value == pytest.approx(0.75 * abs(y) ** (4 / 3), rel=1e-10)
    assert x[0] ** 3 == pytest.approx(y, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=2, max_size=2))
def test_legendre_reciprocity(x0):
    F = ConvexMap(
        2,
        lambda x: 0.25 * float(x @ x) ** 2 + 0.5 * float(x @ x),
        lambda x: (float(x @ x) + 1.0) * x,
        lambda x: (float(x @ x) + 1.0) * np.eye(2) + 2 * np.outer(x, x),
    )
    x0 = np.array(x0)
    y = F.gradient(x0)
    value, x = fenchel(F, y)
    assert np.linalg.norm(F.gradient(x) - y) <= 1e-10 * max(1.0, np.linalg.norm(y))
    assert np.allclose(x, x0, atol=1e-8)
    assert value == pytest.approx(float(x0 @ y) - F.value(x0), abs=1e-9)


def test_primitive_modes_exact():
    for row in primitive_mode_errors(8):
        assert row["primitive_error"] == 0.0
        assert row["eigen_error"] == 0.0


def test_primitive_general_period_factor():
    T = 3.0
    u = FourierVector(1, T, [[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]])
    pu = pi_operator(u)
    assert pu.cos[1, 0] == pytest.approx(-T / (2 * np.pi * 2))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 3), st.integers(1, 10), st.floats(0.5, 10.0))
def test_derivative_inverts_primitive(seed, n, modes, T):
    u = _random_fourier(np.random.default_rng(seed), n, modes, T)
    back = pi_operator(u).derivative()
    assert np.allclose(back.sin, u.sin, atol=1e-12) and np.allclose(back.cos, u.cos, atol=1e-12)
    ts = np.linspace(-T / 2, T / 2, 7)
    h = 1e-6
    fd = (pi_operator(u)(ts + h) - pi_operator(u)(ts - h)) / (2 * h)
    assert np.allclose(fd, u(ts), atol=1e-5 * max(1.0, np.max(np.abs(u(ts)))))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 3), st.integers(1, 10))
def test_primitive_adjointness(seed, n, modes):
    rng = np.random.default_rng(seed)
    T = 2 * np.pi
    u, v = _random_fourier(rng, n, modes, T), _random_fourier(rng, n, modes, T)
    J = std_J(n)
    assert abs(pi_operator(u).inner(v) + u.inner(pi_operator(v))) <= 1e-10
    lhs = pi_operator(u).apply(J).inner(v)
    rhs = u.inner(pi_operator(v).apply(J))
    assert abs(lhs - rhs) <= 1e-10


def test_brake_basis_symmetry():
    u = FourierVector.brake(2 * np.pi, [[1.0]], [[2.0]])
    assert u.is_brake_symmetric()
    ts = np.linspace(0.1, 3.0, 5)
    N = np.diag([-1.0, 1.0])
    assert np.allclose(u(-ts), u(ts) @ N)


@pytest.mark.parametrize("T,expected", [(5.0, 0), (7.0, 1), (11.0, 1), (13.0, 2)])
def test_rotation_morse_index(T, expected):
    B = constant_path(np.eye(2), T)
    assert stabilized_morse_index(B, T, modes=16) == (expected, expected)
    assert conjugate_points(B, T / 2).total == expected
    assert maslov(matrizant(B, steps=2048, tau=T / 2), L0).index == expected


@pytest.mark.parametrize("a,b,T", [(1.0, 1.0, 9.0), (2.0, 0.5, 7.0), (3.0, 2.0, 15.0)])
def test_diagonal_coefficients_match_mode_eigenvalues(a, b, T):
    modes = 12
    form = dual_form(constant_path(np.diag([a, b]), T), T, modes=modes, panels=64)
    w = 2 * np.pi * np.arange(1, modes + 1) / T
    expected = np.sort(np.concatenate(
        [np.linalg.eigvalsh(T / 4 * np.array([[1 / a, 1 / wj], [1 / wj, 1 / b]])) for wj in w]
    ))
    assert np.allclose(np.sort(form.signature.eigenvalues), expected, atol=1e-10)
    assert form.morse_index == int(np.sum(w < np.sqrt(a * b)))


def test_dual_form_symmetric_and_monotone_in_modes():
    c0 = np.diag([1.5, 1.0])
    B = trig_path(c0, [np.diag([0.3, 0.2])], [np.array([[0.0, 0.1], [0.1, 0.0]])], 9.0)
    prev = -1
    for modes in (4, 8, 16, 32):
        form = dual_form(B, 9.0, modes=modes)
        assert np.max(np.abs(form.matrix - form.matrix.T)) <= 1e-10
        assert form.morse_index >= prev
        prev = form.morse_index
    assert prev == conjugate_points(B, 4.5).total


def test_dual_form_requires_positive_coefficients():
    with pytest.raises(NotPositiveDefinite):
        dual_form(constant_path(np.diag([-1.0, 1.0]), 5.0), 5.0, modes=4)


def test_convexifying_lambda_examples():
    assert convexifying_lambda(constant_path(np.array([[0.0, 0.0], [0.0, 1.0]]), 1.0)) == pytest.approx(1.0)
    assert convexifying_lambda(constant_path(np.array([[-2.0, 1.0], [1.0, 1.0]]), 1.0)) == pytest.approx(4.0)
    with pytest.raises(DBlockNotPositive):
        convexifying_lambda(constant_path(np.diag([1.0, -1.0]), 1.0))


def test_convexifying_lambda_makes_path_positive():
    B = trig_path(np.array([[-1.0, 0.5], [0.5, 2.0]]), [np.array([[1.0, 0.3], [0.3, 0.5]])], [np.zeros((2, 2))], 3.0)
    lam = convexifying_lambda(B)
    vals = B(np.linspace(0, 3.0, 1000)) + np.diag([lam, 0.0])
    assert np.linalg.eigvalsh(vals).min() > 0


def test_relative_morse_examples():
    assert relative_morse([[1.0]], [[2.0]]).index == 1
    assert relative_morse(np.diag([1.0, -2.0]), np.zeros((2, 2))).index == 0
    with pytest.raises(DegenerateEndpoint):
        relative_morse([[1.0]], [[1.0]])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 12))
def test_relative_morse_matches_signature_oracle(seed, k):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((k, k))
    A = G + G.T
    H = rng.standard_normal((k, max(1, k // 2)))
    B = H @ H.T
    try:
        rel = relative_morse(A, B)
    except DegenerateEndpoint:
        return
    oracle = signature(A - B, 1e-9 * max(1.0, np.linalg.norm(A - B, 2))).m_minus - signature(A, 1e-9 * max(1.0, np.linalg.norm(A, 2))).m_minus
    assert rel.index == oracle
    assert rel.max_uphill <= 1e-9


def test_kernel_constancy_lies_in_common_kernel():
    rng = np.random.default_rng(2)
    Q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    A = Q @ np.diag([0.0, 1.0, 2.0, -1.0, 3.0]) @ Q.T
    B = Q @ np.diag([0.0, 1.0, 0.5, 0.2, 1.0]) @ Q.T
    dims = [common_kernel_residual(A, B, s)[0] for s in np.linspace(0.0, 0.5, 11)]
    assert dims == [1] * 11
    dim, resid = common_kernel_residual(A, B, 0.3)
    assert dim == 1 and resid <= 1e-7


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 20))
def test_weyl_bound(seed, k):
    rng = np.random.default_rng(seed)
    G1, G2 = rng.standard_normal((2, k, k))
    assert weyl_gap(G1 + G1.T, G1 + G1.T + 0.3 * (G2 + G2.T)) <= 1e-12


def test_conjugate_points_examples():
    B = constant_path(np.eye(2), 10.0)
    cp = conjugate_points(B, 3 * np.pi / 2)
    assert cp.total == 1 and cp.points[0][0] == pytest.approx(np.pi, abs=1e-8)
    assert conjugate_points(B, np.pi / 2).total == 0
    with pytest.raises(NotPositiveDefinite):
        conjugate_points(constant_path(np.diag([1.0, -1.0]), 3.0), 3.0)
