from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brakeindex.errors import NonSymmetricCoefficient, StepCountTooSmall
from brakeindex.matrizant import (
    BRAKE,
    PERIODIC,
    CoefficientPath,
    brake_extend,
    constant_path,
    matrizant,
    path_from_json,
    sample_coefficient_path,
    shifted,
    trig_path,
)
from brakeindex.symcore import check_symplectic, std_N


def _linear_path() -> CoefficientPath:
    def fn(t, side):
        out = np.zeros((t.size, 2, 2))
        out[:, 0, 0] = out[:, 1, 1] = 1.0
        out[:, 0, 1] = out[:, 1, 0] = t
        return out

    return CoefficientPath(1, 1.0, fn, "composite")


def test_zero_coefficient_gives_identity():
    g = matrizant(constant_path(np.zeros((2, 2)), 1.0), steps=64)
    assert np.array_equal(g.start, np.eye(2))
    assert np.max(np.abs(g.mats - np.eye(2))) == 0.0


def test_rotation_closed_forms():
    g = matrizant(constant_path(np.eye(2), np.pi / 2), steps=1024)
    assert np.allclose(g.end, [[0.0, -1.0], [1.0, 0.0]], atol=1e-8)
    g = matrizant(constant_path(np.eye(2), 2 * np.pi), steps=2048)
    assert np.allclose(g.end, np.eye(2), atol=1e-8)
    t = 1.234
    assert np.allclose(g.at(t), [[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]], atol=1e-8)


def test_step_count_floor():
    with pytest.raises(StepCountTooSmall):
        matrizant(constant_path(np.eye(2), 1.0), steps=8)


def test_non_symmetric_coefficient_rejected():
    def fn(t, side):
        return np.broadcast_to(np.array([[1.0, 1.0], [0.0, 1.0]]), (t.size, 2, 2)).copy()

    with pytest.raises(NonSymmetricCoefficient):
        matrizant(CoefficientPath(1, 1.0, fn, "composite"), steps=32)


def test_brake_extend_examples():
    E = brake_extend(constant_path(np.eye(2), 1.0))
    assert np.allclose(E(np.array([0.3, 1.7])), np.eye(2))
    E = brake_extend(_linear_path())
    assert E.tau == 2.0 and {PERIODIC, BRAKE} <= E.flags
    assert np.allclose(E(1.5), [[1.0, -0.5], [-0.5, 1.0]])
    EE = brake_extend(E.with_tau(1.0))
    ts = np.linspace(0, 2, 17)
    assert np.allclose(EE(ts), E(ts))


def test_brake_extend_reflection_symmetry():
    E = brake_extend(sample_coefficient_path(3, 2, 2, 2.0))
    N = std_N(2)
    ts = np.linspace(0.05, 0.95, 9)
    assert np.allclose(N @ E(2.0 - ts) @ N, E(ts), atol=1e-10)


def test_sample_path_examples():
    B = sample_coefficient_path(0, 2, 0, 1.0)
    vals = B(np.linspace(0, 1, 5))
    assert np.allclose(vals, vals[0]) and np.allclose(vals[0], vals[0].T)
    a, b = sample_coefficient_path(7, 2, 3, 2.0), sample_coefficient_path(7, 2, 3, 2.0)
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())
    assert np.max(np.abs(sample_coefficient_path(1, 2, 2, 0.0)(np.linspace(0, 1, 9)))) == 0.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.floats(0.1, 4.0))
def test_sample_path_norm_bound(seed, n, amplitude):
    B = sample_coefficient_path(seed, n, 2, amplitude)
    vals = B(np.linspace(0, 1, 101))
    assert np.max(np.linalg.norm(vals, ord=2, axis=(1, 2))) <= amplitude * (1 + 1e-12)


def test_path_json_roundtrip():
    B = sample_coefficient_path(5, 2, 2, 1.5, tau=0.7)
    C = path_from_json(json.loads(json.dumps(B.to_json())))
    ts = np.linspace(0, 0.7, 11)
    assert np.array_equal(B(ts), C(ts))
    assert C.flags == B.flags


def test_path_json_rejects_unknown_field():
    data = constant_path(np.eye(2), 1.0).to_json()
    data["colour"] = "blue"
    with pytest.raises(ValueError):
        path_from_json(data)


def test_trig_brake_flag():
    c0 = np.diag([1.0, 2.0])
    cos = np.array([np.diag([0.5, 0.1])])
    sin_ok = np.array([[[0.0, 0.3], [0.3, 0.0]]])
    assert BRAKE in trig_path(c0, cos, sin_ok, 1.0).flags
    assert BRAKE not in trig_path(c0, cos, np.array([np.eye(2)]), 1.0).flags


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_symplectic_residual_after_projection(seed, n):
    g = matrizant(sample_coefficient_path(seed, n, 2, 3.0), steps=2048)
    assert g.max_symplectic_residual() <= 1e-10
    assert np.array_equal(g.start, np.eye(2 * n))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 2))
def test_flow_property(seed, n):
    B = sample_coefficient_path(seed, n, 2, 2.0)
    full = matrizant(B, steps=2048)
    first = matrizant(B, steps=1024, tau=0.5)
    second = matrizant(shifted(B, 0.5, 0.5), steps=1024)
    assert np.max(np.abs(second.end @ first.end - full.end)) <= 1e-7


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 2), st.floats(0.05, 0.95))
def test_periodic_coefficients_give_monodromy_law(seed, n, t):
    B = sample_coefficient_path(seed, n, 2, 2.0)
    g2 = matrizant(B.with_tau(2.0), steps=4096)
    lhs = g2.at(t + 1.0)
    rhs = g2.at(t) @ g2.at(1.0)
    assert np.max(np.abs(lhs - rhs)) <= 1e-7


def test_step_doubling_fourth_order():
    B = sample_coefficient_path(2, 1, 2, 3.0)
    ends = [matrizant(B, steps=s, project_every=10**9).end for s in (64, 128, 256)]
    e1 = np.max(np.abs(ends[0] - ends[1]))
    e2 = np.max(np.abs(ends[1] - ends[2]))
    assert 10 < e1 / e2 < 24


def test_samples_strictly_increasing_and_decimated():
    g = matrizant(constant_path(np.eye(2), 1.0), steps=20000)
    assert g.times.size <= 8193
    assert np.all(np.diff(g.times) > 0) and g.times[-1] == 1.0
    assert check_symplectic(g.end) < 1e-10
