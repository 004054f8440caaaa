from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brakeindex.errors import DimensionMismatch
from brakeindex.golden import SHIFT_COEFFICIENT, SHIFT_ENDPOINT, SHIFT_TAU, shift_endpoint_case
from brakeindex.index_engine import L0, L1, maslov
from brakeindex.iteration import (
    Claim,
    VerificationReport,
    brake_iterate,
    concat,
    reflection_matrix,
    tilde_shift,
    verify_all,
    verify_bott,
    verify_hormander,
    verify_identities,
    verify_inequalities,
)
from brakeindex.matrizant import constant_path, matrizant, sample_coefficient_path
from brakeindex.symcore import blocks, signature


def _random_path(seed: int, n: int, steps: int = 1024):
    return matrizant(sample_coefficient_path(seed, n, 2, 3.0, tau=2.0), steps=steps)


def test_iterate_restricts_to_base_path():
    g = _random_path(3, 2)
    g3 = brake_iterate(g, 3)
    m = g.times.size
    assert np.array_equal(g3.times[:m], g.times)
    assert np.array_equal(g3.mats[:m], g.mats)
    assert g3.tau == pytest.approx(3 * g.tau)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 4))
def test_double_of_iterate_matches_iterate_of_double(seed, n, k):
    g = _random_path(seed, n, steps=256)
    a = brake_iterate(brake_iterate(g, k), 2).end
    b = brake_iterate(g, 2 * k).end
    assert np.max(np.abs(a - b)) <= 1e-8 * max(1.0, np.max(np.abs(b)))


def test_iterate_is_continuous_at_seams():
    g = _random_path(9, 1)
    g4 = brake_iterate(g, 4)
    S = g.tau
    for j in range(1, 4):
        i = int(np.argmin(np.abs(g4.times - j * S)))
        assert np.allclose(g4.mats[i], g4.at(j * S), atol=1e-12)
        assert np.max(np.abs(g4.mats[i + 1] - g4.mats[i])) < 0.05


def test_reflection_of_golden_endpoint():
    assert np.array_equal(reflection_matrix(SHIFT_ENDPOINT), [[-3.0, 4.0], [2.0, -3.0]])


def test_golden_realization_and_shift():
    g = matrizant(constant_path(SHIFT_COEFFICIENT, SHIFT_TAU), steps=2048)
    assert np.allclose(g.end, SHIFT_ENDPOINT, atol=1e-10)
    assert np.allclose(brake_iterate(g, 2).end, [[-3.0, 4.0], [2.0, -3.0]], atol=1e-9)
    assert np.allclose(tilde_shift(g).end, [[-1.0, -2.0], [1.0, 1.0]], atol=1e-9)


def test_golden_index_change():
    case = shift_endpoint_case()
    assert case["m_plus"] == 2
    assert case["formula_index"] == case["direct_index"] == -1
    assert case["formula_total"] == case["direct_total"] == -1


def test_golden_formula_pieces():
    A, B, C, D = blocks(SHIFT_ENDPOINT)
    Q = np.block([[C.T @ A, A.T @ D], [D.T @ A, D.T @ B]])
    assert np.array_equal(Q, [[1.0, -1.0], [-1.0, 2.0]])
    m_plus = signature(Q).m_plus
    ker_a = A.shape[0] - np.linalg.matrix_rank(A)
    assert (m_plus, ker_a) == (2, 0)
    assert 1 - m_plus - ker_a == -1


def test_golden_identities_all_hold():
    g = matrizant(constant_path(SHIFT_COEFFICIENT, SHIFT_TAU), steps=2048)
    rep = verify_identities(g)
    assert rep.ok, rep.table()
    assert len(rep.claims) == 12


@pytest.mark.parametrize("S", [1.3, 2.0, 2.9])
def test_rotation_iterates_grow_linearly(S):
    g = matrizant(constant_path(np.eye(2), S), steps=1024)
    for k in range(1, 7):
        expected = math.ceil(k * S / np.pi) - 1
        assert maslov(brake_iterate(g, k), L0).index == expected
    rep = verify_inequalities(g, 6)
    assert rep.ok, rep.table()


@pytest.mark.parametrize("seed,n", [(0, 1), (1, 2), (2, 1)])
def test_bott_formulas_on_random_paths(seed, n):
    g = _random_path(seed, n)
    for k in range(2, 6):
        rep = verify_bott(g, k)
        assert rep.ok, rep.table()


@pytest.mark.parametrize("seed,n", [(10, 1), (11, 2), (12, 3)])
def test_all_claims_on_random_paths(seed, n):
    rep = verify_all(_random_path(seed, n), kmax=4, seed=seed)
    assert rep.ok, rep.table()
    data = json.loads(json.dumps(rep.to_json()))
    assert data["seed"] == seed and data["ok"] is True


def test_hormander_claims_on_random_path():
    rep = verify_hormander(_random_path(21, 2))
    assert rep.ok and len(rep.claims) == 10


def test_inequality_kmax_limit():
    with pytest.raises(ValueError):
        verify_inequalities(_random_path(0, 1, steps=64), 9)


def test_concat_rejects_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        concat(_random_path(0, 1, steps=64), _random_path(0, 2, steps=64))


def test_concat_composes_endpoints():
    a, b = _random_path(0, 1, steps=128), _random_path(1, 1, steps=128)
    c = concat(a, b)
    assert np.allclose(c.end, b.end @ a.end)
    assert c.tau == pytest.approx(a.tau + b.tau)


def test_claim_and_report_rendering():
    rep = VerificationReport([Claim("equal", 1, 1), Claim("bound", 0, 2, "inequality")])
    assert not rep.ok
    assert [c.name for c in rep.failures] == ["bound"]
    table = rep.table()
    assert "FAIL" in table and "equal" in table
    assert rep.to_json()["claims"][1]["satisfied"] is False


def test_iterates_of_positive_paths_respect_l1_sign():
    g = matrizant(constant_path(np.diag([2.0, 0.5]), 3.0), steps=1024)
    assert maslov(g, L1).index >= 0
    assert maslov(g, L0).index >= 0
