from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from brakeindex.errors import DegenerateCrossing, MissingCoefficientPath, NotSymplectic
from brakeindex.index_engine import (
    CONVENTION_TAG,
    L0,
    L0xL1,
    L1,
    L1xL0,
    PERIODIC,
    BoundarySpec,
    general_spec,
    hormander,
    index_suite,
    maslov,
    nullities,
    theta_spec,
    triple_index,
    triple_index_bound,
)
from brakeindex.iteration import brake_iterate
from brakeindex.matrizant import CoefficientPath, SymplecticPath, constant_path, matrizant, sample_coefficient_path, shifted
from brakeindex.symcore import (
    alpha0,
    alpha1,
    alpha_tilde0,
    alpha_tilde1,
    graph,
    product,
    random_symplectic,
    signature,
    single_frame,
    std_J,
    transform,
    triple_form,
)

SHIFT_ENDPOINT = np.array([[1.0, -2.0], [1.0, -1.0]])


def _rotation(tau: float, steps: int = 2048) -> SymplecticPath:
    return matrizant(constant_path(np.eye(2), tau), steps=steps)


def _with_positive_q_block(B: CoefficientPath, margin: float = 0.5) -> CoefficientPath:
    n = B.n
    lift = np.zeros((2 * n, 2 * n))
    lift[n:, n:] = (np.max(np.linalg.norm(B(np.linspace(0, B.tau, 401)), 2, axis=(1, 2))) + margin) * np.eye(n)

    def fn(t, side):
        return B.fn(t, side) + lift

    return replace(B, fn=fn, kind="composite", coeffs=None)


def test_rotation_l0_three_half_turns():
    rep = maslov(_rotation(3 * np.pi / 2), L0)
    assert rep.index == 1 and rep.nullity_at_end == 0
    interior = [c for c in rep.crossings if 0 < c.time < 3 * np.pi / 2]
    assert len(interior) == 1
    assert interior[0].time == pytest.approx(np.pi, abs=1e-8)
    assert interior[0].dim == 1 and interior[0].form.as_list() == [1, 0, 0]
    assert rep.convention_tag == CONVENTION_TAG == "half-open-mplus"


def test_rotation_periodic_full_turn():
    rep = maslov(_rotation(2 * np.pi), PERIODIC)
    assert rep.index == 1 and rep.nullity_at_end == 2
    assert [c.contribution for c in rep.crossings] == [2, 0]


def test_rotation_eighth_turn_suite():
    suite = index_suite(_rotation(np.pi / 4))
    assert suite["L0xL1"].index == 0 and suite["L0xL1"].crossings == ()
    assert suite["L0"].index == 0 and suite["L1"].index == 0
    assert all(v == 0 for v in suite["nullities"].values())


def test_zero_coefficient_is_degenerate():
    with pytest.raises(DegenerateCrossing):
        index_suite(matrizant(constant_path(np.zeros((2, 2)), 1.0), steps=64))


def test_missing_source_rejected():
    g = _rotation(3 * np.pi / 2)
    bare = SymplecticPath(g.times, g.mats)
    with pytest.raises(MissingCoefficientPath):
        maslov(bare, L0)
    with pytest.raises(MissingCoefficientPath):
        index_suite(bare)


def test_theta_boundary_validation():
    with pytest.raises(ValueError):
        BoundarySpec("Theta", 2 * np.pi)
    with pytest.raises(ValueError):
        BoundarySpec("Sideways")


def test_nullities_examples():
    nul = nullities(np.eye(2))
    assert (nul["L0"], nul["L1"], nul["Periodic"], nul["L0xL1"]) == (1, 1, 2, 0)
    nul = nullities(SHIFT_ENDPOINT)
    assert (nul["L0"], nul["L1"], nul["Periodic"]) == (0, 0, 0)
    assert nullities(-np.eye(2), thetas=[np.pi])[theta_spec(np.pi).label] == 2
    with pytest.raises(NotSymplectic):
        nullities(np.diag([2.0, 1.0]))


def test_identity_double_periodic_on_seed_five():
    g = matrizant(sample_coefficient_path(5, 2, 2, 3.0), steps=1024)
    g2 = brake_iterate(g, 2)
    assert maslov(g2, PERIODIC).index == maslov(g, L0).index + maslov(g, L1).index + 2


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_graph_identity_triple_indices(n):
    G = graph(np.eye(2 * n))
    a01 = product(alpha0(n), alpha1(n))
    a10 = product(alpha1(n), alpha0(n))
    assert triple_index(G, a01, alpha_tilde0(n)) == n
    assert triple_index(G, alpha_tilde1(n), alpha_tilde0(n)) == n
    assert triple_index(G, a01, a10) == n


def test_hormander_examples():
    rng = np.random.default_rng(8)
    for n in (1, 2):
        lam = graph(random_symplectic(rng, n))
        assert hormander(lam, lam, alpha_tilde1(n), alpha_tilde0(n)) == 0
        M = random_symplectic(rng, n)
        Q = triple_form(graph(M), alpha_tilde1(n), alpha_tilde0(n))
        m_plus = signature(Q, 1e-9 * max(1.0, np.max(np.abs(Q)))).m_plus
        expected = n - m_plus - nullities(M)["L0"]
        assert hormander(graph(np.eye(2 * n)), graph(M), alpha_tilde1(n), alpha_tilde0(n)) == expected
    R = expm(std_J(1) * np.pi / 4)
    assert hormander(graph(np.eye(2)), graph(R), alpha_tilde1(1), alpha_tilde0(1)) == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_triple_index_bounds(n, seed):
    rng = np.random.default_rng(seed)
    frames = [graph(random_symplectic(rng, n)), alpha_tilde0(n), alpha_tilde1(n),
              product(alpha0(n), alpha1(n)), graph(np.eye(2 * n))]
    a, b, d = (frames[i] for i in rng.choice(len(frames), 3))
    value = triple_index(a, b, d)
    assert 0 <= value <= triple_index_bound(a, b, d)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 2))
def test_endpoint_nullity_matches_nullities(seed, n):
    g = matrizant(sample_coefficient_path(seed, n, 2, 3.0, tau=2.0), steps=1024)
    try:
        suite = index_suite(g)
    except DegenerateCrossing:
        return
    nul = suite["nullities"]
    for key in ("L0", "L1", "L0xL1", "L1xL0", "Periodic"):
        assert suite[key].nullity_at_end == nul[key]


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 2), st.floats(0.2, 0.8))
def test_additivity_under_splitting(seed, n, frac):
    B = sample_coefficient_path(seed, n, 2, 3.0, tau=2.0)
    g = matrizant(B, steps=2048)
    t_split = 2.0 * frac
    first = matrizant(B, steps=1024, tau=t_split)
    second = matrizant(shifted(B, t_split, 2.0 - t_split), steps=1024, initial=first.end)
    for W in (L0, L1, L0xL1, PERIODIC):
        try:
            whole, a, b = maslov(g, W), maslov(first, W), maslov(second, W)
        except DegenerateCrossing:
            continue
        if a.nullity_at_end:
            continue
        assert whole.raw == a.raw + b.raw


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_hormander_consistency(seed, n):
    g = matrizant(sample_coefficient_path(seed, n, 2, 3.0, tau=2.0), steps=1024)
    kinds = (L0, L1, PERIODIC)
    try:
        raws = {W.label: maslov(g, W).raw for W in kinds}
    except DegenerateCrossing:
        return
    for W1 in kinds:
        for W2 in kinds:
            f1, f2 = W1.lagrangian(n), W2.lagrangian(n)
            s = hormander(graph(np.eye(2 * n)), graph(g.end), f1, f2)
            assert raws[W2.label] - raws[W1.label] == s


def _sign_changes(values: np.ndarray) -> int:
    s = np.sign(values)
    s = s[s != 0]
    return int(np.sum(s[1:] != s[:-1]))


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 2))
def test_positive_q_block_counts_conjugate_points(seed, n):
    B = _with_positive_q_block(sample_coefficient_path(seed, n, 2, 2.0, tau=3.0))
    g = matrizant(B, steps=4096)
    rep = maslov(g, L0)
    assert rep.index >= 0
    upper_right = g.mats[:, :n, n:]
    dets = np.linalg.det(upper_right[1:-1])
    assert rep.index == _sign_changes(dets)


def test_positive_p_block_l1_nonnegative():
    B = sample_coefficient_path(4, 1, 2, 2.0, tau=3.0)
    lift = np.diag([3.0, 0.0])
    C = replace(B, fn=lambda t, side: B.fn(t, side) + lift, kind="composite", coeffs=None)
    assert maslov(matrizant(C, steps=2048), L1).index >= 0


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 2), st.floats(0.1, 0.9), st.sampled_from([0.7, 2.0, 3.5]))
def test_theta_index_time_shift_invariant(seed, n, t0, theta):
    B = sample_coefficient_path(seed, n, 2, 3.0)
    g = matrizant(B, steps=2048)
    h = matrizant(shifted(B, t0, 1.0), steps=2048)
    W = theta_spec(theta)
    try:
        a, b = maslov(g, W), maslov(h, W)
    except DegenerateCrossing:
        return
    assert a.index == b.index
    assert a.nullity_at_end == b.nullity_at_end


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 2))
def test_right_multiplication_moves_boundary(seed, n):
    rng = np.random.default_rng(seed)
    P = random_symplectic(rng, n, scale=0.5)
    g = matrizant(sample_coefficient_path(seed, n, 2, 3.0), steps=1024)
    b1 = single_frame(alpha0(n).span, "alpha0")
    b2 = alpha1(n)
    try:
        lhs = maslov(g.right_multiply(P), general_spec(product(b1, b2)))
        rhs = maslov(g, general_spec(product(transform(P, b1), b2)))
    except DegenerateCrossing:
        return
    assert lhs.index == rhs.index
    assert lhs.nullity_at_end == rhs.nullity_at_end


def test_crossings_isolated():
    g = _rotation(7.5, steps=4096)
    for W in (L0, L1, L0xL1, L1xL0):
        times = [c.time for c in maslov(g, W).crossings]
        assert np.all(np.diff(times) > 10 * 7.5 / 4096)
