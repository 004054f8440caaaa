"""Closed-form reference cases shared by the ``selftest`` command and the test suite."""
from __future__ import annotations

import numpy as np

from .index_engine import L0, nullities, triple_index
from .iteration import _Indices
from .matrizant import constant_path, matrizant
from .symcore import (
    DEFAULT_TOL,
    alpha0,
    alpha1,
    alpha_tilde0,
    alpha_tilde1,
    blocks,
    graph,
    product,
    signature,
    std_J,
)
from .variational import FourierVector, pi_operator

SHIFT_ENDPOINT = np.array([[1.0, -2.0], [1.0, -1.0]])
SHIFT_COEFFICIENT = np.array([[1.0, -1.0], [-1.0, 2.0]])
SHIFT_TAU = np.pi / 2


def shift_endpoint_case(steps: int = 2048) -> dict:
    """Change of the L0 index of the double iterate under the half-period shift.

    The endpoint ``[[1, -2], [1, -1]]`` is realized as the matrizant of the
    constant coefficient ``[[1, -1], [-1, 2]]`` over ``[0, pi/2]``.  The
    change is computed from endpoint blocks and by direct crossing counts on
    the double iterate and its shifted counterpart.
    """
    M = SHIFT_ENDPOINT
    A, B, C, D = blocks(M)
    n = 1
    Q = np.block([[C.T @ A, A.T @ D], [D.T @ A, D.T @ B]])
    m_plus = signature(Q).m_plus
    nul = nullities(M)
    formula_index = n - m_plus - nul["L1xL0"]
    formula_total = n - m_plus - nul["L0xL1"]

    g = matrizant(constant_path(SHIFT_COEFFICIENT, SHIFT_TAU), steps=steps)
    ix = _Indices(g, DEFAULT_TOL)
    direct_index = ix.i(L0, 2, "tilde") - ix.i(L0, 2)
    direct_total = (ix.i(L0, 2, "tilde") + ix.nu(L0, 2, "tilde")) - (ix.i(L0, 2) + ix.nu(L0, 2))
    return {
        "endpoint_error": float(np.max(np.abs(g.end - M))),
        "m_plus": int(m_plus),
        "formula_index": int(formula_index),
        "formula_total": int(formula_total),
        "direct_index": int(direct_index),
        "direct_total": int(direct_total),
    }


def graph_identity_triples(n: int) -> dict:
    """Triple indices of ``Graph(I)`` against the standard brake Lagrangians."""
    G = graph(np.eye(2 * n))
    a01 = product(alpha0(n), alpha1(n))
    a10 = product(alpha1(n), alpha0(n))
    return {
        "graph_a0xa1_at0": triple_index(G, a01, alpha_tilde0(n)),
        "graph_at1_at0": triple_index(G, alpha_tilde1(n), alpha_tilde0(n)),
        "graph_a0xa1_a1xa0": triple_index(G, a01, a10),
    }


def primitive_mode_errors(jmax: int = 8, T: float = 2 * np.pi) -> list[dict]:
    """Action of the zero-mean primitive on ``sin(jt) e_1 + cos(jt) e_2`` for ``j <= jmax``.

    Each entry records the maximal coefficient deviation from
    ``(1/j)(-cos(jt) e_1 + sin(jt) e_2)`` and from ``J Pi u = -u / j``.
    """
    J = std_J(1)
    out = []
    for j in range(1, jmax + 1):
        sin = np.zeros((j, 2))
        cos = np.zeros((j, 2))
        sin[j - 1, 0] = 1.0
        cos[j - 1, 1] = 1.0
        u = FourierVector(1, T, sin, cos)
        pu = pi_operator(u)
        exp_sin = np.zeros((j, 2))
        exp_cos = np.zeros((j, 2))
        exp_sin[j - 1, 1] = 1.0 / j
        exp_cos[j - 1, 0] = -1.0 / j
        err_pi = max(np.max(np.abs(pu.sin - exp_sin)), np.max(np.abs(pu.cos - exp_cos)))
        jpu = pu.apply(J)
        err_eig = max(np.max(np.abs(jpu.sin + u.sin / j)), np.max(np.abs(jpu.cos + u.cos / j)))
        out.append({"j": j, "primitive_error": float(err_pi), "eigen_error": float(err_eig)})
    return out
