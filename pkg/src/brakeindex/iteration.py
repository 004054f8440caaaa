"""Iterated and shifted symplectic paths, and checks of the index relations.

Every check evaluates its two sides by separate computations (crossing
counts on iterated paths against Theta indices, endpoint block formulas,
triple indices) and compares integers exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateCrossing, DimensionMismatch
from .index_engine import (
    L0,
    L0xL1,
    L1,
    L1xL0,
    PERIODIC,
    BoundarySpec,
    IndexReport,
    maslov,
    nullities,
    theta_spec,
    triple_index,
)
from .matrizant import SymplecticPath, brake_extend, concat_paths, matrizant, perturbed, reversed_path
from .symcore import DEFAULT_TOL, Tolerances, blocks, graph, signature, std_N, symplectic_inverse

RETRY_EPS = 1e-6


# ---------------------------------------------------------------------------
# path constructions


def concat(g1: SymplecticPath, g2: SymplecticPath) -> SymplecticPath:
    """``g1`` followed by ``t -> g2(t - tau1) g1(tau1)``."""
    if g1.n != g2.n:
        raise DimensionMismatch(f"cannot concatenate paths with n={g1.n} and n={g2.n}")
    if g2.times.size == 1:
        return g1
    tau1 = g1.tau
    times = np.concatenate([g1.times, tau1 + g2.times[1:]])
    mats = np.concatenate([g1.mats, g2.mats[1:] @ g1.end])
    source = None
    if g1.source is not None and g2.source is not None:
        source = concat_paths(g1.source.with_tau(tau1), g2.source.with_tau(g2.tau))
    return SymplecticPath(times, mats, source, g1.steps)


def _reversed_samples(g: SymplecticPath) -> np.ndarray:
    """Values ``g(S - t_i)`` on the sample times of ``g``."""
    S = g.tau
    if np.allclose(S - g.times[::-1], g.times, rtol=0, atol=1e-12 * max(1.0, S)):
        return g.mats[::-1]
    return np.array([g.at(S - t) for t in g.times])


def reflection_matrix(M: np.ndarray) -> np.ndarray:
    """``N M^{-1} N M``, the endpoint of the twofold brake iterate."""
    N = std_N(M.shape[0] // 2)
    return N @ symplectic_inverse(M) @ N @ M


def brake_iterate(g: SymplecticPath, k: int) -> SymplecticPath:
    """The ``k``-fold brake iteration of a path on ``[0, S]``.

    On ``[2jS, (2j+1)S]`` the iterate is ``g(t - 2jS) R^j`` and on
    ``[(2j+1)S, (2j+2)S]`` it is ``N g((2j+2)S - t) N R^(j+1)`` with
    ``R = N g(S)^{-1} N g(S)``.  The coefficient path is the brake
    extension of ``g``'s, repeated periodically.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if k == 1:
        return g
    S = g.tau
    N = std_N(g.n)
    R = reflection_matrix(g.end)
    rev = N @ _reversed_samples(g) @ N
    times = [g.times]
    mats = [g.mats]
    power = np.eye(2 * g.n)
    for seg in range(1, k):
        if seg % 2:
            power = power @ R
            block = rev @ power
        else:
            block = g.mats @ power
        times.append(seg * S + g.times[1:])
        mats.append(block[1:])
    source = brake_extend(g.source.with_tau(S)).with_tau(k * S) if g.source is not None else None
    return SymplecticPath(np.concatenate(times), np.concatenate(mats), source, g.steps)


def tilde_shift(g: SymplecticPath) -> SymplecticPath:
    """``t -> N g(S - t) g(S)^{-1} N`` on ``[0, S]``."""
    N = std_N(g.n)
    mats = N @ _reversed_samples(g) @ symplectic_inverse(g.end) @ N
    source = reversed_path(g.source.with_tau(g.tau)) if g.source is not None else None
    return SymplecticPath(g.times, mats, source, g.steps)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class Claim:
    name: str
    lhs: int | tuple
    rhs: int | tuple
    kind: str = "equality"

    @property
    def satisfied(self) -> bool:
        if self.kind == "equality":
            return self.lhs == self.rhs
        return bool(np.all(np.asarray(self.lhs) >= np.asarray(self.rhs)))

    def to_json(self) -> dict:
        def conv(v):
            return list(v) if isinstance(v, tuple) else int(v)

        return {"name": self.name, "lhs": conv(self.lhs), "rhs": conv(self.rhs), "kind": self.kind, "satisfied": self.satisfied}


@dataclass
class VerificationReport:
    claims: list = field(default_factory=list)
    seed: int | None = None
    descriptor: str = ""
    perturbed: bool = False

    @property
    def ok(self) -> bool:
        return all(c.satisfied for c in self.claims)

    @property
    def failures(self) -> list:
        return [c for c in self.claims if not c.satisfied]

    def extend(self, other: VerificationReport) -> None:
        self.claims.extend(other.claims)
        self.perturbed = self.perturbed or other.perturbed

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "descriptor": self.descriptor,
            "perturbed": self.perturbed,
            "ok": self.ok,
            "claims": [c.to_json() for c in self.claims],
        }

    def table(self) -> str:
        width = max([len(c.name) for c in self.claims] + [5])
        lines = [f"{'claim':<{width}}  {'kind':<10}  {'lhs':>10}  {'rhs':>10}  status"]
        for c in self.claims:
            status = "ok" if c.satisfied else "FAIL"
            lines.append(f"{c.name:<{width}}  {c.kind:<10}  {str(c.lhs):>10}  {str(c.rhs):>10}  {status}")
        return "\n".join(lines)


class _Indices:
    """Memoized index reports of a base path, its iterates and its shift."""

    def __init__(self, g: SymplecticPath, tol: Tolerances):
        self.g = g
        self.tol = tol
        self._paths: dict = {}
        self._reports: dict = {}

    def path(self, key):
        if key not in self._paths:
            if key == ("tilde", 1):
                self._paths[key] = tilde_shift(self.g)
            elif key[0] == "tilde":
                self._paths[key] = brake_iterate(self.path(("tilde", 1)), key[1])
            else:
                self._paths[key] = brake_iterate(self.g, key[1])
        return self._paths[key]

    def report(self, boundary: BoundarySpec, k: int = 1, which: str = "iter") -> IndexReport:
        key = (which, k, boundary.label)
        if key not in self._reports:
            self._reports[key] = maslov(self.path((which, k)), boundary, self.tol)
        return self._reports[key]

    def i(self, boundary, k=1, which="iter") -> int:
        return self.report(boundary, k, which).index

    def nu(self, boundary, k=1, which="iter") -> int:
        return self.report(boundary, k, which).nullity_at_end


def _m_plus(Q: np.ndarray, tol: Tolerances) -> int:
    scale = max(1.0, float(np.max(np.abs(Q))))
    return signature((Q + Q.T) / 2, tol.zero * scale).m_plus


def _with_retry(g: SymplecticPath, build: Callable[[SymplecticPath], VerificationReport], eps: float = RETRY_EPS) -> VerificationReport:
    """Run ``build``; on a degenerate crossing rerun with ``B +- eps I`` and merge."""
    try:
        return build(g)
    except DegenerateCrossing:
        if g.source is None:
            raise
    steps = g.steps or (g.times.size - 1)
    runs = []
    for sign in (1.0, -1.0):
        gp = matrizant(perturbed(g.source, sign * eps), steps=steps, tau=g.tau, initial=g.start)
        runs.append(build(gp))
    first, second = runs
    merged = []
    for a, b in zip(first.claims, second.claims):
        if a.satisfied and b.satisfied:
            merged.append(a)
        else:
            merged.append(a if not a.satisfied else b)
    return VerificationReport(merged, first.seed, first.descriptor, perturbed=True)


# ---------------------------------------------------------------------------
# verification suites


def _bott_claims(ix: _Indices, k: int) -> VerificationReport:
    thetas = [2 * np.pi * j / k for j in range(1, (k - 1) // 2 + 1)] if k % 2 else [
        2 * np.pi * j / k for j in range(1, k // 2)
    ]
    th_i = sum(ix.i(theta_spec(t), 2) for t in thetas)
    th_nu = sum(ix.nu(theta_spec(t), 2) for t in thetas)
    claims = []
    if k % 2:
        for name, boundary in (("L0", L0), ("L1", L1)):
            claims.append(Claim(f"bott k={k} i_{name}", ix.i(boundary, k), ix.i(boundary) + th_i))
            claims.append(Claim(f"bott k={k} nu_{name}", ix.nu(boundary, k), ix.nu(boundary) + th_nu))
    else:
        claims.append(Claim(f"bott k={k} i_L0", ix.i(L0, k), ix.i(L0) + ix.i(L0xL1) + th_i))
        claims.append(Claim(f"bott k={k} nu_L0", ix.nu(L0, k), ix.nu(L0) + ix.nu(L0xL1) + th_nu))
    return VerificationReport(claims)


def verify_bott(g: SymplecticPath, k: int, tol: Tolerances = DEFAULT_TOL) -> VerificationReport:
    """Check the Bott-type iteration formulas for the ``k``-th brake iterate.

    Odd ``k``: ``i_La(g^k) = i_La(g) + sum_{j=1}^{(k-1)/2} i_{w^j}(g^2)`` for
    ``a = 0, 1`` with ``w = exp(2 pi i / k)``, and the same for nullities.
    Even ``k``: ``i_L0(g^k) = i_L0(g) + i_L0xL1(g) + sum_{j=1}^{k/2-1} i_{w^j}(g^2)``.
    """
    return _with_retry(g, lambda h: _bott_claims(_Indices(h, tol), k))


def _identity_claims(ix: _Indices) -> VerificationReport:
    n = ix.g.n
    tol = ix.tol
    M = ix.g.end
    A, B, C, D = blocks(M)
    nul = nullities(M, tol=tol)
    kerA, kerC, kerD = nul["L1xL0"], nul["L1"], nul["L0xL1"]
    q_DB = _m_plus(D.T @ B, tol)
    q_L1L0 = _m_plus(np.block([[C.T @ A, C.T @ B], [B.T @ C, D.T @ B]]), tol)
    q_shift = _m_plus(np.block([[C.T @ A, A.T @ D], [D.T @ A, D.T @ B]]), tol)

    iL0, iL1, i01, i10 = ix.i(L0), ix.i(L1), ix.i(L0xL1), ix.i(L1xL0)
    nL0, nL1, n01, n10 = ix.nu(L0), ix.nu(L1), ix.nu(L0xL1), ix.nu(L1xL0)
    claims = [
        Claim("double periodic index", ix.i(PERIODIC, 2), iL0 + iL1 + n),
        Claim("double periodic nullity", ix.nu(PERIODIC, 2), nL0 + nL1),
        Claim("L1 from L0 endpoint formula", iL1 + nL1, iL0 + nL0 + q_L1L0 - n + kerC),
        Claim("L0 from L0xL1 endpoint formula", iL0 + nL0, i01 - q_DB),
        Claim("L0xL1 from L1 endpoint formula", i01, iL1 + nL1 + q_DB - q_L1L0 - kerC + n),
        Claim("L0xL1 dominates L1", i01, iL1 + nL1, "inequality"),
        Claim("L1xL0 minus L0xL1 bounded", n, abs(i10 - i01), "inequality"),
        Claim("L1xL0 minus L0xL1 index", i10 - i01, n - q_shift - kerA),
        Claim("L1xL0 minus L0xL1 index+nullity", (i10 + n10) - (i01 + n01), n - q_shift - kerD),
    ]
    d_i = ix.i(L0, 2, "tilde") - ix.i(L0, 2)
    d_in = (ix.i(L0, 2, "tilde") + ix.nu(L0, 2, "tilde")) - (ix.i(L0, 2) + ix.nu(L0, 2))
    claims += [
        Claim("shifted double L0 bounded", n, abs(d_i), "inequality"),
        Claim("shifted double L0 index", d_i, n - q_shift - kerA),
        Claim("shifted double L0 index+nullity", d_in, n - q_shift - kerD),
    ]
    return VerificationReport(claims)


def verify_identities(g: SymplecticPath, tol: Tolerances = DEFAULT_TOL) -> VerificationReport:
    """Check the endpoint identities relating the indices of ``g``, ``g^2`` and the shifted path."""
    return _with_retry(g, lambda h: _identity_claims(_Indices(h, tol)))


def _inequality_claims(ix: _Indices, kmax: int) -> VerificationReport:
    g = ix.g
    n = g.n
    claims = []
    for k in range(1, kmax + 1):
        for name, boundary in (("L0", L0), ("L1", L1)):
            rhs = k * ix.i(boundary) + sum(ix.nu(boundary, j) for j in range(1, k))
            claims.append(Claim(f"iterate growth k={k} {name}", ix.i(boundary, k), rhs, "inequality"))
        claims.append(
            Claim(f"iterate lower bound k={k}", ix.i(L0, k), k * (ix.i(L0) + ix.nu(L0)) - n, "inequality")
        )
    if kmax >= 2:
        base = ix.i(PERIODIC, 2) + ix.nu(PERIODIC, 2) - n
        for l in range(1, kmax // 2 + 1):
            rhs = ix.i(L0, 2) + (l - 1) * base
            claims.append(Claim(f"even iterate growth l={l}", ix.i(L0, 2 * l), rhs, "inequality"))
    if g.source is not None:
        Bs = g.source(g.times)
        b11 = np.linalg.eigvalsh(Bs[:, :n, :n]).min()
        b22 = np.linalg.eigvalsh(Bs[:, n:, n:]).min()
        if b22 > 0:
            claims.append(Claim("positive B22 gives nonnegative i_L0", ix.i(L0), 0, "inequality"))
        if b11 > 0:
            claims.append(Claim("positive B11 gives nonnegative i_L1", ix.i(L1), 0, "inequality"))
    return VerificationReport(claims)


def verify_inequalities(g: SymplecticPath, kmax: int, tol: Tolerances = DEFAULT_TOL) -> VerificationReport:
    """Check the iteration inequalities for iterates up to ``kmax`` (at most 8)."""
    if kmax > 8:
        raise ValueError("kmax is limited to 8")
    return _with_retry(g, lambda h: _inequality_claims(_Indices(h, tol), kmax))


HORMANDER_KINDS = (L0, L1, PERIODIC, L0xL1, L1xL0)


def _hormander_claims(ix: _Indices) -> VerificationReport:
    g, tol = ix.g, ix.tol
    n = g.n
    raws = {s.label: ix.report(s).raw for s in HORMANDER_KINDS}
    start = graph(g.start, "Graph(gamma(0))")
    end = graph(g.end, "Graph(gamma(tau))")
    claims = []
    for a, W1 in enumerate(HORMANDER_KINDS):
        for W2 in HORMANDER_KINDS[a + 1 :]:
            f1, f2 = W1.lagrangian(n), W2.lagrangian(n)
            s = triple_index(start, f1, f2, tol) - triple_index(end, f1, f2, tol)
            claims.append(Claim(f"hormander {W1.label}->{W2.label}", raws[W2.label] - raws[W1.label], s))
    return VerificationReport(claims)


def verify_hormander(g: SymplecticPath, tol: Tolerances = DEFAULT_TOL) -> VerificationReport:
    """Compare differences of raw Maslov indices with Hormander indices of the endpoints."""
    return _with_retry(g, lambda h: _hormander_claims(_Indices(h, tol)))


def verify_all(g: SymplecticPath, kmax: int = 6, tol: Tolerances = DEFAULT_TOL, seed=None, descriptor: str = "") -> VerificationReport:
    """Identities, Bott formulas for ``k = 2..kmax``, inequalities and Hormander consistency."""
    def build(h: SymplecticPath) -> VerificationReport:
        ix = _Indices(h, tol)
        rep = _identity_claims(ix)
        for k in range(2, kmax + 1):
            rep.extend(_bott_claims(ix, k))
        rep.extend(_inequality_claims(ix, min(kmax, 8)))
        rep.extend(_hormander_claims(ix))
        return rep

    report = _with_retry(g, build)
    report.seed = seed
    report.descriptor = descriptor
    return report
