"""Maslov-type indices of symplectic paths by crossing forms.

For a boundary Lagrangian ``W`` of the doubled space, the crossings of a
path ``gamma`` are the instants where ``Graph(gamma(t))`` meets ``W``.  With
``F`` an orthonormal frame of ``W``, the vector ``(x, gamma(t) x)`` lies in
``W`` exactly when ``K(t) x = 0`` for ``K(t) = F^H Omega^T [I; gamma(t)]``,
so crossings are located as zeros of the smallest singular value of ``K``.

At a crossing the form ``x -> <B(t) gamma(t) x, gamma(t) x>`` on the kernel
decides the contribution: ``m+`` at ``t = 0``, the signature at interior
instants and ``-m-`` at ``t = tau``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateCrossing, MissingCoefficientPath, NotSymplectic
from .matrizant import SymplecticPath
from .symcore import (
    DEFAULT_TOL,
    DOUBLED,
    LagrangianFrame,
    SignatureTriple,
    Tolerances,
    alpha0,
    alpha1,
    blocks,
    check_symplectic,
    graph,
    graph_scalar,
    intersection_dim,
    omega_matrix,
    product,
    signature,
    subspace_intersection,
    triple_form,
)

CONVENTION_TAG = "half-open-mplus"
# normalized smallest singular value below which a refined minimum is a crossing
CROSSING_TOL = 1e-6
# interior crossings this close (relative to tau) to an endpoint with kernel merge into it
MERGE_WINDOW = 1e-7

KINDS = ("L0", "L1", "L0xL1", "L1xL0", "Periodic", "Theta", "General")


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary condition of a Maslov-type index.

    ``kind`` is one of ``L0, L1, L0xL1, L1xL0, Periodic, Theta, General``;
    ``theta`` is required for ``Theta`` and ``frame`` for ``General``.
    """

    kind: str
    theta: float | None = None
    frame: LagrangianFrame | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "Theta":
            if self.theta is None:
                raise ValueError("Theta boundary needs an angle")
            r = np.mod(self.theta, 2 * np.pi)
            if min(r, 2 * np.pi - r) < 1e-12:
                raise ValueError("Theta boundary excludes multiples of 2 pi")
        if self.kind == "General" and self.frame is None:
            raise ValueError("General boundary needs a Lagrangian frame")

    @property
    def label(self) -> str:
        if self.kind == "Theta":
            return f"Theta({self.theta:.12g})"
        if self.kind == "General":
            return f"General({self.frame.label})"
        return self.kind

    def lagrangian(self, n: int) -> LagrangianFrame:
        """The Lagrangian subspace of the doubled space encoding the boundary."""
        if self.kind == "L0":
            return product(alpha0(n), alpha0(n))
        if self.kind == "L1":
            return product(alpha1(n), alpha1(n))
        if self.kind == "L0xL1":
            return product(alpha0(n), alpha1(n))
        if self.kind == "L1xL0":
            return product(alpha1(n), alpha0(n))
        if self.kind == "Periodic":
            return graph(np.eye(2 * n), "Graph(I)")
        if self.kind == "Theta":
            return graph_scalar(n, np.exp(1j * self.theta))
        if self.frame.space != DOUBLED or self.frame.ambient_dim != 4 * n:
            raise ValueError("General boundary frame must live in the doubled space of matching size")
        return self.frame

    def shift(self, n: int) -> int:
        """Amount subtracted from the raw Maslov index."""
        return n if self.kind in ("L0", "L1", "Periodic") else 0


L0 = BoundarySpec("L0")
L1 = BoundarySpec("L1")
L0xL1 = BoundarySpec("L0xL1")
L1xL0 = BoundarySpec("L1xL0")
PERIODIC = BoundarySpec("Periodic")


def theta_spec(theta: float) -> BoundarySpec:
    return BoundarySpec("Theta", float(theta))


def general_spec(frame: LagrangianFrame) -> BoundarySpec:
    return BoundarySpec("General", frame=frame)


@dataclass(frozen=True)
class Crossing:
    time: float
    dim: int
    form: SignatureTriple
    contribution: int

    def to_json(self) -> dict:
        return {"t": float(self.time), "dim": int(self.dim), "sig": self.form.as_list(), "contribution": int(self.contribution)}


@dataclass(frozen=True)
class IndexReport:
    """Index, endpoint nullity and crossings of one path against one boundary."""

    boundary: str
    index: int
    nullity_at_end: int
    crossings: tuple = ()
    raw: int = 0
    convention_tag: str = CONVENTION_TAG

    @property
    def index_plus_nullity(self) -> int:
        return self.index + self.nullity_at_end

    def to_json(self) -> dict:
        return {
            "boundary": self.boundary,
            "index": int(self.index),
            "nullity": int(self.nullity_at_end),
            "crossings": [c.to_json() for c in self.crossings],
            "convention": self.convention_tag,
        }


# ---------------------------------------------------------------------------
# nullities


def _kernel_dim(A: np.ndarray, scale: float, rank_tol: float) -> int:
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s <= rank_tol * scale))


def nullities(
    M: np.ndarray, thetas=(), tol: Tolerances = DEFAULT_TOL
) -> dict[str, int]:
    """Endpoint nullities of a symplectic matrix ``M = [[A, B], [C, D]]``.

    Returns a mapping with keys ``L0`` (ker B), ``L1`` (ker C), ``L0xL1``
    (ker D), ``L1xL0`` (ker A), ``Periodic`` (ker(M - I)) and one
    ``Theta(...)`` key per requested angle (complex kernel of ``M - e^{i theta} I``).
    """
    M = np.asarray(M, dtype=float)
    scale = max(1.0, float(np.linalg.norm(M, 2)))
    resid = check_symplectic(M)
    if resid > 1e-8 * scale**2:
        raise NotSymplectic(f"symplectic residual {resid:.3e}")
    A, B, C, D = blocks(M)
    out = {
        "L0": _kernel_dim(B, scale, tol.rank),
        "L1": _kernel_dim(C, scale, tol.rank),
        "L0xL1": _kernel_dim(D, scale, tol.rank),
        "L1xL0": _kernel_dim(A, scale, tol.rank),
        "Periodic": _kernel_dim(M - np.eye(M.shape[0]), scale, tol.rank),
    }
    for th in thetas:
        boundary = theta_spec(th)
        out[boundary.label] = _kernel_dim(M - np.exp(1j * th) * np.eye(M.shape[0]), scale, tol.rank)
    return out


# ---------------------------------------------------------------------------
# crossing scan


class _Scanner:
    """Normalized singular values of ``K(t)`` for one path and one boundary."""

    def __init__(self, path: SymplecticPath, frame: LagrangianFrame):
        m = 2 * path.n
        F = frame.orthonormal()
        P = F.conj().T @ omega_matrix(2 * m, DOUBLED).T
        self.P1 = P[:, :m]
        self.P2 = P[:, m:]
        self.path = path

    def values(self, mats: np.ndarray) -> np.ndarray:
        K = self.P1[None] + self.P2[None] @ mats
        s = np.linalg.svd(K, compute_uv=False)
        scale = np.sqrt(1.0 + np.sum(np.abs(mats) ** 2, axis=(1, 2)))
        return s / scale[:, None]

    def kernel(self, M: np.ndarray, thresh: float) -> np.ndarray:
        K = self.P1 + self.P2 @ M
        _, s, Vh = np.linalg.svd(K)
        scale = np.sqrt(1.0 + np.sum(np.abs(M) ** 2))
        return Vh.conj().T[:, s / scale <= thresh]

    def dmin(self, t: float) -> float:
        return float(self.values(self.path.at(t)[None])[0, -1])


def _form(path: SymplecticPath, t: float, M: np.ndarray, X: np.ndarray, side: int, zero_tol: float) -> SignatureTriple:
    if path.source is None:
        raise MissingCoefficientPath("a crossing form needs the coefficient path of the symplectic path")
    Bt = path.source(t, side)
    V = M @ X
    Q = V.conj().T @ Bt @ V
    scale = max(1.0, float(np.linalg.norm(Bt, 2))) * max(1.0, float(np.linalg.norm(V, 2)) ** 2)
    sig = signature((Q + Q.conj().T) / 2, zero_tol * scale)
    if sig.m_zero:
        raise DegenerateCrossing(f"degenerate crossing form at t={t:.12g}", time=t)
    return sig


def _candidates(d: np.ndarray) -> list[int]:
    """Sample indices that bracket a possible zero of the sampled indicator."""
    N = d.size - 1
    out = []
    for i in range(N + 1):
        left = d[i - 1] if i > 0 else np.inf
        right = d[i + 1] if i < N else np.inf
        if not (d[i] < left and d[i] <= right):
            continue
        spread = max(abs(d[i] - left) if i > 0 else 0.0, abs(right - d[i]) if i < N else 0.0)
        if d[i] <= 2.0 * spread + CROSSING_TOL:
            out.append(i)
    return out


def maslov(path: SymplecticPath, W: BoundarySpec, tol: Tolerances = DEFAULT_TOL) -> IndexReport:
    """Maslov-type index of ``Graph(path)`` against the boundary ``W``.

    The raw count adds ``m+`` of the crossing form at ``t = 0``, the
    signature at interior crossings (``m+`` of the right-limit form minus
    ``m-`` of the left-limit form when the coefficients jump there) and
    ``-m-`` at ``t = tau``; ``n`` is subtracted for ``L0``, ``L1`` and
    ``Periodic`` boundaries.

    Raises
    ------
    DegenerateCrossing
        If a crossing form has a kernel.
    MissingCoefficientPath
        If a crossing is found but the path has no coefficient path.
    """
    n = path.n
    shift = W.shift(n)
    if path.times.size == 1:
        return IndexReport(W.label, -shift, 0, (), 0)
    scan = _Scanner(path, W.lagrangian(n))
    times = path.times
    tau = path.tau
    sv = scan.values(path.mats)
    d = sv[:, -1]
    crossings: list[Crossing] = []

    X0 = scan.kernel(path.mats[0], tol.rank)
    if X0.shape[1]:
        sig = _form(path, 0.0, path.mats[0], X0, 1, tol.zero)
        crossings.append(Crossing(0.0, X0.shape[1], sig, sig.m_plus))
    Xe = scan.kernel(path.mats[-1], tol.rank)
    nullity_end = Xe.shape[1]

    window = MERGE_WINDOW * tau
    interior = []
    for i in _candidates(d):
        lo = times[max(i - 1, 0)]
        hi = times[min(i + 1, times.size - 1)]
        res = minimize_scalar(
            lambda t: scan.dmin(t) ** 2,
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": max(1e-10 * tau, 1e-15)},
        )
        t_star = float(res.x)
        d_star = float(np.sqrt(res.fun))
        if d[i] < d_star:
            t_star, d_star = float(times[i]), float(d[i])
        if d_star > CROSSING_TOL:
            continue
        if t_star <= window and X0.shape[1]:
            continue
        if t_star >= tau - window and nullity_end:
            continue
        if t_star <= 0.0 or t_star >= tau:
            continue
        if any(abs(t_star - s) <= 10 * window for s in interior):
            continue
        interior.append(t_star)

    for t_star in sorted(interior):
        M = path.at(t_star)
        X = scan.kernel(M, CROSSING_TOL)
        right = _form(path, t_star, M, X, 1, tol.zero)
        left = _form(path, t_star, M, X, -1, tol.zero)
        crossings.append(Crossing(t_star, X.shape[1], right, right.m_plus - left.m_minus))

    if nullity_end:
        sig = _form(path, tau, path.mats[-1], Xe, -1, tol.zero)
        crossings.append(Crossing(tau, nullity_end, sig, -sig.m_minus))

    raw = int(sum(c.contribution for c in crossings))
    return IndexReport(W.label, raw - shift, nullity_end, tuple(crossings), raw)


def index_suite(path: SymplecticPath, thetas=(), tol: Tolerances = DEFAULT_TOL) -> dict:
    """Indices for the five standard boundaries (plus requested angles) and endpoint nullities."""
    if path.source is None:
        raise MissingCoefficientPath("index_suite needs a path with a coefficient path")
    specs = [L0, L1, L0xL1, L1xL0, PERIODIC] + [theta_spec(t) for t in thetas]
    out = {s.label: maslov(path, s, tol) for s in specs}
    out["nullities"] = nullities(path.end, thetas, tol)
    return out


def suite_to_json(suite: dict) -> dict:
    return {k: (v if k == "nullities" else v.to_json()) for k, v in suite.items()}


# ---------------------------------------------------------------------------
# triple and Hormander indices


def triple_index(
    alpha: LagrangianFrame, beta: LagrangianFrame, delta: LagrangianFrame, tol: Tolerances = DEFAULT_TOL
) -> int:
    """``m+(Q(alpha, beta; delta)) + dim(alpha & delta) - dim(alpha & beta & delta)``."""
    Q = triple_form(alpha, beta, delta, tol.rank)
    m_plus = signature(Q, tol.zero * max(1.0, float(np.max(np.abs(Q)))) if Q.size else tol.zero).m_plus
    k_ad, _ = intersection_dim(alpha, delta, tol.rank)
    k_ab, basis_ab = intersection_dim(alpha, beta, tol.rank)
    k_abd = subspace_intersection(basis_ab, delta.span, tol.rank).shape[1] if k_ab else 0
    return int(m_plus + k_ad - k_abd)


def triple_index_bound(
    alpha: LagrangianFrame, beta: LagrangianFrame, delta: LagrangianFrame, tol: Tolerances = DEFAULT_TOL
) -> int:
    """Upper bound ``2n - dim(alpha & beta) - dim(beta & delta) + dim(alpha & beta & delta)``."""
    n2 = alpha.span.shape[1]
    ab = subspace_intersection(alpha.span, beta.span, tol.rank)
    bd = subspace_intersection(beta.span, delta.span, tol.rank)
    abd = subspace_intersection(ab, delta.span, tol.rank) if ab.shape[1] else ab
    return n2 - ab.shape[1] - bd.shape[1] + abd.shape[1]


def hormander(
    lam1: LagrangianFrame,
    lam2: LagrangianFrame,
    mu1: LagrangianFrame,
    mu2: LagrangianFrame,
    tol: Tolerances = DEFAULT_TOL,
) -> int:
    """``s(lam1, lam2; mu1, mu2) = i(lam1, mu1, mu2) - i(lam2, mu1, mu2)``."""
    return triple_index(lam1, mu1, mu2, tol) - triple_index(lam2, mu1, mu2, tol)
