"""Finite-dimensional shadows of the dual variational setting.

Contents: Fenchel conjugates, the zero-mean primitive on truncated Fourier
series, the Galerkin matrix of the dual second variation, conjugate points
on the half period, the convexifying shift and the relative Morse index of
a family ``A - sB``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DBlockNotPositive, DegenerateEndpoint, NoConvergence, NotPositiveDefinite
from .index_engine import L0, maslov
from .matrizant import CoefficientPath, matrizant
from .symcore import DEFAULT_TOL, SignatureTriple, Tolerances, hermitian_eigvalsh, signature, std_J


# ---------------------------------------------------------------------------
# Fenchel conjugate


@dataclass(frozen=True)
class ConvexMap:
    """Strictly convex function with gradient and Hessian."""

    dim: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    note: str = ""


def quadratic_map(dim: int) -> ConvexMap:
    """``x -> |x|^2 / 2``."""
    return ConvexMap(dim, lambda x: 0.5 * float(x @ x), lambda x: np.array(x, float), lambda x: np.eye(dim), "quadratic")


def quartic_map(dim: int) -> ConvexMap:
    """``x -> |x|^4 / 4``; its Hessian vanishes at the origin."""

    def hess(x):
        x = np.asarray(x, float)
        return float(x @ x) * np.eye(dim) + 2.0 * np.outer(x, x)

    return ConvexMap(
        dim,
        lambda x: 0.25 * float(x @ x) ** 2,
        lambda x: float(x @ x) * np.asarray(x, float),
        hess,
        "quartic, singular Hessian at 0",
    )


def fenchel(F: ConvexMap, y, tol: float = 1e-12, max_iter: int = 100) -> tuple[float, np.ndarray]:
    """Conjugate value ``F*(y) = sup_x (x . y - F(x))`` and its maximizer.

    Minimizes ``F(x) - x . y`` by Newton's method from the origin with step
    halving.  Where the Hessian is singular a Levenberg-Marquardt shift
    proportional to the gradient residual is added.

    Raises
    ------
    NoConvergence
        If the stationarity residual is not below ``tol`` after ``max_iter`` steps.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x = np.zeros(F.dim)

    def phi(z):
        return F.value(z) - float(z @ y)

    target = tol * max(1.0, float(np.linalg.norm(y)))
    f = phi(x)
    for _ in range(max_iter):
        g = F.gradient(x) - y
        gnorm = float(np.linalg.norm(g))
        if gnorm <= target:
            return float(x @ y) - F.value(x), x
        H = F.hessian(x)
        ev_min = float(np.linalg.eigvalsh(H).min())
        shift = gnorm if ev_min <= 1e-8 * max(1.0, gnorm) else 0.0
        step = np.linalg.solve(H + shift * np.eye(F.dim), g)
        alpha = 1.0
        for _ in range(60):
            trial = x - alpha * step
            ft = phi(trial)
            if ft <= f or np.linalg.norm(F.gradient(trial) - y) < gnorm:
                break
            alpha *= 0.5
        x, f = trial, ft
    g = F.gradient(x) - y
    if np.linalg.norm(g) <= target:
        return float(x @ y) - F.value(x), x
    raise NoConvergence(f"fenchel: residual {np.linalg.norm(g):.3e} after {max_iter} iterations")


# ---------------------------------------------------------------------------
# truncated Fourier vectors


@dataclass(frozen=True)
class FourierVector:
    """Zero-mean trigonometric polynomial on ``[-T/2, T/2]`` with values in R^{2n}.

    ``sin[j-1]`` and ``cos[j-1]`` hold the coefficient vectors of
    ``sin(w_j t)`` and ``cos(w_j t)``, ``w_j = 2 pi j / T``.  Brake-symmetric
    vectors (``u(-t) = N u(t)``) have sine terms only on the first n
    components and cosine terms only on the last n.
    """

    n: int
    T: float
    sin: np.ndarray
    cos: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sin", np.asarray(self.sin, dtype=float).reshape(-1, 2 * self.n))
        object.__setattr__(self, "cos", np.asarray(self.cos, dtype=float).reshape(-1, 2 * self.n))

    @classmethod
    def brake(cls, T: float, p_sin, q_cos) -> FourierVector:
        """Brake-symmetric vector from ``(J, n)`` arrays of p-sine and q-cosine coefficients."""
        p_sin = np.atleast_2d(np.asarray(p_sin, float))
        q_cos = np.atleast_2d(np.asarray(q_cos, float))
        modes, n = p_sin.shape
        z = np.zeros((modes, n))
        return cls(n, T, np.hstack([p_sin, z]), np.hstack([z, q_cos]))

    @property
    def modes(self) -> int:
        return self.sin.shape[0]

    @property
    def freqs(self) -> np.ndarray:
        return 2 * np.pi * np.arange(1, self.modes + 1) / self.T

    def is_brake_symmetric(self, tol: float = 0.0) -> bool:
        n = self.n
        return bool(np.all(np.abs(self.sin[:, n:]) <= tol) and np.all(np.abs(self.cos[:, :n]) <= tol))

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, float))
        arg = np.outer(t, self.freqs)
        return np.sin(arg) @ self.sin + np.cos(arg) @ self.cos

    def derivative(self) -> FourierVector:
        w = self.freqs[:, None]
        return FourierVector(self.n, self.T, -w * self.cos, w * self.sin)

    def apply(self, M: np.ndarray) -> FourierVector:
        """Pointwise product with a constant matrix."""
        return FourierVector(self.n, self.T, self.sin @ M.T, self.cos @ M.T)

    def inner(self, other: FourierVector) -> float:
        """``L^2`` pairing over one period."""
        return 0.5 * self.T * float(np.sum(self.sin * other.sin) + np.sum(self.cos * other.cos))

    def __add__(self, other: FourierVector) -> FourierVector:
        return FourierVector(self.n, self.T, self.sin + other.sin, self.cos + other.cos)

    def __mul__(self, c: float) -> FourierVector:
        return FourierVector(self.n, self.T, c * self.sin, c * self.cos)

    __rmul__ = __mul__


def pi_operator(u: FourierVector) -> FourierVector:
    """Zero-mean primitive: ``d/dt pi_operator(u) = u``."""
    w = u.freqs[:, None]
    return FourierVector(u.n, u.T, u.cos / w, -u.sin / w)


# ---------------------------------------------------------------------------
# Galerkin matrix of the dual second variation


@dataclass(frozen=True)
class GalerkinForm:
    """Matrix of the dual quadratic form on the truncated brake basis.

    Basis ordering: for each mode ``j`` the ``n`` vectors ``sin(w_j t) e_k``
    followed by the ``n`` vectors ``cos(w_j t) e_{n+k}``.
    """

    matrix: np.ndarray = field(repr=False)
    modes: int
    quad_order: int
    panels: int
    signature: SignatureTriple

    @property
    def morse_index(self) -> int:
        return self.signature.m_minus

    def to_json(self) -> dict:
        sig = self.signature
        ev = np.asarray(sig.eigenvalues)
        return {
            "modes": self.modes,
            "quad_order": self.quad_order,
            "panels": self.panels,
            "dimension": int(self.matrix.shape[0]),
            "m_plus": sig.m_plus,
            "m_zero": sig.m_zero,
            "m_minus": sig.m_minus,
            "lowest_eigenvalues": [float(e) for e in ev[:4]],
        }


def _lam_matrix(n: int, lam: float) -> np.ndarray:
    return np.diag(np.concatenate([np.full(n, float(lam)), np.zeros(n)]))


def dual_form(
    B: CoefficientPath,
    T: float,
    lam: float = 0.0,
    modes: int = 64,
    quad_order: int = 4,
    panels: int = 256,
    tol: Tolerances = DEFAULT_TOL,
) -> GalerkinForm:
    """Assemble ``q(u, u) = 1/2 int [(-J Pi u + J L J Pi^2 u, u) + ((B + L)^{-1} u, u)] dt``.

    The integral runs over ``[-T/2, T/2]`` with ``L = diag(lam I, 0)``.  The
    primitive terms are exact per mode; the inverse-coefficient term uses
    composite Gauss-Legendre quadrature on ``[0, T/2]`` (the integrand is
    even for brake-symmetric ``B`` and brake-symmetric ``u``).

    Raises
    ------
    NotPositiveDefinite
        If ``B(t) + L`` is not positive definite at a quadrature node.
    """
    n = B.n
    dim = 2 * n * modes
    w = 2 * np.pi * np.arange(1, modes + 1) / T
    Q = np.zeros((dim, dim))
    for j in range(modes):
        base = 2 * n * j
        for k in range(n):
            a, b = base + k, base + n + k
            Q[a, b] = Q[b, a] = T / (4 * w[j])
            Q[b, b] += lam * T / (4 * w[j] ** 2)

    x, wts = np.polynomial.legendre.leggauss(quad_order)
    edges = np.linspace(0.0, T / 2, panels + 1)
    mid = (edges[:-1] + edges[1:]) / 2
    half = (edges[1:] - edges[:-1]) / 2
    nodes = (mid[:, None] + half[:, None] * x[None]).ravel()
    weights = (half[:, None] * wts[None]).ravel()

    Bl = B(nodes) + _lam_matrix(n, lam)[None]
    try:
        L = np.linalg.cholesky(Bl)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("B(t) + Lambda is not positive definite on the quadrature nodes") from exc
    eye = np.broadcast_to(np.eye(2 * n), Bl.shape)
    Linv = np.linalg.solve(L, eye)
    C = np.swapaxes(Linv, 1, 2) @ Linv

    arg = np.outer(nodes, w)
    Phi = np.zeros((nodes.size, 2 * n, dim))
    for k in range(n):
        Phi[:, k, k::2 * n] = np.sin(arg)
        Phi[:, n + k, n + k :: 2 * n] = np.cos(arg)
    Q += np.einsum("mid,mij,mje->de", Phi, weights[:, None, None] * C, Phi, optimize=True)
    Q = (Q + Q.T) / 2
    scale = max(1.0, float(np.max(np.abs(Q))))
    return GalerkinForm(Q, modes, quad_order, panels, signature(Q, tol.zero * scale))


def stabilized_morse_index(
    B: CoefficientPath, T: float, lam: float = 0.0, modes: int = 64, **kw
) -> tuple[int, int]:
    """Morse index of the dual form at ``modes`` and at ``2 * modes``."""
    return (
        dual_form(B, T, lam, modes, **kw).morse_index,
        dual_form(B, T, lam, 2 * modes, **kw).morse_index,
    )


# ---------------------------------------------------------------------------
# conjugate points and convexification


@dataclass(frozen=True)
class ConjugatePoints:
    points: tuple
    total: int


def conjugate_points(
    B: CoefficientPath, S: float, steps: int = 4096, tol: Tolerances = DEFAULT_TOL
) -> ConjugatePoints:
    """Interior instants ``0 < s < S`` where ``gamma(s) L0`` meets ``L0``, with multiplicities."""
    n = B.n
    g = matrizant(B, steps=steps, tau=S)
    B22 = B(g.times)[:, n:, n:]
    if np.linalg.eigvalsh(B22).min() <= 0:
        raise NotPositiveDefinite("conjugate point count needs B22 positive definite")
    rep = maslov(g, L0, tol)
    pts = tuple((c.time, c.dim) for c in rep.crossings if 0.0 < c.time < S)
    return ConjugatePoints(pts, int(sum(d for _, d in pts)))


def convexifying_lambda(B: CoefficientPath, samples: int = 1000, margin: float = 1.0) -> float:
    """Smallest sampled shift making ``B(t) + diag(lam I, 0)`` positive definite, plus ``margin``.

    With ``B = [[A, C^T], [C, D]]`` this is the largest eigenvalue of
    ``C^T D^{-1} C - A`` over the samples.

    Raises
    ------
    DBlockNotPositive
        If ``D`` fails to be positive definite at a sample.
    """
    n = B.n
    t = np.linspace(0.0, B.tau, samples)
    Bs = B(t)
    A, C, D = Bs[:, :n, :n], Bs[:, n:, :n], Bs[:, n:, n:]
    if np.linalg.eigvalsh(D).min() <= 0:
        raise DBlockNotPositive("D block of the coefficient path is not positive definite")
    S = np.swapaxes(C, 1, 2) @ np.linalg.solve(D, C) - A
    S = (S + np.swapaxes(S, 1, 2)) / 2
    lam = float(np.linalg.eigvalsh(S).max()) + margin
    if np.linalg.eigvalsh(Bs + _lam_matrix(n, lam)[None]).min() <= 0:
        raise NotPositiveDefinite("convexifying shift failed its positivity check")
    return lam


# ---------------------------------------------------------------------------
# relative Morse index


@dataclass(frozen=True)
class RelativeMorse:
    index: int
    s: np.ndarray = field(repr=False)
    tracks: np.ndarray = field(repr=False)

    @property
    def max_uphill(self) -> float:
        """Largest increase of any track between consecutive grid points."""
        return float(max(0.0, np.max(np.diff(self.tracks, axis=0)))) if self.tracks.shape[0] > 1 else 0.0


def _is_degenerate(M: np.ndarray, zero_tol: float) -> bool:
    ev = np.linalg.eigvalsh(M)
    return bool(np.min(np.abs(ev)) <= zero_tol * max(1.0, float(np.max(np.abs(ev)))))


def relative_morse(A, B, grid: int = 200, zero_tol: float = DEFAULT_TOL.zero, max_refine: int = 6) -> RelativeMorse:
    """Relative Morse index of ``A - sB`` between ``s = 0`` and ``s = 1``.

    Eigenvalues are tracked in sorted order; consecutive values of a track
    must lie within the Weyl radius ``ds * ||B||``, otherwise the grid is
    doubled.  The index counts track transitions from nonnegative to
    negative minus transitions back.

    Raises
    ------
    DegenerateEndpoint
        If ``A`` or ``A - B`` is singular.
    """
    A = np.atleast_2d(np.asarray(A, float))
    B = np.atleast_2d(np.asarray(B, float))
    if _is_degenerate(A, zero_tol) or _is_degenerate(A - B, zero_tol):
        raise DegenerateEndpoint("A or A - B is singular")
    radius_B = float(np.linalg.norm(B, 2))
    for _ in range(max_refine + 1):
        s = np.linspace(0.0, 1.0, grid + 1)
        tracks = np.linalg.eigvalsh(A[None] - s[:, None, None] * B[None])
        jump = np.max(np.abs(np.diff(tracks, axis=0))) if grid else 0.0
        if jump <= radius_B / grid * (1 + 1e-9) + 1e-12:
            break
        grid *= 2
    neg = tracks < 0
    down = np.sum(~neg[:-1] & neg[1:])
    up = np.sum(neg[:-1] & ~neg[1:])
    return RelativeMorse(int(down - up), s, tracks)


def common_kernel_residual(A, B, s0: float, zero_tol: float = 1e-9) -> tuple[int, float]:
    """Kernel dimension of ``A - s0 B`` and ``max(|A v|, |B v|)`` over a kernel basis."""
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    M = A - s0 * B
    ev, V = np.linalg.eigh(M)
    scale = max(1.0, float(np.max(np.abs(ev))))
    K = V[:, np.abs(ev) <= zero_tol * scale]
    if K.shape[1] == 0:
        return 0, 0.0
    return K.shape[1], float(max(np.linalg.norm(A @ K, axis=0).max(), np.linalg.norm(B @ K, axis=0).max()))


def weyl_gap(T1, T2) -> float:
    """``max_j |mu_j(T1) - mu_j(T2)| - ||T1 - T2||``; nonpositive by Weyl's inequality."""
    T1 = np.asarray(T1, float)
    T2 = np.asarray(T2, float)
    mu1 = hermitian_eigvalsh(T1)
    mu2 = hermitian_eigvalsh(T2)
    return float(np.max(np.abs(mu1 - mu2)) - np.linalg.norm(T1 - T2, 2))
