"""Dense linear algebra for small symplectic and Lagrangian objects.

Conventions
-----------
``J = [[0, -I], [I, 0]]`` and ``N = diag(-I, I)``.  On the single space
``C^{2n}`` the symplectic form is ``w0(u, v) = (J conj(u)) . v``; on the
doubled space ``C^{2n} + C^{2n}`` it is ``(-w0) + w0``.  A form is encoded by
its matrix ``Omega`` so that ``w(u, v) = u^H Omega^T v``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import AmbientMismatch, DegenerateFrame, NotSymmetric

SINGLE = "single"
DOUBLED = "doubled"

# matrices up to this size go through the Jacobi rotation solver
JACOBI_MAX_DIM = 32


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds used throughout the package."""

    symplectic: float = 1e-10
    rank: float = 1e-8
    zero: float = 1e-9


DEFAULT_TOL = Tolerances()


def std_J(n: int) -> np.ndarray:
    """Standard complex structure ``[[0, -I], [I, 0]]`` of size 2n."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


def std_N(n: int) -> np.ndarray:
    """Reflection ``diag(-I, I)`` of size 2n."""
    return np.diag(np.concatenate([-np.ones(n), np.ones(n)]))


def half_dim(M: np.ndarray) -> int:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
        raise ValueError(f"expected a square even-dimensional matrix, got shape {M.shape}")
    return M.shape[0] // 2


def blocks(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Split ``M`` into its n x n blocks ``A, B, C, D`` (``M = [[A, B], [C, D]]``)."""
    n = half_dim(M)
    return M[:n, :n], M[:n, n:], M[n:, :n], M[n:, n:]


def check_symplectic(M: np.ndarray) -> float:
    """Return the residual ``max |M^T J M - J|``."""
    M = np.asarray(M, dtype=float)
    J = std_J(half_dim(M))
    return float(np.max(np.abs(M.T @ J @ M - J)))


def symplectic_inverse(M: np.ndarray) -> np.ndarray:
    """Inverse of a symplectic matrix, ``-J M^T J``."""
    J = std_J(half_dim(M))
    return -J @ M.T @ J


def random_symplectic(rng: np.random.Generator, n: int, scale: float = 1.0, factors: int = 3) -> np.ndarray:
    """Product of exponentials ``exp(J S_i)`` with random symmetric ``S_i``."""
    J = std_J(n)
    M = np.eye(2 * n)
    for _ in range(factors):
        G = rng.standard_normal((2 * n, 2 * n))
        M = expm(J @ (scale * (G + G.T) / 2)) @ M
    return M


# ---------------------------------------------------------------------------
# signatures


@dataclass(frozen=True)
class SignatureTriple:
    m_plus: int
    m_zero: int
    m_minus: int
    eigenvalues: tuple = field(default=(), compare=False)

    @property
    def dim(self) -> int:
        return self.m_plus + self.m_zero + self.m_minus

    def as_list(self) -> list[int]:
        return [self.m_plus, self.m_zero, self.m_minus]


def jacobi_eigvalsh(S: np.ndarray, threshold: float = 1e-13, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm falls below
    ``threshold`` times the Frobenius norm of the input.
    """
    A = np.array(S, dtype=float, copy=True)
    m = A.shape[0]
    if m <= 1:
        return np.diag(A).copy()
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(m)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= threshold * scale:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
    return np.sort(np.diag(A))


def hermitian_eigvalsh(S: np.ndarray) -> np.ndarray:
    """Sorted eigenvalues of a symmetric or Hermitian matrix.

    Small matrices use :func:`jacobi_eigvalsh` (complex ones through the
    real embedding ``[[Re, -Im], [Im, Re]]``, whose spectrum doubles every
    eigenvalue); larger ones fall back to LAPACK.
    """
    S = np.asarray(S)
    m = S.shape[0]
    if m == 0:
        return np.zeros(0)
    if m > JACOBI_MAX_DIM:
        return np.linalg.eigvalsh(S)
    if np.iscomplexobj(S) and np.any(S.imag != 0):
        R = np.block([[S.real, -S.imag], [S.imag, S.real]])
        return jacobi_eigvalsh(R)[::2]
    return jacobi_eigvalsh(np.real(S))


def signature(S: np.ndarray, zero_tol: float = DEFAULT_TOL.zero) -> SignatureTriple:
    """Counts of positive, zero and negative eigenvalues of ``S``.

    Raises
    ------
    NotSymmetric
        If ``max |S - S^H|`` exceeds ``10 * zero_tol``.
    """
    S = np.atleast_2d(np.asarray(S))
    if S.size == 0:
        return SignatureTriple(0, 0, 0, ())
    if S.shape[0] != S.shape[1]:
        raise NotSymmetric(f"matrix of shape {S.shape} is not square")
    resid = float(np.max(np.abs(S - S.conj().T)))
    if resid > 10 * zero_tol:
        raise NotSymmetric(f"symmetry residual {resid:.3e} exceeds {10 * zero_tol:.1e}")
    ev = hermitian_eigvalsh((S + S.conj().T) / 2)
    plus = int(np.sum(ev > zero_tol))
    minus = int(np.sum(ev < -zero_tol))
    return SignatureTriple(plus, len(ev) - plus - minus, minus, tuple(float(e) for e in ev))


# ---------------------------------------------------------------------------
# subspaces


def omega_matrix(dim: int, space: str) -> np.ndarray:
    """Matrix ``Omega`` of the symplectic form on a space of real dimension ``dim``."""
    if space == SINGLE:
        return std_J(dim // 2)
    if space == DOUBLED:
        J = std_J(dim // 4)
        Z = np.zeros_like(J)
        return np.block([[-J, Z], [Z, J]])
    raise ValueError(f"unknown space tag {space!r}")


def orth(A: np.ndarray, rank_tol: float = DEFAULT_TOL.rank) -> np.ndarray:
    """Orthonormal basis of the column space, singular values relative to the largest."""
    A = np.asarray(A)
    if A.shape[1] == 0:
        return A.astype(complex)
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((A.shape[0], 0), dtype=complex)
    r = int(np.sum(s > rank_tol * s[0]))
    return U[:, :r].astype(complex)


def subspace_intersection(A: np.ndarray, B: np.ndarray, rank_tol: float = DEFAULT_TOL.rank) -> np.ndarray:
    """Orthonormal basis of ``span A`` intersected with ``span B``."""
    Qa = orth(A, rank_tol)
    Qb = orth(B, rank_tol)
    ka, kb = Qa.shape[1], Qb.shape[1]
    if ka == 0 or kb == 0:
        return np.zeros((Qa.shape[0], 0), dtype=complex)
    _, s, Vh = np.linalg.svd(np.hstack([Qa, -Qb]))
    s_full = np.zeros(ka + kb)
    s_full[: s.size] = s
    null = Vh.conj().T[:, s_full <= rank_tol * max(s_full[0], 1.0)]
    if null.shape[1] == 0:
        return np.zeros((Qa.shape[0], 0), dtype=complex)
    return orth(Qa @ null[:ka], rank_tol)


@dataclass(frozen=True)
class LagrangianFrame:
    """Complex frame spanning a Lagrangian subspace.

    Parameters
    ----------
    span : (2m, m) array
        Columns spanning the subspace.
    space : {"single", "doubled"}
        Which symplectic form the subspace is Lagrangian for.
    label : str
        Free-form description used in reports.
    """

    span: np.ndarray
    space: str = DOUBLED
    label: str = ""
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        F = np.asarray(self.span, dtype=complex)
        object.__setattr__(self, "span", F)
        if self.check:
            self.validate()

    @property
    def ambient_dim(self) -> int:
        return self.span.shape[0]

    @property
    def omega(self) -> np.ndarray:
        return omega_matrix(self.ambient_dim, self.space)

    def validate(self, rank_tol: float = DEFAULT_TOL.rank) -> None:
        F = self.span
        if F.ndim != 2 or F.shape[0] != 2 * F.shape[1]:
            raise DegenerateFrame(f"frame {self.label!r} has shape {F.shape}, expected (2m, m)")
        s = np.linalg.svd(F, compute_uv=False)
        if s[-1] <= rank_tol * max(s[0], 1.0):
            raise DegenerateFrame(f"frame {self.label!r} is rank deficient")
        iso = F.conj().T @ self.omega.T @ F
        if np.max(np.abs(iso)) > 1e-8 * s[0] ** 2:
            raise DegenerateFrame(f"frame {self.label!r} is not isotropic")

    def orthonormal(self) -> np.ndarray:
        Q, _ = np.linalg.qr(self.span)
        return Q


def alpha0(n: int) -> LagrangianFrame:
    """``{0} x C^n`` in the single space."""
    return LagrangianFrame(np.vstack([np.zeros((n, n)), np.eye(n)]), SINGLE, "alpha0")


def alpha1(n: int) -> LagrangianFrame:
    """``C^n x {0}`` in the single space."""
    return LagrangianFrame(np.vstack([np.eye(n), np.zeros((n, n))]), SINGLE, "alpha1")


def single_frame(span: np.ndarray, label: str = "") -> LagrangianFrame:
    return LagrangianFrame(span, SINGLE, label)


def product(first: LagrangianFrame, second: LagrangianFrame) -> LagrangianFrame:
    """Product ``first x second`` of two single-space frames, a doubled-space frame."""
    if first.space != SINGLE or second.space != SINGLE or first.ambient_dim != second.ambient_dim:
        raise AmbientMismatch("product needs two single-space frames of equal dimension")
    a, b = first.span, second.span
    span = np.block([[a, np.zeros((a.shape[0], b.shape[1]))], [np.zeros((b.shape[0], a.shape[1])), b]])
    return LagrangianFrame(span, DOUBLED, f"{first.label}x{second.label}")


def transform(M: np.ndarray, frame: LagrangianFrame) -> LagrangianFrame:
    """Image ``M . frame`` of a single-space frame under a symplectic matrix."""
    if frame.space != SINGLE:
        raise AmbientMismatch("transform acts on single-space frames")
    return LagrangianFrame(np.asarray(M) @ frame.span, SINGLE, f"M.{frame.label}")


def graph(M: np.ndarray, label: str = "Graph(M)") -> LagrangianFrame:
    """``Graph(M) = {(x, Mx)}`` in the doubled space."""
    M = np.asarray(M)
    return LagrangianFrame(np.vstack([np.eye(M.shape[0]), M]), DOUBLED, label)


def graph_scalar(n: int, z: complex, label: str | None = None) -> LagrangianFrame:
    """``Graph(z I)`` for a unit complex number ``z``."""
    return graph(z * np.eye(2 * n, dtype=complex), label or f"Graph({z:.6g} I)")


def alpha_tilde0(n: int) -> LagrangianFrame:
    return product(alpha0(n), alpha0(n))


def alpha_tilde1(n: int) -> LagrangianFrame:
    return product(alpha1(n), alpha1(n))


def _require_same_space(*frames: LagrangianFrame) -> None:
    first = frames[0]
    for f in frames[1:]:
        if f.space != first.space or f.ambient_dim != first.ambient_dim:
            raise AmbientMismatch(
                f"frames live in different spaces: {first.space}/{first.ambient_dim} vs {f.space}/{f.ambient_dim}"
            )


def intersection_dim(F1: LagrangianFrame, F2: LagrangianFrame, rank_tol: float = DEFAULT_TOL.rank) -> tuple[int, np.ndarray]:
    """Dimension and orthonormal basis of ``span F1`` intersected with ``span F2``."""
    _require_same_space(F1, F2)
    basis = subspace_intersection(F1.span, F2.span, rank_tol)
    return basis.shape[1], basis


def triple_form_with_basis(
    alpha: LagrangianFrame,
    beta: LagrangianFrame,
    delta: LagrangianFrame,
    rank_tol: float = DEFAULT_TOL.rank,
) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian form on ``alpha`` intersected with ``beta + delta``, with the basis used.

    Each basis vector is split as ``x = -y + z`` with ``y`` in ``beta`` and
    ``z`` in ``delta`` (minimum-norm solve on ``[beta | delta]``); the
    returned matrix has entries ``w(x_i, y_j)``.
    """
    _require_same_space(alpha, beta, delta)
    if alpha.space != DOUBLED:
        raise AmbientMismatch("the triple form is defined on the doubled space")
    for f in (alpha, beta, delta):
        f.validate(rank_tol)
    stacked = np.hstack([beta.span, delta.span])
    X = subspace_intersection(alpha.span, stacked, rank_tol)
    k = X.shape[1]
    if k == 0:
        return np.zeros((0, 0), dtype=complex), X
    coef, *_ = np.linalg.lstsq(stacked, X, rcond=None)
    Y = -beta.span @ coef[: beta.span.shape[1]]
    Omega = alpha.omega
    return X.conj().T @ Omega.T @ Y, X


def triple_form(
    alpha: LagrangianFrame,
    beta: LagrangianFrame,
    delta: LagrangianFrame,
    rank_tol: float = DEFAULT_TOL.rank,
) -> np.ndarray:
    """Matrix of the Hermitian form ``Q(alpha, beta; delta)`` on an orthonormal basis."""
    return triple_form_with_basis(alpha, beta, delta, rank_tol)[0]


def symplectic_form(u: np.ndarray, v: np.ndarray, space: str) -> complex:
    """Evaluate ``w(u, v)`` for vectors of the given space."""
    Omega = omega_matrix(len(u), space)
    return complex(np.conj(u) @ Omega.T @ v)


# ---------------------------------------------------------------------------
# JSON helpers


def matrix_to_json(M: np.ndarray) -> list:
    M = np.asarray(M)
    if np.iscomplexobj(M) and np.any(M.imag != 0):
        return [[[float(z.real), float(z.imag)] for z in row] for row in M]
    return np.real(M).astype(float).tolist()


def matrix_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    return arr
