"""Coefficient paths and fundamental solutions of linear Hamiltonian systems.

A :class:`CoefficientPath` is a symmetric-matrix valued function ``B(t)``;
:func:`matrizant` integrates ``gamma' = J B(t) gamma`` from the identity with
the classical fourth order Runge-Kutta scheme.

Coefficient paths may jump at finitely many breakpoints (a brake extension
is discontinuous at the reflection time), so every evaluator takes a
``side`` argument: ``+1`` selects the right limit and ``-1`` the left limit.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from .errors import NonSymmetricCoefficient, StepCountTooSmall
from .symcore import check_symplectic, matrix_from_json, matrix_to_json, std_J, std_N

PERIODIC = "periodic"
BRAKE = "brake"

Evaluator = Callable[[np.ndarray, int], np.ndarray]

_SNAP = 1e-12


def _snap(t: np.ndarray, marks: np.ndarray) -> np.ndarray:
    """Move times lying within rounding distance of a mark onto the mark."""
    if marks.size == 0:
        return t
    t = t.copy()
    for m in marks:
        close = np.abs(t - m) <= _SNAP * max(1.0, abs(m))
        t[close] = m
    return t


def _wrap(t: np.ndarray, period: float, side: int) -> np.ndarray:
    t = _snap(t, np.array([0.0]))
    w = np.mod(t, period)
    w = _snap(w, np.array([0.0, period]))
    w[w >= period] = 0.0
    if side < 0:
        w[(w == 0.0) & (t > 0.0)] = period
    return w


@dataclass(frozen=True)
class CoefficientPath:
    """Continuous (or piecewise continuous) path of symmetric 2n x 2n matrices.

    Parameters
    ----------
    n : int
        Half-dimension.
    tau : float
        Duration; the path is used on ``[0, tau]``.
    fn : callable
        ``fn(t, side)`` maps a 1-D array of times to an array of shape
        ``(len(t), 2n, 2n)``.
    kind : str
        ``"constant"``, ``"trig"``, ``"orbit"`` or ``"composite"``.
    coeffs : object
        Serializable description (for the first three kinds).
    flags : frozenset
        Subset of ``{"periodic", "brake"}``.
    period : float or None
        Period of the evaluator when it is periodic.
    breakpoints : tuple of float
        Jump times inside one period (or inside ``[0, tau]`` if aperiodic).
    """

    n: int
    tau: float
    fn: Evaluator = field(repr=False, compare=False)
    kind: str = "composite"
    coeffs: Any = field(default=None, repr=False, compare=False)
    flags: frozenset = frozenset()
    period: float | None = None
    breakpoints: tuple = ()

    def __call__(self, t, side: int = 1) -> np.ndarray:
        arr = np.asarray(t, dtype=float)
        out = self.fn(np.atleast_1d(arr).ravel(), side)
        return out[0] if arr.ndim == 0 else out

    def jumps(self, t0: float = 0.0, t1: float | None = None) -> np.ndarray:
        """Breakpoints (including period multiples) strictly inside ``(t0, t1)``."""
        t1 = self.tau if t1 is None else t1
        marks = list(self.breakpoints)
        if self.period:
            base = sorted(set(marks) | {0.0})
            marks = []
            k0 = int(np.floor(t0 / self.period)) - 1
            k1 = int(np.ceil(t1 / self.period)) + 1
            for k in range(k0, k1 + 1):
                marks.extend(k * self.period + b for b in base)
        marks = np.array(sorted(marks))
        tol = _SNAP * max(1.0, abs(t1))
        return marks[(marks > t0 + tol) & (marks < t1 - tol)]

    def with_tau(self, tau: float) -> CoefficientPath:
        return replace(self, tau=float(tau))

    def to_json(self) -> dict:
        if self.kind not in ("constant", "trig", "orbit"):
            raise ValueError(f"coefficient paths of kind {self.kind!r} are not serializable")
        if self.kind == "constant":
            coeffs = matrix_to_json(self.coeffs)
        elif self.kind == "trig":
            coeffs = {
                "c0": matrix_to_json(self.coeffs["c0"]),
                "cos": [matrix_to_json(c) for c in self.coeffs["cos"]],
                "sin": [matrix_to_json(c) for c in self.coeffs["sin"]],
                "period": float(self.coeffs["period"]),
            }
        else:
            coeffs = self.coeffs
        return {"n": self.n, "tau": float(self.tau), "kind": self.kind, "coeffs": coeffs, "flags": sorted(self.flags)}


def _is_brake_symmetric(c0, cos, sin) -> bool:
    N = std_N(c0.shape[0] // 2)
    even = [c0, *cos]
    ok = all(np.allclose(N @ c @ N, c, atol=1e-12) for c in even)
    return ok and all(np.allclose(N @ s @ N, -s, atol=1e-12) for s in sin)


def constant_path(B: np.ndarray, tau: float) -> CoefficientPath:
    """The constant coefficient path ``B(t) = B`` on ``[0, tau]``."""
    B = np.asarray(B, dtype=float)
    n = B.shape[0] // 2

    def fn(t, side):
        return np.broadcast_to(B, (t.size, 2 * n, 2 * n)).copy()

    flags = {PERIODIC}
    if _is_brake_symmetric(B, [], []):
        flags.add(BRAKE)
    return CoefficientPath(n, float(tau), fn, "constant", B.copy(), frozenset(flags), period=float(tau))


def trig_path(c0, cos, sin, tau: float, period: float | None = None) -> CoefficientPath:
    """``B(t) = c0 + sum_d cos_d cos(2 pi d t / P) + sin_d sin(2 pi d t / P)``."""
    c0 = np.asarray(c0, dtype=float)
    cos = np.asarray(cos, dtype=float).reshape(-1, *c0.shape)
    sin = np.asarray(sin, dtype=float).reshape(-1, *c0.shape)
    if cos.shape[0] != sin.shape[0]:
        raise ValueError("cosine and sine coefficient lists must have equal length")
    period = float(tau if period is None else period)
    n = c0.shape[0] // 2
    freqs = 2 * np.pi * np.arange(1, cos.shape[0] + 1) / period

    def fn(t, side):
        arg = np.outer(t, freqs)
        return (
            c0[None]
            + np.einsum("md,dij->mij", np.cos(arg), cos)
            + np.einsum("md,dij->mij", np.sin(arg), sin)
        )

    flags = {PERIODIC} if np.isclose(period, tau) else set()
    if _is_brake_symmetric(c0, cos, sin):
        flags.add(BRAKE)
    coeffs = {"c0": c0, "cos": list(cos), "sin": list(sin), "period": period}
    return CoefficientPath(n, float(tau), fn, "trig", coeffs, frozenset(flags), period=period)


def path_from_json(data: dict) -> CoefficientPath:
    """Inverse of :meth:`CoefficientPath.to_json`."""
    allowed = {"n", "tau", "kind", "coeffs", "flags"}
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown coefficient path fields: {sorted(unknown)}")
    kind = data["kind"]
    tau = float(data["tau"])
    if kind == "constant":
        path = constant_path(matrix_from_json(data["coeffs"]), tau)
    elif kind == "trig":
        c = data["coeffs"]
        c0 = matrix_from_json(c["c0"])
        cos = [matrix_from_json(m) for m in c.get("cos", [])]
        sin = [matrix_from_json(m) for m in c.get("sin", [])]
        shape = (0, *c0.shape)
        path = trig_path(
            c0,
            np.array(cos).reshape(-1, *c0.shape) if cos else np.zeros(shape),
            np.array(sin).reshape(-1, *c0.shape) if sin else np.zeros(shape),
            tau,
            c.get("period"),
        )
    elif kind == "orbit":
        from .orbits import orbit_path_from_json

        path = orbit_path_from_json(data["coeffs"], tau)
    else:
        raise ValueError(f"unknown coefficient path kind {kind!r}")
    if "n" in data and int(data["n"]) != path.n:
        raise ValueError(f"declared n={data['n']} does not match coefficient size n={path.n}")
    return path


def piecewise(pieces: list[tuple[float, Evaluator]], n: int, period: float | None = None) -> Evaluator:
    """Evaluator gluing ``pieces = [(length, local_fn), ...]`` end to end."""
    lengths = np.array([p[0] for p in pieces], dtype=float)
    starts = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    fns = [p[1] for p in pieces]
    marks = np.concatenate([starts, [lengths.sum()]])

    def fn(t, side):
        t = np.asarray(t, dtype=float)
        t = _snap(_wrap(t, period, side), marks) if period else _snap(t, marks)
        idx = np.searchsorted(starts, t, side="right" if side > 0 else "left") - 1
        idx = np.clip(idx, 0, len(fns) - 1)
        out = np.empty((t.size, 2 * n, 2 * n))
        for i in np.unique(idx):
            mask = idx == i
            out[mask] = fns[i](t[mask] - starts[i], side)
        return out

    return fn


def brake_extend(B: CoefficientPath) -> CoefficientPath:
    """Extend ``B`` from ``[0, S]`` to ``[0, 2S]`` by ``B(t + S) = N B(S - t) N``.

    The result is marked brake-symmetric and ``2S``-periodic; evaluating it
    beyond ``2S`` repeats it periodically.
    """
    S = float(B.tau)
    N = std_N(B.n)

    def reflected(u, side):
        return N @ B.fn(S - u, -side) @ N

    fn = piecewise([(S, B.fn), (S, reflected)], B.n, period=2 * S)
    inner = [b for b in B.jumps(0.0, S)]
    marks = sorted({S, *inner, *(2 * S - b for b in inner)})
    return CoefficientPath(B.n, 2 * S, fn, "composite", None, frozenset({PERIODIC, BRAKE}), 2 * S, tuple(marks))


def concat_paths(B1: CoefficientPath, B2: CoefficientPath) -> CoefficientPath:
    """``B1`` on ``[0, tau1]`` followed by ``B2`` shifted to ``[tau1, tau1 + tau2]``."""
    t1 = float(B1.tau)
    fn = piecewise([(t1, B1.fn), (float(B2.tau), B2.fn)], B1.n)
    marks = sorted({t1, *B1.jumps(0.0, t1), *(t1 + b for b in B2.jumps(0.0, B2.tau))})
    return CoefficientPath(B1.n, t1 + float(B2.tau), fn, "composite", None, frozenset(), None, tuple(marks))


def reversed_path(B: CoefficientPath) -> CoefficientPath:
    """``t -> N B(tau - t) N`` on ``[0, tau]``."""
    S = float(B.tau)
    N = std_N(B.n)

    def fn(t, side):
        return N @ B.fn(S - t, -side) @ N

    marks = sorted(S - b for b in B.jumps(0.0, S))
    return CoefficientPath(B.n, S, fn, "composite", None, frozenset(), None, tuple(marks))


def shifted(B: CoefficientPath, t0: float, tau: float | None = None) -> CoefficientPath:
    """``t -> B(t + t0)``; the duration defaults to ``B.tau - t0``."""
    tau = float(B.tau - t0 if tau is None else tau)

    def fn(t, side):
        return B.fn(t + t0, side)

    if B.period:
        base = {0.0, *B.breakpoints}
        marks = tuple(sorted({float(np.mod(b - t0, B.period)) for b in base}))
        flags = B.flags & {PERIODIC} if np.isclose(B.period, tau) else frozenset()
        return CoefficientPath(B.n, tau, fn, "composite", None, frozenset(flags), B.period, marks)
    marks = tuple(b - t0 for b in B.jumps(t0, t0 + tau))
    return CoefficientPath(B.n, tau, fn, "composite", None, frozenset(), None, marks)


def perturbed(B: CoefficientPath, eps: float) -> CoefficientPath:
    """``t -> B(t) + eps I``."""
    eye = np.eye(2 * B.n)

    def fn(t, side):
        return B.fn(t, side) + eps * eye

    return replace(B, fn=fn, kind="composite", coeffs=None)


def sample_coefficient_path(
    seed: int, n: int, degree: int, amplitude: float, tau: float = 1.0
) -> CoefficientPath:
    """Seeded random trigonometric coefficient path with period ``tau``.

    The coefficient matrices are scaled so that the sum of their spectral
    norms equals ``amplitude``, which bounds the sup norm of the path.
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(2 * degree + 1):
        G = rng.standard_normal((2 * n, 2 * n))
        mats.append((G + G.T) / 2)
    total = sum(np.linalg.norm(m, 2) for m in mats)
    scale = amplitude / total if total > 0 else 0.0
    mats = [scale * m for m in mats]
    return trig_path(mats[0], np.array(mats[1 : degree + 1]).reshape(degree, 2 * n, 2 * n),
                     np.array(mats[degree + 1 :]).reshape(degree, 2 * n, 2 * n), tau)


# ---------------------------------------------------------------------------
# integration


def rk4_propagators(B: CoefficientPath, ta: np.ndarray, tb: np.ndarray) -> np.ndarray:
    """One Runge-Kutta step matrix for ``x' = J B x`` from each ``ta`` to ``tb``."""
    ta = np.asarray(ta, dtype=float)
    tb = np.asarray(tb, dtype=float)
    J = std_J(B.n)
    h = (tb - ta)[:, None, None]
    A1 = J @ B(ta, 1)
    A2 = J @ B((ta + tb) / 2, 1)
    A3 = J @ B(tb, -1)
    eye = np.eye(2 * B.n)
    A2A1 = A2 @ A1
    A2A2 = A2 @ A2
    k1 = A1
    k2 = A2 + h / 2 * A2A1
    k3 = A2 + h / 2 * A2A2 + h**2 / 4 * (A2 @ A2A1)
    k4 = A3 + h * (A3 @ A2) + h**2 / 2 * (A3 @ A2A2) + h**3 / 4 * (A3 @ A2A2 @ A1)
    return eye + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def reproject(M: np.ndarray) -> np.ndarray:
    """One step of ``M <- (M + J^{-1} M^{-T} J) / 2`` towards Sp(2n)."""
    J = std_J(M.shape[0] // 2)
    return 0.5 * (M - J @ np.linalg.inv(M).T @ J)


def _check_symmetric(B: CoefficientPath, t: np.ndarray) -> None:
    vals = B(t, 1)
    scale = max(1.0, float(np.max(np.abs(vals))))
    resid = float(np.max(np.abs(vals - np.swapaxes(vals, 1, 2))))
    if resid > 1e-12 * scale:
        raise NonSymmetricCoefficient(f"coefficient path asymmetry {resid:.3e}")


@dataclass(frozen=True)
class SymplecticPath:
    """Sampled symplectic path with optional generating coefficient path."""

    times: np.ndarray
    mats: np.ndarray
    source: CoefficientPath | None = None
    steps: int | None = None

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        mats = np.array(self.mats, dtype=float)
        if times.ndim != 1 or mats.shape[0] != times.size:
            raise ValueError("times and matrices disagree in length")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        times.setflags(write=False)
        mats.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "mats", mats)

    @property
    def n(self) -> int:
        return self.mats.shape[1] // 2

    @property
    def tau(self) -> float:
        return float(self.times[-1])

    @property
    def start(self) -> np.ndarray:
        return self.mats[0]

    @property
    def end(self) -> np.ndarray:
        return self.mats[-1]

    @classmethod
    def identity(cls, n: int) -> SymplecticPath:
        """The trivial path of duration zero."""
        return cls(np.zeros(1), np.eye(2 * n)[None])

    def at(self, t: float, substeps: int = 2) -> np.ndarray:
        """Value at an arbitrary time, integrating from the nearest earlier sample."""
        t = float(t)
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 1))
        t0 = self.times[i]
        if t == t0:
            return self.mats[i].copy()
        if self.source is None:
            j = min(i + 1, self.times.size - 1)
            if j == i:
                return self.mats[i].copy()
            w = (t - t0) / (self.times[j] - t0)
            return (1 - w) * self.mats[i] + w * self.mats[j]
        grid = np.linspace(t0, t, substeps + 1)
        P = rk4_propagators(self.source, grid[:-1], grid[1:])
        M = self.mats[i]
        for Pk in P:
            M = Pk @ M
        return M

    def right_multiply(self, P: np.ndarray) -> SymplecticPath:
        """The path ``t -> gamma(t) P``."""
        return SymplecticPath(self.times, self.mats @ np.asarray(P, dtype=float), self.source, self.steps)

    def max_symplectic_residual(self) -> float:
        return max(check_symplectic(M) for M in self.mats)


def _time_grid(B: CoefficientPath, tau: float, steps: int) -> np.ndarray:
    grid = np.linspace(0.0, tau, steps + 1)
    jumps = B.jumps(0.0, tau)
    if jumps.size:
        h = tau / steps
        idx = np.rint(jumps / h).astype(int)
        on_grid = np.abs(idx * h - jumps) <= 1e-9 * h
        grid[idx[on_grid]] = jumps[on_grid]
        extra = jumps[~on_grid]
        if extra.size:
            grid = np.unique(np.concatenate([grid, extra]))
    return grid


def matrizant(
    B: CoefficientPath,
    steps: int = 4096,
    tau: float | None = None,
    initial: np.ndarray | None = None,
    project_every: int = 64,
) -> SymplecticPath:
    """Fundamental solution of ``gamma' = J B(t) gamma`` on ``[0, tau]``.

    Parameters
    ----------
    B : CoefficientPath
        Coefficients; ``tau`` defaults to ``B.tau``.
    steps : int
        Number of uniform Runge-Kutta steps (at least 16).  Jump times of
        ``B`` are inserted into the grid.
    initial : array, optional
        Starting value; the identity unless given.

    Returns
    -------
    SymplecticPath
        All steps are stored when ``steps <= 8192``; otherwise 8193 samples
        with exact endpoints are kept.
    """
    if steps < 16:
        raise StepCountTooSmall(f"steps={steps} < 16")
    tau = float(B.tau if tau is None else tau)
    grid = _time_grid(B, tau, steps)
    _check_symmetric(B, grid)
    P = rk4_propagators(B, grid[:-1], grid[1:])
    m = 2 * B.n
    mats = np.empty((grid.size, m, m))
    M = np.eye(m)
    mats[0] = M
    for i in range(P.shape[0]):
        M = P[i] @ M
        if (i + 1) % project_every == 0:
            M = reproject(reproject(M))
        mats[i + 1] = M
    mats[-1] = reproject(reproject(M))
    if initial is not None:
        mats = mats @ np.asarray(initial, dtype=float)
    if grid.size > 8193:
        keep = np.unique(np.rint(np.linspace(0, grid.size - 1, 8193)).astype(int))
        grid, mats = grid[keep], mats[keep]
    return SymplecticPath(grid, mats, B.with_tau(tau), steps)
