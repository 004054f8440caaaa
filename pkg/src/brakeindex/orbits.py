"""Brake periodic orbits of reversible Hamiltonian systems.

A brake orbit starts at rest in momentum, ``x(0) = (0, q0)``, and returns
to ``p = 0`` at ``t = T/2``; reflecting by ``x(-t) = N x(t)`` closes it to a
T-periodic solution.  Orbits are found by Newton shooting on ``q0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline

from .errors import NoConvergence, SingularJacobian
from .index_engine import index_suite, suite_to_json
from .matrizant import BRAKE, PERIODIC, CoefficientPath, matrizant
from .symcore import DEFAULT_TOL, Tolerances, std_J, std_N
from .variational import ConvexMap, conjugate_points, convexifying_lambda, fenchel, stabilized_morse_index


# ---------------------------------------------------------------------------
# Hamiltonians


def _rows(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    return np.atleast_2d(x), x.ndim == 1


@dataclass(frozen=True)
class HamiltonianSpec:
    """Autonomous Hamiltonian on R^{2n} with coordinates ``x = (p, q)``.

    ``value``, ``gradient`` and ``hessian`` accept arrays of shape ``(m, 2n)``.
    """

    n: int
    value_fn: Callable = field(repr=False)
    gradient_fn: Callable = field(repr=False)
    hessian_fn: Callable = field(repr=False)
    tag: str = "custom"
    description: dict = field(default_factory=dict, compare=False)

    def value(self, x):
        X, single = _rows(x)
        v = self.value_fn(X)
        return float(v[0]) if single else v

    def gradient(self, x):
        X, single = _rows(x)
        g = self.gradient_fn(X)
        return g[0] if single else g

    def hessian(self, x):
        X, single = _rows(x)
        h = self.hessian_fn(X)
        return h[0] if single else h

    def reversibility_residual(self, samples: np.ndarray) -> float:
        N = std_N(self.n)
        X = np.atleast_2d(samples)
        return float(np.max(np.abs(self.value_fn(X @ N) - self.value_fn(X))))

    def to_json(self) -> dict:
        return dict(self.description)


def harmonic(n: int = 1) -> HamiltonianSpec:
    """``H = |p|^2 / 2 + |q|^2 / 2``."""
    return HamiltonianSpec(
        n,
        lambda X: 0.5 * np.sum(X * X, axis=1),
        lambda X: X.copy(),
        lambda X: np.broadcast_to(np.eye(2 * n), (X.shape[0], 2 * n, 2 * n)).copy(),
        "harmonic",
        {"kind": "harmonic", "n": n},
    )


def quartic(n: int = 1) -> HamiltonianSpec:
    """``H = |p|^2 / 2 + |q|^2 / 2 + |q|^4 / 4``."""

    def value(X):
        p, q = X[:, :n], X[:, n:]
        r2 = np.sum(q * q, axis=1)
        return 0.5 * np.sum(p * p, axis=1) + 0.5 * r2 + 0.25 * r2**2

    def grad(X):
        q = X[:, n:]
        r2 = np.sum(q * q, axis=1)[:, None]
        return np.hstack([X[:, :n], q + r2 * q])

    def hess(X):
        q = X[:, n:]
        r2 = np.sum(q * q, axis=1)
        H = np.zeros((X.shape[0], 2 * n, 2 * n))
        H[:, :n, :n] = np.eye(n)
        H[:, n:, n:] = (1 + r2)[:, None, None] * np.eye(n) + 2 * q[:, :, None] * q[:, None, :]
        return H

    return HamiltonianSpec(n, value, grad, hess, "quartic", {"kind": "quartic", "n": n})


def polynomial(n: int, terms) -> HamiltonianSpec:
    """Polynomial Hamiltonian ``sum c * prod x_i^{e_i}`` from ``[(c, [e_1..e_2n]), ...]``.

    The ``p`` exponents of every monomial must sum to an even number, which
    makes ``H(Nx) = H(x)``.
    """
    coefs = np.array([float(t[0]) for t in terms])
    exps = np.array([list(t[1]) for t in terms], dtype=int).reshape(len(terms), 2 * n)
    if np.any(exps < 0):
        raise ValueError("exponents must be non-negative")
    odd = np.sum(exps[:, :n], axis=1) % 2 == 1
    if np.any(odd & (coefs != 0)):
        raise ValueError("polynomial Hamiltonian is not reversible: odd total degree in p")

    def mono(X, e):
        return np.prod(X[:, None, :] ** e[None], axis=2)

    def value(X):
        return mono(X, exps) @ coefs

    def grad(X):
        out = np.zeros_like(X)
        for i in range(2 * n):
            e = exps.copy()
            c = coefs * e[:, i]
            e[:, i] = np.maximum(e[:, i] - 1, 0)
            out[:, i] = mono(X, e) @ c
        return out

    def hess(X):
        out = np.zeros((X.shape[0], 2 * n, 2 * n))
        for i in range(2 * n):
            for j in range(i, 2 * n):
                e = exps.copy()
                c = coefs * e[:, i]
                e[:, i] = np.maximum(e[:, i] - 1, 0)
                c = c * e[:, j]
                e[:, j] = np.maximum(e[:, j] - 1, 0)
                out[:, i, j] = out[:, j, i] = mono(X, e) @ c
        return out

    desc = {"kind": "polynomial", "n": n, "terms": [[float(c), [int(v) for v in e]] for c, e in zip(coefs, exps)]}
    return HamiltonianSpec(n, value, grad, hess, "polynomial", desc)


def hamiltonian_from_json(data: dict) -> HamiltonianSpec:
    allowed = {"kind", "n", "terms"}
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown hamiltonian fields: {sorted(unknown)}")
    kind = data["kind"]
    n = int(data.get("n", 1))
    if kind == "harmonic":
        return harmonic(n)
    if kind == "quartic":
        return quartic(n)
    if kind == "polynomial":
        return polynomial(n, data["terms"])
    raise ValueError(f"unknown hamiltonian kind {kind!r}")


# ---------------------------------------------------------------------------
# integration


def flow(H: HamiltonianSpec, x0, t_end: float, steps: int, variational: bool = False):
    """Runge-Kutta solution of ``x' = J H'(x)`` on a uniform grid.

    Returns the states ``(steps + 1, 2n)`` and, if requested, the derivative
    of the final state with respect to the initial one (the Runge-Kutta
    scheme applied to the variational equation).
    """
    J = std_J(H.n)
    h = t_end / steps
    xs = np.empty((steps + 1, 2 * H.n))
    x = np.asarray(x0, dtype=float).copy()
    xs[0] = x
    grad, hess = H.gradient_fn, H.hessian_fn
    Phi = np.eye(2 * H.n) if variational else None
    for i in range(steps):
        if variational:
            s1 = x
            k1 = J @ grad(s1[None])[0]
            s2 = x + 0.5 * h * k1
            k2 = J @ grad(s2[None])[0]
            s3 = x + 0.5 * h * k2
            k3 = J @ grad(s3[None])[0]
            s4 = x + h * k3
            k4 = J @ grad(s4[None])[0]
            A = J @ hess(np.stack([s1, s2, s3, s4]))
            P1 = A[0] @ Phi
            P2 = A[1] @ (Phi + 0.5 * h * P1)
            P3 = A[2] @ (Phi + 0.5 * h * P2)
            P4 = A[3] @ (Phi + h * P3)
            Phi = Phi + h / 6 * (P1 + 2 * P2 + 2 * P3 + P4)
        else:
            k1 = J @ grad(x[None])[0]
            k2 = J @ grad((x + 0.5 * h * k1)[None])[0]
            k3 = J @ grad((x + 0.5 * h * k2)[None])[0]
            k4 = J @ grad((x + h * k3)[None])[0]
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        xs[i + 1] = x
    return (xs, Phi) if variational else xs


@dataclass(frozen=True)
class BrakeOrbit:
    """Sampled brake orbit; ``half_states`` covers ``[0, T/2]`` on a uniform grid."""

    hamiltonian: HamiltonianSpec
    T: float
    q0: np.ndarray
    half_times: np.ndarray = field(repr=False)
    half_states: np.ndarray = field(repr=False)
    residual: float = 0.0
    energy_drift: float = 0.0
    iterations: int = 0

    @property
    def n(self) -> int:
        return self.hamiltonian.n

    @property
    def times(self) -> np.ndarray:
        """Sample times on ``[-T/2, T/2]``."""
        return np.concatenate([-self.half_times[:0:-1], self.half_times])

    @property
    def states(self) -> np.ndarray:
        """Samples on ``[-T/2, T/2]`` using ``x(-t) = N x(t)``."""
        N = std_N(self.n)
        return np.concatenate([self.half_states[:0:-1] @ N, self.half_states])

    def period_samples(self) -> np.ndarray:
        """Uniform samples of one period ``[0, T)``."""
        N = std_N(self.n)
        back = self.half_states[::-1][1:-1] @ N  # x(t) for t in (T/2, T)
        return np.concatenate([self.half_states, back])

    def iterate(self, m: int) -> BrakeOrbit:
        """The same trajectory regarded as an orbit of period ``m T``."""
        full = self.period_samples()
        steps = self.half_times.size - 1
        total = m * steps
        idx = np.arange(total + 1) % full.shape[0]
        h = self.half_times[1] - self.half_times[0]
        return BrakeOrbit(
            self.hamiltonian, m * self.T, self.q0, np.arange(total + 1) * h, full[idx],
            self.residual, self.energy_drift, self.iterations,
        )

    def to_json(self) -> dict:
        return {
            "hamiltonian": self.hamiltonian.to_json(),
            "T": float(self.T),
            "q0": [float(v) for v in self.q0],
            "residual": float(self.residual),
            "energy_drift": float(self.energy_drift),
            "newton_iterations": int(self.iterations),
            "samples": int(self.half_times.size),
        }


def _make_orbit(H, T, q, xs, iterations) -> BrakeOrbit:
    steps = xs.shape[0] - 1
    times = np.linspace(0.0, T / 2, steps + 1)
    energy = H.value_fn(xs)
    return BrakeOrbit(
        H, float(T), np.array(q, dtype=float), times, xs,
        float(np.linalg.norm(xs[-1, : H.n])), float(np.max(np.abs(energy - energy[0]))), iterations,
    )


def integrate_orbit(H: HamiltonianSpec, T: float, q0, steps: int = 8192) -> BrakeOrbit:
    """Integrate from ``(0, q0)`` over ``[0, T/2]`` without correcting ``q0``."""
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    xs = flow(H, np.concatenate([np.zeros(H.n), q0]), T / 2, steps)
    return _make_orbit(H, T, q0, xs, 0)


def shoot(
    H: HamiltonianSpec,
    T: float,
    q0_guess,
    steps: int = 8192,
    tol: float = 1e-10,
    max_iter: int = 50,
    singular_tol: float = 1e-8,
) -> BrakeOrbit:
    """Newton shooting on ``q0 -> p(T/2)``.

    The Jacobian is the upper right block of the derivative of the flow.

    Raises
    ------
    SingularJacobian
        If that block is rank deficient at some iterate.
    NoConvergence
        If ``|p(T/2)| > tol`` after ``max_iter`` Newton steps.
    """
    n = H.n
    q = np.atleast_1d(np.asarray(q0_guess, dtype=float)).copy()
    if T <= 0:
        raise ValueError("period must be positive")

    def residual(qv):
        xs = flow(H, np.concatenate([np.zeros(n), qv]), T / 2, steps)
        return xs, xs[-1, :n]

    for it in range(max_iter + 1):
        xs, Phi = flow(H, np.concatenate([np.zeros(n), q]), T / 2, steps, variational=True)
        r = xs[-1, :n]
        jac = Phi[:n, n:]
        sv = np.linalg.svd(jac, compute_uv=False)
        if sv.min() <= singular_tol * max(1.0, sv.max()):
            raise SingularJacobian(f"shooting Jacobian is singular at q0={q.tolist()}", sv)
        rnorm = float(np.linalg.norm(r))
        if rnorm <= tol:
            return _make_orbit(H, T, q, xs, it)
        if it == max_iter:
            break
        dq = np.linalg.solve(jac, r)
        alpha = 1.0
        for _ in range(30):
            trial = q - alpha * dq
            _, rt = residual(trial)
            if np.linalg.norm(rt) < rnorm:
                break
            alpha *= 0.5
        q = trial
    raise NoConvergence(f"shooting residual {rnorm:.3e} after {max_iter} Newton steps")


# ---------------------------------------------------------------------------
# certification


def orbit_path(orbit: BrakeOrbit) -> CoefficientPath:
    """Coefficient path ``t -> H''(x(t))`` on ``[0, T/2]``, extended T-periodically."""
    H = orbit.hamiltonian
    J = std_J(H.n)
    N = std_N(H.n)
    T = orbit.T
    xs = orbit.half_states
    spline = CubicHermiteSpline(orbit.half_times, xs, H.gradient_fn(xs) @ J.T, axis=0)

    def fn(t, side):
        w = np.mod(t + T / 2, T) - T / 2
        w = np.where(np.isclose(w, -T / 2, rtol=0, atol=1e-12 * T) & (t > 0), T / 2, w)
        x = spline(np.clip(np.abs(w), 0.0, T / 2))
        neg = w < 0
        x[neg] = x[neg] @ N
        return H.hessian_fn(x)

    coeffs = {"hamiltonian": H.to_json(), "T": float(T), "q0": [float(v) for v in orbit.q0],
              "steps": int(orbit.half_times.size - 1)}
    return CoefficientPath(H.n, T / 2, fn, "orbit", coeffs, frozenset({PERIODIC, BRAKE}), period=T)


def orbit_path_from_json(coeffs: dict, tau: float) -> CoefficientPath:
    H = hamiltonian_from_json(coeffs["hamiltonian"])
    orbit = integrate_orbit(H, float(coeffs["T"]), coeffs["q0"], int(coeffs.get("steps", 8192)))
    return orbit_path(orbit).with_tau(tau)


@dataclass
class OrbitCertificate:
    suite: dict
    estimate: bool
    positivity: bool
    morse: tuple | None = None
    conjugate_sum: int | None = None
    lam: float | None = None

    @property
    def agreement(self) -> bool | None:
        if self.morse is None:
            return None
        i_l0 = self.suite["L0"].index
        return self.morse[0] == self.morse[1] == i_l0 == self.conjugate_sum

    def to_json(self) -> dict:
        return {
            "indices": suite_to_json(self.suite),
            "index_estimate": bool(self.estimate),
            "positivity_premise": bool(self.positivity),
            "morse_index": list(self.morse) if self.morse is not None else None,
            "conjugate_sum": self.conjugate_sum,
            "lambda": self.lam,
            "morse_maslov_agreement": self.agreement,
        }


def orbit_indices(orbit: BrakeOrbit, modes: int = 64, steps: int = 4096, tol: Tolerances = DEFAULT_TOL) -> OrbitCertificate:
    """Index suite of the linearized half orbit plus certification flags.

    Flags: the estimate ``i_L0 <= 1 <= i_L0 + nu_L0`` (informational), the
    premise ``H_qq > 0`` along the samples and, when it holds, agreement of
    the dual Morse index (at ``modes`` and ``2 * modes``), the L0 index and
    the interior conjugate-point count.
    """
    n = orbit.n
    B = orbit_path(orbit)
    g = matrizant(B, steps=steps)
    suite = index_suite(g, tol=tol)
    i_l0, nu_l0 = suite["L0"].index, suite["L0"].nullity_at_end
    estimate = i_l0 <= 1 <= i_l0 + nu_l0
    hess = orbit.hamiltonian.hessian_fn(orbit.half_states)
    positivity = bool(np.linalg.eigvalsh(hess[:, n:, n:]).min() > 0)
    cert = OrbitCertificate(suite, estimate, positivity)
    if positivity:
        lam = 0.0 if np.linalg.eigvalsh(hess).min() > 0 else convexifying_lambda(B)
        cert.lam = lam
        cert.morse = stabilized_morse_index(B, orbit.T, lam, modes)
        cert.conjugate_sum = conjugate_points(B, orbit.T / 2, steps, tol).total
    return cert


def _convex_with_shift(H: HamiltonianSpec, lam: float) -> ConvexMap:
    n = H.n
    L = np.diag(np.concatenate([np.full(n, lam), np.zeros(n)]))
    return ConvexMap(
        2 * n,
        lambda x: H.value(x) + 0.5 * float(x @ L @ x),
        lambda x: H.gradient(x) + L @ x,
        lambda x: H.hessian(x) + L,
        "H + (Lambda x, x) / 2",
    )


def action_values(orbit: BrakeOrbit, lam: float = 0.0, stride: int = 4) -> tuple[float, float, float]:
    """Primal action, dual action and their sum along the orbit.

    ``Phi = int [(J x', x) / 2 + H(x)]`` and
    ``Psi = int [(J x' - L x, x) / 2 + F*(-J x' + L x)]`` with
    ``F = H + (L x, x) / 2``, both over one period; the integrands are even
    in time, so twice the half-period integral is used.  The conjugate is
    evaluated on every ``stride``-th sample.
    """
    H = orbit.hamiltonian
    n = H.n
    J = std_J(n)
    L = np.diag(np.concatenate([np.full(n, lam), np.zeros(n)]))
    t = orbit.half_times
    x = orbit.half_states
    xdot = H.gradient_fn(x) @ J.T
    Jxdot = xdot @ J.T
    primal = 0.5 * np.sum(Jxdot * x, axis=1) + H.value_fn(x)
    phi = 2 * simpson(primal, x=t)

    F = _convex_with_shift(H, lam)
    ts = t[::stride]
    xs = x[::stride]
    Js = Jxdot[::stride]
    dual = np.empty(ts.size)
    for i in range(ts.size):
        Lx = L @ xs[i]
        u = -Js[i] + Lx
        conj, _ = fenchel(F, u)
        dual[i] = 0.5 * float((Js[i] - Lx) @ xs[i]) + conj
    psi = 2 * simpson(dual, x=ts)
    return float(phi), float(psi), float(phi + psi)


def minimal_period(orbit: BrakeOrbit, tol: float = 1e-6, kmax: int = 32) -> tuple[int, float, str]:
    """Largest ``k <= kmax`` with ``x(t + T/k) = x(t)`` to ``tol``, by spectral shifting.

    Returns ``(k, T / k, note)``; the note flags constant orbits, for which
    every ``k`` passes.
    """
    samples = orbit.period_samples()
    m = samples.shape[0]
    coef = np.fft.fft(samples, axis=0)
    freq = np.fft.fftfreq(m, d=1.0 / m)
    best = 1
    passing = []
    for k in range(1, kmax + 1):
        phase = np.exp(2j * np.pi * freq * (m / k) / m)
        shifted = np.real(np.fft.ifft(coef * phase[:, None], axis=0))
        err = float(np.max(np.linalg.norm(shifted - samples, axis=1)))
        if err <= tol:
            passing.append(k)
            best = k
    note = ""
    if len(passing) == kmax:
        note = "degenerate: constant orbit, every shift is a period"
    return best, orbit.T / best, note
