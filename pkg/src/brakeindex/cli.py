"""Command-line front end.

Exit codes: 0 success, 2 a verification claim failed, 3 numerical failure,
64 malformed configuration.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BrakeIndexError, ConfigParse, NumericalError
from .golden import graph_identity_triples, primitive_mode_errors, shift_endpoint_case
from .index_engine import L0, index_suite, maslov, suite_to_json
from .iteration import brake_iterate, tilde_shift, verify_all
from .matrizant import CoefficientPath, constant_path, matrizant, path_from_json, sample_coefficient_path
from .orbits import action_values, hamiltonian_from_json, minimal_period, orbit_indices, shoot
from .symcore import Tolerances, matrix_to_json
from .variational import conjugate_points, dual_form

EXIT_OK = 0
EXIT_CLAIM = 2
EXIT_NUMERICAL = 3
EXIT_CONFIG = 64

SUBCOMMANDS = ("index", "iterate", "verify", "morse", "orbit", "selftest")
B_CHOICES = ("constant-identity", "random")


@dataclass
class RunConfig:
    subcommand: str
    input: str | None = None
    output: str | None = None
    csv: str | None = None
    seed: int = 0
    count: int = 1
    n: int = 1
    tau: float | None = None
    kmax: int = 4
    modes: int = 64
    steps: int = 2048
    tol_rank: float = 1e-8
    tol_zero: float = 1e-9
    no_timestamp: bool = False
    jobs: int = 1
    B: str = "random"
    degree: int = 2
    amplitude: float = 3.0
    extra: dict = field(default_factory=dict)

    @property
    def tol(self) -> Tolerances:
        return Tolerances(rank=self.tol_rank, zero=self.tol_zero)

    def public(self) -> dict:
        keys = ("subcommand", "seed", "count", "n", "tau", "kmax", "modes", "steps",
                "tol_rank", "tol_zero", "jobs", "B", "degree", "amplitude")
        return {k: getattr(self, k) for k in keys}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigParse(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--input", help="JSON file or inline JSON object (default: none)")
    common.add_argument("--output", help="write the JSON report here (default: stdout)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    common.add_argument("--n", type=int, default=1, help="half dimension (default: 1)")
    common.add_argument("--tau", type=float, default=None, help="path length (default: 1.0 for random paths, 2*pi otherwise)")
    common.add_argument("--kmax", type=int, default=4, help="largest iterate checked (default: 4)")
    common.add_argument("--modes", type=int, default=64, help="Fourier modes of the Galerkin matrix (default: 64)")
    common.add_argument("--steps", type=int, default=2048, help="integrator steps on [0, tau] (default: 2048)")
    common.add_argument("--tol-rank", type=float, default=1e-8, help="relative rank tolerance (default: 1e-8)")
    common.add_argument("--tol-zero", type=float, default=1e-9, help="zero eigenvalue tolerance (default: 1e-9)")
    common.add_argument("--no-timestamp", action="store_true", help="omit the timestamp from the report")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for seed sweeps (default: 1)")
    common.add_argument("--B", choices=B_CHOICES, default="random",
                        help="coefficient path when --input is absent (default: random)")
    common.add_argument("--degree", type=int, default=2, help="trigonometric degree of random paths (default: 2)")
    common.add_argument("--amplitude", type=float, default=3.0, help="norm bound of random paths (default: 3.0)")
    common.add_argument("--count", type=int, default=1, help="number of consecutive seeds for verify (default: 1)")
    common.add_argument("--csv", help="orbit: write the sampled trajectory here")

    parser = _Parser(prog="brakeindex", description="Maslov-type indices of brake symplectic paths.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    helps = {
        "index": "index suite of one coefficient path",
        "iterate": "indices of brake iterates and of the shifted double iterate",
        "verify": "check index identities, iteration formulas and inequalities",
        "morse": "Morse index of the truncated dual quadratic form",
        "orbit": "shoot and certify a brake orbit",
        "selftest": "run the built-in reference cases",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name], description=helps[name])
    return parser


def parse_config(argv: list[str] | None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(**{k: v for k, v in vars(ns).items()})
    if cfg.input is not None:
        text = cfg.input
        if not text.lstrip().startswith("{"):
            try:
                text = Path(text).read_text()
            except OSError as exc:
                raise ConfigParse(f"cannot read input: {exc}") from exc
        try:
            cfg.extra = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigParse(f"input is not valid JSON: {exc}") from exc
        if not isinstance(cfg.extra, dict):
            raise ConfigParse("input JSON must be an object")
    for name in ("n", "kmax", "modes", "steps", "jobs", "count"):
        if getattr(cfg, name) < 1:
            raise ConfigParse(f"--{name.replace('_', '-')} must be positive")
    return cfg


def _check_fields(data: dict, allowed: set, what: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigParse(f"unknown {what} fields: {sorted(unknown)}")


def _coefficient_path(cfg: RunConfig, data: dict | None) -> CoefficientPath:
    if data is not None:
        try:
            return path_from_json(data)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigParse(f"bad coefficient path: {exc}") from exc
    if cfg.B == "constant-identity":
        return constant_path(np.eye(2 * cfg.n), 2 * np.pi if cfg.tau is None else cfg.tau)
    return sample_coefficient_path(cfg.seed, cfg.n, cfg.degree, cfg.amplitude, 1.0 if cfg.tau is None else cfg.tau)


# ---------------------------------------------------------------------------
# subcommands


def cmd_index(cfg: RunConfig) -> tuple[dict, int]:
    _check_fields(cfg.extra, {"path", "thetas"}, "index input")
    B = _coefficient_path(cfg, cfg.extra.get("path"))
    g = matrizant(B, steps=cfg.steps)
    suite = index_suite(g, cfg.extra.get("thetas", ()), cfg.tol)
    return {"path": B.to_json(), "endpoint": matrix_to_json(g.end), "indices": suite_to_json(suite)}, EXIT_OK


def cmd_iterate(cfg: RunConfig) -> tuple[dict, int]:
    _check_fields(cfg.extra, {"path"}, "iterate input")
    B = _coefficient_path(cfg, cfg.extra.get("path"))
    g = matrizant(B, steps=cfg.steps)
    rows = []
    for k in range(1, cfg.kmax + 1):
        gk = brake_iterate(g, k)
        rep = maslov(gk, L0, cfg.tol)
        rows.append({"k": k, "tau": float(gk.tau), "endpoint": matrix_to_json(gk.end),
                     "L0": rep.to_json()})
    shifted = brake_iterate(tilde_shift(g), 2)
    rep = maslov(shifted, L0, cfg.tol)
    return {
        "path": B.to_json(),
        "iterates": rows,
        "shifted_double": {"endpoint": matrix_to_json(shifted.end), "L0": rep.to_json()},
    }, EXIT_OK


def _verify_seed(args: tuple) -> dict:
    seed, n, degree, amplitude, tau, steps, kmax, tol = args
    B = sample_coefficient_path(seed, n, degree, amplitude, tau)
    g = matrizant(B, steps=steps)
    desc = f"trig n={n} degree={degree} amplitude={amplitude} tau={tau}"
    return verify_all(g, kmax, tol, seed=seed, descriptor=desc).to_json()


def cmd_verify(cfg: RunConfig) -> tuple[dict, int]:
    _check_fields(cfg.extra, {"path"}, "verify input")
    if cfg.kmax > 8:
        raise ConfigParse("--kmax must not exceed 8")
    if "path" in cfg.extra:
        g = matrizant(_coefficient_path(cfg, cfg.extra["path"]), steps=cfg.steps)
        reports = [verify_all(g, cfg.kmax, cfg.tol, descriptor="input path").to_json()]
    else:
        tau = 1.0 if cfg.tau is None else cfg.tau
        jobs = [(s, cfg.n, cfg.degree, cfg.amplitude, tau, cfg.steps, cfg.kmax, cfg.tol)
                for s in range(cfg.seed, cfg.seed + cfg.count)]
        if cfg.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                reports = list(pool.map(_verify_seed, jobs))
        else:
            reports = [_verify_seed(j) for j in jobs]
    ok = all(r["ok"] for r in reports)
    return {"ok": ok, "reports": reports}, EXIT_OK if ok else EXIT_CLAIM


def verify_table(result: dict) -> str:
    lines = []
    for r in result["reports"]:
        lines.append(f"seed={r['seed']} {r['descriptor']} ok={r['ok']}")
        width = max(len(c["name"]) for c in r["claims"])
        for c in r["claims"]:
            status = "ok" if c["satisfied"] else "FAIL"
            lines.append(f"  {c['name']:<{width}}  {c['lhs']:>6}  {c['rhs']:>6}  {status}")
    return "\n".join(lines)


def cmd_morse(cfg: RunConfig) -> tuple[dict, int]:
    _check_fields(cfg.extra, {"B", "T", "Lambda", "modes"}, "morse input")
    T = float(cfg.extra.get("T", 2 * np.pi if cfg.tau is None else cfg.tau))
    B = _coefficient_path(cfg, cfg.extra.get("B"))
    lam = float(cfg.extra.get("Lambda", 0.0))
    modes = int(cfg.extra.get("modes", cfg.modes))
    forms = [dual_form(B, T, lam, m, tol=cfg.tol) for m in (modes, 2 * modes)]
    result = {
        "T": T,
        "Lambda": lam,
        "forms": [f.to_json() for f in forms],
        "stable": forms[0].morse_index == forms[1].morse_index,
        "morse_index": forms[0].morse_index,
    }
    if B.n and np.linalg.eigvalsh(B(np.linspace(0, T / 2, 257))[:, B.n:, B.n:]).min() > 0:
        result["conjugate_sum"] = conjugate_points(B, T / 2, cfg.steps, cfg.tol).total
    return result, EXIT_OK


def cmd_orbit(cfg: RunConfig) -> tuple[dict, int]:
    _check_fields(cfg.extra, {"hamiltonian", "T", "q0", "tolerances", "steps"}, "orbit input")
    try:
        H = hamiltonian_from_json(cfg.extra.get("hamiltonian", {"kind": "quartic", "n": 1}))
        T = float(cfg.extra.get("T", 5.0))
        q0 = np.atleast_1d(np.asarray(cfg.extra.get("q0", [1.0] * H.n), dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigParse(f"bad orbit input: {exc}") from exc
    tols = cfg.extra.get("tolerances", {})
    _check_fields(tols, {"shoot", "minimal_period"}, "tolerances")
    steps = int(cfg.extra.get("steps", 8192))
    orbit = shoot(H, T, q0, steps=steps, tol=float(tols.get("shoot", 1e-10)))
    cert = orbit_indices(orbit, modes=cfg.modes, tol=cfg.tol)
    phi, psi, gap = action_values(orbit, cert.lam or 0.0)
    k, period, note = minimal_period(orbit, float(tols.get("minimal_period", 1e-6)))
    if cfg.csv:
        with open(cfg.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *[f"p{i + 1}" for i in range(H.n)], *[f"q{i + 1}" for i in range(H.n)], "H"])
            for t, x in zip(orbit.times, orbit.states):
                w.writerow([repr(float(t)), *[repr(float(v)) for v in x], repr(float(H.value(x)))])
    result = {
        "orbit": orbit.to_json(),
        "certification": cert.to_json(),
        "action": {"primal": phi, "dual": psi, "sum": gap},
        "minimal_period": {"k": k, "period": period, "note": note},
    }
    return result, EXIT_OK


def cmd_selftest(cfg: RunConfig) -> tuple[dict, int]:
    _check_fields(cfg.extra, set(), "selftest input")
    checks = []
    shift = shift_endpoint_case()
    checks.append({
        "name": "shifted double iterate index change",
        "values": shift,
        "ok": shift["formula_index"] == shift["direct_index"] == -1
        and shift["formula_total"] == shift["direct_total"] == -1,
    })
    for n in range(1, 5):
        vals = graph_identity_triples(n)
        checks.append({"name": f"graph triple indices n={n}", "values": vals,
                       "ok": all(v == n for v in vals.values())})
    modes = primitive_mode_errors()
    checks.append({"name": "primitive operator modes", "values": modes,
                   "ok": all(m["primitive_error"] < 1e-14 and m["eigen_error"] < 1e-14 for m in modes)})
    ok = all(c["ok"] for c in checks)
    return {"ok": ok, "checks": checks}, EXIT_OK if ok else EXIT_CLAIM


COMMANDS = {
    "index": cmd_index,
    "iterate": cmd_iterate,
    "verify": cmd_verify,
    "morse": cmd_morse,
    "orbit": cmd_orbit,
    "selftest": cmd_selftest,
}


def _dump(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def run(cfg: RunConfig) -> int:
    """Execute one subcommand and write its report."""
    try:
        result, code = COMMANDS[cfg.subcommand](cfg)
    except ConfigParse as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        result, code = {"error": type(exc).__name__, "message": str(exc)}, EXIT_NUMERICAL
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
    except BrakeIndexError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    doc = {"command": cfg.subcommand, "config": cfg.public(), "result": result, "exit_code": code}
    if not cfg.no_timestamp:
        doc["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    text = _dump(doc)
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)
    if cfg.subcommand == "verify" and "reports" in result:
        print(verify_table(result), file=sys.stdout if cfg.output else sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigParse as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
