"""Batch driver: solver runs, dissociation scans, residual trajectories.

Everything emitted is plain data (JSON or CSV) with a fixed field order and
no timestamps, so identical inputs and seeds reproduce byte-identical
files.  Exit codes: 0 for a converged run, 2 for a run that terminated
without meeting its residual tolerance (stalled or out of budget), 1 for
unusable input.
"""

from __future__ import annotations

import argparse
import fnmatch
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .evolution import RESET_MODES, DilationPolicy, EstimatorConfig
from .fock import SparseOperator, StateVector
from .hamiltonian import build_hamiltonian, list_fixtures, load_fixture, parse_fcidump
from .models import (
    PairingModel,
    SpherePoint,
    build_pairing_hamiltonian,
    equator_state,
    sphere_state,
)
from .oracle import fci_solve
from .residuals import RESIDUAL_VARIANTS, energy
from .solver import (
    EXECUTION_MODES,
    LINE_SEARCH_KINDS,
    CqeConfig,
    LineSearch,
    cqe_run,
    hf_state,
)

__all__ = ["main", "build_parser"]

SCAN_COLUMNS = (
    "geometry_label",
    "E_hf",
    "E_fci",
    "E_cqe",
    "iterations",
    "final_residual_norm",
    "final_variance",
)
STUDY_COLUMNS = ("variant", "n", "norm2", "variance")


class CliError(Exception):
    """Input problem; maps to exit code 1 and produces no output file."""


# ---------------------------------------------------------------------------
# flag parsing helpers
# ---------------------------------------------------------------------------


def _parse_line_search(text: str) -> LineSearch:
    kind, _, rest = text.partition(":")
    if kind not in LINE_SEARCH_KINDS:
        raise CliError(f"unknown line search {kind!r}; expected one of {LINE_SEARCH_KINDS}")
    try:
        eta0 = float(rest) if rest else 0.5
        return LineSearch(kind=kind, eta0=eta0)
    except ValueError as exc:
        raise CliError(f"bad line search spec {text!r}: {exc}") from exc


def _parse_pairing(text: str) -> PairingModel:
    parts = text.split(",")
    if len(parts) != 4:
        raise CliError("pairing constants must be four comma-separated numbers e0,e1,e3,t")
    try:
        e0, e1, e3, t = (float(p) for p in parts)
        return PairingModel(e0, e1, e3, t)
    except ValueError as exc:
        raise CliError(f"bad pairing constants {text!r}: {exc}") from exc


def _initial_state(spec: str, ham: SparseOperator, model: PairingModel | None) -> StateVector | None:
    kind, _, rest = spec.partition(":")
    if kind == "hf":
        return None  # cqe_run falls back to the mean-field seed
    if kind == "fci":
        _, (ground,) = fci_solve(ham)
        return ground
    if kind in ("equator", "sphere"):
        if model is None:
            raise CliError(f"init {spec!r} needs --model pairing")
        try:
            if kind == "equator":
                return equator_state(model, float(rest))
            g, m, x = (float(p) for p in rest.split(","))
            norm = float(np.sqrt(g * g + m * m + x * x))
            if norm == 0.0:
                raise ValueError("zero vector")
            return sphere_state(model, SpherePoint(g / norm, m / norm, x / norm))
        except ValueError as exc:
            raise CliError(f"bad init spec {spec!r}: {exc}") from exc
    raise CliError(f"unknown init {spec!r}; expected hf, fci, equator:THETA or sphere:G,M,X")


def _label(name: str) -> str:
    return name[: -len(".fcidump")] if name.endswith(".fcidump") else name


def _resolve_fcidump(token: str):
    """A token is a readable file path or a packaged fixture stem."""
    path = Path(token)
    if path.is_file():
        return parse_fcidump(path.read_text()), _label(path.name)
    try:
        return load_fixture(token), _label(Path(token).name)
    except FileNotFoundError as exc:
        raise CliError(str(exc)) from exc


def _build_source(args):
    """Returns (hamiltonian, model-or-None, label)."""
    if args.model is not None:
        if args.model != "pairing":
            raise CliError(f"unknown model {args.model!r}; only 'pairing' is built in")
        model = _parse_pairing(args.pairing_constants)
        return build_pairing_hamiltonian(model), model, "pairing"
    if args.fcidump is None:
        raise CliError("pick an input: --fcidump PATH/NAME or --model pairing")
    integrals, label = _resolve_fcidump(args.fcidump)
    return build_hamiltonian(integrals), None, label


def _build_config(args) -> CqeConfig:
    estimator = None
    if args.execution == "sampled" or args.shots is not None:
        estimator = EstimatorConfig(
            variant=args.variant, delta=args.delta, shots=args.shots, seed=args.seed
        )
    dilation = DilationPolicy(
        epsilon=args.epsilon,
        reset_mode=args.reset_mode,
        wolfe_c1=1e-4,
        max_steps_between_resets=args.reset_cap,
    )
    try:
        return CqeConfig(
            variant=args.variant,
            execution=args.execution,
            max_iterations=args.max_iterations,
            residual_tolerance=args.tolerance,
            line_search=_parse_line_search(args.line_search),
            estimator=estimator,
            dilation=dilation,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _write_text(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _record_dict(rec) -> dict:
    d = asdict(rec)
    d.pop("wall_time")  # measured but excluded: keeps equal-seed reruns byte-identical
    return d


def _config_dict(config: CqeConfig, init: str, seed) -> dict:
    d = asdict(config)
    d["init"] = init
    d["seed"] = seed
    return d


def cmd_run(args) -> int:
    ham, model, label = _build_source(args)
    config = _build_config(args)
    initial = _initial_state(args.init, ham, model)
    try:
        result = cqe_run(ham, config, initial=initial)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    (fci_energy,), _ = fci_solve(ham)
    document = {
        "source": label,
        "config": _config_dict(config, args.init, args.seed),
        "iterations": [_record_dict(rec) for rec in result.iterations],
        "final_energy": result.energy,
        "final_residual_norm": result.residual_norm,
        "final_variance": result.variance,
        "final_success_prob": result.success_prob,
        "fci_energy": fci_energy,
        "status": result.status,
    }
    _write_text(args.output, json.dumps(document, indent=2) + "\n")
    return 0 if result.status == "converged" else 2


def _scan_points(patterns) -> list[str]:
    known = list_fixtures()
    points: list[str] = []
    for pattern in patterns:
        if Path(pattern).is_file():
            points.append(pattern)
            continue
        hits = [name for name in known if fnmatch.fnmatch(name, pattern)]
        if not hits and pattern in known:
            hits = [pattern]
        points.extend(hits)
    if not points:
        raise CliError(f"no scan points match {list(patterns)!r}; known fixtures: {known}")
    seen = set()
    unique = []
    for p in points:
        if p not in seen:
            seen.add(p)
            unique.append(p)
    return unique


def cmd_scan(args) -> int:
    points = _scan_points(args.fixtures)
    config = _build_config(args)
    rows = []
    for token in points:
        try:
            integrals, label = _resolve_fcidump(token)
            ham = build_hamiltonian(integrals)
            (e_fci,), _ = fci_solve(ham)
            e_hf = energy(ham, hf_state(ham))
            result = cqe_run(ham, config)
        except (ValueError, RuntimeError) as exc:
            raise CliError(f"scan point {token!r} failed: {exc}") from exc
        rows.append(
            (label, e_hf, e_fci, result.energy, len(result.iterations),
             result.residual_norm, result.variance)
        )
    lines = [",".join(SCAN_COLUMNS)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    _write_text(args.output, "\n".join(lines) + "\n")
    return 0


def cmd_residual_study(args) -> int:
    integrals, label = _resolve_fcidump(args.fixture)
    ham = build_hamiltonian(integrals)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        if v not in RESIDUAL_VARIANTS:
            raise CliError(f"unknown variant {v!r}; expected one of {RESIDUAL_VARIANTS}")
    if not variants:
        raise CliError("need at least one variant")
    norm_field = {"cse": "norm_r", "hcse": "norm_s", "acse": "norm_a"}
    lines = [",".join(STUDY_COLUMNS)]
    for variant in variants:
        config = CqeConfig(
            variant=variant,
            max_iterations=args.max_iterations,
            residual_tolerance=args.tolerance,
            line_search=_parse_line_search(args.line_search),
        )
        initial = _initial_state(args.init, ham, None)
        result = cqe_run(ham, config, initial=initial)
        for rec in result.iterations:
            norm2 = getattr(rec, norm_field[variant]) ** 2
            lines.append(f"{variant},{rec.n},{norm2},{rec.variance}")
    _write_text(args.output, "\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------


def _add_solver_flags(p: argparse.ArgumentParser):
    p.add_argument("--variant", choices=RESIDUAL_VARIANTS, default="cse")
    p.add_argument("--tolerance", type=float, default=1e-6, help="residual Frobenius-norm target")
    p.add_argument("--max-iterations", type=int, default=200)
    p.add_argument("--line-search", default="backtracking",
                   help="fixed:ETA | backtracking[:ETA0] | golden[:ETA_MAX]")
    p.add_argument("--output", default=None, help="write here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cqesim",
        description="contracted-equation eigensolver runs over FCIDUMP fixtures and models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one solver run, JSON report")
    run.add_argument("--fcidump", default=None, help="FCIDUMP file path or packaged fixture name")
    run.add_argument("--model", default=None, help="built-in model name (pairing)")
    run.add_argument("--pairing-constants", default="0,1,2,0.5", help="e0,e1,e3,t")
    run.add_argument("--execution", choices=EXECUTION_MODES, default="exact")
    run.add_argument("--shots", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--delta", type=float, default=None, help="probe step for the estimator")
    run.add_argument("--epsilon", type=float, default=0.5, help="dilated V-step cap")
    run.add_argument("--reset-mode", choices=RESET_MODES, default="wolfe")
    run.add_argument("--reset-cap", type=int, default=10, help="V-steps between forced resets")
    run.add_argument("--init", default=None,
                     help="hf | fci | equator:THETA | sphere:G,M,X (default hf; equator:0.3 for --model pairing)")
    _add_solver_flags(run)
    run.set_defaults(func=cmd_run)

    scan = sub.add_parser("scan", help="per-fixture summary CSV across a geometry family")
    scan.add_argument("--fixtures", nargs="+", required=True,
                      help="fixture name globs (h2_*) or FCIDUMP paths")
    scan.add_argument("--execution", choices=EXECUTION_MODES, default="exact")
    scan.add_argument("--shots", type=int, default=None)
    scan.add_argument("--seed", type=int, default=None)
    scan.add_argument("--delta", type=float, default=None)
    scan.add_argument("--epsilon", type=float, default=0.5)
    scan.add_argument("--reset-mode", choices=RESET_MODES, default="wolfe")
    scan.add_argument("--reset-cap", type=int, default=10)
    _add_solver_flags(scan)
    scan.set_defaults(func=cmd_scan)

    study = sub.add_parser("residual-study", help="per-iteration residual norms and variances CSV")
    study.add_argument("--fixture", required=True, help="FCIDUMP path or packaged fixture name")
    study.add_argument("--variants", default="cse,hcse,acse", help="comma list of channels")
    study.add_argument("--init", default="hf")
    _add_solver_flags(study)
    study.set_defaults(func=cmd_residual_study)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad flags; report input error
        return 0 if exc.code in (0, None) else 1
    if hasattr(args, "init") and args.init is None:
        args.init = "equator:0.3" if getattr(args, "model", None) == "pairing" else "hf"
    if not hasattr(args, "execution"):
        args.execution = "exact"
    for name, default in (("shots", None), ("seed", None), ("delta", None),
                          ("epsilon", 0.5), ("reset_mode", "wolfe"), ("reset_cap", 10)):
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
