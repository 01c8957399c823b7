"""Command-line front end.

Subcommands
-----------
``run``      estimate eigenvalues of a matrix file, write a JSON report
``sweep``    repeat a run over one parameter axis, write a CSV table
``fixture``  write a deterministic test matrix

Errors are printed to stderr as one JSON object and mapped to exit codes
(see :mod:`eigenpower.errors`). Nothing is written to ``--out`` on failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from dataclasses import dataclass, replace

from .eigensolve import (
    EigenReport,
    krylov_few_eigenvalues,
    quantum_estimate_max,
    quantum_estimate_min,
    quantum_estimate_shifted,
    select_k,
    with_bound,
)
from .errors import BadParams, EigenpowerError
from .fixtures import FIXTURE_KINDS, generate_fixture, load_matrix, matrix_to_json, write_text_atomic
from .linalg import HermitianMatrix, inverse, shift
from .pipeline import BACKENDS, VARIANTS, PipelineConfig
from .qpe import CLOCK_STATES, PhaseConfig

MODES = ("max", "min", "shift", "krylov")
SWEEP_AXES = ("k", "shots", "b", "p")
CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = (
    "schema_version",
    "axis",
    "value",
    "status",
    "lambda_estimate",
    "oracle_value",
    "multiplicative_error",
    "std_error",
    "k_used",
    "bound_value",
    "evolutions",
    "uncompute_evolutions",
    "rotations",
    "qft_calls",
    "clock_preparations",
    "shots",
    "error",
)
D_MARGIN = 1.25


@dataclass(frozen=True)
class RunConfig:
    mode: str = "max"
    k: int | None = None
    delta: float = 1e-2
    C: float | None = None
    D: float | None = None
    D_inverse: float | None = None
    bits: int = 6
    t0: float | None = None
    clock: str = "sine"
    shots: int = 0
    variant: str = "improved"
    backend: str = "analytic"
    seed: int = 0
    m: int = 1
    c: float = 0.0
    blocks: int = 1
    blind: bool = False

    def validate(self) -> None:
        if self.mode not in MODES:
            raise BadParams(f"mode must be one of {MODES}")
        if self.k is not None and self.k < 1:
            raise BadParams("k must be >= 1")
        if not self.delta > 0:
            raise BadParams("delta must be positive")
        if self.shots < 0:
            raise BadParams("shots must be >= 0")
        if self.m < 1 or self.blocks < 1:
            raise BadParams("m and blocks must be >= 1")


def pipeline_config(rc: RunConfig, a: HermitianMatrix, k: int) -> PipelineConfig:
    """Resolve defaults against the matrix: ``D`` gets a 25% margin over the spectral radius."""
    D = rc.D
    if D is None:
        lam = a.eig.eigenvalues
        radius = float(abs(lam - rc.c).max()) if rc.mode == "shift" else abs(a.eig.dominant)
        D = D_MARGIN * radius if radius > 0 else 1.0
    phase = PhaseConfig(b=rc.bits, D=D, t0=rc.t0, clock=rc.clock)
    return PipelineConfig(k=k, phase=phase, C=rc.C, variant=rc.variant, backend=rc.backend, x0_seed=rc.seed)


def execute(rc: RunConfig, a: HermitianMatrix) -> EigenReport:
    rc.validate()
    probe = pipeline_config(rc, a, rc.k or 1)
    notes: list[str] = []
    k = rc.k
    if k is None:
        target, sel_cfg = a, probe
        if rc.mode == "shift":
            target = shift(a, rc.c)
        elif rc.mode == "min":
            # k is chosen for the iteration that actually runs, on A^-1
            target = inverse(a)
            sel_cfg = with_bound(probe, rc.D_inverse or D_MARGIN * abs(target.eig.dominant))
        k, notes = select_k(target, sel_cfg, rc.delta, blind=rc.blind, shots=rc.shots, seed=rc.seed)
    cfg = replace(probe, k=k)
    if rc.mode == "max":
        report = quantum_estimate_max(a, cfg, rc.shots, seed=rc.seed, delta=rc.delta)
    elif rc.mode == "min":
        report = quantum_estimate_min(a, cfg, rc.shots, d_inverse=rc.D_inverse, seed=rc.seed, delta=rc.delta)
    elif rc.mode == "shift":
        report = quantum_estimate_shifted(a, rc.c, cfg, rc.shots, seed=rc.seed, delta=rc.delta)
    else:
        report = krylov_few_eigenvalues(a, cfg, rc.m, rc.shots, blocks=rc.blocks, seed=rc.seed, delta=rc.delta)
    report.warnings.extend(notes)
    selection = "fixed" if rc.k else ("blind" if rc.blind else "bound")
    report.config.update({"delta": rc.delta, "shots": rc.shots, "seed": rc.seed, "k_selection": selection})
    return report


def _add_run_args(p: argparse.ArgumentParser, require_matrix: bool = True) -> None:
    p.add_argument("--matrix", required=require_matrix, help="matrix JSON file")
    p.add_argument("--mode", choices=MODES, default="max")
    p.add_argument("--k", type=int, default=None, help="power-method iterations (default: from the convergence bound)")
    p.add_argument("--delta", type=float, default=1e-2, help="target multiplicative error")
    p.add_argument("--C", type=float, default=None, help="rotation constant (default 1/D)")
    p.add_argument("--D", type=float, default=None, help="spectral bound (default 1.25 x spectral radius)")
    p.add_argument("--D-inverse", dest="D_inverse", type=float, default=None, help="spectral bound of A^-1 in min mode")
    p.add_argument("--bits", type=int, default=6, help="clock register qubits")
    p.add_argument("--t0", type=float, default=None, help="evolution time per clock step (default pi/D)")
    p.add_argument("--clock", choices=CLOCK_STATES, default="sine")
    p.add_argument("--shots", type=int, default=0, help="Hadamard-test shots per overlap component (0 = exact)")
    p.add_argument("--variant", choices=VARIANTS, default="improved")
    p.add_argument("--backend", choices=BACKENDS, default="analytic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=int, default=1, help="eigenvalues to return in krylov mode")
    p.add_argument("--c", type=float, default=0.0, help="shift in shift mode")
    p.add_argument("--blocks", type=int, default=1, help="starting vectors in krylov mode")
    p.add_argument("--blind", action="store_true", help="choose k by doubling instead of from the bound")
    p.add_argument("--out", default=None, help="output path (default stdout)")


def _run_config(ns: argparse.Namespace) -> RunConfig:
    fields = RunConfig.__dataclass_fields__
    return RunConfig(**{name: getattr(ns, name) for name in fields if hasattr(ns, name)})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eigenpower", description="Quantum power-method eigenvalue estimation.")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_args(sub.add_parser("run", help="estimate eigenvalues and write a JSON report"))

    sw = sub.add_parser("sweep", help="repeat a run over one axis and write CSV")
    _add_run_args(sw, require_matrix=False)
    sw.add_argument("--sweep-axis", choices=SWEEP_AXES, required=True)
    sw.add_argument("--sweep-values", required=True, help="comma-separated values")
    sw.add_argument("--n", type=int, default=8, help="fixture size for the p axis")

    fx = sub.add_parser("fixture", help="write a deterministic test matrix")
    fx.add_argument("--kind", choices=FIXTURE_KINDS, required=True)
    fx.add_argument("--n", type=int, required=True)
    fx.add_argument("--seed", type=int, default=0)
    fx.add_argument("--values", default=None, help="comma-separated diagonal (diagonal kind)")
    fx.add_argument("--p", type=float, default=None, help="gap ratio (gapped kind)")
    fx.add_argument("--top", type=float, default=1.0, help="dominant eigenvalue (gapped kind)")
    fx.add_argument("--scale", type=float, default=1.0, help="entry scale (random_hermitian kind)")
    fx.add_argument("--out", default=None)
    return parser


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        write_text_atomic(out, text)


def _parse_values(raw: str, axis: str) -> list:
    cast = float if axis == "p" else int
    try:
        values = [cast(v) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise BadParams(f"bad --sweep-values for axis {axis}: {raw!r}") from exc
    if not values:
        raise BadParams("--sweep-values is empty")
    return values


def _csv_row(axis: str, value, report: EigenReport | None, error: EigenpowerError | None) -> dict:
    row = dict.fromkeys(CSV_COLUMNS, "")
    row.update({"schema_version": CSV_SCHEMA_VERSION, "axis": axis, "value": value})
    if report is None:
        row.update({"status": "failed", "error": f"{type(error).__name__}: {error}"})
        return row
    res = report.resources
    row.update(
        {
            "status": "ok",
            "lambda_estimate": repr(report.lambda_estimates[0]),
            "oracle_value": repr(report.oracle_values[0]),
            "multiplicative_error": repr(report.multiplicative_error),
            "std_error": repr(report.std_error),
            "k_used": report.k_used,
            "bound_value": "" if report.bound is None else repr(report.bound.value(report.k_used)),
        }
    )
    for key in ("evolutions", "uncompute_evolutions", "rotations", "qft_calls", "clock_preparations", "shots"):
        row[key] = res.get(key, "")
    return row


def sweep(rc: RunConfig, a: HermitianMatrix | None, axis: str, values, n: int = 8) -> str:
    """CSV text with one row per value; failing rows are marked and skipped over."""
    if axis not in SWEEP_AXES:
        raise BadParams(f"sweep axis must be one of {SWEEP_AXES}")
    if axis != "p" and a is None:
        raise BadParams(f"axis {axis} needs --matrix")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for v in values:
        try:
            if axis == "p":
                row_rc, mat = rc, generate_fixture("gapped", n, rc.seed, {"p": v})
            else:
                field = {"k": "k", "shots": "shots", "b": "bits"}[axis]
                row_rc, mat = replace(rc, **{field: v}), a
            writer.writerow(_csv_row(axis, v, execute(row_rc, mat), None))
        except EigenpowerError as exc:
            writer.writerow(_csv_row(axis, v, None, exc))
    return buf.getvalue()


def _fail(exc: EigenpowerError) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return exc.exit_code


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if ns.command == "fixture":
                params = {"p": ns.p, "top": ns.top, "scale": ns.scale}
                if ns.values is not None:
                    params["values"] = [float(v) for v in ns.values.split(",")]
                text = matrix_to_json(generate_fixture(ns.kind, ns.n, ns.seed, params))
            elif ns.command == "run":
                text = execute(_run_config(ns), load_matrix(ns.matrix)).to_json()
            else:
                rc = _run_config(ns)
                rc.validate()
                values = _parse_values(ns.sweep_values, ns.sweep_axis)
                a = load_matrix(ns.matrix) if ns.matrix else None
                text = sweep(rc, a, ns.sweep_axis, values, ns.n)
        _emit(text, ns.out)
    except EigenpowerError as exc:
        return _fail(exc)
    except ValueError as exc:
        return _fail(BadParams(str(exc)))
    return 0


def entry_point() -> None:
    sys.exit(main())
