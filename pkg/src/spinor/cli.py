"""``spinor`` command-line entry point.

Exit codes: 0 success, 1 parse or compile error, 2 tolerance failure,
64 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import oracle, spectra
from .core import SPIN_DOWN
from .propagator import rf_propagator
from .sequence import SequenceError, parse_sequence, run_program
from .suscept import chi_from_state

EXIT_OK, EXIT_PARSE, EXIT_TOLERANCE, EXIT_USAGE = 0, 1, 2, 64
VALIDATE_BUILDERS = ("static", "rf", "rotation", "rest", "general")
TABLE_SCHEMA = "spinor-table/1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    def flags(suppress: bool):
        g = argparse.ArgumentParser(add_help=False)
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g.add_argument("--seed", type=int, default=d(None), help="RNG seed (overrides SPINOR_SEED)")
        g.add_argument("--out-dir", type=Path, default=d(Path(".")), help="directory for output files")
        g.add_argument("--format", choices=("csv", "json"), default=d("csv"), help="format of data tables")
        return g

    # flags may go before or after the subcommand; the subcommand copy must not reset them
    common = flags(True)
    p = _Parser(prog="spinor", description="Spin-1/2 dynamics simulator.", parents=[flags(False)])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", parents=[common], help="execute a sequence file")
    r.add_argument("file", type=Path)

    s = sub.add_parser("spectrum", parents=[common], help="DFT of an FID CSV file")
    s.add_argument("file", type=Path)
    s.add_argument("--convention", choices=spectra.CONVENTIONS, default="negative-frequency-folded")
    s.add_argument("--method", choices=("auto", "direct", "fft"), default="auto")

    v = sub.add_parser("validate", parents=[common], help="closed forms against the RK4 oracle")
    v.add_argument("--draws", type=int, default=200, help="random draws per builder")

    e = sub.add_parser("experiments", parents=[common], help="canned experiments")
    e.add_argument("name", choices=sorted(spectra.EXPERIMENTS) + ["all"])

    w = sub.add_parser("sweep", parents=[common], help="parameter sweep")
    w.add_argument("--param", required=True, choices=("pulse-duration", "omega-x"))
    w.add_argument("--from", dest="start", type=float, required=True)
    w.add_argument("--to", dest="stop", type=float, required=True)
    w.add_argument("--steps", type=int, required=True)
    w.add_argument("--omega0", type=float, default=2 * math.pi * 1e5)
    w.add_argument("--omega1", type=float, default=2 * math.pi * 1e3)
    return p


def resolve_seed(cli_seed, file_seed=None) -> int:
    """``--seed`` first, then the file's own seed, then ``SPINOR_SEED``, then 0."""
    if cli_seed is not None:
        return cli_seed
    if file_seed is not None:
        return file_seed
    env = os.environ.get("SPINOR_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"SPINOR_SEED must be an integer, got {env!r}") from None


def table_text(first, values, header: str, fmt: str) -> str:
    if fmt == "csv":
        return spectra.to_csv(first, values, header)
    rows = [[float(a), float(z.real), float(z.imag)] for a, z in zip(first, np.asarray(values, dtype=complex))]
    return json.dumps({"schema": TABLE_SCHEMA, "header": [header, "re", "im"], "rows": rows}, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


# --- subcommands -----------------------------------------------------------------


def cmd_run(a) -> int:
    res = parse_sequence(_read(a.file))
    for d in res.diagnostics:
        print(d.format(str(a.file)), file=sys.stderr)
    if not res.ok:
        return EXIT_PARSE
    seed = resolve_seed(a.seed, res.program.ensemble.seed if res.program.ensemble else None)
    try:
        out = run_program(res.program, seed)
    except SequenceError as exc:
        print(exc.diagnostic.format(str(a.file)), file=sys.stderr)
        return EXIT_PARSE
    stem = a.file.stem
    _write(a.out_dir / f"{stem}.fid.{a.format}", table_text(out.fid.times, out.fid.samples, "t", a.format))
    _write(a.out_dir / f"{stem}.report.json", out.report.to_json())
    print(f"run {a.file}: {len(out.fid.samples)} samples, gamma*hbar = {out.compiled.constants.gamma_hbar:.6g}")
    return EXIT_OK


def cmd_spectrum(a) -> int:
    try:
        fid = spectra.fid_from_csv(_read(a.file))
    except ValueError as exc:
        print(f"{a.file}: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    spec = spectra.spectrum_of(fid, a.convention, a.method)
    order = np.argsort(spec.frequencies, kind="stable")
    _write(a.out_dir / f"{a.file.stem}.spectrum.{a.format}",
           table_text(spec.frequencies[order], spec.bins[order], "f", a.format))
    print(f"spectrum {a.file}: {len(spec.bins)} bins, df = {spec.df:.6g} Hz")
    return EXIT_OK


def validation_reports(seed: int, draws: int):
    rng = np.random.Generator(np.random.Philox(seed))
    out = []
    for b in VALIDATE_BUILDERS:
        params, t = oracle.random_draws(b, draws, rng)
        out.append(oracle.compare_closed_form(b, params, t))
    return out


def cmd_validate(a) -> int:
    if a.draws < 1:
        raise UsageError("--draws must be >= 1")
    seed = resolve_seed(a.seed)
    reports = validation_reports(seed, a.draws)
    ok = all(r.passed for r in reports)
    doc = {
        "schema": spectra.REPORT_SCHEMA,
        "name": "validate",
        "passed": ok,
        "seed": seed,
        "draws_per_builder": a.draws,
        "builders": [r.to_dict() for r in reports],
    }
    _write(a.out_dir / "validate.report.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    for r in reports:
        print(f"{r.builder:9s} {'PASS' if r.passed else 'FAIL'}  max error {r.max_entry_error:.3e}  "
              f"norm drift {r.max_norm_drift:.3e}")
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_experiments(a) -> int:
    names = sorted(spectra.EXPERIMENTS) if a.name == "all" else [a.name]
    with ThreadPoolExecutor(max_workers=len(names)) as pool:
        reports = list(pool.map(lambda n: spectra.EXPERIMENTS[n](), names))
    for n, r in zip(names, reports):
        _write(a.out_dir / f"{n}.report.json", r.to_json())
        print(f"{n}: {'PASS' if r.passed else 'FAIL'}" + (f" ({r.reason})" if r.reason else ""))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_TOLERANCE


def sweep_values(param: str, xs, omega0: float, omega1: float) -> np.ndarray:
    if param == "pulse-duration":
        return np.array([chi_from_state(rf_propagator(omega0, omega0, omega1, float(x)).apply(SPIN_DOWN))
                         for x in xs])
    f0 = abs(omega0) / (2 * math.pi)
    n = 256
    duration = 16 / f0
    out = []
    for wx in xs:
        fid = spectra.synthesize_fid(spectra.RfSource(1.0, 1.0, float(wx), omega0), duration, n)
        spec = spectra.spectrum_of(fid, "negative-frequency-folded")
        out.append(spec.bins[spec.bin_of(math.copysign(f0, omega0))])
    return np.array(out)


def cmd_sweep(a) -> int:
    if a.steps < 2:
        raise UsageError("--steps must be >= 2")
    xs = np.linspace(a.start, a.stop, a.steps)
    vals = sweep_values(a.param, xs, a.omega0, a.omega1)
    i = int(np.argmax(np.abs(vals)))
    _write(a.out_dir / f"sweep-{a.param}.{a.format}", table_text(xs, vals, "x", a.format))
    doc = {
        "schema": spectra.REPORT_SCHEMA,
        "name": f"sweep-{a.param}",
        "passed": True,
        "argmax": float(xs[i]),
        "max_magnitude": float(abs(vals[i])),
        "steps": a.steps,
    }
    _write(a.out_dir / f"sweep-{a.param}.report.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"sweep {a.param}: maximum |value| {abs(vals[i]):.6g} at {xs[i]:.6g}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "spectrum": cmd_spectrum,
    "validate": cmd_validate,
    "experiments": cmd_experiments,
    "sweep": cmd_sweep,
}


def run_cli(argv=None) -> int:
    try:
        a = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[a.command](a)
    except UsageError as exc:
        print(f"spinor: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
