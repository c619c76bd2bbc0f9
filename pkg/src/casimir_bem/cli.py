"""Command-line entry point: ``casimir-bem <command> --config run.toml``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 resource cap.  Errors are reported on stderr as
``error: <category>: <message>``.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .assembly import assemble_M, assemble_Minf, dump_matrix
from .config import RunConfig, load_config
from .errors import ConfigError, NumericalError, ResourceLimitError
from .quadrature import casimir_energy, casimir_force, energy_integrand
from .spectral import log_det, log_det_inf
from .sweeps import run_rotation_landscape, run_separation_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_RESOURCE = 0, 2, 3, 4

SWEEP_COLUMNS = ("d", "F", "F_pfa", "ratio", "err")
LANDSCAPE_COLUMNS = ("theta1", "theta2", "dE", "err")
SAMPLE_COLUMNS = ("xi", "logdetM", "logdetMinf", "diff")
FORCE_SAMPLE_COLUMNS = ("xi", "trace")

log = logging.getLogger("casimir_bem")


def _fmt(x) -> str:
    return repr(float(x))


class _Output:
    """CSV to ``--out`` (or stdout) and summary lines that never mix with it."""

    def __init__(self, path: Path | None):
        self.path = path

    @contextlib.contextmanager
    def table(self, header):
        if self.path is None:
            w = csv.writer(sys.stdout, lineterminator="\n")
            w.writerow(header)
            yield w
            sys.stdout.flush()
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            yield w

    def summary(self, line: str):
        print(line, file=sys.stdout if self.path is not None else sys.stderr)


def _out(args, cfg: RunConfig, key: str) -> _Output:
    if args.out:
        return _Output(Path(args.out))
    p = cfg.sections.get("output", {}).get(key)
    return _Output(cfg.resolve(p) if p else None)


def _warn_unconverged(r):
    if not r.converged:
        print(f"warning: not-converged: xi integral error estimate {r.error:.3g} "
              f"after {r.n_evals} evaluations", file=sys.stderr)


def cmd_energy(cfg: RunConfig, args) -> int:
    r = casimir_energy(cfg.geometry, cfg.quad, cfg.assembly, record_logdets=True)
    out = _out(args, cfg, "samples")
    with out.table(SAMPLE_COLUMNS) as w:
        for s in sorted(r.samples, key=lambda s: s.xi):
            w.writerow([_fmt(s.xi), _fmt(s.logdet_M), _fmt(s.logdet_Minf), _fmt(s.value)])
    out.summary(f"energy {_fmt(r.value)} error {_fmt(r.error)} units {r.units} "
                f"evals {r.n_evals} converged {str(r.converged).lower()}")
    _warn_unconverged(r)
    return EXIT_OK


def cmd_force(cfg: RunConfig, args) -> int:
    body, axis = cfg.force_target()
    r = casimir_force(cfg.geometry, body, axis, cfg.quad, cfg.assembly)
    out = _out(args, cfg, "samples")
    with out.table(FORCE_SAMPLE_COLUMNS) as w:
        for xi, v in sorted(r.samples):
            w.writerow([_fmt(xi), _fmt(v)])
    label = cfg.geometry.bodies[body].label
    out.summary(f"force {_fmt(r.value)} error {_fmt(r.error)} units {r.units} body {label} "
                f"axis {' '.join(_fmt(a) for a in axis)} evals {r.n_evals} "
                f"converged {str(r.converged).lower()}")
    _warn_unconverged(r)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    rows = run_separation_sweep(cfg.sweep_plan(), cfg.quad, cfg.assembly)
    out = _out(args, cfg, "sweep")
    with out.table(SWEEP_COLUMNS) as w:
        for r in rows:
            w.writerow([_fmt(r.d), _fmt(r.F), _fmt(r.F_pfa), _fmt(r.ratio), _fmt(r.err)])
    failed = [r for r in rows if r.message]
    for r in failed:
        print(f"warning: point-failed: d={r.d}: {r.message}", file=sys.stderr)
    out.summary(f"sweep points {len(rows)} failed {len(failed)}")
    return EXIT_OK


def cmd_landscape(cfg: RunConfig, args) -> int:
    res = run_rotation_landscape(cfg.landscape_plan(), cfg.quad, cfg.assembly)
    out = _out(args, cfg, "landscape")
    with out.table(LANDSCAPE_COLUMNS) as w:
        for row in res.rows():
            w.writerow([_fmt(x) for x in row])
    for p, msg in res.failures.items():
        print(f"warning: point-failed: theta={p}: {msg}", file=sys.stderr)
    out.summary(f"landscape points {len(res.dE)} argmin {res.argmin[0]} {res.argmin[1]} "
                f"converged {str(res.converged).lower()}")
    return EXIT_OK


def cmd_integrand(cfg: RunConfig, args) -> int:
    xi = args.xi
    if xi is None:
        raise ConfigError("integrand needs --xi")
    if not xi > 0:
        raise ConfigError("--xi must be positive")
    g = cfg.geometry
    M = assemble_M(g, xi, cfg.assembly)
    Minf = assemble_Minf(g, xi, cfg.assembly)
    if args.dump_matrix:
        dump_matrix(args.dump_matrix, M)
    sm, ldm = log_det(M)
    si, ldi = log_det_inf(Minf)
    if sm != si:
        raise NumericalError("det M and det Minf have opposite signs")
    diff = energy_integrand(g, xi, cfg.assembly).value
    out = _out(args, cfg, "integrand")
    with out.table(SAMPLE_COLUMNS) as w:
        w.writerow([_fmt(xi), _fmt(ldm), _fmt(ldi), _fmt(diff)])
    out.summary(f"integrand xi {_fmt(xi)} logdetM {_fmt(ldm)} logdetMinf {_fmt(ldi)} "
                f"diff {_fmt(diff)} dimension {M.dimension}")
    return EXIT_OK


COMMANDS = {
    "energy": cmd_energy,
    "force": cmd_force,
    "sweep": cmd_sweep,
    "landscape": cmd_landscape,
    "integrand": cmd_integrand,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="casimir-bem",
        description="Casimir energies and forces between arbitrary bodies by the "
                    "fluctuating-surface-current boundary element method.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="TOML run description")
    p.add_argument("--out", help="CSV output path (default: stdout or [output] section)")
    p.add_argument("--workers", type=int, help="threads for frequency points")
    p.add_argument("--tolerance", type=float, help="relative tolerance of the xi integral")
    p.add_argument("--max-xi-evals", type=int, help="budget of integrand evaluations")
    p.add_argument("--xi", type=float, help="frequency (1/um) for the integrand command")
    p.add_argument("--dump-matrix", help="write M at --xi as raw little-endian float64")
    p.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    kw = {}
    if args.workers is not None:
        kw["workers"] = args.workers
    if args.tolerance is not None:
        kw["rtol"] = args.tolerance
    if args.max_xi_evals is not None:
        kw["max_evals"] = args.max_xi_evals
    if kw:
        try:
            cfg.quad = replace(cfg.quad, samples=[], **kw)
        except ValueError as exc:
            raise ConfigError(f"command-line override: {exc}") from exc
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: config-error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical-failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ResourceLimitError, MemoryError) as exc:
        print(f"error: resource-limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
