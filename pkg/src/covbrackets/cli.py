"""Command line interface.

Subcommands
-----------
analyze   run the constraint algorithm and report the final subspace
bracket   compute brackets for the observable pairs of a configuration
evolve    evolve a random horizontal datum and write the discretized section
verify    run the invariant suite

Exit codes: 0 success, 1 validation error, 2 invariant failure, 3 internal error.
Per-pair bracket errors (gauge-variant observables, out-of-window times)
are reported as rows of the bracket table and do not fail the run.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import subprocess
import sys
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np

from . import io as cio
from .brackets import bracket_batch
from .config import load_config
from .errors import CovBracketError, GaugeVariantObservable, InvariantError, ValidationError
from .pipeline import Session
from .verify import verify

EXIT_OK, EXIT_VALIDATION, EXIT_INVARIANT, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("covbrackets")


def package_version():
    """``git describe`` of the source tree, or the installed version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True, text=True, timeout=5, check=True,
        )
        return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        try:
            return metadata.version("artifact")
        except metadata.PackageNotFoundError:
            return "unknown"


def _header(session, stable):
    out = {
        "version": package_version(),
        "config_hash": session.config.digest(),
        "model": session.config.model.kind,
    }
    if not stable:
        out["timings"] = {k: round(v, 6) for k, v in session.timings.items()}
    return out


def _formats(session, args):
    return [args.format] if args.format else list(session.config.output.formats)


def _emit(session, args, name, render):
    """Write ``render(fmt)`` for each requested format.

    With an output directory (``--out`` or the config's ``output.dir``) files
    are named ``<name>.<fmt>``; otherwise the first format goes to stdout.
    """
    formats = _formats(session, args)
    out_dir = args.out if args.out is not None else session.config.output.dir
    if out_dir is None:
        sys.stdout.write(render(formats[0]))
        return None
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    for fmt in formats:
        (path / f"{name}.{fmt}").write_text(render(fmt), encoding="utf-8")
    return path


def _table_csv(rows, fields):
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def cmd_analyze(session, args):
    chain = session.chain
    sv = np.linalg.svd(chain.omega_final, compute_uv=False) if chain.dim else np.zeros(0)
    nz = sv[sv > 1e-10 * sv[0]] if sv.size else sv
    report = {
        "ambient_dim": session.model.dim,
        "final_dim": chain.dim,
        "iterations": chain.iterations,
        "chain_dims": [s.dim for s in chain.chain],
        "constraints_per_step": [int(s.rows.shape[0]) for s in chain.constraints],
        "classification": str(chain.classification),
        "kernel_dim": chain.kernel_final.dim,
        "pinned": len(chain.pinned),
        "omega_condition": float(nz.min() / nz.max()) if nz.size else None,
    }
    if session.projector is not None:
        report["projector_rank"] = int(session.projector.kernel_basis.shape[1])
        report["projector_idempotency"] = session.projector.idempotency_residual()
    report.update(_header(session, args.stable_output))

    def render(fmt):
        if fmt == "csv":
            rows = [{"key": k, "value": json.dumps(v, sort_keys=True)} for k, v in sorted(report.items())]
            return _table_csv(rows, ["key", "value"])
        return cio.dump_json(report)

    _emit(session, args, "analyze", render)
    return EXIT_OK


def cmd_bracket(session, args):
    obs = session.observables()
    rows = []
    worst = EXIT_OK
    for n, (i, j) in enumerate(session.config.ordered_pairs()):
        f, g = obs[i], obs[j]
        row = {"pair": n, "f": f.label, "g": g.label, "value": None, "error": None}
        try:
            row["value"] = float(bracket_batch([(f, g)], session.flow, session.model,
                                               session.sigma_time, session.chain,
                                               session.projector)[0])
        except (GaugeVariantObservable, ValidationError) as exc:
            row["error"] = type(exc).__name__
            log.warning("pair %d: %s", n, exc)
        except InvariantError as exc:
            row["error"] = type(exc).__name__
            worst = EXIT_INVARIANT
            log.error("pair %d: %s", n, exc)
        rows.append(row)

    def render(fmt):
        if fmt == "csv":
            return cio.brackets_to_csv(rows)
        report = _header(session, args.stable_output)
        report["sigma_time"] = session.sigma_time
        report["brackets"] = rows
        return cio.dump_json(report)

    _emit(session, args, "bracket", render)
    return worst


def cmd_evolve(session, args):
    section = session.trajectory()
    times = session.spacetime.times

    def render(fmt):
        if fmt == "csv":
            rows = []
            for n, t in enumerate(times):
                for x in range(section.phi.shape[1]):
                    for a in range(section.phi.shape[2]):
                        rows.append({"t": repr(float(t)), "site": x, "component": a,
                                     "value": repr(float(section.phi[n, x, a]))})
            return _table_csv(rows, ["t", "site", "component", "value"])
        report = _header(session, args.stable_output)
        report["times"] = times.tolist()
        report["section"] = cio.section_to_json(section)
        return cio.dump_json(report)

    path = _emit(session, args, "evolve", render)
    if path is not None:
        with open(path / "section.bin", "wb") as fh:
            cio.write_section_binary(section, fh)
    return EXIT_OK


def cmd_verify(session, args, inject_fault=None):
    checks = verify(session, inject_fault=inject_fault or getattr(args, "inject_fault", None))
    ok = all(c.passed for c in checks)
    for c in checks:
        if not c.passed:
            log.error("invariant %s failed: %r > %r %s", c.name, c.value, c.tol, c.detail)

    def render(fmt):
        if fmt == "csv":
            return _table_csv([c.to_dict() for c in checks], ["name", "value", "tol", "passed", "detail"])
        report = _header(session, args.stable_output)
        report["passed"] = ok
        report["checks"] = [c.to_dict() for c in checks]
        return cio.dump_json(report)

    _emit(session, args, "verify", render)
    return EXIT_OK if ok else EXIT_INVARIANT


COMMANDS = {"analyze": cmd_analyze, "bracket": cmd_bracket, "evolve": cmd_evolve, "verify": cmd_verify}


def build_parser():
    parser = argparse.ArgumentParser(prog="covbrackets", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run configuration (JSON)")
        p.add_argument("--out", default=None, metavar="DIR",
                       help="output directory (default: config output.dir, else stdout)")
        p.add_argument("--format", choices=("json", "csv"), default=None,
                       help="output format (default: config output.formats)")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--stable-output", action="store_true",
                       help="omit timings so repeated runs are byte-identical")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "verify":
            p.add_argument("--inject-fault", choices=("asymmetric_omega",), default=None,
                           help=argparse.SUPPRESS)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        session = Session(cfg)
        return COMMANDS[args.command](session, args)
    except ValidationError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_VALIDATION
    except OSError as exc:
        log.error("cannot read input: %s", exc)
        return EXIT_VALIDATION
    except CovBracketError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_INVARIANT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
