"""Command line entry point.

Exit codes: 0 success, 1 hypothesis/validation failure or refusal,
2 solver non-convergence.  Errors are printed to stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig, bundled_path, bundled_scenarios, load_config
from .energy import evaluate
from .extremal import ExtremalError, certify_gap, estimate_extremals
from .fibers import FiberError, fiber_report, sample_fiber
from .grid import GridError, norm_V_sq
from .hypotheses import check_hypotheses
from .problem import ProblemError
from .reports import dumps, write_fiber_csv, write_field_csv, write_json
from .solver import RefusedError, SolverError, classify_trichotomy, solve_bound, solve_ground
from .verify import format_table, run_all

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NONCONVERGED = 2

COMMANDS = ("hypotheses", "fiber", "extremal", "solve", "verify")


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int, **extra):
        super().__init__(message)
        self.kind = kind
        self.code = code
        self.extra = extra

    def to_json(self) -> dict:
        return {"error": self.kind, "message": str(self), **self.extra}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message, EXIT_INVALID)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="scenario file, bundled scenario name, or an emitted report.json")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--starts", type=int, help="override the number of multistart runs")
    common.add_argument("--out", help="output directory (default: the scenario's 'out' key)")
    common.add_argument("--no-timestamp", action="store_true", help="omit the timestamp so reports are byte-stable")
    common.add_argument("--allow-any-s", action="store_true", help="accept any s > 0")
    parser = _Parser(prog="rayleigh-nehari", description="Nehari manifold solver for the fractional Schrodinger equation")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "hypotheses": "audit the structural hypotheses on f, V, a, b",
        "fiber": "fiber maps, extremal functionals and roots for one field",
        "extremal": "estimate lambda_star and lambda_substar and audit them",
        "solve": "ground state on N_plus and bound state on N_minus",
        "verify": "run the invariant suite and print a pass/fail table",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def resolve_config(args) -> ScenarioConfig:
    src = args.config or "power"
    path = Path(src)
    if not path.exists() and src in bundled_scenarios():
        path = bundled_path(src)
    cfg = load_config(path)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.starts is not None:
        if args.starts < 1:
            raise ConfigError("--starts must be >= 1")
        cfg.starts = args.starts
    if args.out is not None:
        cfg.out = args.out
    if args.allow_any_s:
        cfg.allow_any_s = True
    return cfg


def _header(command: str, cfg: ScenarioConfig, timestamp: bool) -> dict:
    out = {"command": command, "version": __version__, "config": cfg.to_json()}
    if timestamp:
        out["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return out


def _estimate(spec, cfg):
    try:
        return estimate_extremals(
            spec, starts=cfg.starts, seed=cfg.seed, budget=cfg.budget, basis_size=cfg.basis_size, workers=cfg.workers
        )
    except (ExtremalError, ValueError) as exc:
        raise CliError("extremal", str(exc), EXIT_INVALID) from None


def _resolve_lambda(cfg, spec, est=None):
    """Numeric lambda; a ``lambda_fraction`` is taken of the lambda_star estimate."""
    if cfg.lam is not None:
        return cfg.lam, est
    frac = cfg.lambda_fraction if cfg.lambda_fraction is not None else 0.5
    if est is None:
        est = _estimate(spec, cfg)
    return frac * est.lambda_star, est


def cmd_hypotheses(cfg, spec, outdir, report):
    rep = check_hypotheses(spec, sample_count=cfg.sample_count, t_max=cfg.t_max)
    report["hypotheses"] = rep.to_json()
    return EXIT_OK if rep.all_passed else EXIT_INVALID


def cmd_fiber(cfg, spec, outdir, report):
    lam, est = _resolve_lambda(cfg, spec)
    u = cfg.field_from("fiber_field", spec.grid)
    try:
        fr = fiber_report(spec, u, lam)
        rows = sample_fiber(spec.with_lambda(lam), u, cfg.fiber_t_min, cfg.fiber_t_max, cfg.fiber_count)
    except (FiberError, ValueError) as exc:
        raise CliError("fiber", str(exc), EXIT_INVALID) from None
    report["lambda"] = lam
    report["fiber"] = fr.to_json()
    if est is not None:
        report["extremal"] = est.to_json()
    report["fiber_csv_path"] = write_fiber_csv(outdir / "fiber.csv", rows).name
    report["field_csv_path"] = write_field_csv(outdir / "field_probe.csv", u).name
    return EXIT_OK


def cmd_extremal(cfg, spec, outdir, report):
    est = _estimate(spec, cfg)
    audit = certify_gap(spec, est, probes=cfg.probes, seed=cfg.seed)
    report["extremal"] = est.to_json()
    report["gap_audit"] = audit.to_json()
    report["field_csv_paths"] = {
        "argmin_n": write_field_csv(outdir / "field_argmin_n.csv", est.argmin_n).name,
        "argmin_e": write_field_csv(outdir / "field_argmin_e.csv", est.argmin_e).name,
    }
    return EXIT_OK if audit.converged else EXIT_NONCONVERGED


def cmd_solve(cfg, spec, outdir, report):
    est = _estimate(spec, cfg)
    lam, _ = _resolve_lambda(cfg, spec, est)
    report["extremal"] = est.to_json()
    report["lambda"] = lam
    sp = spec.with_lambda(lam)
    kw = dict(starts=cfg.starts, seed=cfg.seed, lambda_star=est.lambda_star, max_iter=cfg.max_iter, tol=cfg.solver_tol)
    try:
        bound = solve_bound(sp, **kw)
        ground = solve_ground(sp, bound=bound, **kw)
    except RefusedError as exc:
        raise CliError("refused", str(exc), EXIT_INVALID, lambda_star_estimate=est.lambda_star) from None
    except SolverError as exc:
        raise CliError("nonconvergence", str(exc), EXIT_NONCONVERGED) from None
    label = classify_trichotomy(sp, bound, est)
    out = {}
    for name, res in (("ground", ground), ("bound", bound)):
        path = write_field_csv(outdir / f"field_{name}.csv", res.u).name
        out[name] = {**res.to_json(path), "functional": evaluate(sp, res.u).to_json()}
    report.update(out)
    report["trichotomy"] = label
    dist = float(np.sqrt(norm_V_sq(sp.grid, sp.V, ground.u - bound.u)))
    report["comparison"] = {
        "distance_V": dist,
        "distinct": dist > 1e-3,
        "c_plus_below_c_minus": ground.j < bound.j,
    }
    return EXIT_OK if ground.converged and bound.converged else EXIT_NONCONVERGED


def cmd_verify(cfg, spec, outdir, report):
    rows, est = run_all(
        spec,
        starts=cfg.starts,
        seed=cfg.seed,
        probes=cfg.probes,
        budget=cfg.budget,
        basis_size=cfg.basis_size,
        tol=cfg.solver_tol,
    )
    print(format_table(rows))
    report["extremal"] = est.to_json()
    report["invariants"] = [r.to_json() for r in rows]
    report["all_passed"] = all(r.passed for r in rows)
    return EXIT_OK if report["all_passed"] else EXIT_INVALID


HANDLERS = {
    "hypotheses": cmd_hypotheses,
    "fiber": cmd_fiber,
    "extremal": cmd_extremal,
    "solve": cmd_solve,
    "verify": cmd_verify,
}


def run_command(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        spec = cfg.build_spec()
        outdir = Path(cfg.out)
        outdir.mkdir(parents=True, exist_ok=True)
        report = _header(args.command, cfg, not args.no_timestamp)
        code = HANDLERS[args.command](cfg, spec, outdir, report)
        report["exit_code"] = code
        write_json(outdir / "report.json", report)
        return code
    except CliError as exc:
        _emit_error(exc.to_json())
        return exc.code
    except ConfigError as exc:
        _emit_error(exc.to_json())
        return EXIT_INVALID
    except (GridError, ProblemError) as exc:
        _emit_error({"error": "validation", "message": str(exc)})
        return EXIT_INVALID
    except OSError as exc:
        _emit_error({"error": "io", "message": str(exc)})
        return EXIT_INVALID


def _emit_error(payload: dict):
    sys.stderr.write(dumps(payload))


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    code = run_command(argv)
    sys.exit(code)


if __name__ == "__main__":
    main()
