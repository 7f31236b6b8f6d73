"""Command-line front end: ``minsurf <command> --config FILE [--out DIR] ...``.

Exit codes: 0 ok, 1 usage or config error, 2 graph data not timelike,
3 solver failure, 4 reconstruction failure, 5 verification failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import pipelines as pl
from .config import _parse_h, load_scenario
from .diagnostics import bootstrap_monitor, convergence_study, flatness_report
from .errors import (ConfigError, InvalidInputError, NotTimelikeError,
                     ReconstructionError, SolverError)
from .fields import GridSpec1D
from .initial_data import graph_to_geometric, validate_timelike
from .reconstruction import embedding_checks
from .report import DiagnosticsReport, config_hash

EXIT_OK, EXIT_USAGE, EXIT_TIMELIKE, EXIT_SOLVER, EXIT_RECON, EXIT_VERIFY = range(6)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage().strip()}\n{self.prog}: error: {message}")


def _provenance(sc, command):
    return {"command": command, "version": __version__, "config_hash": config_hash(sc.__dict__),
            "pipeline": sc.pipeline, "h": sc.h, "scheme": sc.scheme}


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_report(path: Path, rep: DiagnosticsReport):
    path.write_text(rep.to_json() + "\n", encoding="utf-8")


def _say(args, *lines):
    if not args.quiet:
        for line in lines:
            print(line)


def cmd_convert(sc, out: Path, args) -> int:
    if sc.graph is None:
        raise ConfigError("convert needs a [graph] block")
    grid = GridSpec1D.from_interval(sc.r_min, sc.r_max, sc.h)
    g = pl.sample_graph(sc, grid)
    floor = validate_timelike(g)
    gd = graph_to_geometric(g)
    for name, f in (("lambda0", gd.lambda0), ("nu0", gd.nu0), ("psi0", gd.psi0),
                    ("psi1", gd.psi1)):
        np.savetxt(out / f"{name}.csv", np.column_stack([f.x, f.values]), delimiter=",",
                   fmt="%.17g", header="r,value", comments="")
    prov = _provenance(sc, "convert")
    prov.update(min_radicand=floor, nodes=grid.count, graph=sc.graph)
    _write_json(out / "provenance.json", prov)
    _say(args, f"wrote {grid.count} samples per field to {out}")
    return EXIT_OK


def cmd_evolve(sc, out: Path, args) -> int:
    # flatness needs every level; the CSV keeps the configured cadence
    ev, gd, _ = pl.run_evolution(sc, snapshot_every=1 if sc.supports else None)
    ev.write_csv(out / "evolution.csv", level_every=sc.snapshot_every,
                 r_window=(sc.r_min, sc.r_max))
    boot = bootstrap_monitor(ev, sc.epsilon, gd, pl.flat_background(sc))
    boot.provenance.update(_provenance(sc, "evolve"))
    _write_report(out / "bootstrap.json", boot)
    reports = [boot]
    if sc.supports is not None:
        flat = flatness_report(ev, ev.pair, sc.supports, stride=sc.flatness_stride,
                              flat_tol=sc.tolerances.get("flatness", 1e-6))
        _write_report(out / "flatness.json", flat)
        reports.append(flat)
    for rep in reports:
        _say(args, *rep.summary_lines())
    return EXIT_OK


def cmd_reconstruct(sc, out: Path, args) -> int:
    ev, _, _, emb, pair = pl.reconstruct(sc)
    emb.write_csv(out / "embedding.csv")
    rep = embedding_checks(emb, ev, pair)
    rep.provenance.update(_provenance(sc, "reconstruct"))
    _write_report(out / "embedding_checks.json", rep)
    _say(args, *(f"{k} = {v:.3e}" for k, v in sorted(rep.metrics.items())))
    return EXIT_OK


def _resolutions(sc):
    return sc.resolutions or (sc.h, sc.h / 2, sc.h / 4)


def cmd_convergence(sc, out: Path, args) -> int:
    rep = convergence_study(sc, _resolutions(sc))
    rep.provenance.update(_provenance(sc, "convergence"))
    _write_report(out / "convergence.json", rep)
    _say(args, *rep.summary_lines())
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_verify(sc, out: Path, args) -> int:
    agg = DiagnosticsReport("verify")
    agg.provenance.update(_provenance(sc, "verify"))
    agg.merge(convergence_study(sc, _resolutions(sc)), prefix="convergence")
    ev, gd, _ = pl.run_evolution(sc, snapshot_every=1 if sc.supports else None)
    boot = bootstrap_monitor(ev, sc.epsilon, gd, pl.flat_background(sc))
    agg.provenance["bootstrap_applies"] = boot.provenance["hypotheses_hold"]
    if not boot.provenance["hypotheses_hold"]:
        # outside the small-data regime the bound is informational only
        boot.flags.clear()
    agg.merge(boot, prefix="bootstrap")
    if sc.supports is not None:
        agg.merge(flatness_report(ev, ev.pair, sc.supports, stride=sc.flatness_stride,
                              flat_tol=sc.tolerances.get("flatness", 1e-6)),
                  prefix="flatness")
    if sc.graph is not None and sc.pipeline != "cross-pipeline":
        T = sc.compare_time if sc.compare_time is not None else sc.t_final
        agg.add("cross_pipeline.sup_difference", pl.cross_pipeline_error(sc, sc.h, T))
        agg.check("cross_pipeline.agreement", "cross_pipeline.sup_difference",
                  sc.tolerances.get("cross_pipeline", 1e-3), "<=")
    _write_report(out / "verify.json", agg)
    _say(args, *agg.summary_lines(), "PASS" if agg.passed else "FAIL")
    return EXIT_OK if agg.passed else EXIT_VERIFY


COMMANDS = {
    "convert": (cmd_convert, "graph data -> geometric data CSVs"),
    "evolve": (cmd_evolve, "evolve psi; write fields and bootstrap/flatness reports"),
    "reconstruct": (cmd_reconstruct, "rebuild the embedding; write samples and defects"),
    "verify": (cmd_verify, "run every applicable check; exit 5 on failure"),
    "convergence": (cmd_convergence, "observed orders over nested resolutions"),
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="scenario file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides [output])")
    common.add_argument("--scheme", choices=("leapfrog", "characteristic"))
    common.add_argument("--resolution", metavar="H", type=_parse_h,
                        help="grid spacing, e.g. 0.0078125 or 1/128")
    common.add_argument("--quiet", action="store_true")
    parser = _Parser(prog="minsurf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def _exit_code(exc) -> int:
    if isinstance(exc, NotTimelikeError):
        return EXIT_TIMELIKE
    if isinstance(exc, SolverError):
        return EXIT_SOLVER
    if isinstance(exc, ReconstructionError):
        return EXIT_RECON
    if isinstance(exc, (ConfigError, InvalidInputError)):
        return EXIT_USAGE
    return EXIT_SOLVER


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        sc = load_scenario(args.config)
        changes = {}
        if args.scheme:
            changes["scheme"] = args.scheme
        if args.resolution:
            changes["h"] = args.resolution
        if changes:
            sc = sc.at(**changes)
        out = Path(args.out or sc.output)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command][0](sc, out, args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, InvalidInputError) as exc:
        print(f"minsurf: {exc}", file=sys.stderr)
        print(parser.format_usage().strip(), file=sys.stderr)
        return EXIT_USAGE
    except (NotTimelikeError, SolverError, ReconstructionError) as exc:
        print(f"minsurf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
