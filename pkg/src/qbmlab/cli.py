"""Command-line scenario runner.

    qbmlab evolve  [--config FILE] [--out DIR]
    qbmlab cat     [--config FILE] [--out DIR]
    qbmlab sweep   [--config FILE] [--out DIR]
    qbmlab figure  fig1..fig7 [--out DIR]
    qbmlab verify  [--out DIR]

Exit codes: 0 success, 1 validation error, 2 numerical inconsistency
(including failed verification), 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from pydantic import ValidationError

from . import scenarios
from .config import ScenarioConfig, load_config
from .errors import (
    ExtendGridError,
    InvalidSpecError,
    InvalidTimeError,
    NumericalInconsistencyError,
    RefinementRequiredError,
    ResolutionError,
    SingularTermError,
    UnsupportedStateError,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("qbmlab")

_DEFAULTS = {
    "evolve": {
        "initial": {"kind": "gaussian"},
        "outputs": ["means", "variances", "purity", "coherence", "lindblad"],
        "time_grid": {"start": 0.0, "stop": 5e-3, "points": 200},
    },
    "cat": {
        "initial": {"kind": "cat"},
        "outputs": ["attenuation", "coherence", "lindblad"],
        "time_grid": {"start": 1e-14, "stop": 1e-6, "points": 161, "spacing": "log", "include_zero": True},
    },
    "sweep": {"outputs": ["qsweep", "lindblad"], "time_grid": {"start": 0.0, "stop": 1.0, "points": 1}},
}


def _parser():
    p = argparse.ArgumentParser(prog="qbmlab", description="Decoherence of Gaussian and cat states under measurement-based quantum Brownian motion.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="JSON scenario document (defaults to the reference parameters)")
        sp.add_argument("--out", default="qbmlab-out", help="output directory (default: %(default)s)")
        sp.add_argument("--grid-points", type=int, default=None, help="points per spatial grid axis (odd)")
        sp.add_argument("--precision", choices=("double", "extended"), default="double",
                        help="extended evaluates the attenuation exponent in multiple precision")
        sp.add_argument("--plots", action="store_true", help="also write matplotlib plot scripts")
        sp.add_argument("-v", "--verbose", action="store_true")

    for name, text in (("evolve", "evolve a Gaussian packet"), ("cat", "evolve a two-packet cat state"), ("sweep", "initial entropy rate versus q")):
        common(sub.add_parser(name, help=text))
    fig = sub.add_parser("figure", help="write the data behind one reference figure")
    fig.add_argument("figure_id", choices=scenarios.FIGURES)
    common(fig, config=False)
    ver = sub.add_parser("verify", help="run the oracle-agreement suite")
    common(ver, config=False)
    return p


def _config_for(command, path):
    if path:
        return load_config(path)
    return ScenarioConfig.model_validate(_DEFAULTS[command])


def _check_grid_points(n):
    if n is not None and (n < 3 or n % 2 == 0):
        raise InvalidSpecError(f"--grid-points must be odd and >= 3, got {n}")


def _execute(args) -> int:
    _check_grid_points(args.grid_points)
    if args.command == "figure":
        res = scenarios.emit_figure_data(args.figure_id, args.out, args.precision, args.grid_points, args.plots)
    elif args.command == "verify":
        cfg = ScenarioConfig.model_validate({"outputs": ["verify"], "time_grid": {"start": 0.0, "stop": 1.0, "points": 1}})
        res = scenarios.run(cfg, args.out, args.precision, args.grid_points, args.plots)
        for r in res.verification:
            print(r.line())
        if not res.ok:
            failed = ", ".join(f"C{r.id}" for r in res.verification if not r.passed)
            print(f"verification failed: {failed}", file=sys.stderr)
            return EXIT_NUMERICAL
    else:
        cfg = _config_for(args.command, args.config)
        if args.command == "cat" and cfg.initial.kind != "cat":
            raise InvalidSpecError("the cat command needs initial.kind = 'cat'")
        if args.command == "evolve" and cfg.initial.kind != "gaussian":
            raise InvalidSpecError("the evolve command needs initial.kind = 'gaussian'; use 'cat' for cat states")
        res = scenarios.run(cfg, args.out, args.precision, args.grid_points, args.plots)
        if "verify" in cfg.outputs and not res.ok:
            return EXIT_NUMERICAL
    print(f"wrote {len(res.files)} table(s) and {res.manifest}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _execute(args)
    except ValidationError as exc:
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            print(f"config error at {loc}: {err['msg']}", file=sys.stderr)
        return EXIT_VALIDATION
    except json.JSONDecodeError as exc:
        print(f"config error: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InvalidSpecError, InvalidTimeError, UnsupportedStateError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalInconsistencyError, SingularTermError, RefinementRequiredError, ExtendGridError, ResolutionError) as exc:
        print(f"numerical error in {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
