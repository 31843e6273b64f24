"""Command line driver for refinement studies and the patch test.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from . import linsolve
from .analysis import emit_report
from .assembly import NonConvergence
from .study import (ConfigError, RunConfig, StudyError, run_convergence_study,
                    run_patch_test, write_outputs)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dgrod",
        description="Mesh-refinement studies for the curved-boundary DG "
                    "solver (flags override config-file fields).")
    p.add_argument("--config", metavar="PATH",
                   help="JSON run configuration (defaults used if omitted)")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--format", choices=["csv", "md", "both"],
                   help="report format(s) to write")
    p.add_argument("--method",
                   choices=["classical", "rod_global", "rod_iterative"])
    p.add_argument("--levels", metavar="N1,N2,...",
                   help="builtin mesh levels (ring counts)")
    p.add_argument("--degree", type=int, metavar="N",
                   help="polynomial degree 1..4")
    p.add_argument("--no-figures", action="store_true",
                   help="skip the convergence figure")
    p.add_argument("--patch-test", action="store_true",
                   help="run the exact-reproduction patch test and exit")
    return p


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    if args.out:
        config.out_dir = args.out
    if args.format:
        config.formats = (["csv", "md"] if args.format == "both"
                          else [args.format])
    if args.method:
        config.method = args.method
    if args.degree is not None:
        config.degree = args.degree
    if args.levels:
        try:
            config.builtin_levels = [int(tok) for tok in args.levels.split(",")]
        except ValueError:
            raise ConfigError(f"bad --levels value {args.levels!r}") from None
        config.mesh_files = []
    if args.no_figures:
        config.figures = False
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.patch_test:
            result = run_patch_test(degree=args.degree or 2)
            for r in sorted(result.rod_global):
                print(f"rings={r}: E2(rod_global) = {result.rod_global[r]:.3e}"
                      f"   E2(classical) = {result.classical[r]:.3e}")
            worst = max(result.rod_global.values())
            print("patch test:", "PASS" if worst <= 1e-9 else "FAIL",
                  f"(threshold 1e-9, worst {worst:.3e})")
            return 0 if worst <= 1e-9 else 3

        if args.config:
            try:
                with open(args.config) as fh:
                    config = RunConfig.from_json(fh.read())
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
        else:
            config = RunConfig()
        config = _apply_overrides(config, args)
        config.validate()

        report = run_convergence_study(config)
        paths = write_outputs(report, config)
        print(emit_report(report, "csv"), end="")
        for name, path in sorted(paths.items()):
            print(f"wrote {name}: {path}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (StudyError, NonConvergence, linsolve.SingularMatrix,
            linsolve.DidNotConverge) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
