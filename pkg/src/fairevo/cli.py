"""Command-line entry point: ``fairevo {train,ensemble,report,synth}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import data as D
from .ensemble import STRATEGIES
from .errors import FairEvoError
from .experiment import ENSEMBLE_METRICS, ExperimentSpec, cmd_ensemble, cmd_report, cmd_train

log = logging.getLogger("fairevo")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fairevo", description="Evolve fair neural classifiers and ensemble them.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="run all trials of an experiment spec")
    t.add_argument("spec", help="experiment spec file (key = value lines)")
    t.add_argument("--output", help="output directory (overrides the spec)")
    t.add_argument("--jobs", type=int, default=1, help="trials run in parallel processes")

    e = sub.add_parser("ensemble", help="build ensembles from a trained trial directory")
    e.add_argument("trial_dir")
    e.add_argument("--strategy", action="append", choices=STRATEGIES,
                   help="repeatable; default EnsAll")
    e.add_argument("--size", type=int, default=50)
    e.add_argument("--criteria", nargs="+", help="selection criteria (default: the training criteria)")
    e.add_argument("--metrics", nargs="+", default=list(ENSEMBLE_METRICS))

    r = sub.add_parser("report", help="compare experiments on a pooled reference front")
    r.add_argument("run_dirs", nargs="+")
    r.add_argument("--out", required=True)
    r.add_argument("--baseline", help="CSV of single solutions with one column per criterion")
    r.add_argument("--reference", help="experiment name the others are tested against (default: first)")
    r.add_argument("--alpha", type=float, default=0.05, help="significance level")
    r.add_argument("--hv-samples", type=int)
    r.add_argument("--cpf-samples", type=int)

    s = sub.add_parser("synth", help="write a synthetic biased dataset")
    s.add_argument("out")
    s.add_argument("--n", type=int, default=2000)
    s.add_argument("--d", type=int, default=5)
    s.add_argument("--bias", type=float, default=0.3)
    s.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "train":
            out = cmd_train(ExperimentSpec.from_file(args.spec), args.output, args.jobs)
            print(out)
        elif args.command == "ensemble":
            for path in cmd_ensemble(args.trial_dir, args.strategy or ["EnsAll"], args.size, args.criteria,
                                     args.metrics):
                print(path)
        elif args.command == "report":
            print(cmd_report(args.run_dirs, args.out, args.baseline, args.reference, args.alpha,
                             args.hv_samples, args.cpf_samples))
        elif args.command == "synth":
            D.write_csv(D.synth_biased(args.n, args.d, args.bias, args.seed), args.out)
            print(args.out)
    except FairEvoError as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # unexpected failures are runtime errors
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
