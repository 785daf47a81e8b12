"""Command line front end: ``estimate``, ``verify`` and ``gen-scenario``.

Exit codes are 0 on success, 1 when an audit finds a violation and 2 for
unusable input (unreadable or invalid scenario, inconsistent data under the
abort policy).
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

from ..correction import CorrectionCriterion
from ..errors import EstimationError, InconsistentMeasurement, ParseError, ValidationError
from ..estimator import EstimatorConfig
from ..prediction import PredictionCriterion
from .emit import emit, write_diagnostics, write_manifest
from .runner import run_detailed
from .scenario import (TEMPLATES, generate_scenario, load_scenario, save_scenario,
                       scenario_to_dict)

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_AUDIT, EXIT_INPUT = 0, 1, 2

PRED = {"vol": "volume", "trace": "trace"}
CORR = {"sigma": "sigma", "vol": "volume", "ssal": "ssal"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sme", description="Ellipsoidal set-membership estimation")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="run the estimator on a scenario")
    e.add_argument("--scenario", required=True, type=Path)
    e.add_argument("--pred", choices=sorted(PRED), default="vol")
    e.add_argument("--corr", choices=sorted(CORR), default="sigma")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--samples", type=int, default=0,
                   help="Monte Carlo points per step for the containment audit")
    e.add_argument("--out", required=True, type=Path)
    e.add_argument("--emit", choices=("csv", "json"), default="csv")
    e.add_argument("--diagnostics", action="store_true")
    e.add_argument("--policy", choices=("skip", "abort"), default="skip")
    e.add_argument("--timing", action="store_true",
                   help="fill the ms column (output is then no longer reproducible)")

    v = sub.add_parser("verify", help="audit one or all criterion combinations")
    v.add_argument("--scenario", required=True, type=Path)
    v.add_argument("--all-criteria", action="store_true")
    v.add_argument("--pred", choices=sorted(PRED), default="vol")
    v.add_argument("--corr", choices=sorted(CORR), default="sigma")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--samples", type=int, default=200)

    g = sub.add_parser("gen-scenario", help="write a scenario from a template")
    g.add_argument("--template", choices=TEMPLATES, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--horizon", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--m", type=int, default=None, help="number of noise generators")
    g.add_argument("--l", type=int, default=0, help="number of known inputs")
    g.add_argument("--out", type=Path, default=None, help="file to write (stdout if omitted)")
    return p


def _config(pred, corr, policy="skip", diagnostics=False):
    return EstimatorConfig(PredictionCriterion(PRED[pred]), CorrectionCriterion(CORR[corr]),
                           inconsistency=policy, diagnostics=diagnostics)


def _estimate(args) -> int:
    s = load_scenario(args.scenario)
    cfg = _config(args.pred, args.corr, args.policy, args.diagnostics)
    res = run_detailed(s, cfg, args.seed, args.samples, args.timing)
    args.out.mkdir(parents=True, exist_ok=True)
    emit(res.records, args.emit, args.out / f"records.{args.emit}")
    if args.diagnostics:
        write_diagnostics(res.diagnostics, args.out / "diagnostics.csv")
    write_manifest(args.out / "manifest.json", args.seed, cfg, str(args.scenario),
                   {"samples": args.samples, "audit": res.audit.summary()})
    print(f"{args.pred}/{args.corr}: {len(res.records) - 1} steps, {res.audit.summary()}")
    return EXIT_OK if res.audit.ok else EXIT_AUDIT


def _verify(args) -> int:
    s = load_scenario(args.scenario)
    combos = (itertools.product(sorted(PRED), sorted(CORR)) if args.all_criteria
              else [(args.pred, args.corr)])
    status = EXIT_OK
    for pred, corr in combos:
        try:
            res = run_detailed(s, _config(pred, corr), args.seed, args.samples)
            line = res.audit.summary()
            if not res.audit.ok:
                status = EXIT_AUDIT
        except EstimationError as exc:
            if isinstance(exc, (ParseError, ValidationError)):
                raise
            line = f"ERROR {type(exc).__name__}: {exc}"
            status = EXIT_AUDIT
        print(f"{pred:>5}/{corr:<5} {line}")
    return status


def _gen(args) -> int:
    s = generate_scenario(args.template, args.n, args.horizon, args.seed, m=args.m, l=args.l)
    if args.out is None:
        sys.stdout.write(json.dumps(scenario_to_dict(s), indent=1) + "\n")
    else:
        save_scenario(s, args.out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "estimate":
            return _estimate(args)
        if args.command == "verify":
            return _verify(args)
        return _gen(args)
    except (ParseError, ValidationError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InconsistentMeasurement as exc:
        print(f"input error: inconsistent measurement: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
