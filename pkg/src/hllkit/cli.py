"""Command-line front end: estimate, simulate, joint-simulate, inspect.

Exit codes: 0 success; 1 invalid flags or malformed option syntax; for
``estimate`` additionally 2 unreadable/corrupt sketch file, 3 sketch
config mismatch, 4 estimator domain failure (e.g. the large-range
correction leaving its domain).

All numeric CSV output uses ``repr`` of Python floats (shortest
round-trip form), and randomized commands are byte-reproducible for a
fixed ``--seed`` regardless of ``--threads``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import (
    ConfigMismatchError,
    DegenerateHistogramError,
    DomainError,
    FormatError,
    NoConvergenceError,
    OutOfDomainError,
    RangeError,
    UnsupportedConfigError,
    ZeroRegistersExhaustedError,
)
from .joint import inclusion_exclusion_estimate, joint_ml_estimate
from .sim import (
    SINGLE_ESTIMATORS,
    RngSeed,
    run_error_experiment,
    run_joint_experiment,
)
from .sketch import Sketch, SketchConfig

SIMULATE_COLUMNS = (
    "estimator,p,q,cardinality,trials,mean_rel_err,median_rel_err,"
    "stddev_rel_err,rmse_rel,q01,q05,q25,q75,q95,q99,failures"
)
JOINT_COLUMNS = (
    "card_a,card_b,card_x,trials,"
    "rmse_ie_a,rmse_ie_b,rmse_ie_x,rmse_ie_u,"
    "rmse_ml_a,rmse_ml_b,rmse_ml_x,rmse_ml_u,"
    "impr_a,impr_b,impr_x,impr_u,failures"
)
JOINT_ESTIMATORS = ("incl-excl", "joint-ml")

DOMAIN_ERRORS = (
    OutOfDomainError,
    DomainError,
    UnsupportedConfigError,
    ZeroRegistersExhaustedError,
    DegenerateHistogramError,
    NoConvergenceError,
)


class _CliUsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Parser that reports usage problems via exceptions, not sys.exit."""

    def error(self, message):
        raise _CliUsageError(message)


def _fmt(value) -> str:
    if isinstance(value, int):
        return str(value)
    # repr of a builtin float is the shortest round-trip form
    return repr(float(value))


def _load_sketch(path: str) -> Sketch:
    return Sketch.from_bytes(Path(path).read_bytes())


def _emit(lines, out_path):
    text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def _parse_cards(text: str):
    if text.startswith("logspace:"):
        parts = text.split(":")
        if len(parts) != 4:
            raise _CliUsageError(
                f"cards list {text!r} must be logspace:START:END:POINTS"
            )
        try:
            start, end, points = float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError:
            raise _CliUsageError(f"cards list {text!r} has a non-numeric field")
        if start <= 0 or end <= 0 or points < 1:
            raise _CliUsageError(f"cards list {text!r} needs positive bounds")
        grid = np.geomspace(start, end, points)
        cards = []
        for value in np.rint(grid).astype(int):
            if not cards or cards[-1] != int(value):
                cards.append(int(value))
        return cards
    cards = []
    for token in text.split(","):
        token = token.strip()
        try:
            cards.append(int(token))
        except ValueError:
            raise _CliUsageError(f"invalid cardinality {token!r}") from None
        if cards[-1] < 0:
            raise _CliUsageError(f"invalid cardinality {token!r}")
    return cards


def _parse_configs(text: str):
    configs = []
    if text == "":
        return configs
    for part in text.split(";"):
        fields = part.split(",")
        if len(fields) != 3:
            raise _CliUsageError(f"invalid configuration triple {part!r}")
        try:
            triple = tuple(int(f) for f in fields)
        except ValueError:
            raise _CliUsageError(f"invalid configuration triple {part!r}") from None
        if any(v < 0 for v in triple):
            raise _CliUsageError(f"invalid configuration triple {part!r}")
        configs.append(triple)
    return configs


def _sketch_config(p: int, q: int) -> SketchConfig:
    try:
        return SketchConfig(p=p, q=q)
    except RangeError as exc:
        raise _CliUsageError(str(exc)) from None


def cmd_estimate(args) -> int:
    joint = args.estimator in JOINT_ESTIMATORS
    if joint and not args.sketch2:
        raise _CliUsageError(f"estimator {args.estimator} requires --sketch2")
    if not joint and args.sketch2:
        raise _CliUsageError(
            f"estimator {args.estimator} works on a single sketch; drop --sketch2"
        )
    try:
        s1 = _load_sketch(args.sketch)
        s2 = _load_sketch(args.sketch2) if args.sketch2 else None
    except (FormatError, RangeError, OSError) as exc:
        print(f"error: cannot read sketch: {exc}", file=sys.stderr)
        return 2
    cfg = s1.config
    try:
        if joint:
            fn = (
                joint_ml_estimate
                if args.estimator == "joint-ml"
                else inclusion_exclusion_estimate
            )
            est = fn(s1, s2)
            print(
                f"{args.estimator} estimates (p={cfg.p}, q={cfg.q}): "
                f"a={_fmt(est.a)} b={_fmt(est.b)} x={_fmt(est.x)} "
                f"union={_fmt(est.union)}"
            )
            print("estimator,p,q,a,b,x,union")
            print(
                f"{args.estimator},{cfg.p},{cfg.q},{_fmt(est.a)},"
                f"{_fmt(est.b)},{_fmt(est.x)},{_fmt(est.union)}"
            )
        else:
            value = SINGLE_ESTIMATORS[args.estimator](s1.histogram(), cfg)
            print(
                f"{args.estimator} estimate (p={cfg.p}, q={cfg.q}): {_fmt(value)}"
            )
            print("estimator,p,q,estimate")
            print(f"{args.estimator},{cfg.p},{cfg.q},{_fmt(value)}")
    except ConfigMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


def cmd_inspect(args) -> int:
    try:
        sketch = _load_sketch(args.sketch)
    except (FormatError, RangeError, OSError) as exc:
        print(f"error: cannot read sketch: {exc}", file=sys.stderr)
        return 2
    cfg = sketch.config
    hist = sketch.histogram()
    print(f"p: {cfg.p}")
    print(f"q: {cfg.q}")
    print(f"registers: {cfg.m}")
    print("value,count")
    for value, count in enumerate(hist.counts):
        print(f"{value},{int(count)}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _sketch_config(args.p, args.q)
    cards = _parse_cards(args.cards)
    if args.trials < 2:
        raise _CliUsageError("--trials must be at least 2")
    names = [n.strip() for n in args.estimators.split(",") if n.strip()]
    if not names:
        raise _CliUsageError("--estimators must name at least one estimator")
    for name in names:
        if name not in SINGLE_ESTIMATORS:
            raise _CliUsageError(
                f"unknown estimator {name!r}; choose from "
                f"{','.join(sorted(SINGLE_ESTIMATORS))}"
            )
    seed = RngSeed(args.seed)
    lines = [SIMULATE_COLUMNS]
    for name in names:
        reports = run_error_experiment(
            cards, args.trials, cfg, name, seed, threads=args.threads
        )
        for r in reports:
            qvals = ",".join(_fmt(v) for _, v in r.quantiles)
            lines.append(
                f"{name},{cfg.p},{cfg.q},{r.cardinality},{r.trials},"
                f"{_fmt(r.mean_rel_err)},{_fmt(r.median_rel_err)},"
                f"{_fmt(r.stddev_rel_err)},{_fmt(r.rmse_rel)},"
                f"{qvals},{r.failures}"
            )
    _emit(lines, args.out)
    return 0


def cmd_joint_simulate(args) -> int:
    cfg = _sketch_config(args.p, args.q)
    configs = _parse_configs(args.configs)
    if args.trials < 2:
        raise _CliUsageError("--trials must be at least 2")
    lines = [JOINT_COLUMNS]
    if configs:
        rows = run_joint_experiment(
            configs, args.trials, cfg, RngSeed(args.seed), threads=args.threads
        )
        for r in rows:
            stats = ",".join(
                _fmt(v) for v in (*r.rmse_ie, *r.rmse_ml, *r.improvement)
            )
            lines.append(
                f"{r.card_a},{r.card_b},{r.card_x},{r.trials},"
                f"{stats},{r.failures}"
            )
    _emit(lines, args.out)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(
        prog="hllkit",
        description="Cardinality sketches: estimation and Monte-Carlo benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate cardinality from sketch files")
    est.add_argument("--sketch", required=True, help="serialized sketch file")
    est.add_argument("--sketch2", help="second sketch for two-sketch estimators")
    est.add_argument(
        "--estimator",
        required=True,
        choices=sorted(SINGLE_ESTIMATORS) + list(JOINT_ESTIMATORS),
    )
    est.set_defaults(func=cmd_estimate)

    ins = sub.add_parser("inspect", help="print a sketch's parameters and histogram")
    ins.add_argument("--sketch", required=True)
    ins.set_defaults(func=cmd_inspect)

    simp = sub.add_parser("simulate", help="single-sketch estimator error sweep")
    simp.add_argument("--p", type=int, required=True)
    simp.add_argument("--q", type=int, required=True)
    simp.add_argument(
        "--cards",
        required=True,
        help="comma list of cardinalities or logspace:START:END:POINTS",
    )
    simp.add_argument("--trials", type=int, required=True)
    simp.add_argument("--seed", type=int, required=True)
    simp.add_argument(
        "--estimators", required=True, help="comma list, e.g. raw,improved,ml"
    )
    simp.add_argument("--out", help="write CSV here instead of stdout")
    simp.add_argument("--threads", type=int, default=1)
    simp.set_defaults(func=cmd_simulate)

    joint = sub.add_parser(
        "joint-simulate", help="two-sketch overlap estimator comparison"
    )
    joint.add_argument("--p", type=int, required=True)
    joint.add_argument("--q", type=int, required=True)
    joint.add_argument(
        "--configs",
        required=True,
        help="semicolon-separated a,b,x cardinality triples",
    )
    joint.add_argument("--trials", type=int, required=True)
    joint.add_argument("--seed", type=int, required=True)
    joint.add_argument("--out", help="write CSV here instead of stdout")
    joint.add_argument("--threads", type=int, default=1)
    joint.set_defaults(func=cmd_joint_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _CliUsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
