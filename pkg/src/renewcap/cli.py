"""Command-line entry point: ``renewcap {pmf,expect,curve,rart,simulate,verify}``.

Exit codes: 0 success, 2 usage or validation error, 3 numerical
instability, 4 divergent model.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import checks, raft, rart
from . import simulation as sim
from .errors import DivergentModelError, DomainError, NumericalInstabilityError, TruncatedPathError
from .records import OutputRecord

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_DIVERGENT = 4

SEED_ENV = "RENEWCAP_SEED"


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be a positive finite number, got {text}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _probability(text: str) -> float:
    v = _positive(text)
    if v >= 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 42
    try:
        return _seed(raw)
    except argparse.ArgumentTypeError as exc:
        raise DomainError(f"{SEED_ENV}: {exc}") from None


def _emit(record: OutputRecord, args) -> None:
    text = record.dumps(args.format)
    if not text.endswith("\n"):
        text += "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def make_grid(t_min: float, t_max: float, points: int, extra=()) -> np.ndarray:
    """Evenly spaced grid with the marker points merged in (4-ulp duplicates dropped)."""
    base = np.linspace(t_min, t_max, points) if points > 1 else np.array([t_min])
    merged = np.sort(np.concatenate([base, np.asarray(list(extra), dtype=float)]))
    keep = [merged[0]]
    for v in merged[1:]:
        if v - keep[-1] > 4 * math.ulp(v):
            keep.append(v)
    return np.array(keep)


def cmd_pmf(args) -> OutputRecord:
    params = raft.RaftParams(args.lam, args.r)
    table = raft.joint_pmf_table(params, args.t, mass_tol=args.mass_tol)
    rows = [[k, l, p] for (k, l), p in table.entries.items()]
    return OutputRecord(
        command="pmf",
        parameters={"lambda": args.lam, "r": args.r, "t": args.t, "mass_tol": args.mass_tol},
        columns=[("k", "int"), ("l", "int"), ("probability", "float")],
        rows=rows,
        metadata={"j": table.j, "l_max": table.l_max, "truncated_mass": table.truncated_mass},
    )


def cmd_expect(args) -> OutputRecord:
    params = raft.RaftParams(args.lam, args.r)
    en = raft.expected_n(params, args.t)
    return OutputRecord(
        command="expect",
        parameters={"lambda": args.lam, "r": args.r, "t": args.t},
        columns=[("t", "float"), ("expected_n", "float"), ("expected_alive", "float"), ("expected_deaths", "float")],
        rows=[[args.t, en, raft.alive_expectation(params, args.t), args.lam * args.t]],
    )


def _check_range(args) -> None:
    if args.t_min >= args.t_max:
        raise DomainError(f"--t-min ({args.t_min}) must be below --t-max ({args.t_max})")


def cmd_curve(args) -> OutputRecord:
    _check_range(args)
    params = raft.RaftParams(args.lam, args.r)
    if args.t_min < args.r:
        print(f"warning: --t-min {args.t_min} is below r={args.r}; the rate is flat at lambda there", file=sys.stderr)
    jumps = raft.multiples_in(args.r, args.t_min, args.t_max)
    series = raft.rate_curve(params, make_grid(args.t_min, args.t_max, args.points, jumps))
    rows = [[t, v, series.marker_at(t) != "none"] for t, v in series.points]
    return OutputRecord(
        command="curve",
        parameters={"lambda": args.lam, "r": args.r, "t_min": args.t_min, "t_max": args.t_max, "points": args.points},
        columns=[("t", "float"), ("EN_over_t", "float"), ("is_jump_point", "bool")],
        rows=rows,
        metadata={"asymptote": series.asymptote, "jump_points": list(series.jump_markers)},
    )


def cmd_rart(args) -> OutputRecord:
    dist = rart.parse_distribution(args.dist, renormalize=args.renormalize)
    status = rart.divergence_check(dist)
    if status is not rart.Finiteness.FINITE:
        reason = rart.divergence_reason(dist)
        raise DivergentModelError(f"E[N(t)] is {status.value} for {args.dist}: {reason}", criterion=reason)
    params = {"dist": args.dist, "lambda": args.lam, "tol": args.tol}
    if args.t is not None:
        res = rart.expected_n_rart(dist, args.lam, args.t, args.tol)
        params["t"] = args.t
        return OutputRecord(
            command="rart",
            parameters=params,
            columns=[("t", "float"), ("expected_n", "float"), ("EN_over_t", "float")],
            rows=[[args.t, res.value, res.value / args.t]],
            metadata={"terms_used": res.terms_used, "tail_bound": res.tail_bound},
        )
    if args.t_min is None or args.t_max is None:
        raise DomainError("rart needs either --t or both --t-min and --t-max")
    _check_range(args)
    open_step, solid_step = rart.marker_families(dist)
    marks = raft.multiples_in(open_step, args.t_min, args.t_max)
    if solid_step:
        marks = marks + raft.multiples_in(solid_step, args.t_min, args.t_max)
    series = rart.rart_rate_curve(dist, args.lam, make_grid(args.t_min, args.t_max, args.points, marks), args.tol)
    params.update({"t_min": args.t_min, "t_max": args.t_max, "points": args.points})
    return OutputRecord(
        command="rart",
        parameters=params,
        columns=[("t", "float"), ("EN_over_t", "float"), ("marker", "str")],
        rows=[[t, v, series.marker_at(t)] for t, v in series.points],
        metadata={
            "asymptote": series.asymptote,
            "open_markers": list(series.jump_markers),
            "solid_markers": list(series.solid_markers),
        },
    )


def estimate_record(est: sim.SimEstimate, parameters: dict) -> OutputRecord:
    meta = est.to_dict()
    meta.pop("joint")
    return OutputRecord(
        command="simulate",
        parameters=parameters,
        columns=[("k", "int"), ("l", "int"), ("count", "int"), ("frequency", "float")],
        rows=[[k, l, c, f] for (k, l), (c, f) in est.joint_freq.items()],
        metadata=meta,
    )


def estimate_from_record(record: OutputRecord) -> sim.SimEstimate:
    return sim.SimEstimate.from_dict({**record.metadata, "joint": record.rows})


def cmd_simulate(args) -> OutputRecord:
    if (args.r is None) == (args.dist is None):
        raise DomainError("simulate needs exactly one of --r (fixed age) or --dist (random age)")
    if args.r is not None:
        model = raft.RaftParams(args.lam, args.r)
    else:
        model = rart.RartModel(rart.parse_distribution(args.dist, renormalize=args.renormalize), args.lam)
    seed = args.seed if args.seed is not None else _default_seed()
    config = sim.SimConfig(args.reps, seed, args.t, model, args.max_events, oracle=args.oracle)
    est = sim.simulate(config, threads=args.threads)
    parameters = {
        "lambda": args.lam,
        "model": sim.describe_model(model),
        "t": args.t,
        "reps": args.reps,
        "seed": seed,
        "oracle": args.oracle,
        "max_events": config.event_cap(),
    }
    return estimate_record(est, parameters)


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    results = checks.run_checks(args.level, seed)
    for res in results:
        print(res.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="renewcap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def out_flags(p, default="csv"):
        p.add_argument("--format", choices=("csv", "json"), default=default)
        p.add_argument("--output", "-o", help="write to this file instead of stdout")

    p = sub.add_parser("pmf", help="joint table of (alive replacements, deaths)")
    p.add_argument("--lambda", dest="lam", type=_positive, required=True)
    p.add_argument("--r", type=_positive, required=True)
    p.add_argument("--t", type=_positive, required=True)
    p.add_argument("--mass-tol", type=_probability, default=1e-12)
    out_flags(p)

    p = sub.add_parser("expect", help="E[N(t)], E[A(t)], E[D(t)] for a fixed age")
    p.add_argument("--lambda", dest="lam", type=_positive, required=True)
    p.add_argument("--r", type=_positive, required=True)
    p.add_argument("--t", type=_positive, required=True)
    out_flags(p)

    p = sub.add_parser("curve", help="E[N(t)]/t over a grid for a fixed age")
    p.add_argument("--lambda", dest="lam", type=_positive, required=True)
    p.add_argument("--r", type=_positive, required=True)
    p.add_argument("--t-min", type=_positive, required=True)
    p.add_argument("--t-max", type=_positive, required=True)
    p.add_argument("--points", type=_positive_int, default=200)
    out_flags(p)

    p = sub.add_parser("rart", help="E[N(t)] or its rate curve for a random age")
    p.add_argument("--dist", required=True, help="fixed:r | sexp:nu,eta | unif:a,b | table:path")
    p.add_argument("--lambda", dest="lam", type=_positive, required=True)
    p.add_argument("--t", type=_positive)
    p.add_argument("--t-min", type=_positive)
    p.add_argument("--t-max", type=_positive)
    p.add_argument("--points", type=_positive_int, default=200)
    p.add_argument("--tol", type=_positive, default=1e-10)
    p.add_argument("--renormalize", action="store_true", help="rescale a tabulated density to unit mass")
    out_flags(p)

    p = sub.add_parser("simulate", help="seeded Monte Carlo estimate")
    p.add_argument("--lambda", dest="lam", type=_positive, required=True)
    p.add_argument("--r", type=_positive, help="fixed replacement age")
    p.add_argument("--dist", help="random replacement age spec")
    p.add_argument("--t", type=_positive, required=True)
    p.add_argument("--reps", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=_seed, default=None, help=f"default: ${SEED_ENV} or 42")
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--max-events", type=_positive_int, default=None)
    p.add_argument("--oracle", action="store_true", help="fail on divergent models and truncated paths")
    p.add_argument("--renormalize", action="store_true")
    out_flags(p, default="json")

    p = sub.add_parser("verify", help="run the cross-module consistency checks")
    p.add_argument("--level", choices=("fast", "full"), default="fast")
    p.add_argument("--seed", type=_seed, default=None)
    return parser


_COMMANDS = {
    "pmf": cmd_pmf,
    "expect": cmd_expect,
    "curve": cmd_curve,
    "rart": cmd_rart,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args)
        _emit(_COMMANDS[args.command](args), args)
        return EXIT_OK
    except DomainError as exc:
        print(f"renewcap {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalInstabilityError as exc:
        print(f"renewcap {args.command}: numerical instability: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DivergentModelError, TruncatedPathError) as exc:
        print(f"renewcap {args.command}: divergent model: {exc}", file=sys.stderr)
        return EXIT_DIVERGENT


if __name__ == "__main__":
    sys.exit(main())
