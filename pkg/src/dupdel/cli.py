"""Command-line entry point: ``dupdel <subcommand> ...``.

Exit codes: 0 success, 2 invalid configuration, 3 a tolerance check
failed, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import io, oracle, selfcheck, theory
from .experiments import ConfigError, ExperimentSpec, run_experiment
from .model import geometric_checkpoints, simulate
from .params import as_params
from .rng import check_seed, make_rng

EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE, EXIT_NUMERIC = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _nan_ratio(num, den):
    with np.errstate(all="ignore"):
        out = np.asarray(num, dtype=float) / np.asarray(den, dtype=float)
    return np.where(np.isfinite(out), out, np.nan)


def _emit(args, columns, rows, extra=None):
    rows = [[v.item() if isinstance(v, np.generic) else v for v in row] for row in rows]
    if args.format == "json":
        doc = {"schema_version": 1, **(extra or {}), "columns": columns,
               "rows": [[None if isinstance(v, float) and math.isnan(v) else v for v in row]
                        for row in rows]}
        text = io.json_text(doc)
    else:
        text = io.csv_text(columns, rows)
    _write(args, text)


def _write(args, text):
    if args.output:
        io.atomic_write(args.output, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# theory
# ---------------------------------------------------------------------------

def _theory_c(p, k_max):
    c = theory.compute_c(p, k_max + 1)
    res = theory.c_recursion_residual(p, c)[: k_max + 1]
    ks = np.arange(k_max + 1)
    ratio = _nan_ratio(c[: k_max + 1], theory.asympt_c(p, np.maximum(ks, 1)))
    ratio[0] = np.nan
    return ["k", "c_k", "recursion_residual", "asympt_ratio"], list(zip(ks, c, res, ratio))


def _theory_q(p, k_max):
    q = theory.compute_q(p, k_max + 1, method="integral")
    qc = theory.compute_q(p, k_max, method="from_c")
    res = np.full(k_max + 1, np.nan)
    rr = theory.q_recursion_residual(p, q)
    res[: min(rr.size, k_max + 1)] = rr[: k_max + 1]
    delta = np.abs(qc - q[: k_max + 1]) / q[: k_max + 1]
    return (["k", "q_k", "balance_residual", "from_c_delta"],
            list(zip(range(k_max + 1), q, res, delta)))


def _theory_tail(p, k_max):
    ks = np.arange(1, k_max + 1)
    tail = theory.tail_q(p, ks)
    ratio = _nan_ratio(tail, theory.tail_q_asympt(p, ks))
    return ["k", "tail_q", "asympt_ratio"], list(zip(ks, tail, ratio))


def _theory_p0(p, r_max):
    surv = theory.compute_a(p, r_max)
    rs = np.arange(r_max + 1)
    ratio = _nan_ratio(surv.p0, theory.p0_asympt(p, np.maximum(rs, 1)))
    ratio[0] = np.nan
    if p.is_critical:
        name = "laguerre_delta"
        delta = [abs(theory.laguerre_eval(r, 1.0) - a) / a if math.isfinite(a) else math.nan
                 for r, a in zip(rs, surv.a)]
    else:
        # the alternating sum is only trustworthy for small r
        name = "binomial_sum_delta"
        delta = [abs(theory.a_binomial_sum(p, r) - a) / a if r <= 30 else math.nan
                 for r, a in zip(rs, surv.a)]
    return ["r", "a_r", "p0", name, "asympt_ratio"], list(zip(rs, surv.a, surv.p0, delta, ratio))


THEORY_TABLES = {"c": _theory_c, "q": _theory_q, "tail": _theory_tail, "p0": _theory_p0, "a": _theory_p0}


def cmd_theory(args) -> int:
    p = as_params(args.theta)
    n = args.rmax if args.what in ("a", "p0") else args.kmax
    if n < 1:
        raise ConfigError("kmax/rmax must be at least 1")
    columns, rows = THEORY_TABLES[args.what](p, n)
    _emit(args, columns, rows, {"theta": p.theta, "what": args.what})
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    p = as_params(args.theta)
    seed = check_seed(args.seed)
    if args.version == 3:
        if args.tmax is None or args.steps is not None:
            raise ConfigError("version 3 takes --tmax (and not --steps)")
        if not args.tmax > 0:
            raise ConfigError("--tmax must be positive")
        horizon = float(args.tmax)
    else:
        if args.steps is None or args.tmax is not None:
            raise ConfigError("versions 1 and 2 take --steps (and not --tmax)")
        if args.steps < 1:
            raise ConfigError("--steps must be at least 1")
        horizon = int(args.steps)
    checkpoints = args.checkpoints
    if checkpoints is not None:
        if any(not 0 < x <= horizon for x in checkpoints):
            raise ConfigError("checkpoints must lie in (0, horizon]")
        if args.version != 3:
            checkpoints = [int(x) for x in checkpoints]
    snaps = simulate(args.version, p, horizon, make_rng(seed), checkpoints)
    prefix = args.output or "dupdel_sim"
    if args.format == "json":
        doc = {"schema_version": 1, "version": args.version, "theta": p.theta, "seed": seed,
               "snapshots": [{"step_or_time": s.step_or_time, "N": s.N, "max_degree": s.max_degree,
                              "scaling_estimate": s.scaling_estimate,
                              "S": {str(r): v for r, v in s.s_r_values.items()},
                              "histogram": {str(k): v for k, v in sorted(s.degree_histogram.items())}}
                             for s in snaps]}
        io.atomic_write(prefix + ".json", io.json_text(doc))
        return EXIT_OK
    hist = [row for s in snaps for row in io.histogram_rows(s, p.theta, seed, args.kmax)]
    summ = [io.summary_row(s, p.theta, seed) for s in snaps]
    io.atomic_write(prefix + "_histogram.csv", io.csv_text(io.HISTOGRAM_COLUMNS, hist))
    io.atomic_write(prefix + "_summary.csv", io.csv_text(io.SUMMARY_COLUMNS, summ))
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

def cmd_oracle(args) -> int:
    p = as_params(args.theta)
    if args.enumerate is not None:
        if args.version not in (1, 2):
            raise ConfigError("enumeration supports versions 1 and 2")
        if not 0 <= args.enumerate <= oracle.MAX_ENUMERATION_STEPS:
            raise ConfigError(f"--enumerate must be between 0 and {oracle.MAX_ENUMERATION_STEPS}")
        dist = oracle.enumerate_states(args.version, p.theta, args.enumerate, exact=args.exact)
        doc = dist.to_json()
        doc["theta"] = p.theta
        if args.exact:
            doc["exact"] = [{"multiset": list(s), "p": str(w)}
                            for s, w in sorted(dist.entries.items(), key=lambda kv: (len(kv[0]), kv[0]))]
    elif args.first_passage is not None:
        if args.first_passage < 1:
            raise ConfigError("--first-passage must be at least 1")
        r = args.first_passage
        pvec = oracle.first_passage_solve(p, r)
        inv_a = float(theory.compute_a(p, r).p0[r])
        doc = {"schema_version": 1, "theta": p.theta, "r": r, "values": pvec.tolist(),
               "p0_from_a": inv_a, "relative_delta": abs(pvec[0] - inv_a) / inv_a}
    elif args.stationary is not None:
        if args.stationary < 10:
            raise ConfigError("--stationary must be at least 10")
        q = oracle.stationary_solve(p, args.stationary)
        doc = {"schema_version": 1, "theta": p.theta, "k_trunc": args.stationary, "values": q.tolist()}
    else:
        if args.mc_first_passage < 1 or args.replicas < 1:
            raise ConfigError("--mc-first-passage and --replicas must be at least 1")
        est = oracle.monte_carlo_first_passage(p, args.mc_first_passage, args.replicas,
                                               make_rng(check_seed(args.seed)))
        doc = {"schema_version": 1, "theta": p.theta, "r": args.mc_first_passage, **est.__dict__}
    _write(args, io.json_text(doc))
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiment / selfcheck
# ---------------------------------------------------------------------------

def cmd_experiment(args) -> int:
    try:
        spec = ExperimentSpec.from_json(args.spec)
    except OSError as exc:
        raise ConfigError(f"cannot read spec: {exc}") from exc
    doc = spec.to_dict()
    for name in ("replicas", "workers", "seed", "theta", "horizon"):
        value = getattr(args, name)
        if value is not None:
            doc["master_seed" if name == "seed" else name] = value
    spec = ExperimentSpec.from_dict(doc)
    result = run_experiment(spec)
    if args.format == "json":
        _write(args, io.json_text(result.to_dict()))
    else:
        _write(args, io.csv_text(io.RESULT_COLUMNS, io.result_csv_rows(result)))
        if args.output:
            rows = [[v.metric, v.observed, v.reference, v.tolerance, v.passed] for v in result.verdicts]
            io.atomic_write(args.output + ".verdicts.csv", io.csv_text(io.VERDICT_COLUMNS, rows))
    for v in result.verdicts:
        print(f"{'PASS' if v.passed else 'FAIL'} {v.metric}: observed {v.observed:.6g}, "
              f"reference {v.reference:.6g}, tolerance {v.tolerance:.6g}", file=sys.stderr)
    return EXIT_OK if result.passed else EXIT_TOLERANCE


def cmd_selfcheck(args) -> int:
    results = selfcheck.run_selfcheck(fast=args.fast, echo=None)
    for r in results:
        print(r.line())
        if args.verbose:
            for desc, ok in r.checks:
                print(f"    {'ok  ' if ok else 'FAIL'} {desc}")
    if args.output:
        doc = {"schema_version": 1, "criteria": [
            {"number": r.number, "title": r.title, "passed": r.passed, "elapsed": r.elapsed,
             "budget": r.budget, "checks": [{"description": d, "passed": ok} for d, ok in r.checks]}
            for r in results]}
        io.atomic_write(args.output, io.json_text(doc))
    return EXIT_OK if all(r.passed for r in results) else EXIT_TOLERANCE


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _int_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--output", "-o", help="output path (relative paths go under $DUPDEL_OUTPUT_DIR)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = _Parser(prog="dupdel", description="Duplication-deletion random graph toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("theory", parents=[common], help="tables of limiting quantities")
    t.add_argument("--theta", type=float, required=True)
    t.add_argument("--what", choices=sorted(THEORY_TABLES), default="c")
    t.add_argument("--kmax", type=int, default=100)
    t.add_argument("--rmax", type=int, default=100)
    t.add_argument("--spec", help="JSON file of flag defaults")
    t.set_defaults(func=cmd_theory)

    s = sub.add_parser("simulate", parents=[common], help="run one simulation")
    s.add_argument("--version", type=int, choices=(1, 2, 3), default=1)
    s.add_argument("--theta", type=float, required=True)
    s.add_argument("--steps", type=int)
    s.add_argument("--tmax", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--kmax", type=int, default=200, help="largest histogram bucket before overflow")
    s.add_argument("--checkpoints", type=_int_list, help="comma-separated snapshot steps or times")
    s.add_argument("--spec", help="JSON file of flag defaults")
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("oracle", parents=[common], help="brute-force reference values (JSON)")
    o.add_argument("--theta", type=float, required=True)
    which = o.add_mutually_exclusive_group(required=True)
    which.add_argument("--enumerate", type=int, metavar="N")
    which.add_argument("--first-passage", type=int, metavar="R")
    which.add_argument("--stationary", type=int, metavar="K")
    which.add_argument("--mc-first-passage", type=int, metavar="R")
    o.add_argument("--version", type=int, default=1)
    o.add_argument("--exact", action="store_true", help="rational arithmetic for --enumerate")
    o.add_argument("--replicas", type=int, default=100_000)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--spec", help="JSON file of flag defaults")
    o.set_defaults(func=cmd_oracle)

    e = sub.add_parser("experiment", parents=[common], help="run an experiment spec")
    e.add_argument("--spec", required=True, help="ExperimentSpec JSON file")
    e.add_argument("--theta", type=float)
    e.add_argument("--horizon", type=float)
    e.add_argument("--replicas", type=int)
    e.add_argument("--workers", type=int)
    e.add_argument("--seed", type=int)
    e.set_defaults(func=cmd_experiment)

    c = sub.add_parser("selfcheck", help="run the acceptance battery")
    c.add_argument("--fast", action="store_true", help="exact and oracle-backed criteria only")
    c.add_argument("--verbose", "-v", action="store_true")
    c.add_argument("--output", "-o", help="also write a JSON report here")
    c.set_defaults(func=cmd_selfcheck)
    return parser


def _apply_spec_defaults(parser, argv):
    """Parse ``argv`` with values from ``--spec`` as defaults, so explicit flags win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--spec")
    known, _ = pre.parse_known_args(argv)
    if known.command in (None, "experiment", "selfcheck") or not known.spec:
        return parser.parse_args(argv)
    subparser = parser._subparsers._group_actions[0].choices.get(known.command)
    if subparser is None:
        return parser.parse_args(argv)
    try:
        with open(known.spec) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read --spec {known.spec}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("--spec must hold a JSON object")
    doc.pop("schema_version", None)
    doc = {k.replace("-", "_"): v for k, v in doc.items()}
    dests = {a.dest for a in subparser._actions}
    unknown = set(doc) - dests - {"spec", "func"}
    if unknown:
        raise ConfigError(f"unknown keys in --spec: {sorted(unknown)}")
    for action in subparser._actions:
        if action.dest in doc:
            action.required = False
    # mutually exclusive oracle modes may also come from the spec file
    for group in subparser._mutually_exclusive_groups:
        if any(a.dest in doc for a in group._group_actions):
            group.required = False
    subparser.set_defaults(**doc)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_spec_defaults(parser, argv)
        return args.func(args)
    except ArithmeticError as exc:  # includes QuadratureError
        print(f"dupdel: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, OSError) as exc:
        print(f"dupdel: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
