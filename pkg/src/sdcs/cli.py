"""Command-line entry point: ``sdcs quantize|decode|experiment|verify|slope``.

Failures exit with status 1 (2 for usage errors) and write one JSON object
``{"error": <kind>, "message": <text>}`` to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

log = logging.getLogger("sdcs.cli")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_text(path):
    if path in (None, "-"):
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def _emit(text, out=None):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


# quantize -----------------------------------------------------------------

def cmd_quantize(args):
    import io as _io

    from .io import pack_bits, read_vector_text, write_stream_csv
    from .quantize import ONE_BIT, MidriseAlphabet, QuantizerSpec, Rule, sigma_delta

    y = read_vector_text(_io.StringIO(_read_text(args.input)))
    if y.size == 0:
        raise ValueError("no input samples")
    mu = args.mu if args.mu is not None else float(np.max(np.abs(y)))
    rule = Rule.parse(args.rule)
    if rule is Rule.FILTERED:
        alphabet = ONE_BIT if args.levels is None else MidriseAlphabet(args.levels, args.delta or 2.0)
        spec = QuantizerSpec.filtered(args.r, mu, alphabet, gamma=args.gamma)
    else:
        if args.delta is None:
            raise ValueError(f"--delta is required for the {rule.value} rule")
        if rule is Rule.MSQ:
            L = args.levels or int(np.ceil(mu / args.delta)) + 1
            spec = QuantizerSpec(MidriseAlphabet(L, args.delta), r=1, rule=Rule.MSQ, mu=mu)
        else:
            spec = QuantizerSpec.greedy(args.r, args.delta, mu, L=args.levels, gamma=args.gamma)
    stream = sigma_delta(spec, y)
    if not stream.stable:
        log.warning("max|u| = %.6g exceeds gamma = %.6g", stream.u_max, spec.gamma)
    buf = _io.StringIO()
    write_stream_csv(y, stream, spec, buf, seed=args.seed)
    _emit(buf.getvalue(), args.out)
    if args.bits:
        with open(args.bits, "wb") as fh:
            fh.write(pack_bits(stream.q, spec.alphabet))
    return 0


# decode -------------------------------------------------------------------

def _load_matrix(path):
    from .io import MAGIC, read_matrix_bin, read_matrix_csv

    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
    if head == MAGIC:
        return read_matrix_bin(path).matrix
    return read_matrix_csv(path).matrix


def _load_codeword(path):
    """(q, gamma or None, r or None) from a stream CSV or a plain vector file."""
    import io as _io

    from .io import read_stream_csv, read_vector_text

    text = _read_text(path)
    if text.startswith("# sdcs-stream"):
        meta, _, q, _ = read_stream_csv(_io.StringIO(text))
        gamma = meta["gamma"] if np.isfinite(meta["gamma"]) else None
        return q, gamma, meta["r"]
    return read_vector_text(_io.StringIO(text)), None, None


def cmd_decode(args):
    from .decode import DecodeProblem, SolverConfig, decode_onestage

    phi = _load_matrix(args.phi)
    q, gamma, r = _load_codeword(args.q)
    r = args.r if args.r is not None else r
    gamma = args.gamma if args.gamma is not None else gamma
    if r is None or gamma is None:
        raise ValueError("--r and --gamma are required unless q comes from a stream file")
    p = DecodeProblem(phi, q, r, gamma, args.eps, args.norm)
    cfg = SolverConfig(max_iters=args.max_iters, strict=args.strict)
    res = decode_onestage(p, cfg)
    rec = {"m": p.m, "N": p.N, "r": r, "gamma": gamma, "eps": args.eps,
           "constraint_norm": p.constraint_norm.value, "objective": res.objective,
           "feas_q": res.feas_q, "feas_nu": res.feas_nu, "iters": res.iters,
           "converged": res.converged, "status": res.status, "x_hat": res.x_hat.tolist()}
    _emit(json.dumps(rec) + "\n", args.out)
    return 0


# experiment ---------------------------------------------------------------

def cmd_experiment(args):
    from .harness import ExperimentSpec, load_spec, run_experiment, window_start, write_outputs

    overrides = dict(seed=args.seed, trials=args.trials)
    if args.spec:
        spec = load_spec(args.spec, **overrides)
    elif args.scenario:
        spec = ExperimentSpec.default(args.scenario, **{k: v for k, v in overrides.items() if v is not None})
    else:
        raise ValueError("pass --spec <file> or --scenario <name>")
    report = run_experiment(spec, threads=args.threads)
    paths = write_outputs(report, args.out, args.format)
    summary = {"scenario": spec.scenario.value, "seed": spec.seed, "trials": spec.trials,
               "files": paths, "slopes": {}}
    for r in report.series_names:
        try:
            summary["slopes"][r] = {"m_min": window_start(report, r), "slope": report.slope(r)[0]}
        except ValueError as exc:
            summary["slopes"][r] = {"error": str(exc)}
    print(json.dumps(summary))
    return 0


# verify -------------------------------------------------------------------

def cmd_verify(args):
    from . import verify as V

    out = {}
    rec = V.recursion_suite(args.runs, args.seed)
    worst = max(x[2] for x in rec)
    out["recursion"] = {"runs": len(rec), "max_residual": worst, "pass": worst <= V.RECURSION_TOL}
    sig = V.sigma_suite()
    out["sigma_bound"] = {"cases": len(sig), "pass": all(ok for *_, ok in sig)}
    if args.count > 0:
        cases = V.oracle_suite(args.count, args.seed)
        dx = max(c.x_dist for c in cases)
        dobj = max(c.obj_diff for c in cases)
        out["oracle"] = {"instances": len(cases), "max_x_dist": dx, "max_obj_diff": dobj,
                         "pass": dx <= V.ORACLE_X_TOL and dobj <= V.ORACLE_OBJ_TOL}
    ok = all(v["pass"] for v in out.values())
    print(json.dumps(out))
    return 0 if ok else 1


# slope --------------------------------------------------------------------

def cmd_slope(args):
    from .harness import fit_slope, read_report_csv, window_start

    report = read_report_csv(args.input)
    names = [str(args.r)] if args.r is not None else report.series_names
    for r in names:
        if r not in report.series_names:
            raise ValueError(f"report has no series r={r}; found {report.series_names}")
        m_min = args.mmin if args.mmin is not None else window_start(report, r)
        slope, icpt = fit_slope(report, m_min, r=r, stat=args.stat)
        print(json.dumps({"r": r, "m_min": m_min, "slope": slope, "intercept": icpt}))
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="sdcs", description="Sigma-Delta quantized compressed sensing tools")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("quantize", help="quantize a measurement vector")
    q.add_argument("--in", dest="input", default="-", help="vector file (default stdin)")
    q.add_argument("--r", type=int, default=1)
    q.add_argument("--rule", default="greedy", help="greedy, filtered or msq")
    q.add_argument("--delta", type=float)
    q.add_argument("--levels", type=int, help="alphabet levels per sign")
    q.add_argument("--mu", type=float, help="input bound (default max|y|)")
    q.add_argument("--gamma", type=float)
    q.add_argument("--seed", type=int, default=0, help="recorded in the stream header")
    q.add_argument("--out", help="stream CSV path (default stdout)")
    q.add_argument("--bits", help="also write the packed 1-bit codeword here")
    q.set_defaults(func=cmd_quantize)

    d = sub.add_parser("decode", help="run the one-stage decoder")
    d.add_argument("--phi", required=True, help="matrix file (CSV or binary container)")
    d.add_argument("--q", required=True, help="stream CSV or vector file")
    d.add_argument("--r", type=int)
    d.add_argument("--gamma", type=float)
    d.add_argument("--eps", type=float, default=0.0)
    d.add_argument("--norm", default="l2", help="l2 or linf")
    d.add_argument("--max-iters", type=int, default=200)
    d.add_argument("--strict", action="store_true", help="fail when tolerances are not met")
    d.add_argument("--out", help="JSON path (default stdout)")
    d.set_defaults(func=cmd_decode)

    e = sub.add_parser("experiment", help="run an error-decay experiment")
    e.add_argument("--spec", help="TOML spec file")
    e.add_argument("--scenario", help="use a scenario's defaults instead of a file")
    e.add_argument("--seed", type=int)
    e.add_argument("--trials", type=int)
    e.add_argument("--out", default=".", help="output directory")
    e.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    e.add_argument("--threads", type=int, default=1)
    e.set_defaults(func=cmd_experiment)

    v = sub.add_parser("verify", help="run the invariant suites")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--runs", type=int, default=1000, help="recursion identity runs")
    v.add_argument("--count", type=int, default=50, help="oracle instances (0 skips)")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("slope", help="fit log-log slopes to a report CSV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--mmin", type=float, help="smallest m in the fit (default: plateau-aware window)")
    s.add_argument("--r", help="series to fit (default: all)")
    s.add_argument("--stat", choices=("worst", "mean"), default="worst")
    s.set_defaults(func=cmd_slope)
    return p


def _fail(kind, exc, code):
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        return _fail(type(exc).__name__, exc, 1)
    except Exception as exc:  # solver failures and anything unexpected
        log.debug("unhandled error", exc_info=True)
        return _fail(type(exc).__name__, exc, 1)


if __name__ == "__main__":
    sys.exit(main())
