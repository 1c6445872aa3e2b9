"""``qem`` command line interface."""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import fit as _fit
from .io import DataFormatError, load_observations, load_params
from .model import (CUES, SINGLE_PROBES, WORD_CLASSES, Cue, ModelDomainError, Probe, WordClass,
                    predict_table, sequential_acceptance, trace_evolution, uf_decomposition)

EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    return f"{x:.6f}"


def _write_output(text: str, out: str | None):
    """Write to ``out`` atomically (temp file + rename), or to stdout."""
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(out)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _params(path):
    if not Path(path).is_file():
        raise UsageError(f"params file not found: {path}")
    return load_params(path)


def _token(enum_type, value, what):
    try:
        return enum_type(value)
    except ValueError:
        choices = "|".join(m.value for m in enum_type)
        raise UsageError(f"invalid {what} {value!r} (expected {choices})") from None


def cmd_predict(args):
    table = predict_table(_params(args.params))
    buf = io.StringIO()
    buf.write("word_class,cue,probe,probability\n")
    for wc, cue, probe, value in table.cells():
        buf.write(f"{wc.value},{cue.value},{probe.value},{_fmt(value)}\n")
    buf.write("word_class,cue,UF\n")
    uf = table.unpacking
    for a, wc in enumerate(WORD_CLASSES):
        for b, cue in enumerate(CUES):
            buf.write(f"{wc.value},{cue.value},{_fmt(uf[a, b])}\n")
    return buf.getvalue()


def cmd_uf(args):
    p = _params(args.params)
    table = predict_table(p)
    buf = io.StringIO()
    buf.write("word_class,cue,UF,verbatim_balance,gist_balance\n")
    for wc in WORD_CLASSES:
        for cue in CUES:
            verbatim, gist = uf_decomposition(wc, cue, p)
            buf.write(f"{wc.value},{cue.value},{_fmt(table.uf(wc, cue))},{_fmt(verbatim)},{_fmt(gist)}\n")
    return buf.getvalue()


def cmd_trace(args):
    if args.steps < 2:
        raise UsageError("--steps must be >= 2")
    wc = _token(WordClass, args.word_class, "class")
    cue = _token(Cue, args.cue, "cue")
    rows = trace_evolution(wc, cue, _params(args.params), args.steps)
    buf = io.StringIO()
    buf.write("t,p_L1,p_L2,p_L3,p_L123\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def cmd_demo_order(args):
    wc = _token(WordClass, args.word_class, "class")
    cue = _token(Cue, args.cue, "cue")
    first = _token(Probe, args.first, "probe")
    second = _token(Probe, args.second, "probe")
    if first not in SINGLE_PROBES or second not in SINGLE_PROBES:
        raise UsageError("--first/--second must be single-list probes (L1, L2, L3)")
    if first == second:
        raise UsageError("--first and --second must differ")
    p = _params(args.params)
    forward = sequential_acceptance(wc, cue, first, second, p)
    backward = sequential_acceptance(wc, cue, second, first, p)
    lines = ["order,p_first,p_second_given_first,p_joint"]
    for (a, b), (pf, ps, pj) in (((first, second), forward), ((second, first), backward)):
        lines.append(f"{a.value}>{b.value},{pf:.12f},{ps:.12f},{pj:.12f}")
    lines.append(f"joint_difference,{forward[2] - backward[2]:.12e}")
    return "\n".join(lines) + "\n"


def cmd_fit(args):
    if not Path(args.data).is_file():
        raise UsageError(f"data file not found: {args.data}")
    obs = load_observations(args.data)
    if args.start:
        result = _fit.refine(obs, _params(args.start))
    else:
        try:
            spec = _fit.GridSpec.uniform(lower=args.grid_min, upper=args.grid_max,
                                         points=args.grid_points, levels=args.levels)
        except _fit.ConfigurationError as exc:
            raise UsageError(str(exc)) from None
        result = _fit.fit(obs, spec, refine_result=not args.no_refine, n_jobs=args.jobs)
    print(f"rmse {result.rmse:.6g} ({result.evaluations} evaluations)", file=sys.stderr)
    return json.dumps(result.to_dict(), indent=2) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qem", description=(
        "Hamiltonian quantum episodic memory model for three-list source memory."))
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="64 acceptance probabilities and 16 unpacking factors")
    p.add_argument("--params", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("fit", help="fit the eight drivers to an observations CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--grid-min", type=float, default=-1.0)
    p.add_argument("--grid-max", type=float, default=1.0)
    p.add_argument("--grid-points", type=int, default=3)
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--start", help="params file; skip the grid and refine from here")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("trace", help="acceptance probabilities over both stages")
    p.add_argument("--params", required=True)
    p.add_argument("--class", dest="word_class", required=True)
    p.add_argument("--cue", required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("uf", help="unpacking factors with verbatim/gist decomposition")
    p.add_argument("--params", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_uf)

    p = sub.add_parser("demo-order", help="compare the two orders of two sequential queries")
    p.add_argument("--params", required=True)
    p.add_argument("--class", dest="word_class", required=True)
    p.add_argument("--cue", required=True)
    p.add_argument("--first", required=True)
    p.add_argument("--second", required=True)
    p.set_defaults(func=cmd_demo_order, out=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = args.func(args)
    except (UsageError, DataFormatError, ModelDomainError) as exc:
        print(f"qem {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _write_output(text, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
