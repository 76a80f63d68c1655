"""Command-line front-end: ``frobvir gw | virasoro | constraints``.

Exit codes: 0 when every check passes, 1 on a mathematical failure
(nonzero residual or inconsistent system), 2 on usage or I/O errors.
Outputs are deterministic and written atomically.
"""

import argparse
import json
import os
import sys
import tempfile

from . import gw
from .constraints import evaluate_range, CutoffIncompatible, NotSemisimple
from .frobenius import load_model, CutoffExhausted
from .monodromy import HalfIntegerResonance, load_monodromy
from .virasoro import check_virasoro_relations

RANGE_FLAGS = ("--range",)


class UsageError(Exception):
    pass


def parse_range(text):
    """'a..b' (inclusive) or a single integer."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
        else:
            lo = hi = int(text)
    except ValueError:
        raise UsageError(f"bad range {text!r}, expected like -1..3") from None
    if lo > hi:
        raise UsageError(f"empty range {text!r}")
    return list(range(lo, hi + 1))


def write_atomic(path, text):
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".frobvir-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text, out):
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _say(msg, out):
    # keep stdout clean for the table itself when no --out is given
    print(msg, file=sys.stdout if out else sys.stderr)


def _positive(name, value):
    if value is None or value < 1:
        raise UsageError(f"{name} must be a positive integer")
    return value


def cmd_gw(args):
    if args.target == "p1xp1":
        bound = _positive("--max-total", args.max_total)
    else:
        bound = _positive("--max-degree", args.max_degree)
    header, rows = gw.table_rows(args.target, args.genus, bound)
    if args.format == "csv":
        text = gw.rows_to_csv(header, rows)
    else:
        text = gw.rows_to_json(args.target, args.genus, header, rows)
    _emit(text, args.out)
    values = [int(r[i]) for r in rows for i, h in enumerate(header)
              if h in ("N0", "N1") and "/" not in r[i]]
    largest = max(values, default=0)
    _say(f"{args.target} genus {args.genus}: {len(rows)} rows, largest value {largest}", args.out)
    return 0


def _monodromy(source):
    try:
        return load_monodromy(source)
    except (OSError, KeyError, ValueError) as err:
        raise UsageError(f"cannot load model {source!r}: {err}") from None


def cmd_virasoro(args):
    data = _monodromy(args.model)
    ms = parse_range(args.range)
    P = _positive("--cutoff", args.cutoff)
    report = check_virasoro_relations(data, ms, P)
    doc = {"model": data.name or args.model, "cutoff": P, "range": [ms[0], ms[-1]],
           "rows": report}
    _emit(json.dumps(doc, indent=1, sort_keys=True) + "\n", args.out)
    failed = [r for r in report if r["pass"] is False]
    resonant = [r for r in report if r["resonant"]]
    _say(f"{len(report)} pairs: {len(report) - len(failed) - len(resonant)} pass, "
         f"{len(failed)} fail, {len(resonant)} resonant", args.out)
    if failed or (args.strict and resonant):
        return 1
    return 0


def cmd_constraints(args):
    try:
        model = load_model(args.model)
    except (OSError, KeyError, ValueError) as err:
        raise UsageError(f"cannot load model {args.model!r}: {err}") from None
    ms = parse_range(args.range)
    D = _positive("--order", args.order)
    P = args.level if args.level is not None else max(D, max(ms) + 1)
    if args.genus not in (0, 1):
        raise UsageError("--genus must be 0 or 1")
    try:
        reports = evaluate_range(model, args.genus, ms, P, D)
    except (CutoffIncompatible, CutoffExhausted, NotSemisimple, HalfIntegerResonance) as err:
        raise UsageError(str(err)) from None
    doc = [r.to_json() for r in reports]
    _emit(json.dumps(doc, indent=1, sort_keys=True) + "\n", args.out)
    ok = sum(r.passed for r in reports)
    _say(f"{model.name} genus {args.genus}: {ok}/{len(reports)} constraints vanish "
         f"through degree {D}", args.out)
    return 0 if ok == len(reports) else 1


def build_parser():
    p = argparse.ArgumentParser(prog="frobvir", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gw", help="Gromov-Witten tables for P1xP1 or CP3")
    g.add_argument("--target", choices=["p1xp1", "cp3"], required=True)
    g.add_argument("--genus", type=int, choices=[0, 1], required=True)
    g.add_argument("--max-total", type=int, help="bound on k + l (p1xp1)")
    g.add_argument("--max-degree", type=int, help="bound on the degree (cp3)")
    g.add_argument("--format", choices=["csv", "json"], default="csv")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gw)

    v = sub.add_parser("virasoro", help="check the Virasoro commutation relations")
    v.add_argument("--model", required=True, help="bundled id or monodromy JSON path")
    v.add_argument("--range", default="-1..2")
    v.add_argument("--cutoff", type=int, default=8)
    v.add_argument("--strict", action="store_true", help="treat resonant rows as failures")
    v.add_argument("--out")
    v.set_defaults(func=cmd_virasoro)

    c = sub.add_parser("constraints", help="genus 0/1 Virasoro constraint residuals")
    c.add_argument("--model", required=True, help="bundled id or model JSON path")
    c.add_argument("--genus", type=int, default=0)
    c.add_argument("--range", default="-1..0")
    c.add_argument("--order", type=int, default=3)
    c.add_argument("--level", type=int, help="coupling level cutoff (default: max(order, largest m + 1))")
    c.add_argument("--out")
    c.set_defaults(func=cmd_constraints)
    return p


def _join_ranges(argv):
    # let "--range -1..3" through; argparse would read -1..3 as a flag
    out = []
    it = iter(argv)
    for a in it:
        if a in RANGE_FLAGS:
            nxt = next(it, None)
            out.append(a if nxt is None else f"{a}={nxt}")
        else:
            out.append(a)
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_ranges(argv))
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.func(args)
    except UsageError as err:
        print(f"frobvir: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"frobvir: {err}", file=sys.stderr)
        return 2
    except (gw.EllipticInconsistency, gw.WDVVInconsistency, ArithmeticError) as err:
        print(f"frobvir: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
