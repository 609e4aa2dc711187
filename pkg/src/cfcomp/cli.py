"""``cfcomp`` command line.

Exit codes: 0 success, 1 invariant failure, 2 parse or unknown input,
3 validity error, 4 resource cap.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__, document, verify
from .bounds import FAMILIES, BOUND_TOL, BoundCheck, check_n1_bounds, check_n_bound, check_sum_bound, sweep
from .classify import CFReport, classify
from .errors import (BoundViolation, DocumentError, LeafCapExceeded, NotApplicable, UnsupportedComputer,
                     ValidationError)
from .history import LEAF_CAP, expand, normalization_check
from .protocol import Protocol
from .tensor import ZERO_TOL

EXIT_OK, EXIT_INVARIANT, EXIT_INPUT, EXIT_VALIDITY, EXIT_CAP = 0, 1, 2, 3, 4
DIGITS = 12
AMP_CUTOFF = 1e-15


class UsageError(Exception):
    """Bad flag value; maps to exit code 2."""


# --- formatting ---------------------------------------------------------------

def fmt(x: float) -> str:
    """12 significant digits, locale independent, no negative zero."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.{DIGITS}g}"
    return "0" if float(s) == 0 else s


def fmt_complex(z: complex) -> str:
    re, im = fmt(z.real), fmt(z.imag)
    if im == "0":
        return re
    if re == "0":
        return f"{im}i"
    return f"{re}{'' if im.startswith('-') else '+'}{im}i"


def fmt_vector(p: Protocol, amps: np.ndarray) -> str:
    parts = []
    for k in np.flatnonzero(np.abs(amps) > AMP_CUTOFF):
        digits = "".join(str(d) if d < 10 else chr(ord("a") + d - 10) for d in p.layout.digits(int(k)))
        parts.append(f"{fmt_complex(complex(amps[k]))}|{digits}>")
    return " ".join(parts) if parts else "0"


def fmt_m(m) -> str:
    return ",".join(m)


def write_table(out, rows: list[list[str]], header: list[str], kind: str):
    if kind == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    for row in [header, *rows]:
        out.write("  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip() + "\n")


# --- shared helpers -----------------------------------------------------------

def _variant(p: Protocol, spec: str) -> int:
    names = p.computer.names
    if spec in names:
        return names.index(spec)
    try:
        r = int(spec)
    except ValueError:
        r = -1
    if 0 <= r < len(names):
        return r
    raise UsageError(f"unknown variant {spec!r}; variants are {', '.join(names)}")


def _dump_instance(p: Protocol, dump_dir: str, stem: str) -> Path:
    path = Path(dump_dir) / f"{stem}-{document.document_hash(p)[:12]}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(document.serialize(p), encoding="utf-8")
    return path


def report_checks(rep: CFReport, tol: float) -> dict[str, BoundCheck | None]:
    """Bound checks applicable to ``rep`` keyed by column name; None when not applicable."""
    checks: dict[str, BoundCheck | None] = {"sum_bound_margin": None, "n_bound_margin": None,
                                            "n1_bound_margin": None}
    try:
        c = check_sum_bound(rep)
        checks["sum_bound_margin"] = BoundCheck(c.name, c.lhs, c.rhs, tol)
    except NotApplicable:
        pass
    if rep.common_off:
        c = check_n_bound(rep)
        if c is not None:
            checks["n_bound_margin"] = BoundCheck(c.name, c.lhs, c.rhs, tol)
    try:
        c = check_n1_bounds(rep)[0]
        checks["n1_bound_margin"] = BoundCheck(c.name, c.lhs, c.rhs, tol)
    except NotApplicable:
        pass
    return checks


def _margin(c: BoundCheck | None) -> str:
    return "" if c is None else fmt(c.margin)


# --- commands -----------------------------------------------------------------

def cmd_run(args, out) -> int:
    p = document.load(args.document)
    r = _variant(p, args.variant)
    tree = expand(p, r, labels=args.labels, leaf_cap=args.leaf_cap)
    leaves = tree.leaves if args.all else tree.nonzero_leaves()
    leaves = sorted(leaves, key=lambda h: h.label_string)
    rows = [[h.label_string, fmt(h.weight), fmt_vector(p, h.terminal.amps)] for h in leaves]
    write_table(out, rows, ["history", "weight", "terminal"], args.format)
    total = normalization_check(tree)
    if args.format == "text":
        out.write(f"# variant {p.computer.names[r]}: {len(rows)} histories shown of {len(tree.leaves)}, "
                  f"sum |v_h|^2 = {fmt(total)}\n")
    if abs(total - 1) > args.tolerance:
        path = _dump_instance(p, args.dump_dir, "normalization")
        print(f"error: sum |v_h|^2 = {total!r} deviates from 1; instance written to {path}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def classify_rows(p: Protocol, rep: CFReport, tol: float) -> tuple[list[str], list[list[str]], dict]:
    names = rep.variant_names
    checks = report_checks(rep, tol)
    header = ["m", "type", "probability", *(f"p_{n}" for n in names), "p_sum", *checks]
    blank = [""] * (len(names) + 1 + len(checks))
    rows = [[fmt_m(o.m), names[o.variant], fmt(o.probability), *blank] for o in rep.outcomes]
    rows.append(["", "total", fmt(rep.p_sum), *(fmt(x) for x in rep.p), fmt(rep.p_sum),
                 *(_margin(c) for c in checks.values())])
    return header, rows, checks


def run_record(p: Protocol, rep: CFReport, checks: dict, seed, wall: float) -> dict:
    return {
        "document_sha256": document.document_hash(p),
        "version": __version__,
        "seed": seed,
        "variants": [{"name": name, "outcome_sequences": len(recs),
                      "sum_weight": sum(rec.weight for rec in recs.values())}
                     for name, recs in zip(rep.variant_names, rep.records)],
        "report": {
            "zero_tol": rep.zero_tol,
            "outcomes": [{"m": list(o.m), "type": rep.variant_names[o.variant], "probability": o.probability,
                          "witness": o.witness} for o in rep.outcomes],
            "p": dict(zip(rep.variant_names, rep.p)),
            "p_sum": rep.p_sum,
        },
        "checks": {k: None if c is None else {"name": c.name, "lhs": c.lhs, "rhs": c.rhs, "margin": c.margin,
                                              "passed": c.passed}
                   for k, c in checks.items()},
        "wall_time_s": wall,
    }


def cmd_classify(args, out) -> int:
    p = document.load(args.document)
    seed = args.seed if args.seed is not None else p.meta.get("seed")
    t0 = time.perf_counter()
    try:
        rep = classify(p, zero_tol=args.zero_tol, engine=args.engine, labels=args.labels, threads=args.threads,
                       leaf_cap=args.leaf_cap)
    except BoundViolation as exc:
        path = _dump_instance(p, args.dump_dir, "violation")
        print(f"error: {exc}; instance written to {path}", file=sys.stderr)
        return EXIT_INVARIANT
    wall = time.perf_counter() - t0
    header, rows, checks = classify_rows(p, rep, args.tolerance)
    if args.format == "csv":
        write_table(out, rows, header, "csv")
    else:
        table = [[r[0] or "-", r[1], r[2], o.witness] for r, o in zip(rows, rep.outcomes)]
        if table:
            write_table(out, table, ["m", "type", "probability", "witness"], "text")
        else:
            out.write("no counterfactual outcomes\n")
        for name, x in zip(rep.variant_names, rep.p):
            out.write(f"p_{name} = {fmt(x)}\n")
        out.write(f"p_sum = {fmt(rep.p_sum)}\n")
        for key, c in checks.items():
            if c is not None:
                out.write(f"{c.name}: margin {fmt(c.margin)} {'ok' if c.passed else 'VIOLATED'}\n")
    if args.record:
        Path(args.record).write_text(json.dumps(run_record(p, rep, checks, seed, wall), indent=2) + "\n",
                                     encoding="utf-8")
    failed = [c for c in checks.values() if c is not None and not c.passed]
    if failed:
        path = _dump_instance(p, args.dump_dir, "violation")
        print(f"error: {failed[0].name} violated; instance written to {path}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def parse_grid(spec: str, integer: bool) -> list:
    """``a..b`` integer range, ``start:stop:count`` linspace, or a comma list."""
    try:
        if ".." in spec:
            lo, hi = spec.split("..")
            vals = list(range(int(document.evaluate(lo)), int(document.evaluate(hi)) + 1))
        elif ":" in spec:
            start, stop, count = spec.split(":")
            n = int(document.evaluate(count))
            if n < 1:
                raise ValueError("grid needs at least one point")
            vals = [float(v) for v in np.linspace(document.evaluate(start), document.evaluate(stop), n)]
        else:
            vals = [document.evaluate(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad grid {spec!r}: {exc}") from exc
    if not vals:
        raise UsageError(f"grid {spec!r} is empty")
    if integer:
        if any(v != int(v) for v in vals):
            raise UsageError(f"grid {spec!r} must contain integers")
        vals = [int(v) for v in vals]
    return vals


def _params(items) -> dict:
    out = {}
    for item in items or ():
        key, eq, val = item.partition("=")
        if not eq:
            raise UsageError(f"expected key=value, got {item!r}")
        try:
            num = document.evaluate(val)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        out[key.strip()] = int(num) if num == int(num) and key.strip() in ("K", "steps") else num
    return out


def cmd_sweep(args, out) -> int:
    if args.family not in FAMILIES:
        raise UsageError(f"unknown family {args.family!r}; known: {', '.join(sorted(FAMILIES))}")
    fam = FAMILIES[args.family]
    grid = parse_grid(args.grid, integer=fam.param == "N")
    extra = _params(args.param)
    try:
        res = sweep(fam, grid, threads=args.threads, **extra)
    except (ValueError, RuntimeError) as exc:
        raise UsageError(str(exc)) from exc
    names = res.variant_names
    cols = ["sum_bound_margin", "n_bound_margin", "n1_bound_margin"]
    header = [fam.param, "n_insertions", *(f"p_{n}" for n in names), "p_sum", "epsilon", *cols]
    rows = []
    for pt in res.points:
        by_col = {}
        for c in pt.checks:
            key = "sum_bound_margin" if c.name == "p0+p1<=1" else "n_bound_margin" if c.name.startswith("N>=") \
                else "n1_bound_margin"
            by_col[key] = fmt(c.margin)
        value = str(int(pt.value)) if fam.param == "N" else fmt(pt.value)
        rows.append([value, str(pt.n_insertions),
                     *(fmt(x) for x in pt.p), fmt(pt.p_sum),
                     fmt(1 - pt.p_sum) if pt.p_sum <= 1 else "", *(by_col.get(c, "") for c in cols)])
    buf = io.StringIO()
    if args.format == "csv":
        extras = " ".join(f"{k}={v}" for k, v in sorted(extra.items()))
        buf.write(f"# cfcomp {__version__} sweep family={fam.name} param={fam.param} seed={args.seed}"
                  f"{' ' + extras if extras else ''}\n")
        buf.write("# columns: grid value, insertion count, CF probability per variant, their sum, 1 - sum, "
                  "bound margins (empty cells: not applicable)\n")
    write_table(buf, rows, header, args.format)
    text = buf.getvalue()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    bad = [(pt, c) for pt in res.points for c in pt.checks if not c.passed]
    if bad:
        pt, c = bad[0]
        print(f"error: {c.name} violated at {fam.param}={pt.value!r}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_verify(args, out) -> int:
    verify.NORM_TOL = args.tolerance
    counts: Counter = Counter()
    failures = []
    for res in verify.run(args.scope, seed=args.seed, count=args.count):
        group = res.name.split(" ")[0]
        counts[group, res.passed] += 1
        if args.verbose or not res.passed:
            out.write(f"{'PASS' if res.passed else 'FAIL'} {res.name}{': ' + res.detail if res.detail else ''}\n")
        if not res.passed:
            failures.append(res)
    groups = sorted({g for g, _ in counts})
    for g in groups:
        ok, bad = counts[g, True], counts[g, False]
        out.write(f"{'ok  ' if not bad else 'FAIL'} {g}: {ok} passed, {bad} failed\n")
    total = sum(counts.values())
    out.write(f"verify scope={args.scope} seed={args.seed}: {total} checks, {len(failures)} failed\n")
    for res in failures:
        if res.instance is not None:
            path = _dump_instance(res.instance, args.dump_dir, "verify-failure")
            out.write(f"replay: {res.name} -> {path}\n")
    return EXIT_INVARIANT if failures else EXIT_OK


# --- entry point --------------------------------------------------------------

def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonneg_float(s: str) -> float:
    v = float(s)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfcomp", description="Counterfactual computation protocols.")
    parser.add_argument("--version", action="version", version=f"cfcomp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "text"), default=None,
                        help="output format (default: csv for sweep, text otherwise)")
    common.add_argument("--tolerance", type=_nonneg_float, default=BOUND_TOL,
                        help="tolerance for normalization and bound checks")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--dump-dir", default=".", help="where violating instances are written")

    doc = argparse.ArgumentParser(add_help=False)
    doc.add_argument("document", help="document path, '-' for stdin, or gallery:NAME[:key=val,...]")
    doc.add_argument("--zero-tol", type=_nonneg_float, default=ZERO_TOL)
    doc.add_argument("--leaf-cap", type=_positive_int, default=LEAF_CAP)
    doc.add_argument("--labels", choices=("offon", "signature"), default="offon")

    p_run = sub.add_parser("run", parents=[common, doc], help="print the history tree for one variant")
    p_run.add_argument("--variant", default="0", help="variant name or index")
    p_run.add_argument("--all", action="store_true", help="include zero-amplitude histories")
    p_run.set_defaults(func=cmd_run)

    p_cls = sub.add_parser("classify", parents=[common, doc], help="find counterfactual outcomes")
    p_cls.add_argument("--threads", type=_positive_int, default=1)
    p_cls.add_argument("--engine", choices=("compact", "tree"), default="compact")
    p_cls.add_argument("--record", help="write a JSON run record here")
    p_cls.set_defaults(func=cmd_classify)

    p_sw = sub.add_parser("sweep", parents=[common], help="classify a protocol family over a grid")
    p_sw.add_argument("family")
    p_sw.add_argument("--grid", required=True, help="a..b, start:stop:count, or a comma list")
    p_sw.add_argument("--param", action="append", help="fixed family parameter, e.g. K=3")
    p_sw.add_argument("--threads", type=_positive_int, default=1)
    p_sw.add_argument("-o", "--output")
    p_sw.set_defaults(func=cmd_sweep)

    p_ver = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    p_ver.add_argument("--scope", choices=verify.SCOPES, default="all")
    p_ver.add_argument("--count", type=_positive_int, default=200)
    p_ver.add_argument("-v", "--verbose", action="store_true")
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.format is None:
        args.format = "csv" if args.command == "sweep" else "text"
    if args.command == "verify" and args.seed is None:
        args.seed = 42
    if args.command == "sweep" and args.seed is None:
        args.seed = 0
    try:
        return args.func(args, out)
    except (DocumentError, UsageError, UnsupportedComputer) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValidationError as exc:
        print(f"invalid protocol: {exc}", file=sys.stderr)
        return EXIT_VALIDITY
    except LeafCapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
