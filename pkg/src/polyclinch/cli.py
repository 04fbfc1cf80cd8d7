"""Command-line front end.

    polyclinch run INSTANCE [--trace] [--audit] [--lw-opt]
    polyclinch run --fixture prop54 --k 3 --lw-opt
    polyclinch sweep --fixture prop54 --k-min 2 --k-max 20
    polyclinch check INSTANCE --suite welfare --suite tight [--report RUN.json]
    polyclinch generate bipartite --n 4 --goods 3 --seed 2 --out inst.json
    polyclinch lw-opt INSTANCE

Exit codes: 0 ok, 2 usage, 3 parse, 4 validation, 5 guard, 6 audit failure,
1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import instances
from .auction import run_auction
from .audit import SUITES, run_checks
from .errors import (
    ClinchError,
    GuardExceeded,
    MalformedTrace,
    NotInPolymatroid,
    ParseError,
    UnknownFixture,
    ValidationError,
)
from .report import (
    audit_to_doc,
    decimal_str,
    dumps,
    jsonable,
    lw_opt_to_doc,
    outcome_from_report,
    run_report,
)
from .welfare import liquid_welfare, lw_optimal

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_GUARD = 5
EXIT_AUDIT = 6


class UsageError(Exception):
    pass


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (UsageError, UnknownFixture)):
        return EXIT_USAGE
    if isinstance(exc, (ParseError, MalformedTrace)):
        return EXIT_PARSE
    if isinstance(exc, (ValidationError, NotInPolymatroid)):
        return EXIT_VALIDATION
    if isinstance(exc, GuardExceeded):
        return EXIT_GUARD
    return EXIT_ERROR


def _instance(args) -> instances.AuctionInstance:
    if args.fixture and args.instance:
        raise UsageError("give either an instance file or --fixture, not both")
    if args.fixture:
        return instances.fixture(args.fixture, args.k)
    if not args.instance:
        raise UsageError("an instance file or --fixture is required")
    if args.instance == "-":
        return instances.load(sys.stdin.read())
    try:
        with open(args.instance, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {args.instance}: {exc.strerror}") from None
    return instances.load(text)


def _table(rows, header) -> str:
    rows = [[str(c) for c in r] for r in rows]
    widths = [max(len(h), *(len(r[k]) for r in rows)) if rows else len(h) for k, h in enumerate(header)]
    line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()  # noqa: E731
    return "\n".join([line(header), line(["-" * w for w in widths])] + [line(r) for r in rows]) + "\n"


def _audit_table(audit: dict) -> str:
    rows = []
    for c in audit["checks"]:
        verdict = ("PASS" if c["passed"] else "FAIL") if c["asserted"] else ("yes" if c["passed"] else "no") + " (info)"
        extra = c.get("detail", "")
        if "witness" in c:
            extra = (extra + " " if extra else "") + json.dumps(c["witness"], sort_keys=True)
        rows.append([c["name"], verdict, extra])
    return _table(rows, ["check", "verdict", "detail / witness"])


def _run_table(doc: dict) -> str:
    rows = [
        [i + 1, x, p, dec] for i, (x, p, dec) in enumerate(zip(doc["x_final"], doc["p_final"], doc["p_final_decimal"]))
    ]
    out = [_table(rows, ["buyer", "units", "payment", "payment (decimal)"])]
    summary = []
    for key in ("revenue", "SW_M", "LW_M", "LW_OPT"):
        if key in doc:
            summary.append([key, doc[key]["exact"], doc[key]["decimal"]])
    for key, val in doc.get("ratios", {}).items():
        summary.append([key, val["exact"], val["decimal"]])
    summary.append(["iterations", doc["iterations"], ""])
    out.append(_table(summary, ["quantity", "exact", "decimal"]))
    if "trace" in doc:
        out.append(_table([[k, json.dumps(e)] for k, e in enumerate(doc["trace"])], ["step", "event"]))
    if "audit" in doc:
        out.append(_audit_table(doc["audit"]))
    return "\n".join(out)


def _emit(doc: dict, fmt: str, table_fn) -> None:
    sys.stdout.write(dumps(doc) if fmt == "json" else table_fn(doc))


def cmd_run(args) -> int:
    inst = _instance(args)
    outcome = run_auction(inst)
    opt = lw_optimal(inst) if args.lw_opt else None
    audit = run_checks(inst, outcome, ("all",), seed=args.seed) if args.audit else None
    doc = run_report(inst, outcome, lw_opt=opt, audit=audit, trace=args.trace)
    _emit(doc, args.format, _run_table)
    return EXIT_AUDIT if audit is not None and not audit.passed else EXIT_OK


def cmd_lw_opt(args) -> int:
    inst = _instance(args)
    inst.validate()
    doc = {"schema": "clinch-report/1", **lw_opt_to_doc(lw_optimal(inst))}

    def table(d):
        rows = [[v["parent"], v["part"], v["valuation"], v["budget"], v["units"]] for v in d["virtual_buyers"]]
        head = _table(rows, ["parent", "part", "valuation", "budget", "units"])
        return head + f"\nx* = {d['x_star']}\nLW_OPT = {d['LW_OPT']['exact']} ({d['LW_OPT']['decimal']})\n"

    _emit(doc, args.format, table)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.k_min > args.k_max:
        raise UsageError("--k-min must not exceed --k-max")
    rows, ok = [], True
    for k in range(args.k_min, args.k_max + 1):
        inst = instances.fixture(args.fixture, k)
        outcome = run_auction(inst)
        lw_m = liquid_welfare(inst, outcome.x_final)
        lw_opt = lw_optimal(inst).lw_value
        ratio = lw_m / lw_opt
        expected = Fraction(k, 2 * k - 1)
        match = ratio == expected if args.fixture == "prop54" else None
        ok = ok and match is not False
        rows.append(
            {
                "k": k,
                "LW_M": str(lw_m),
                "LW_OPT": str(lw_opt),
                "ratio": str(ratio),
                "ratio_decimal": decimal_str(ratio),
                **({"expected": str(expected), "match": match} if match is not None else {}),
            }
        )
    doc = {"schema": "clinch-report/1", "fixture": args.fixture, "rows": rows, "passed": ok}

    def table(d):
        cols = ["k", "LW_M", "LW_OPT", "ratio", "ratio_decimal"] + (["match"] if d["fixture"] == "prop54" else [])
        return _table([[r[c] for c in cols] for r in d["rows"]], cols)

    _emit(doc, args.format, table)
    return EXIT_OK if ok else EXIT_AUDIT


def cmd_check(args) -> int:
    inst = _instance(args)
    inst.validate()
    suites = args.suite or ["all"]
    outcome = None
    if args.report:
        try:
            with open(args.report, encoding="utf-8") as fh:
                report = json.load(fh)
        except OSError as exc:
            raise ParseError(f"cannot read {args.report}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ParseError(f"{args.report}: {exc}") from None
        outcome = outcome_from_report(report)
        if len(outcome.x_final) != inst.n:
            raise ParseError("report and instance disagree on the number of buyers")
    rep = run_checks(inst, outcome, suites, seed=args.seed, ic_minimum=args.trials)
    doc = {"schema": "clinch-report/1", "suites": sorted(set(suites)), **audit_to_doc(rep)}
    _emit(doc, args.format, _audit_table)
    return EXIT_OK if rep.passed else EXIT_AUDIT


def cmd_generate(args) -> int:
    params = {}
    for key in ("supply", "goods", "elements"):
        if getattr(args, key) is not None:
            params[key] = getattr(args, key)
    inst = instances.generate(args.family, args.n, seed=args.seed, max_supply=args.max_supply, **params)
    text = instances.dumps(inst)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _add_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("instance", nargs="?", help="instance document (JSON); '-' reads stdin")
    p.add_argument("--fixture", choices=instances.FIXTURES, help="use a built-in instance instead of a file")
    p.add_argument("--k", type=int, default=None, help="fixture parameter")
    p.add_argument("--format", choices=("json", "table"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polyclinch", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the clinching auction on one instance")
    _add_source(p)
    p.add_argument("--trace", action="store_true", help="include the full event list")
    p.add_argument("--audit", action="store_true", help="run every audit; exit 6 if an asserted check fails")
    p.add_argument("--lw-opt", action="store_true", help="also compute the liquid-welfare optimum")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized audit inputs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("lw-opt", help="compute the liquid-welfare optimum")
    _add_source(p)
    p.set_defaults(func=cmd_lw_opt)

    p = sub.add_parser("sweep", help="tabulate LW_M / LW_OPT over a fixture parameter")
    p.add_argument("--fixture", choices=instances.FIXTURES, default="prop54")
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=20)
    p.add_argument("--format", choices=("json", "table"), default="table")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="run audit suites on an instance or a stored run report")
    _add_source(p)
    p.add_argument("--suite", action="append", choices=SUITES + ("all",), help="repeatable; default all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20, help="minimum misreports per buyer for the ic suite")
    p.add_argument("--report", help="audit this run report (made with run --trace) instead of re-running")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("generate", help="write a random instance document")
    p.add_argument("family", choices=instances.FAMILIES)
    p.add_argument("--n", type=int, required=True, help="number of buyers")
    p.add_argument("--supply", type=int, help="multi_unit: number of units")
    p.add_argument("--goods", type=int, help="bipartite: number of goods")
    p.add_argument("--elements", type=int, help="explicit: coverage elements")
    p.add_argument("--max-supply", type=int, default=8, help="upper bound on f(N)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (default stdout)")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ClinchError, UsageError) as exc:
        err = {"error": getattr(exc, "code", "USAGE_ERROR"), "message": str(exc)}
        if getattr(exc, "axiom", None):
            err["axiom"] = exc.axiom
        if getattr(exc, "witness", None) is not None:
            err["witness"] = jsonable(exc.witness)
        sys.stderr.write(json.dumps(err) + "\n")
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
