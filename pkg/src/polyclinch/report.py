"""JSON-friendly reports: outcomes, traces and audit verdicts.

Every rational is written as an exact "p/q" string; human-facing numbers also
carry a 20-significant-digit decimal. Buyer ids are 1-based.
"""

from __future__ import annotations

import json
import math
from decimal import Decimal, localcontext
from fractions import Fraction

from .auction import (
    AuctionInstance,
    AuctionOutcome,
    Clinch,
    DemandDecremented,
    DemandZeroed,
    Drop,
    DropCause,
    PriceSet,
)
from .audit import AuditReport
from .errors import MalformedTrace, ParseError
from .instances import parse_rational
from .welfare import LwOptResult, liquid_welfare, social_welfare

SCHEMA = "clinch-report/1"
DIGITS = 20


def decimal_str(q) -> str:
    q = Fraction(q)
    with localcontext() as ctx:
        ctx.prec = DIGITS
        return str(Decimal(q.numerator) / Decimal(q.denominator))


def number(q) -> dict:
    return {"exact": str(Fraction(q)), "decimal": decimal_str(q)}


def jsonable(obj):
    """Recursively turn witnesses and values into plain JSON types."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, float):
        if math.isinf(obj):
            return "-inf" if obj < 0 else "inf"
        return repr(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (frozenset, set)):
        return sorted(jsonable(v) for v in obj)
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if hasattr(obj, "value"):  # enums
        return obj.value
    return str(obj)


def event_to_doc(ev) -> dict:
    if isinstance(ev, PriceSet):
        return {"kind": ev.kind, "price": str(ev.price)}
    if isinstance(ev, (DemandZeroed, DemandDecremented)):
        return {"kind": ev.kind, "buyer": ev.buyer + 1}
    if isinstance(ev, Clinch):
        return {"kind": ev.kind, "buyer": ev.buyer + 1, "amount": ev.amount, "price": str(ev.price)}
    if isinstance(ev, Drop):
        return {"kind": ev.kind, "buyer": ev.buyer + 1, "cause": ev.cause.value, "price": str(ev.price)}
    raise TypeError(f"not a trace event: {ev!r}")


def event_from_doc(doc: dict):
    try:
        kind = doc["kind"]
        if kind == "price":
            return PriceSet(parse_rational(doc["price"], "price"))
        if kind == "demand_zeroed":
            return DemandZeroed(int(doc["buyer"]) - 1)
        if kind == "demand_decremented":
            return DemandDecremented(int(doc["buyer"]) - 1)
        if kind == "clinch":
            return Clinch(int(doc["buyer"]) - 1, int(doc["amount"]), parse_rational(doc["price"], "price"))
        if kind == "drop":
            return Drop(int(doc["buyer"]) - 1, DropCause(doc["cause"]), parse_rational(doc["price"], "price"))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedTrace(f"bad trace event {doc!r}: {exc}") from None
    raise MalformedTrace(f"unknown event kind {doc.get('kind')!r}")


def audit_to_doc(rep: AuditReport) -> dict:
    return {
        "passed": rep.passed,
        "checks": [
            {
                "name": r.name,
                "passed": r.passed,
                "asserted": r.asserted,
                **({"detail": r.detail} if r.detail else {}),
                **({"witness": jsonable(r.witness)} if r.witness is not None else {}),
            }
            for r in rep.results
        ],
    }


def lw_opt_to_doc(res: LwOptResult) -> dict:
    return {
        "virtual_buyers": [
            {
                "parent": vb.parent + 1,
                "part": vb.part,
                "valuation": str(vb.valuation),
                "budget": str(vb.budget),
                "units": z,
            }
            for vb, z in zip(res.virtual, res.z_star)
        ],
        "x_star": list(res.x_star),
        "LW_OPT": number(res.lw_value),
    }


def run_report(
    instance: AuctionInstance,
    outcome: AuctionOutcome,
    lw_opt: LwOptResult = None,
    audit: AuditReport = None,
    trace: bool = False,
) -> dict:
    x, p = outcome.x_final, outcome.p_final
    lw_m = liquid_welfare(instance, x)
    doc = {
        "schema": SCHEMA,
        "n": instance.n,
        "x_final": list(x),
        "p_final": [str(q) for q in p],
        "p_final_decimal": [decimal_str(q) for q in p],
        "revenue": number(sum(p, Fraction(0))),
        "SW_M": number(social_welfare(instance, x)),
        "LW_M": number(lw_m),
        "iterations": outcome.iterations,
    }
    if lw_opt is not None:
        doc["LW_OPT"] = number(lw_opt.lw_value)
        doc["x_star"] = list(lw_opt.x_star)
        doc["ratios"] = {"LW_M/LW_OPT": number(lw_m / lw_opt.lw_value)}
    if trace:
        doc["trace"] = [event_to_doc(e) for e in outcome.trace]
    if audit is not None:
        doc["audit"] = audit_to_doc(audit)
    return doc


def outcome_from_report(doc: dict) -> AuctionOutcome:
    """Rebuild an outcome from a run report that includes its trace."""
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
        raise ParseError(f"not a {SCHEMA} document")
    if "trace" not in doc:
        raise ParseError("report has no trace; produce it with --trace")
    try:
        x = tuple(int(v) for v in doc["x_final"])
        p = tuple(parse_rational(v, "p_final") for v in doc["p_final"])
        iterations = int(doc["iterations"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad report: {exc}") from None
    trace = [event_from_doc(e) for e in doc["trace"]]
    return AuctionOutcome(x, p, trace, iterations)


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"
