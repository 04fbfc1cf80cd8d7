"""Checkers for the guarantees of the mechanism on a concrete run.

Every check returns an :class:`AuditReport`. A failed entry always carries a
witness. Buyer ids inside witnesses are 1-based, matching instance documents;
the rest of the Python API uses 0-based indices.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .auction import (
    AuctionInstance,
    AuctionOutcome,
    Clinch,
    DemandDecremented,
    DemandZeroed,
    Drop,
    DropCause,
    PriceSet,
    clinch_amounts,
    iteration_bound,
    replay,
    run_auction,
    utility,
)
from .errors import MalformedTrace, NotInPolymatroid
from .polymatroid import RemnantContext, clinch_brute_oracle, dep, f_xd, integer_points, membership, require_member
from .welfare import liquid_welfare, lw_optimal, social_welfare

SUITES = ("tight", "po", "welfare", "trading", "ic", "iterations", "invariants", "envy")
ASSERTED_SUITES = ("tight", "po", "welfare", "trading", "ic", "iterations", "invariants")


@dataclass
class CheckResult:
    name: str
    passed: bool
    witness: dict | None = None
    asserted: bool = True
    detail: str = ""


@dataclass
class AuditReport:
    results: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results if r.asserted)

    def failures(self) -> list[CheckResult]:
        return [r for r in self.results if r.asserted and not r.passed]

    def __getitem__(self, name: str) -> CheckResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def add(self, name, passed, witness=None, asserted=True, detail="") -> CheckResult:
        r = CheckResult(name, bool(passed), None if passed and asserted else witness, asserted, detail)
        self.results.append(r)
        return r

    def extend(self, other: "AuditReport") -> "AuditReport":
        self.results.extend(other.results)
        return self


def _ids(buyers: Iterable[int]) -> list[int]:
    return sorted(i + 1 for i in buyers)


@dataclass
class DropLayers:
    drop_order: list[int]  # i_1..i_t, last dropped first
    layers: list[frozenset]  # X_1 ⊂ ... ⊂ X_t
    prices: dict
    causes: dict
    layer_of: dict  # buyer -> k (0-based position in drop_order)

    @property
    def t(self) -> int:
        return len(self.drop_order)

    def shell(self, k: int) -> frozenset:
        """X_k − X_{k−1}."""
        return self.layers[k] - (self.layers[k - 1] if k else frozenset())


def build_layers(outcome: AuctionOutcome, n: int = None) -> DropLayers:
    """Recover the demand-update drops and the nested active sets from a trace."""
    n = len(outcome.x_final) if n is None else n
    everyone = frozenset(range(n))
    dropped: set = set()
    prices, causes, trigger_of = {}, {}, {}
    triggers = []  # (buyer, active set just before its drop), in time order
    current_trigger = None
    last_price = None
    for ev in outcome.trace:
        if isinstance(ev, (DemandZeroed, DemandDecremented)):
            current_trigger = None
        elif isinstance(ev, PriceSet):
            current_trigger = None
        elif isinstance(ev, Drop):
            if ev.buyer in dropped or not 0 <= ev.buyer < n:
                raise MalformedTrace(f"buyer {ev.buyer + 1} dropped twice or out of range")
            if ev.price <= 0:
                raise MalformedTrace(f"buyer {ev.buyer + 1} dropped at nonpositive price {ev.price}")
            if last_price is not None and ev.price < last_price:
                raise MalformedTrace("drop prices decrease along the trace")
            last_price = ev.price
            if ev.cause in (DropCause.LINE5, DropCause.LINE9):
                triggers.append((ev.buyer, everyone - dropped))
                current_trigger = ev.buyer
                trigger_of[ev.buyer] = ev.buyer
            else:
                if current_trigger is None:
                    raise MalformedTrace(
                        f"buyer {ev.buyer + 1} dropped while clinching without a preceding demand-update drop"
                    )
                trigger_of[ev.buyer] = current_trigger
            dropped.add(ev.buyer)
            prices[ev.buyer] = ev.price
            causes[ev.buyer] = ev.cause
    if dropped != everyone:
        raise MalformedTrace(f"buyers never dropped: {_ids(everyone - dropped)}")
    triggers.reverse()
    order = [b for b, _ in triggers]
    layers = [frozenset(s) for _, s in triggers]
    pos = {b: k for k, b in enumerate(order)}
    layer_of = {b: pos[trigger_of[b]] for b in range(n)}
    return DropLayers(order, layers, prices, causes, layer_of)


def check_tight_sets(outcome: AuctionOutcome, instance: AuctionInstance, layers: DropLayers = None) -> AuditReport:
    """The four clauses of the tight-sets structure, layer by layer."""
    rep = AuditReport()
    try:
        layers = layers or build_layers(outcome, instance.n)
    except MalformedTrace as exc:
        for c in ("i", "ii", "iii", "iv"):
            rep.add(f"tight_sets.{c}", False, {"malformed_trace": str(exc)})
        return rep
    f = instance.oracle
    x, p = outcome.x_final, outcome.p_final
    B = instance.budgets
    v = instance.valuations
    price = layers.prices
    w = {c: None for c in ("i", "ii", "iii", "iv")}

    def ratio(i):
        return (B[i] - p[i]) / price[i]

    for k, ik in enumerate(layers.drop_order):
        X = layers.layers[k]
        shell = layers.shell(k)
        if k and not layers.layers[k - 1] < X:
            w["i"] = w["i"] or {"k": k + 1, "reason": "layers not strictly nested"}
        if sum(x[i] for i in X) != f(X):
            w["i"] = w["i"] or {"k": k + 1, "X_k": _ids(X), "x(X_k)": sum(x[i] for i in X), "f(X_k)": f(X)}
        for i in shell:
            if price[i] != price[ik]:
                w["ii"] = w["ii"] or {"k": k + 1, "buyer": i + 1, "price": price[i], "trigger_price": price[ik]}
        others = shell - {ik}
        for i in others:
            if ratio(i) > 1:
                w["iii"] = w["iii"] or {"k": k + 1, "buyer": i + 1, "ratio": ratio(i)}
        a = any(ratio(l) == 1 for l in others)
        b = layers.causes[ik] == DropCause.LINE9
        c = ratio(ik) == 1 and all(price[ik] < v[i] for i in X)
        if a and not b:
            w["iv"] = w["iv"] or {"k": k + 1, "implication": "a=>b", "trigger": ik + 1}
        if b and not c:
            w["iv"] = w["iv"] or {"k": k + 1, "implication": "b=>c", "trigger": ik + 1, "ratio": ratio(ik)}
    if layers.drop_order and layers.layers[-1] != frozenset(range(instance.n)):
        w["i"] = w["i"] or {"reason": "outermost layer is not N"}
    for clause in ("i", "ii", "iii", "iv"):
        rep.add(f"tight_sets.{clause}", w[clause] is None, w[clause])
    return rep


def pareto_improvement(instance: AuctionInstance, x, p):
    """Search every integer allocation for a Pareto improvement over (x, p).

    Payments are eliminated: the best the seller can collect from buyer i at
    allocation y without hurting i is cap_i = min(B_i, v_i y_i − u_i).
    Returns ``(y, payments)`` for the improving allocation of largest social
    welfare (first in lexicographic order on ties), else ``None``.
    """
    v, B = instance.valuations, instance.budgets
    u = [v[i] * x[i] - p[i] for i in range(instance.n)]
    revenue = sum(p, Fraction(0))
    best, best_sw = None, None
    for y in integer_points(instance.oracle):
        want = [v[i] * y[i] - u[i] for i in range(instance.n)]
        cap = [min(B[i], want[i]) for i in range(instance.n)]
        total = sum(cap, Fraction(0))
        if total > revenue or (total == revenue and any(B[i] < want[i] for i in range(instance.n))):
            sw = sum(v[i] * y[i] for i in range(instance.n))
            if best is None or sw > best_sw:
                best, best_sw = (y, cap), sw
    return best


def pareto_improvement_by_party(instance: AuctionInstance, x, p):
    """Second formulation: for every allocation and every party, ask whether
    that party can be made strictly better while all others stay weakly
    better, solving each buyer's payment range separately."""
    n = instance.n
    v, B = instance.valuations, instance.budgets
    base_u = [v[i] * x[i] - p[i] for i in range(n)]
    revenue = sum(p, Fraction(0))
    for y in integer_points(instance.oracle):
        # payment range for buyer i: (-inf, hi_i], strict utility gain iff pay < v y - u
        hi, strict_at_hi = [], []
        for i in range(n):
            keep = v[i] * y[i] - base_u[i]
            hi.append(min(keep, B[i]))
            strict_at_hi.append(B[i] < keep)
        best_revenue = sum(hi, Fraction(0))
        if best_revenue > revenue:
            return y, "seller"
        if best_revenue < revenue:
            continue
        for i in range(n):
            # buyer i strictly better needs pay_i < keep_i; others at hi
            if strict_at_hi[i]:
                return y, i
    return None


def check_pareto(outcome: AuctionOutcome, instance: AuctionInstance) -> AuditReport:
    rep = AuditReport()
    found = pareto_improvement(instance, outcome.x_final, outcome.p_final)
    witness = None
    if found:
        y, pay = found
        witness = {"allocation": list(y), "payments": list(pay)}
    rep.add("pareto", found is None, witness)
    return rep


def check_welfare_bounds(outcome: AuctionOutcome, instance: AuctionInstance) -> AuditReport:
    """LW^M >= p(N) >= LW^OPT − LW^M, LW^M >= LW^OPT / 2 and SW^M >= LW^OPT."""
    rep = AuditReport()
    x = outcome.x_final
    lw_m = liquid_welfare(instance, x)
    sw_m = social_welfare(instance, x)
    revenue = sum(outcome.p_final, Fraction(0))
    lw_opt = lw_optimal(instance).lw_value
    vals = {"LW_M": lw_m, "SW_M": sw_m, "revenue": revenue, "LW_OPT": lw_opt}
    rep.add("welfare.lw_ge_revenue", lw_m >= revenue, vals)
    rep.add("welfare.revenue_ge_gap", revenue >= lw_opt - lw_m, vals)
    rep.add("welfare.half_approx", 2 * lw_m >= lw_opt, vals)
    rep.add("welfare.sw_ge_lw_opt", sw_m >= lw_opt, vals)
    return rep


def trading_pairs(instance: AuctionInstance, x, p) -> list[tuple[int, int]]:
    """Ordered pairs (i, j), 0-based, where i could buy one of j's units at price v_j."""
    require_member(instance.oracle, x)
    v, B = instance.valuations, instance.budgets
    pairs = []
    for i in range(instance.n):
        for j in range(instance.n):
            if i != j and v[i] > v[j] and B[i] - p[i] >= v[j] and dep(instance.oracle, x, i, j):
                pairs.append((i, j))
    return pairs


def check_trading_pairs(outcome: AuctionOutcome, instance: AuctionInstance) -> AuditReport:
    rep = AuditReport()
    try:
        pairs = trading_pairs(instance, outcome.x_final, outcome.p_final)
    except NotInPolymatroid:
        rep.add("trading_pairs", False, {"allocation_infeasible": list(outcome.x_final)})
        return rep
    rep.add("trading_pairs", not pairs, {"pairs": [[i + 1, j + 1] for i, j in pairs]})
    return rep


IC_MULTIPLIERS = (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(5, 4), Fraction(3, 2), Fraction(2))


def deviation_bids(instance: AuctionInstance, i: int, truthful: AuctionOutcome = None, seed: int = 0, minimum: int = 20) -> list[Fraction]:
    """Misreports tried for buyer i: multiples of v_i, the other valuations,
    every B_j/m, the truthful run's price stops and their neighbours, topped up
    with seeded random rationals until ``minimum`` distinct bids exist."""
    v = instance.valuations
    vi = v[i]
    bids = {vi * m for m in IC_MULTIPLIERS}
    bids.update(v[j] for j in range(instance.n) if j != i)
    supply = instance.oracle.value(instance.oracle.full)
    for b in instance.budgets:
        bids.update(b / m for m in range(1, supply + 1))
    if truthful is not None:
        stops = sorted(set(truthful.prices))
        bids.update(stops)
        for a, b in zip(stops, stops[1:]):
            bids.add((a + b) / 2)
        for s in stops:
            bids.add(s * Fraction(101, 100))
            bids.add(s * Fraction(99, 100))
    bids.discard(vi)
    bids = {b for b in bids if b > 0}
    rng = random.Random(f"ic:{seed}:{i}")
    top = 3 * max(v)
    while len(bids) < minimum:
        b = Fraction(rng.randint(1, 1000), 1000) * top
        if b != vi:
            bids.add(b)
    return sorted(bids)


def check_ic(instance: AuctionInstance, grid: Sequence = None, seed: int = 0, minimum: int = 20) -> AuditReport:
    """Falsification test for truthfulness: no tried misreport beats the truthful
    utility, and the truthful utility is nonnegative. Not a proof."""
    rep = AuditReport()
    base = instance.truthful()
    base.validate()
    truth = run_auction(base, validate=False)
    ir_witness = None
    ic_witness = None
    tried = 0
    for i in range(base.n):
        u_truth = utility(base, truth.x_final, truth.p_final, i)
        if u_truth < 0 and ir_witness is None:
            ir_witness = {"buyer": i + 1, "utility": u_truth}
        bids = list(grid) if grid is not None else deviation_bids(base, i, truth, seed, minimum)
        for bid in bids:
            bid = Fraction(bid)
            if bid <= 0 or bid == base.buyers[i].valuation:
                continue
            dev = run_auction(base.with_bid(i, bid), validate=False)
            tried += 1
            u_dev = utility(base, dev.x_final, dev.p_final, i)
            if u_dev > u_truth and ic_witness is None:
                ic_witness = {"buyer": i + 1, "bid": bid, "utility_truthful": u_truth, "utility_deviation": u_dev}
    rep.add("ic", ic_witness is None, ic_witness, detail=f"{tried} deviations tried")
    rep.add("ir", ir_witness is None, ir_witness)
    return rep


def envious_pairs(instance: AuctionInstance, x, p) -> list[tuple[int, int]]:
    """(i, j), 0-based, where i strictly prefers j's bundle and payment."""
    out = []
    for i in range(instance.n):
        mine = utility(instance, x, p, i)
        b = instance.buyers[i]
        for j in range(instance.n):
            if i == j:
                continue
            theirs = b.valuation * x[j] - p[j] if p[j] <= b.budget else -math.inf
            if theirs > mine:
                out.append((i, j))
    return out


def check_envy_free(outcome: AuctionOutcome, instance: AuctionInstance) -> AuditReport:
    """Informational only: the mechanism is not envy-free in general."""
    rep = AuditReport()
    pairs = envious_pairs(instance, outcome.x_final, outcome.p_final)
    rep.add("envy_free", not pairs, {"envious_pairs": [[i + 1, j + 1] for i, j in pairs]}, asserted=False)
    return rep


def check_iteration_bound(outcome: AuctionOutcome, instance: AuctionInstance) -> AuditReport:
    rep = AuditReport()
    bound = iteration_bound(instance)
    stops = sum(1 for e in outcome.trace if isinstance(e, PriceSet))
    ok = outcome.iterations <= bound and stops == outcome.iterations
    rep.add("iterations", ok, {"iterations": outcome.iterations, "price_stops": stops, "bound": bound})
    return rep


def check_demand_characterization(outcome: AuctionOutcome, instance: AuctionInstance) -> AuditReport:
    """At every point with c > 0, each active buyer's demand matches the case
    its history puts it in: never decremented, decremented in this round, or
    decremented in an earlier round."""
    rep = AuditReport()
    n = instance.n
    ever = [False] * n
    this_round = [False] * n
    witness = None
    B = instance.budgets
    f1 = [instance.oracle.singleton(i) for i in range(n)]
    for step, (ev, st) in enumerate(replay(instance, outcome.trace)):
        if isinstance(ev, PriceSet):
            this_round = [False] * n
        elif isinstance(ev, DemandDecremented):
            ever[ev.buyer] = True
            this_round[ev.buyer] = True
        if st.c == 0 or witness is not None:
            continue
        for i in st.active():
            r = (B[i] - st.p[i]) / st.c
            if not ever[i]:
                ok, case = st.d[i] == f1[i] + 1 - st.x[i] and st.d[i] <= r, "never"
            elif this_round[i]:
                ok, case = st.d[i] == r - 1, "this_round"
            else:
                ok, case = st.d[i] == math.floor(r), "earlier"
            if not ok:
                witness = {"step": step, "buyer": i + 1, "case": case, "d": st.d[i], "ratio": r}
                break
    rep.add("demand_characterization", witness is None, witness)
    return rep


def check_trace_invariants(outcome: AuctionOutcome, instance: AuctionInstance) -> AuditReport:
    """Integrality, budgets, feasibility and x(N) + f_{x,d}(N) = f(N) after every
    event; prices strictly increasing; one drop per buyer."""
    rep = AuditReport()
    f = instance.oracle
    fN = f.value(f.full)
    B = instance.budgets
    w = {k: None for k in ("integrality", "budget", "feasible", "conservation", "prices", "drops", "final")}
    last_c = None
    for step, (ev, st) in enumerate(replay(instance, outcome.trace)):
        if isinstance(ev, PriceSet):
            if last_c is not None and ev.price <= last_c:
                w["prices"] = w["prices"] or {"step": step, "price": ev.price, "previous": last_c}
            last_c = ev.price
        if not all(isinstance(v, int) and v >= 0 for v in st.x + st.d):
            w["integrality"] = w["integrality"] or {"step": step}
            continue
        if any(st.p[i] > B[i] for i in range(instance.n)):
            w["budget"] = w["budget"] or {"step": step, "payments": list(st.p)}
        if not membership(f, st.x):
            w["feasible"] = w["feasible"] or {"step": step, "x": list(st.x)}
        ctx = RemnantContext(f, st.x, st.d)
        if sum(st.x) + f_xd(ctx, f.full) != fN:
            w["conservation"] = w["conservation"] or {"step": step, "x(N)": sum(st.x), "f_xd(N)": f_xd(ctx, f.full)}
    drops = [e.buyer for e in outcome.trace if isinstance(e, Drop)]
    if sorted(drops) != list(range(instance.n)):
        w["drops"] = {"drops": [b + 1 for b in drops]}
    final = st
    if tuple(final.x) != tuple(outcome.x_final) or tuple(final.p) != tuple(outcome.p_final):
        w["final"] = {"replayed_x": list(final.x), "reported_x": list(outcome.x_final)}
    for k, wit in w.items():
        rep.add(f"invariant.{k}", wit is None, wit)
    return rep


def clinching_calls(instance: AuctionInstance, trace: Sequence):
    """Split a trace into clinching passes.

    Yields ``(entry_state, clinches)`` where ``clinches`` maps buyer -> amount
    for the pass that follows one demand update.
    """
    entry, clinches = None, None
    for ev, st in replay(instance, trace):
        if isinstance(ev, (DemandZeroed, DemandDecremented, PriceSet)):
            if entry is not None:
                yield entry, clinches
            entry, clinches = (st, {}) if not isinstance(ev, PriceSet) else (None, None)
        elif isinstance(ev, Clinch):
            if entry is None:
                raise MalformedTrace("clinch outside a clinching pass")
            clinches[ev.buyer] = clinches.get(ev.buyer, 0) + ev.amount
    if entry is not None:
        yield entry, clinches


def check_clinch_amounts(outcome: AuctionOutcome, instance: AuctionInstance) -> AuditReport:
    """Every recorded clinch equals the definition-level amount, computed both
    on the pass's entry state and buyer by buyer as the pass proceeds."""
    rep = AuditReport()
    witness = None
    n = instance.n
    for call, (entry, clinches) in enumerate(clinching_calls(instance, outcome.trace)):
        recorded = [clinches.get(i, 0) for i in range(n)]
        at_entry = clinch_amounts(entry, instance)
        x, d = list(entry.x), list(entry.d)
        sequential = []
        for i in range(n):
            delta = clinch_brute_oracle(RemnantContext(instance.oracle, x, d), i)
            sequential.append(delta)
            x[i] += delta
            d[i] -= delta
        if not (recorded == at_entry == sequential):
            witness = {"pass": call, "recorded": recorded, "entry_formula": at_entry, "definition": sequential}
            break
    rep.add("clinch_amounts", witness is None, witness)
    return rep


def run_checks(instance: AuctionInstance, outcome: AuctionOutcome = None, suites: Iterable[str] = ("all",), seed: int = 0, ic_minimum: int = 20) -> AuditReport:
    suites = set(suites)
    if "all" in suites:
        suites = set(SUITES)
    unknown = suites - set(SUITES)
    if unknown:
        raise ValueError(f"unknown suite(s) {sorted(unknown)}")
    if outcome is None:
        outcome = run_auction(instance)
    rep = AuditReport()
    if "invariants" in suites:
        rep.extend(check_trace_invariants(outcome, instance))
        rep.extend(check_demand_characterization(outcome, instance))
        rep.extend(check_clinch_amounts(outcome, instance))
    if "iterations" in suites:
        rep.extend(check_iteration_bound(outcome, instance))
    if "tight" in suites:
        rep.extend(check_tight_sets(outcome, instance))
    if "po" in suites:
        rep.extend(check_pareto(outcome, instance))
    if "welfare" in suites:
        rep.extend(check_welfare_bounds(outcome, instance))
    if "trading" in suites:
        rep.extend(check_trading_pairs(outcome, instance))
    if "ic" in suites:
        rep.extend(check_ic(instance, seed=seed, minimum=ic_minimum))
    if "envy" in suites:
        rep.extend(check_envy_free(outcome, instance))
    return rep
