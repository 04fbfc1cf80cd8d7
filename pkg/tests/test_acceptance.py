"""Acceptance criteria, one test each, exact arithmetic throughout.

A summary line per criterion is printed at the end of the pytest run.
"""

import dataclasses
import random
import time
from fractions import Fraction as F

import pytest

from conftest import MAIN_SEED, main_runs, small_runs
from polyclinch.auction import (
    AuctionInstance,
    AuctionOutcome,
    Buyer,
    Clinch,
    Drop,
    DropCause,
    run_auction,
)
from polyclinch.audit import (
    check_clinch_amounts,
    check_demand_characterization,
    check_ic,
    check_iteration_bound,
    check_pareto,
    check_tight_sets,
    check_trading_pairs,
    check_welfare_bounds,
    deviation_bids,
    envious_pairs,
)
from polyclinch.instances import corpus, fixture
from polyclinch.polymatroid import MultiUnitOracle, membership
from polyclinch.welfare import (
    liquid_welfare,
    lw_brute,
    lw_decomposition,
    lw_optimal,
    social_welfare,
)

acceptance = pytest.mark.acceptance


def report(number, ok, detail):
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")


def assert_all(number, failures, detail):
    report(number, not failures, detail)
    assert not failures, failures[:5]


@acceptance(1, "ratio k/(2k-1) on the two-buyer family, k = 2..20")
def test_c01_ratio_family():
    start = time.perf_counter()
    failures = []
    for k in range(2, 21):
        inst = fixture("prop54", k)
        out = run_auction(inst)
        lw_m = liquid_welfare(inst, out.x_final)
        lw_opt = lw_optimal(inst).lw_value
        row = (lw_m, lw_opt, lw_m / lw_opt)
        if row != (k, 2 * k - 1, F(k, 2 * k - 1)):
            failures.append((k, row))
    elapsed = time.perf_counter() - start
    # the greedy optimum checked against exhaustive search, outside the timing
    for k in range(2, 21):
        if lw_brute(fixture("prop54", k)) != 2 * k - 1:
            failures.append((k, "brute"))
    assert_all(1, failures, f"19 values of k, {elapsed:.3f}s")
    assert elapsed < 1.0


@acceptance(2, "one-unit envy example: outcome ((0,1),(0,1)) and buyer 1 envies buyer 2")
def test_c02_envy_example():
    start = time.perf_counter()
    inst = fixture("example62", 10)
    out = run_auction(inst)
    pairs = envious_pairs(inst, out.x_final, out.p_final)
    elapsed = time.perf_counter() - start
    ok = out.x_final == (0, 1) and out.p_final == (0, 1) and (0, 1) in pairs
    report(2, ok, f"x={out.x_final}, p={tuple(str(q) for q in out.p_final)}, envy={pairs}, {elapsed:.4f}s")
    assert out.x_final == (0, 1)
    assert out.p_final == (F(0), F(1))
    assert (0, 1) in pairs
    assert elapsed < 0.1


@acceptance(3, "budgets respected and all goods sold on 500 random instances")
def test_c03_budget_and_supply():
    start = time.perf_counter()
    fresh = [(inst, run_auction(inst)) for inst in corpus(500, seed=MAIN_SEED, max_n=6, max_supply=8)]
    failures = []
    for inst, out in fresh:
        f = inst.oracle
        if any(p > b for p, b in zip(out.p_final, inst.budgets)):
            failures.append(("budget", out.p_final))
        if sum(out.x_final) != f.value(f.full):
            failures.append(("supply", out.x_final))
    elapsed = time.perf_counter() - start
    kinds = {inst.oracle.kind for inst, _ in fresh}
    assert kinds == {"multi_unit", "bipartite", "explicit"}
    assert all(inst.n <= 6 and inst.oracle.value(inst.oracle.full) <= 8 for inst, _ in fresh)
    # the shared corpus used by later criteria is the same one
    assert [o.x_final for _, o in fresh] == [o.x_final for _, o in main_runs()]
    assert_all(3, failures, f"{len(fresh)} instances, {elapsed:.2f}s")
    assert elapsed < 60


@acceptance(4, "LW_M >= revenue >= LW_OPT - LW_M, half approximation, SW_M >= LW_OPT")
def test_c04_welfare_chain():
    failures = []
    for inst, out in main_runs():
        lw_m = liquid_welfare(inst, out.x_final)
        sw_m = social_welfare(inst, out.x_final)
        rev = sum(out.p_final, F(0))
        lw_opt = lw_optimal(inst).lw_value
        if not lw_m >= rev >= lw_opt - lw_m:
            failures.append(("chain", lw_m, rev, lw_opt))
        if not 2 * lw_m >= lw_opt:
            failures.append(("half", lw_m, lw_opt))
        if not sw_m >= lw_opt:
            failures.append(("sw", sw_m, lw_opt))
        rep = check_welfare_bounds(out, inst)
        if not rep.passed:
            failures.append(("audit", rep.failures()))
    assert_all(4, failures, f"{len(main_runs())} instances")


def _tight_set_controls():
    p_inst = fixture("prop54", 3)
    p_out = run_auction(p_inst)
    e_inst = fixture("example62")
    e_out = run_auction(e_inst)
    late_drop = [
        Drop(e.buyer, e.cause, F(2)) if isinstance(e, Drop) and e.cause == DropCause.CLINCH else e for e in p_out.trace
    ]
    return [
        ("unit removed", "i", p_inst, dataclasses.replace(p_out, x_final=(0, 2), p_final=(F(0), F(2)))),
        ("drop price moved", "ii", p_inst, dataclasses.replace(p_out, trace=late_drop)),
        ("payment lowered", "iii", p_inst, dataclasses.replace(p_out, p_final=(F(0), F(1)))),
        ("payment inflated", "iv", e_inst, dataclasses.replace(e_out, p_final=(F(1, 2), F(1)))),
    ]


@acceptance(5, "tight-set structure on the corpus; corrupted outcomes caught")
def test_c05_tight_sets():
    failures = []
    for inst, out in main_runs():
        rep = check_tight_sets(out, inst)
        if not rep.passed:
            failures.append([(r.name, r.witness) for r in rep.failures()])
    caught = 0
    for label, clause, inst, bad in _tight_set_controls():
        r = check_tight_sets(bad, inst)[f"tight_sets.{clause}"]
        if not r.passed and r.witness:
            caught += 1
        else:
            failures.append(("control not caught", label))
    assert caught >= 3
    assert_all(5, failures, f"{len(main_runs())} instances, {caught} negative controls caught")


@acceptance(6, "no Pareto improvement on 300 small instances; dominated allocation caught")
def test_c06_pareto():
    start = time.perf_counter()
    runs = small_runs()
    assert len(runs) >= 200
    assert all(inst.n <= 5 and inst.oracle.value(inst.oracle.full) <= 6 for inst, _ in runs)
    failures = []
    for inst, out in runs:
        rep = check_pareto(out, inst)
        if not rep.passed:
            failures.append(rep["pareto"].witness)
    elapsed = time.perf_counter() - start
    inst = fixture("example62")
    planted = check_pareto(AuctionOutcome((0, 0), (F(0), F(0))), inst)["pareto"]
    if planted.passed or planted.witness["allocation"] != [1, 0]:
        failures.append(("planted control", planted))
    assert_all(6, failures, f"{len(runs)} instances, {elapsed:.2f}s, planted control caught")
    assert elapsed < 120


@acceptance(7, "greedy LW optimum equals exhaustive search; two-part identities hold")
def test_c07_lw_optimum():
    runs = small_runs()
    assert len(runs) >= 300
    failures = []
    for inst, _ in runs:
        res = lw_optimal(inst)
        if res.lw_value != lw_brute(inst):
            failures.append(("value", res.lw_value))
        if not membership(inst.oracle, res.x_star):
            failures.append(("infeasible", res.x_star))
        parts = {(vb.parent, vb.part): (vb, z) for vb, z in zip(res.virtual, res.z_star)}
        for i, b in enumerate(inst.buyers):
            (va, za), (vb, zb) = parts[i, "a"], parts[i, "b"]
            xi = res.x_star[i]
            # two-part decomposition of min(v x, B) for every x up to f(i)
            for x in range(inst.oracle.singleton(i) + 2):
                if lw_decomposition(b.valuation, b.budget, x) != min(b.valuation * x, b.budget):
                    failures.append(("two-part identity", i, x))
            if zb == 1 and vb.budget > 0 and za != va.capacity:
                failures.append(("remainder part needs full whole part", i, za, zb))
            if min(b.valuation * xi, b.budget) != va.valuation * za + vb.valuation * zb:
                failures.append(("liquid value split", i, za, zb))
    assert_all(7, failures, f"{len(runs)} instances")


@acceptance(8, "every clinch matches the definition-level oracle; order-independent outcome")
def test_c08_clinch_oracle_and_order():
    failures = []
    clinches = 0
    rng = random.Random(8)
    for inst, out in main_runs():
        clinches += sum(1 for e in out.trace if isinstance(e, Clinch))
        rep = check_clinch_amounts(out, inst)
        if not rep.passed:
            failures.append(rep["clinch_amounts"].witness)
        for _ in range(10):
            order = list(range(inst.n))
            rng.shuffle(order)
            alt = run_auction(inst, validate=False, clinch_order=order)
            if (alt.x_final, alt.p_final) != (out.x_final, out.p_final):
                failures.append(("order", order, alt.x_final, out.x_final))
    assert clinches > 500
    assert_all(8, failures, f"{clinches} clinch events, {10 * len(main_runs())} permuted runs")


@acceptance(9, "no profitable misreport and no negative utility (falsification test)")
def test_c09_ic_ir():
    runs = main_runs()[:100]
    failures = []
    tried = 0
    for inst, out in runs:
        for i in range(inst.n):
            bids = [b for b in deviation_bids(inst, i, out) if b != inst.valuations[i]]
            if len(bids) < 20:
                failures.append(("too few deviations", i, len(bids)))
        rep = check_ic(inst, minimum=20)
        tried += int(rep["ic"].detail.split()[0])
        if not rep.passed:
            failures.append([(r.name, r.witness) for r in rep.failures()])
    assert_all(9, failures, f"{len(runs)} instances, {tried} deviations")


@acceptance(10, "no trading pair on the corpus; constructed pair flagged")
def test_c10_trading_pairs():
    failures = []
    for inst, out in main_runs():
        rep = check_trading_pairs(out, inst)
        if not rep.passed:
            failures.append(rep["trading_pairs"].witness)
    inst = AuctionInstance((Buyer(10, 5), Buyer(2, 1)), MultiUnitOracle(2, 1))
    flagged = check_trading_pairs(AuctionOutcome((0, 1), (F(0), F(1))), inst)["trading_pairs"]
    if flagged.passed or flagged.witness != {"pairs": [[1, 2]]}:
        failures.append(("constructed pair missed", flagged))
    assert_all(10, failures, f"{len(main_runs())} instances, constructed pair (1,2) flagged")


@acceptance(11, "iteration bound on every run; three-case demand characterization")
def test_c11_iterations_and_demand():
    failures = []
    for inst, out in main_runs():
        rep = check_iteration_bound(out, inst)
        if not rep.passed:
            failures.append(rep["iterations"].witness)
    instrumented = main_runs()[:250]
    for inst, out in instrumented:
        rep = check_demand_characterization(out, inst)
        if not rep.passed:
            failures.append(rep["demand_characterization"].witness)
    assert_all(11, failures, f"{len(main_runs())} runs bounded, {len(instrumented)} traces instrumented")
