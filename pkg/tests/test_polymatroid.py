import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import small_runs
from polyclinch.auction import replay
from polyclinch.errors import GroundSetTooLarge, NotInPolymatroid, ValidationError
from polyclinch.polymatroid import (
    BipartiteOracle,
    FunctionOracle,
    MultiUnitOracle,
    RemnantContext,
    TableOracle,
    clinch_brute_oracle,
    dep,
    dep_scaled,
    f_xd,
    f_xd_double_min,
    integer_points,
    members,
    membership,
    saturated,
    submasks,
    validate_oracle,
)


def table(n, pairs):
    """TableOracle from {frozenset of 1-based ids: value}."""
    vals = [0] * (1 << n)
    for key, v in pairs.items():
        vals[sum(1 << (i - 1) for i in key)] = v
    return TableOracle(n, vals)


# -- validation --------------------------------------------------------------


def test_constant_on_nonempty_passes_every_axiom():
    rep = validate_oracle(MultiUnitOracle(2, 3))
    assert rep.ok and rep.failures() == []


def test_submodularity_violation_witness():
    f = table(2, {frozenset({1}): 1, frozenset({2}): 1, frozenset({1, 2}): 3})
    rep = validate_oracle(f)
    assert not rep.submodular
    w = rep.witnesses["submodular"]
    # S = ∅, T = {2}, e = 1 in 1-based ids
    assert (members(w["S"]), members(w["T"]), w["e"]) == ([], [1], 0)
    with pytest.raises(ValidationError) as err:
        rep.raise_if_invalid()
    assert err.value.axiom == "submodular"


def test_single_buyer_fails_competition():
    rep = validate_oracle(MultiUnitOracle(1, 2))
    assert rep.is_polymatroid
    assert not rep.competition
    assert rep.failures() == ["competition"]


def test_nonzero_empty_set_reported():
    f = TableOracle(2, [1, 1, 1, 1])
    assert validate_oracle(f).failures() == ["zero_at_empty"]


def test_non_monotone_reported():
    f = table(2, {frozenset({1}): 2, frozenset({2}): 2, frozenset({1, 2}): 1})
    assert "monotone" in validate_oracle(f).failures()


def test_exhaustive_validation_guard():
    with pytest.raises(GroundSetTooLarge):
        validate_oracle(MultiUnitOracle(13, 1), exhaustive=True)
    assert validate_oracle(MultiUnitOracle(13, 1), exhaustive=False).ok


def test_local_and_exhaustive_submodularity_agree():
    rng = random.Random(5)
    for _ in range(200):
        n = rng.randint(2, 4)
        vals = [0] + [rng.randint(0, 4) for _ in range((1 << n) - 1)]
        f = TableOracle(n, vals)
        assert validate_oracle(f, True).submodular == validate_oracle(f, False).submodular


def test_bipartite_oracle_is_coverage():
    # buyer 1 -> good A (2 units); buyer 2 -> goods A, B (1 unit)
    f = BipartiteOracle(2, [2, 1], [(0, 0), (1, 0), (1, 1)])
    assert [f.value(m) for m in range(4)] == [0, 2, 3, 3]


# -- remnant supply ----------------------------------------------------------


def test_f_xd_examples():
    ctx = RemnantContext(MultiUnitOracle(2, 3), (1, 0), (0, 4))
    assert f_xd(ctx, {1}) == 3  # 0-based buyer 1 is the second buyer
    assert f_xd(ctx, {0, 1}) == 2
    assert f_xd(ctx, set()) == 0


def test_f_xd_matches_hand_enumeration():
    f = MultiUnitOracle(2, 3)
    x, d = (1, 0), (0, 4)
    # S = {1, 2}: S' ranges over ∅, {1}, {2}, {1, 2}
    by_hand = min(0 - 0 + 0 + 4, 3 - 1 + 4, 3 - 0 + 0, 3 - 1)
    assert f_xd(RemnantContext(f, x, d), {0, 1}) == by_hand == 2


def test_context_rejects_bad_vectors():
    f = MultiUnitOracle(2, 3)
    with pytest.raises(ValueError):
        RemnantContext(f, (1,), (0, 0))
    with pytest.raises(ValueError):
        RemnantContext(f, (-1, 0), (0, 0))


def reachable_contexts(max_n=4, limit=120):
    """(oracle, x, d) at every observable point of real auction runs."""
    seen = set()
    for inst, outcome in small_runs():
        if inst.n > max_n:
            continue
        for _, state in replay(inst, outcome.trace):
            key = (id(inst), tuple(state.x), tuple(state.d))
            if key not in seen:
                seen.add(key)
                yield RemnantContext(inst.oracle, state.x, state.d)
        limit -= 1
        if not limit:
            return


def test_single_and_double_minimisation_agree_on_reachable_states():
    count = 0
    for ctx in reachable_contexts():
        for s in range(1 << ctx.oracle.n):
            assert f_xd(ctx, s) == f_xd_double_min(ctx, s)
        count += 1
    assert count > 300


def test_f_xd_monotone_submodular_and_bounded_on_reachable_states():
    for ctx in reachable_contexts(limit=60):
        f, n = ctx.oracle, ctx.oracle.n
        vals = [f_xd(ctx, s) for s in range(1 << n)]
        assert validate_oracle(TableOracle(n, vals)).is_polymatroid
        for s in range(1 << n):
            ids = members(s)
            assert vals[s] <= sum(ctx.d[i] for i in ids)
            assert vals[s] <= f.value(s) - sum(ctx.x[i] for i in ids)


def test_clinch_oracle_equals_remnant_difference_on_reachable_states():
    for ctx in reachable_contexts():
        full = ctx.oracle.full
        for i in range(ctx.oracle.n):
            assert clinch_brute_oracle(ctx, i) == f_xd(ctx, full) - f_xd(ctx, full ^ 1 << i)


def test_clinch_oracle_equals_remnant_difference_larger_n():
    # randomized states up to n = 8, drawn from runs with perturbed bids
    from polyclinch.auction import run_auction
    from polyclinch.instances import generate

    rng = random.Random(11)
    checked = 0
    for k in range(12):
        inst = generate(("multi_unit", "bipartite", "explicit")[k % 3], rng.randint(7, 8), seed=k, max_supply=5)
        outcome = run_auction(inst)
        states = [s for _, s in replay(inst, outcome.trace)]
        for state in rng.sample(states, min(4, len(states))):
            ctx = RemnantContext(inst.oracle, state.x, state.d)
            i = rng.randrange(inst.n)
            full = inst.oracle.full
            assert clinch_brute_oracle(ctx, i) == f_xd(ctx, full) - f_xd(ctx, full ^ 1 << i)
            checked += 1
    assert checked >= 30


def test_clinch_oracle_examples():
    f = MultiUnitOracle(2, 3)
    assert clinch_brute_oracle(RemnantContext(f, (0, 0), (0, 4)), 1) == 3
    assert clinch_brute_oracle(RemnantContext(f, (0, 0), (0, 4)), 0) == 0
    # fresh start: d_i = f(i) + 1, nobody can clinch
    for inst, _ in small_runs()[:50]:
        ctx = RemnantContext(inst.oracle, [0] * inst.n, [inst.oracle.singleton(i) + 1 for i in range(inst.n)])
        assert [clinch_brute_oracle(ctx, i) for i in range(inst.n)] == [0] * inst.n


def test_one_sided_remnant_forms_can_differ_off_reachable_states():
    # x = (2, 0) with f ≡ 2: the single minimisation lets S' = {2} ignore the
    # fact that buyer 1 already holds everything.
    ctx = RemnantContext(MultiUnitOracle(2, 2), (2, 0), (0, 5))
    assert f_xd(ctx, {1}) == 2
    assert f_xd_double_min(ctx, {1}) == 0


# -- membership and exchange -------------------------------------------------


def test_membership_examples():
    f = MultiUnitOracle(2, 3)
    assert membership(f, (1, 2))
    assert not membership(f, (2, 2))
    assert not membership(f, (-1, 0))
    assert membership(f, (Fraction(3, 2), Fraction(3, 2)))


def test_dep_examples():
    one = MultiUnitOracle(2, 1)
    assert dep(one, (0, 1), 0, 1)
    assert not dep(one, (0, 0), 0, 1)
    zero_first = table(2, {frozenset({1}): 0, frozenset({2}): 1, frozenset({1, 2}): 1})
    assert not dep(zero_first, (0, 1), 0, 1)
    with pytest.raises(NotInPolymatroid):
        dep(one, (1, 1), 0, 1)


def test_saturated():
    f = MultiUnitOracle(2, 2)
    assert saturated(f, (1, 1), 0)
    assert not saturated(f, (1, 0), 0)


def test_unit_exchange_agrees_with_half_step():
    rng = random.Random(3)
    for inst, _ in small_runs()[:80]:
        points = list(integer_points(inst.oracle))
        for x in rng.sample(points, min(5, len(points))):
            for i, j in itertools.permutations(range(inst.n), 2):
                assert dep(inst.oracle, x, i, j) == dep_scaled(inst.oracle, x, i, j, Fraction(1, 2))


def test_integer_points_matches_box_filter():
    for inst, _ in small_runs()[:40]:
        f = inst.oracle
        box = itertools.product(*(range(f.singleton(i) + 1) for i in range(f.n)))
        assert list(integer_points(f)) == [x for x in box if membership(f, x)]


@st.composite
def coverage_oracles(draw):
    n = draw(st.integers(2, 4))
    owners = draw(st.lists(st.sets(st.integers(0, n - 1), min_size=1), min_size=1, max_size=5))
    weights = draw(st.lists(st.integers(1, 3), min_size=len(owners), max_size=len(owners)))

    def value(mask):
        return sum(w for own, w in zip(owners, weights) if any(mask >> i & 1 for i in own))

    return FunctionOracle(n, value)


@settings(max_examples=60, deadline=None)
@given(coverage_oracles(), st.data())
def test_membership_is_downward_closed(f, data):
    x = data.draw(st.lists(st.integers(0, 4), min_size=f.n, max_size=f.n))
    y = [data.draw(st.integers(0, v)) for v in x]
    if membership(f, x):
        assert membership(f, y)


@settings(max_examples=60, deadline=None)
@given(coverage_oracles())
def test_coverage_functions_are_polymatroids(f):
    assert validate_oracle(f).is_polymatroid


@settings(max_examples=40, deadline=None)
@given(coverage_oracles(), st.data())
def test_f_xd_empty_and_nonnegative(f, data):
    points = list(integer_points(f))
    x = data.draw(st.sampled_from(points))
    d = data.draw(st.lists(st.integers(0, 4), min_size=f.n, max_size=f.n))
    ctx = RemnantContext(f, x, d)
    assert f_xd(ctx, 0) == 0
    assert all(f_xd(ctx, s) >= 0 for s in submasks(f.full))
