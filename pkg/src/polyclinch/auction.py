"""Ascending-price clinching auction for indivisible units under a polymatroid.

The engine follows the two-level procedure exactly: a single price clock, a
demand-zeroing loop for buyers whose bid is reached, a demand-decrement loop
for buyers whose remaining budget exactly covers their demand, and a clinching
pass after every single demand update. Prices, budgets and payments are
:class:`fractions.Fraction` so that the equality tests driving the control
flow are exact.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import GuardExceeded, InvalidInstance, NoActiveBuyers, ValidationError
from .polymatroid import (
    EXHAUSTIVE_VALIDATION_GUARD,
    SubmodularOracle,
    bit_matrix,
    max_ground_set,
    validate_oracle,
)

SUPPLY_GUARD = 10_000


def as_fraction(value) -> Fraction:
    if isinstance(value, float):
        raise TypeError("floats are not accepted; pass an int, Fraction or 'p/q' string")
    return Fraction(value)


@dataclass(frozen=True)
class Buyer:
    valuation: Fraction
    budget: Fraction
    bid: Fraction = None  # defaults to the valuation (truthful)

    def __post_init__(self):
        object.__setattr__(self, "valuation", as_fraction(self.valuation))
        object.__setattr__(self, "budget", as_fraction(self.budget))
        bid = self.valuation if self.bid is None else as_fraction(self.bid)
        object.__setattr__(self, "bid", bid)
        for name in ("valuation", "budget", "bid"):
            if getattr(self, name) <= 0:
                raise InvalidInstance(f"{name} must be positive", axiom="positive_" + name)


@dataclass(frozen=True)
class AuctionInstance:
    buyers: tuple[Buyer, ...]
    oracle: SubmodularOracle

    def __post_init__(self):
        object.__setattr__(self, "buyers", tuple(self.buyers))
        if len(self.buyers) != self.oracle.n:
            raise InvalidInstance(
                f"{len(self.buyers)} buyers but constraint is over {self.oracle.n}", axiom="size"
            )

    @property
    def n(self) -> int:
        return len(self.buyers)

    @property
    def valuations(self) -> list[Fraction]:
        return [b.valuation for b in self.buyers]

    @property
    def budgets(self) -> list[Fraction]:
        return [b.budget for b in self.buyers]

    @property
    def bids(self) -> list[Fraction]:
        return [b.bid for b in self.buyers]

    def with_bid(self, i: int, bid) -> "AuctionInstance":
        buyers = list(self.buyers)
        b = buyers[i]
        buyers[i] = Buyer(b.valuation, b.budget, bid)
        return AuctionInstance(tuple(buyers), self.oracle)

    def truthful(self) -> "AuctionInstance":
        return AuctionInstance(tuple(Buyer(b.valuation, b.budget) for b in self.buyers), self.oracle)

    def check_guards(self) -> None:
        if self.n > max_ground_set():
            raise GuardExceeded(f"n={self.n} exceeds the guard {max_ground_set()}")
        supply = self.oracle.value(self.oracle.full)
        if supply > SUPPLY_GUARD:
            raise GuardExceeded(f"f(N)={supply} exceeds the supply guard {SUPPLY_GUARD}")

    def validate(self) -> None:
        self.check_guards()
        rep = validate_oracle(self.oracle, exhaustive=self.n <= EXHAUSTIVE_VALIDATION_GUARD)
        try:
            rep.raise_if_invalid()
        except ValidationError as exc:
            raise InvalidInstance(str(exc), axiom=exc.axiom, witness=exc.witness) from None


class DropCause(str, Enum):
    LINE5 = "LINE5"
    LINE9 = "LINE9"
    CLINCH = "CLINCH"


@dataclass(frozen=True)
class PriceSet:
    price: Fraction
    kind = "price"


@dataclass(frozen=True)
class DemandZeroed:
    buyer: int
    kind = "demand_zeroed"


@dataclass(frozen=True)
class DemandDecremented:
    buyer: int
    kind = "demand_decremented"


@dataclass(frozen=True)
class Clinch:
    buyer: int
    amount: int
    price: Fraction
    kind = "clinch"


@dataclass(frozen=True)
class Drop:
    buyer: int
    cause: DropCause
    price: Fraction
    kind = "drop"


Event = Union[PriceSet, DemandZeroed, DemandDecremented, Clinch, Drop]


@dataclass
class AuctionState:
    x: list[int]
    p: list[Fraction]
    d: list[int]
    c: Fraction = Fraction(0)

    @classmethod
    def initial(cls, instance: AuctionInstance) -> "AuctionState":
        n = instance.n
        return cls(
            x=[0] * n,
            p=[Fraction(0)] * n,
            d=[instance.oracle.singleton(i) + 1 for i in range(n)],
        )

    def active(self) -> list[int]:
        return [i for i, di in enumerate(self.d) if di > 0]

    def copy(self) -> "AuctionState":
        return copy.deepcopy(self)


@dataclass
class AuctionOutcome:
    x_final: tuple[int, ...]
    p_final: tuple[Fraction, ...]
    trace: list = field(default_factory=list)
    iterations: int = 0

    @property
    def drops(self) -> dict[int, Drop]:
        return {e.buyer: e for e in self.trace if isinstance(e, Drop)}

    @property
    def drop_prices(self) -> dict[int, Fraction]:
        return {i: e.price for i, e in self.drops.items()}

    @property
    def prices(self) -> list[Fraction]:
        return [e.price for e in self.trace if isinstance(e, PriceSet)]


class RemnantEvaluator:
    """Fast f_{x,d}(N) and f_{x,d}(N - i) on a dense table.

    Uses f_{x,d}(S) = min_{S' ⊆ S} f(S') − x(S') + d(S − S') with numpy over all
    masks; only the two sets needed for clinching are supported.
    """

    def __init__(self, oracle: SubmodularOracle):
        self.n = oracle.n
        self.table = oracle.table()
        self.bits = bit_matrix(self.n)
        self.outside = [self.bits[:, i] == 0 for i in range(self.n)]

    def slack(self, x, d) -> np.ndarray:
        """f(S) − (x + d)(S) for every S."""
        return self.table - self.bits @ (np.asarray(x, dtype=np.int64) + np.asarray(d, dtype=np.int64))

    def full(self, x, d) -> int:
        return int(sum(d) + self.slack(x, d).min())

    def without(self, x, d, i: int) -> int:
        g = self.slack(x, d)
        return int(sum(d) - d[i] + g[self.outside[i]].min())

    def clinch(self, x, d, i: int, g: np.ndarray = None) -> int:
        g = self.slack(x, d) if g is None else g
        return int(d[i] + g.min() - g[self.outside[i]].min())


def next_price(state: AuctionState, instance: AuctionInstance) -> Fraction:
    """Smallest clock value at which some active buyer hits its bid or its budget line."""
    active = state.active()
    if not active:
        raise NoActiveBuyers("no buyer has positive demand")
    return min(
        min(instance.buyers[i].bid, (instance.buyers[i].budget - state.p[i]) / state.d[i]) for i in active
    )


def clinch_amounts(state: AuctionState, instance: AuctionInstance, evaluator: RemnantEvaluator = None) -> list[int]:
    """δ_i = f_{x,d}(N) − f_{x,d}(N − i) for every buyer, all from the same entry state."""
    ev = evaluator or RemnantEvaluator(instance.oracle)
    total = ev.full(state.x, state.d)
    return [total - ev.without(state.x, state.d, i) for i in range(instance.n)]


def clinching(
    state: AuctionState,
    instance: AuctionInstance,
    evaluator: RemnantEvaluator = None,
    order: Sequence[int] = None,
    trace: list = None,
) -> None:
    """One clinching pass, in place. Each buyer's amount is taken on the state
    left by the buyers before it in ``order`` (ascending ids by default)."""
    ev = evaluator or RemnantEvaluator(instance.oracle)
    c = state.c
    # a clinch moves units from d_i to x_i, so x + d and the slack vector
    # stay fixed for the whole pass
    g = ev.slack(state.x, state.d)
    for i in order if order is not None else range(instance.n):
        delta = ev.clinch(state.x, state.d, i, g)
        if delta <= 0:
            continue
        state.x[i] += delta
        state.p[i] += c * delta
        state.d[i] -= delta
        if trace is not None:
            trace.append(Clinch(i, delta, c))
            if state.d[i] == 0:
                trace.append(Drop(i, DropCause.CLINCH, c))


def iteration_bound(instance: AuctionInstance) -> int:
    return sum(instance.oracle.singleton(i) for i in range(instance.n)) + instance.n


def run_auction(instance: AuctionInstance, validate: bool = True, clinch_order: Sequence[int] = None) -> AuctionOutcome:
    """Run the mechanism on the instance's bids and return allocation, payments and trace."""
    if validate:
        instance.validate()
    else:
        instance.check_guards()
    ev = RemnantEvaluator(instance.oracle)
    buyers = instance.buyers
    state = AuctionState.initial(instance)
    trace: list = []
    iterations = 0
    cap = iteration_bound(instance)
    while state.active():
        new_c = next_price(state, instance)
        if iterations and new_c <= state.c:
            raise RuntimeError(f"price clock failed to increase ({state.c} -> {new_c})")
        state.c = new_c
        iterations += 1
        if iterations > cap:
            raise RuntimeError("iteration bound exceeded")
        trace.append(PriceSet(new_c))
        c = new_c

        while True:
            j = next((i for i in state.active() if buyers[i].bid == c), None)
            if j is None:
                break
            state.d[j] = 0
            trace.append(DemandZeroed(j))
            trace.append(Drop(j, DropCause.LINE5, c))
            clinching(state, instance, ev, clinch_order, trace)

        while True:
            j = next(
                (i for i in state.active() if state.d[i] * c == buyers[i].budget - state.p[i]),
                None,
            )
            if j is None:
                break
            state.d[j] -= 1
            trace.append(DemandDecremented(j))
            if state.d[j] == 0:
                trace.append(Drop(j, DropCause.LINE9, c))
            clinching(state, instance, ev, clinch_order, trace)

    return AuctionOutcome(tuple(state.x), tuple(state.p), trace, iterations)


def replay(instance: AuctionInstance, trace: Sequence) -> Iterator[tuple[object, AuctionState]]:
    """Rebuild the state after every event of a trace.

    Yields ``(None, initial_state)`` first, then ``(event, state)`` pairs. The
    yielded states are fresh copies.
    """
    state = AuctionState.initial(instance)
    yield None, state.copy()
    for ev in trace:
        if isinstance(ev, PriceSet):
            state.c = ev.price
        elif isinstance(ev, DemandZeroed):
            state.d[ev.buyer] = 0
        elif isinstance(ev, DemandDecremented):
            state.d[ev.buyer] -= 1
        elif isinstance(ev, Clinch):
            state.x[ev.buyer] += ev.amount
            state.p[ev.buyer] += ev.price * ev.amount
            state.d[ev.buyer] -= ev.amount
        yield ev, state.copy()


def utility(instance: AuctionInstance, x: Sequence[int], p: Sequence[Fraction], i: int):
    """Quasi-linear utility under the true valuation, −∞ when the budget is broken."""
    b = instance.buyers[i]
    if p[i] > b.budget:
        return -math.inf
    return b.valuation * x[i] - p[i]
