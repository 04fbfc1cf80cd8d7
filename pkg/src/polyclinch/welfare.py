"""Liquid and social welfare, and the liquid-welfare optimum.

The optimum is computed two ways: a greedy over "virtual buyers" (each buyer
split into a part that pays its valuation per unit up to floor(B/v) units, and
a part worth the leftover budget for one more unit), and an exhaustive search
over the integer points of the polymatroid.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .auction import AuctionInstance
from .errors import GuardExceeded, SubsetLimit
from .polymatroid import (
    FunctionOracle,
    SubmodularOracle,
    bit_matrix,
    integer_points,
    max_ground_set,
    require_member,
)


def social_welfare(instance: AuctionInstance, x: Sequence[int]) -> Fraction:
    require_member(instance.oracle, x)
    return sum((b.valuation * xi for b, xi in zip(instance.buyers, x)), Fraction(0))


def liquid_welfare(instance: AuctionInstance, x: Sequence[int]) -> Fraction:
    require_member(instance.oracle, x)
    return _lw(instance, x)


def _lw(instance, x) -> Fraction:
    return sum((min(b.valuation * xi, b.budget) for b, xi in zip(instance.buyers, x)), Fraction(0))


@dataclass(frozen=True)
class VirtualBuyer:
    parent: int
    part: str  # "a" or "b"
    valuation: Fraction
    budget: Fraction

    @property
    def capacity(self) -> int:
        """B/v, an integer by construction."""
        q = self.budget / self.valuation
        assert q.denominator == 1
        return int(q)


def split_virtual(instance: AuctionInstance) -> list[VirtualBuyer]:
    """Two virtual buyers per buyer, sorted by descending valuation.

    Ties go to the lower parent id, then part a before part b.
    """
    out = []
    for i, b in enumerate(instance.buyers):
        whole = b.budget // b.valuation
        rem = b.budget - whole * b.valuation
        out.append(VirtualBuyer(i, "a", b.valuation, whole * b.valuation))
        if rem > 0:
            out.append(VirtualBuyer(i, "b", rem, rem))
        else:
            out.append(VirtualBuyer(i, "b", b.valuation / 2, Fraction(0)))
    out.sort(key=lambda vb: (-vb.valuation, vb.parent, vb.part))
    return out


def lifted_oracle(instance: AuctionInstance, virtual: Sequence[VirtualBuyer] = None) -> SubmodularOracle:
    """f'(S') = f(Γ(S')) where Γ maps each virtual buyer to its parent."""
    virtual = split_virtual(instance) if virtual is None else virtual
    parents = [vb.parent for vb in virtual]
    f = instance.oracle

    def value(mask: int) -> int:
        g = 0
        for pos, parent in enumerate(parents):
            if mask >> pos & 1:
                g |= 1 << parent
        return f.value(g)

    return FunctionOracle(len(virtual), value)


@dataclass(frozen=True)
class LwOptResult:
    virtual: tuple[VirtualBuyer, ...]
    z_star: tuple[int, ...]
    x_star: tuple[int, ...]
    lw_value: Fraction


def _lw_guard(instance):
    if 2 * instance.n > max_ground_set():
        raise GuardExceeded(f"2n={2 * instance.n} virtual buyers exceed the guard {max_ground_set()}")


def _lifted_table(instance, virtual) -> np.ndarray:
    m = len(virtual)
    table = instance.oracle.table()
    parent_bits = np.zeros(1 << m, dtype=np.int64)
    bits = bit_matrix(m)
    for pos, vb in enumerate(virtual):
        parent_bits |= bits[:, pos] << vb.parent
    return table[parent_bits]


def _assemble(instance, virtual, z) -> LwOptResult:
    x = [0] * instance.n
    value = Fraction(0)
    for vb, zi in zip(virtual, z):
        x[vb.parent] += zi
        value += vb.valuation * zi
    return LwOptResult(tuple(virtual), tuple(z), tuple(x), value)


def lw_optimal(instance: AuctionInstance, virtual: Sequence[VirtualBuyer] = None) -> LwOptResult:
    """Greedy LW optimum over the virtual buyers.

    z_k = min(B_k/v_k, min_{H ⊆ first k-1} f'(H ∪ k) − z(H)), processed in
    descending valuation; x_i sums the two parts of buyer i.
    """
    _lw_guard(instance)
    virtual = list(split_virtual(instance) if virtual is None else virtual)
    fprime = _lifted_table(instance, virtual)
    zsum = np.zeros(1 << len(virtual), dtype=np.int64)
    z = []
    for k, vb in enumerate(virtual):
        prefix = 1 << k
        best = int((fprime[prefix : 2 * prefix] - zsum[:prefix]).min())
        zk = min(vb.capacity, best)
        z.append(zk)
        zsum[prefix : 2 * prefix] = zsum[:prefix] + zk
    return _assemble(instance, virtual, z)


def lw_optimal_reduction(instance: AuctionInstance, virtual: Sequence[VirtualBuyer] = None) -> LwOptResult:
    """Same optimum via the capped function f'_d(S) = min_{S' ⊆ S} f'(S − S') + d(S'),
    taking z_k = f'_d(first k) − z(first k−1)."""
    _lw_guard(instance)
    virtual = list(split_virtual(instance) if virtual is None else virtual)
    fprime = _lifted_table(instance, virtual)
    caps = [vb.capacity for vb in virtual]
    z = []
    for k in range(len(virtual)):
        full = (1 << (k + 1)) - 1
        capped = None
        sub = full
        while True:
            val = int(fprime[full ^ sub]) + sum(caps[j] for j in range(k + 1) if sub >> j & 1)
            capped = val if capped is None else min(capped, val)
            if sub == 0:
                break
            sub = (sub - 1) & full
        z.append(capped - sum(z))
    return _assemble(instance, virtual, z)


def lw_brute(instance: AuctionInstance) -> Fraction:
    """Maximum LW over every integer point of P(f)."""
    best, _ = lw_brute_argmax(instance)
    return best


def lw_brute_argmax(instance: AuctionInstance) -> tuple[Fraction, tuple[int, ...]]:
    if instance.n > max_ground_set():
        raise GuardExceeded(f"n={instance.n} exceeds the guard {max_ground_set()}")
    try:
        best, arg = None, None
        for x in integer_points(instance.oracle):
            val = _lw(instance, x)
            if best is None or val > best:
                best, arg = val, x
    except SubsetLimit as exc:
        raise GuardExceeded(str(exc)) from None
    return best, arg


def lw_decomposition(valuation: Fraction, budget: Fraction, units: int) -> Fraction:
    """min(v x, B) written through the two virtual parts; equals it for integer x >= 0."""
    whole = budget // valuation
    rem = budget - valuation * whole
    rem_cap = 1 if rem > 0 else 0
    return valuation * min(units, whole) + rem * min(max(units - whole, 0), rem_cap)

