"""Integer polymatroids given by a value oracle.

Subsets of the ground set ``{0, ..., n-1}`` are passed around as integer
bitmasks; any function taking a subset also accepts an iterable of indices.
Every routine here is exact and enumerative, so the ground set is capped by
:func:`max_ground_set`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Integral
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import GroundSetTooLarge, NotInPolymatroid, SubsetLimit, ValidationError

GROUND_SET_GUARD = 20
EXHAUSTIVE_VALIDATION_GUARD = 12
BOX_GUARD = 10**7


def max_ground_set() -> int:
    """The n guard; ``CLINCH_GUARD_N`` may lower it but never raise it."""
    raw = os.environ.get("CLINCH_GUARD_N")
    if raw:
        try:
            return max(1, min(GROUND_SET_GUARD, int(raw)))
        except ValueError:
            pass
    return GROUND_SET_GUARD


def subset_mask(subset) -> int:
    if isinstance(subset, Integral):
        return int(subset)
    mask = 0
    for i in subset:
        mask |= 1 << i
    return mask


def members(mask: int) -> list[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def submasks(mask: int) -> Iterator[int]:
    """All submasks of ``mask``, from ``mask`` itself down to 0."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def _bit_matrix(n: int) -> np.ndarray:
    masks = np.arange(1 << n, dtype=np.int64)
    return ((masks[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.int64)


_BITS_CACHE: dict[int, np.ndarray] = {}


def bit_matrix(n: int) -> np.ndarray:
    """Row ``m`` is the indicator vector of mask ``m`` (shape ``2^n x n``)."""
    if n not in _BITS_CACHE:
        _BITS_CACHE[n] = _bit_matrix(n)
    return _BITS_CACHE[n]


def subset_sums(vec: Sequence, n: int) -> list:
    """``sums[m] = sum(vec[i] for i in m)`` for every mask, exact for any numeric type."""
    sums = [0] * (1 << n)
    for m in range(1, 1 << n):
        low = m & -m
        sums[m] = sums[m ^ low] + vec[low.bit_length() - 1]
    return sums


class SubmodularOracle:
    """Value oracle for an integer-valued monotone submodular set function.

    Subclasses implement :meth:`value` on bitmasks. Instances are immutable;
    the dense table is computed lazily and cached.
    """

    kind = "abstract"

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("ground set must be nonempty")
        self.n = n
        self._table: np.ndarray | None = None

    def value(self, mask: int) -> int:
        raise NotImplementedError

    def __call__(self, subset) -> int:
        return self.value(subset_mask(subset))

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    def table(self) -> np.ndarray:
        if self.n > max_ground_set():
            raise GroundSetTooLarge(f"n={self.n} exceeds the guard {max_ground_set()}")
        if self._table is None:
            t = np.fromiter((self.value(m) for m in range(1 << self.n)), dtype=np.int64, count=1 << self.n)
            t.setflags(write=False)
            self._table = t
        return self._table

    def singleton(self, i: int) -> int:
        return self.value(1 << i)


class TableOracle(SubmodularOracle):
    kind = "explicit"

    def __init__(self, n: int, values: Sequence[int]):
        super().__init__(n)
        if len(values) != 1 << n:
            raise ValueError(f"explicit table needs {1 << n} entries, got {len(values)}")
        self.values = tuple(values)

    def value(self, mask: int) -> int:
        return self.values[mask]


class MultiUnitOracle(SubmodularOracle):
    """``supply`` identical units, any buyer may take any of them."""

    kind = "multi_unit"

    def __init__(self, n: int, supply: int):
        super().__init__(n)
        if supply < 0:
            raise ValueError("supply must be nonnegative")
        self.supply = supply

    def value(self, mask: int) -> int:
        return self.supply if mask else 0


class BipartiteOracle(SubmodularOracle):
    """Goods with unit counts; f(S) is the number of units adjacent to S.

    Buyers have no per-buyer cap, so by Hall's theorem this is exactly the
    set of flow-feasible allocations of the bipartite market.
    """

    kind = "bipartite"

    def __init__(self, n: int, units: Sequence[int], edges: Iterable[tuple[int, int]]):
        super().__init__(n)
        self.units = tuple(int(u) for u in units)
        if any(u < 0 for u in self.units):
            raise ValueError("unit counts must be nonnegative")
        self.edges = tuple(sorted({(int(b), int(g)) for b, g in edges}))
        adj = [0] * len(self.units)
        for b, g in self.edges:
            if not (0 <= b < n and 0 <= g < len(self.units)):
                raise ValueError(f"edge ({b}, {g}) out of range")
            adj[g] |= 1 << b
        self.adjacency = tuple(adj)

    def value(self, mask: int) -> int:
        return sum(u for u, a in zip(self.units, self.adjacency) if a & mask)


class FunctionOracle(SubmodularOracle):
    kind = "function"

    def __init__(self, n: int, fn: Callable[[int], int]):
        super().__init__(n)
        self._fn = fn

    def value(self, mask: int) -> int:
        return self._fn(mask)


@dataclass
class ValidationReport:
    n: int
    integer_valued: bool = True
    zero_at_empty: bool = True
    monotone: bool = True
    submodular: bool = True
    competition: bool = True
    witnesses: dict = field(default_factory=dict)

    @property
    def is_polymatroid(self) -> bool:
        return self.integer_valued and self.zero_at_empty and self.monotone and self.submodular

    @property
    def ok(self) -> bool:
        return self.is_polymatroid and self.competition

    def failures(self) -> list[str]:
        names = ["integer_valued", "zero_at_empty", "monotone", "submodular", "competition"]
        return [a for a in names if not getattr(self, a)]

    def raise_if_invalid(self, require_competition: bool = True) -> None:
        bad = self.failures()
        if not require_competition and "competition" in bad:
            bad.remove("competition")
        if bad:
            axiom = bad[0]
            raise ValidationError(
                f"constraint function fails {axiom}: {self.witnesses.get(axiom)}",
                axiom=axiom,
                witness=self.witnesses.get(axiom),
            )


def validate_oracle(f: SubmodularOracle, exhaustive: bool = True) -> ValidationReport:
    """Check the polymatroid axioms and the competition condition f(N) = f(N-i).

    With ``exhaustive`` every (S, T, e) triple with S ⊆ T, e ∉ T is tested;
    otherwise the equivalent local exchange inequality is used, which scales
    to the full ground-set guard.
    """
    n = f.n
    if exhaustive and n > EXHAUSTIVE_VALIDATION_GUARD:
        raise GroundSetTooLarge(
            f"exhaustive validation limited to n <= {EXHAUSTIVE_VALIDATION_GUARD}, got {n}"
        )
    if n > max_ground_set():
        raise GroundSetTooLarge(f"n={n} exceeds the guard {max_ground_set()}")
    rep = ValidationReport(n)
    vals = []
    for m in range(1 << n):
        v = f.value(m)
        if not isinstance(v, Integral) or v < 0:
            if rep.integer_valued:
                rep.integer_valued = False
                rep.witnesses["integer_valued"] = {"S": m, "value": v}
        vals.append(v)
    if vals[0] != 0:
        rep.zero_at_empty = False
        rep.witnesses["zero_at_empty"] = {"S": 0, "value": vals[0]}

    for m in range(1 << n):
        for e in range(n):
            if not m >> e & 1 and vals[m] > vals[m | 1 << e]:
                rep.monotone = False
                rep.witnesses["monotone"] = {"S": m, "T": m | 1 << e}
                break
        if not rep.monotone:
            break

    if exhaustive:
        _submodular_triples(vals, n, rep)
    else:
        _submodular_local(vals, n, rep)

    full = (1 << n) - 1
    for i in range(n):
        if vals[full] != vals[full ^ 1 << i]:
            rep.competition = False
            rep.witnesses["competition"] = {"i": i, "f(N)": vals[full], "f(N-i)": vals[full ^ 1 << i]}
            break
    return rep


def _submodular_triples(vals, n, rep):
    for e in range(n):
        bit = 1 << e
        for t in range(1 << n):
            if t & bit:
                continue
            gain_t = vals[t | bit] - vals[t]
            for s in submasks(t):
                if vals[s | bit] - vals[s] < gain_t:
                    rep.submodular = False
                    rep.witnesses["submodular"] = {"S": s, "T": t, "e": e}
                    return


def _submodular_local(vals, n, rep):
    for s in range(1 << n):
        for a in range(n):
            if s >> a & 1:
                continue
            for b in range(n):
                if b == a or s >> b & 1:
                    continue
                t = s | 1 << b
                if vals[s | 1 << a] - vals[s] < vals[t | 1 << a] - vals[t]:
                    rep.submodular = False
                    rep.witnesses["submodular"] = {"S": s, "T": t, "e": a}
                    return


def membership(f: SubmodularOracle, x: Sequence) -> bool:
    """True iff x >= 0 and x(S) <= f(S) for every S. Accepts ints or Fractions."""
    n = f.n
    if len(x) != n:
        raise ValueError(f"vector has length {len(x)}, expected {n}")
    if any(v < 0 for v in x):
        return False
    table = f.table()
    if all(isinstance(v, Integral) for v in x):
        sums = bit_matrix(n) @ np.asarray(x, dtype=np.int64)
        return bool(np.all(sums <= table))
    sums = subset_sums(list(x), n)
    return all(s <= int(t) for s, t in zip(sums, table))


def require_member(f: SubmodularOracle, x: Sequence) -> None:
    if not membership(f, x):
        raise NotInPolymatroid(f"{list(x)} is not in P(f)")


def _unit(n: int, i: int) -> list[int]:
    e = [0] * n
    e[i] = 1
    return e


def saturated(f: SubmodularOracle, x: Sequence[int], i: int) -> bool:
    """i ∈ sat(x): no positive step along coordinate i stays in P(f).

    For integer x the unit step decides it, since any violated constraint has
    integer slack.
    """
    require_member(f, x)
    y = list(x)
    y[i] += 1
    return not membership(f, y)


def dep(f: SubmodularOracle, x: Sequence[int], i: int, j: int) -> bool:
    """j ∈ dep(x, i), decided by the unit exchange x + χ_i − χ_j."""
    if i == j:
        raise ValueError("dep needs two distinct buyers")
    require_member(f, x)
    y = list(x)
    y[i] += 1
    y[j] -= 1
    return membership(f, y)


def dep_scaled(f: SubmodularOracle, x: Sequence[int], i: int, j: int, alpha: Fraction) -> bool:
    """The exchange test at an arbitrary step ``alpha``; cross-checks :func:`dep`."""
    require_member(f, x)
    y = [Fraction(v) for v in x]
    y[i] += alpha
    y[j] -= alpha
    return membership(f, y)


def integer_points(f: SubmodularOracle) -> Iterator[tuple[int, ...]]:
    """Every integer vector in P(f), in lexicographic order."""
    n = f.n
    box = 1
    for i in range(n):
        box *= f.singleton(i) + 1
    if box > BOX_GUARD:
        raise SubsetLimit(f"integer box of size {box} exceeds {BOX_GUARD}")
    table = [int(v) for v in f.table()]
    sums = [0] * (1 << n)
    x = [0] * n

    def rec(k):
        if k == n:
            yield tuple(x)
            return
        lo = 1 << k
        v = 0
        while True:
            ok = True
            for m in range(lo):
                s = sums[m] + v
                if s > table[m | lo]:
                    ok = False
                    break
                sums[m | lo] = s
            if not ok:
                return
            x[k] = v
            yield from rec(k + 1)
            v += 1

    yield from rec(0)


@dataclass(frozen=True)
class RemnantContext:
    """Clinched vector x and demand vector d over the oracle's ground set."""

    oracle: SubmodularOracle
    x: tuple[int, ...]
    d: tuple[int, ...]

    def __post_init__(self):
        n = self.oracle.n
        object.__setattr__(self, "x", tuple(self.x))
        object.__setattr__(self, "d", tuple(self.d))
        if len(self.x) != n or len(self.d) != n:
            raise ValueError("x and d must have one entry per buyer")
        for v in self.x + self.d:
            if not isinstance(v, Integral) or v < 0:
                raise ValueError("x and d must be nonnegative integer vectors")


def _guard_subset(mask: int) -> None:
    size = bin(mask).count("1")
    if size > max_ground_set():
        raise SubsetLimit(f"|S|={size} exceeds the enumeration guard {max_ground_set()}")


def f_xd(ctx: RemnantContext, subset) -> int:
    """Remnant supply: min over S' ⊆ S of f(S') − x(S') + d(S − S')."""
    s = subset_mask(subset)
    _guard_subset(s)
    f = ctx.oracle
    x, d = ctx.x, ctx.d
    d_total = sum(d[i] for i in members(s))
    return min(
        f.value(sub) - sum(x[i] + d[i] for i in members(sub)) + d_total for sub in submasks(s)
    )


def _double_min_table(ctx: RemnantContext) -> list[int]:
    """Remnant function on every subset from the double minimisation."""
    f = ctx.oracle
    n = f.n
    full = (1 << n) - 1
    xs = subset_sums(ctx.x, n)
    ds = subset_sums(ctx.d, n)
    # inner[S'] = min over S'' ⊇ S' of f(S'') − x(S'')
    inner = []
    for sp in range(1 << n):
        inner.append(min(f.value(sp | extra) - xs[sp | extra] for extra in submasks(full ^ sp)))
    return [min(inner[sp] + ds[s ^ sp] for sp in submasks(s)) for s in range(1 << n)]


def f_xd_double_min(ctx: RemnantContext, subset) -> int:
    """The defining double minimisation over S' ⊆ S and S'' ⊇ S'.

    Slower than :func:`f_xd` and valid for any x in P(f); the two agree on
    every state the auction reaches.
    """
    _guard_subset(ctx.oracle.full)
    return _double_min_table(ctx)[subset_mask(subset)]


def clinch_brute_oracle(ctx: RemnantContext, i: int) -> int:
    """Largest w <= d_i leaving the other buyers' remnant polytope unchanged.

    Checked directly as f(S) <= f(S ∪ i) − w for all S ⊆ N − i, using the
    double-minimisation remnant function. Test oracle only.
    """
    _guard_subset(ctx.oracle.full)
    table = _double_min_table(ctx)
    bit = 1 << i
    w = ctx.d[i]
    for s in submasks(ctx.oracle.full ^ bit):
        w = min(w, table[s | bit] - table[s])
    return max(w, 0)
