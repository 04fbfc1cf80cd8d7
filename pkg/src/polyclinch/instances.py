"""Instance documents, named fixtures and seeded random generators.

Document layout (JSON)::

    {"buyers": [{"id": 1, "valuation": "3/2", "budget": "4", "bid": "2"}, ...],
     "constraint": {"type": "multi_unit", "supply": 3}}

Buyer ids are 1..n. Rationals are integers or strings "p" / "p/q"; floats are
rejected. Explicit tables are keyed by comma-separated sorted buyer ids, with
"" for the empty set.
"""

from __future__ import annotations

import json
import random
import re
from fractions import Fraction
from pathlib import Path
from typing import Iterator

from .auction import AuctionInstance, Buyer
from .errors import GenerationFailed, InvalidInstance, ParseError, UnknownFixture
from .polymatroid import (
    BipartiteOracle,
    MultiUnitOracle,
    SubmodularOracle,
    TableOracle,
    members,
    validate_oracle,
)

_RATIONAL = re.compile(r"^\s*(-?\d+)\s*(?:/\s*(\d+)\s*)?$")

FAMILIES = ("multi_unit", "bipartite", "explicit")
FIXTURES = ("prop54", "example62")


def parse_rational(value, where: str = "value") -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise ParseError(f"{where}: {value!r} is not an exact rational")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        m = _RATIONAL.match(value)
        if m:
            den = int(m.group(2)) if m.group(2) else 1
            if den == 0:
                raise ParseError(f"{where}: zero denominator")
            return Fraction(int(m.group(1)), den)
    raise ParseError(f"{where}: {value!r} is not an integer or 'p/q' string")


def format_rational(q: Fraction) -> str:
    return str(Fraction(q))


def subset_key(mask: int) -> str:
    return ",".join(str(i + 1) for i in members(mask))


def _check_keys(obj: dict, allowed: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    extra = set(obj) - allowed
    if extra:
        raise ParseError(f"{where}: unknown field(s) {sorted(extra)}")


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{where}: expected an integer, got {value!r}")
    return value


def _oracle_from_doc(doc: dict, n: int) -> SubmodularOracle:
    if not isinstance(doc, dict) or "type" not in doc:
        raise ParseError("constraint: missing 'type'")
    kind = doc["type"]
    if kind == "multi_unit":
        _check_keys(doc, {"type", "supply"}, "constraint")
        supply = _int(doc.get("supply"), "constraint.supply")
        if supply < 0:
            raise ParseError("constraint.supply must be nonnegative")
        return MultiUnitOracle(n, supply)
    if kind == "bipartite":
        _check_keys(doc, {"type", "goods", "edges"}, "constraint")
        goods = doc.get("goods")
        if not isinstance(goods, list):
            raise ParseError("constraint.goods must be an array")
        index, units = {}, []
        for g in goods:
            _check_keys(g, {"id", "units"}, "constraint.goods[]")
            gid = g.get("id")
            if gid in index or isinstance(gid, (dict, list)):
                raise ParseError(f"constraint.goods: bad or duplicate id {gid!r}")
            index[gid] = len(units)
            u = _int(g.get("units"), f"goods[{gid}].units")
            if u < 0:
                raise ParseError(f"goods[{gid}].units must be nonnegative")
            units.append(u)
        edges = []
        for e in doc.get("edges", []):
            if not isinstance(e, list) or len(e) != 2:
                raise ParseError(f"constraint.edges: malformed edge {e!r}")
            b = _int(e[0], "edge buyer id")
            if not 1 <= b <= n:
                raise ParseError(f"edge buyer id {b} out of range")
            if e[1] not in index:
                raise ParseError(f"edge refers to unknown good {e[1]!r}")
            edges.append((b - 1, index[e[1]]))
        return BipartiteOracle(n, units, edges)
    if kind == "explicit":
        _check_keys(doc, {"type", "values"}, "constraint")
        values = doc.get("values")
        if not isinstance(values, dict):
            raise ParseError("constraint.values must be an object")
        table = [None] * (1 << n)
        for key, val in values.items():
            try:
                ids = [int(t) for t in key.split(",")] if key.strip() else []
            except ValueError:
                raise ParseError(f"constraint.values: bad subset key {key!r}") from None
            if any(not 1 <= i <= n for i in ids) or len(set(ids)) != len(ids):
                raise ParseError(f"constraint.values: bad subset key {key!r}")
            mask = 0
            for i in ids:
                mask |= 1 << (i - 1)
            if table[mask] is not None:
                raise ParseError(f"constraint.values: duplicate key for subset {key!r}")
            table[mask] = _int(val, f"values[{key!r}]")
        missing = [subset_key(m) for m, v in enumerate(table) if v is None]
        if missing:
            raise ParseError(f"constraint.values: missing {len(missing)} subset(s), e.g. {missing[0]!r}")
        return TableOracle(n, table)
    raise ParseError(f"constraint: unknown type {kind!r}")


def from_doc(doc: dict, validate: bool = True) -> AuctionInstance:
    _check_keys(doc, {"buyers", "constraint"}, "document")
    raw = doc.get("buyers")
    if not isinstance(raw, list) or not raw:
        raise ParseError("buyers must be a nonempty array")
    by_id = {}
    for b in raw:
        _check_keys(b, {"id", "valuation", "bid", "budget"}, "buyers[]")
        bid_ = _int(b.get("id"), "buyer id")
        if bid_ in by_id:
            raise ParseError(f"duplicate buyer id {bid_}")
        by_id[bid_] = b
    n = len(by_id)
    if sorted(by_id) != list(range(1, n + 1)):
        raise ParseError(f"buyer ids must be 1..{n}")
    buyers = []
    for i in range(1, n + 1):
        b = by_id[i]
        for req in ("valuation", "budget"):
            if req not in b:
                raise ParseError(f"buyer {i}: missing {req}")
        v = parse_rational(b["valuation"], f"buyer {i} valuation")
        B = parse_rational(b["budget"], f"buyer {i} budget")
        bid = parse_rational(b["bid"], f"buyer {i} bid") if "bid" in b else None
        try:
            buyers.append(Buyer(v, B, bid))
        except InvalidInstance as exc:
            raise InvalidInstance(f"buyer {i}: {exc}", axiom=exc.axiom) from None
    if "constraint" not in doc:
        raise ParseError("missing constraint")
    try:
        oracle = _oracle_from_doc(doc["constraint"], n)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    instance = AuctionInstance(tuple(buyers), oracle)
    if validate:
        instance.validate()
    return instance


def load(source) -> AuctionInstance:
    """Parse and validate an instance from a path or from document text."""
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read {source}: {exc}") from None
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    return from_doc(doc)


def oracle_to_doc(oracle: SubmodularOracle) -> dict:
    if isinstance(oracle, MultiUnitOracle):
        return {"type": "multi_unit", "supply": oracle.supply}
    if isinstance(oracle, BipartiteOracle):
        return {
            "type": "bipartite",
            "goods": [{"id": g + 1, "units": u} for g, u in enumerate(oracle.units)],
            "edges": [[b + 1, g + 1] for b, g in oracle.edges],
        }
    return {"type": "explicit", "values": {subset_key(m): int(oracle.value(m)) for m in range(1 << oracle.n)}}


def to_doc(instance: AuctionInstance) -> dict:
    buyers = []
    for i, b in enumerate(instance.buyers, start=1):
        entry = {"id": i, "valuation": format_rational(b.valuation)}
        if b.bid != b.valuation:
            entry["bid"] = format_rational(b.bid)
        entry["budget"] = format_rational(b.budget)
        buyers.append(entry)
    return {"buyers": buyers, "constraint": oracle_to_doc(instance.oracle)}


def dumps(instance: AuctionInstance) -> str:
    """Canonical text form; identical instances give byte-identical output."""
    return json.dumps(to_doc(instance), indent=2) + "\n"


def save(instance: AuctionInstance, path) -> None:
    Path(path).write_text(dumps(instance))


def fixture(name: str, k: int = None) -> AuctionInstance:
    """Named instances.

    ``prop54``: two buyers, k units, valuations (1, k), budgets (k, k).
    ``example62``: one unit, valuations (k, 2), common budget 1.
    """
    if name == "prop54":
        k = 3 if k is None else k
        if k < 2:
            raise UnknownFixture(f"prop54 needs k >= 2, got {k}")
        return AuctionInstance((Buyer(1, k), Buyer(k, k)), MultiUnitOracle(2, k))
    if name == "example62":
        k = 10 if k is None else k
        if k < 3:
            raise UnknownFixture(f"example62 needs k >= 3, got {k}")
        return AuctionInstance((Buyer(k, 1), Buyer(2, 1)), MultiUnitOracle(2, 1))
    raise UnknownFixture(f"unknown fixture {name!r}; known: {', '.join(FIXTURES)}")


def _rational(rng: random.Random, lo: int, hi: int, dens=(1, 1, 2, 3, 4)) -> Fraction:
    return Fraction(rng.randint(lo, hi), rng.choice(dens))


def _random_buyers(rng: random.Random, n: int, max_supply: int) -> list[Buyer]:
    buyers = []
    for _ in range(n):
        v = _rational(rng, 1, 12)
        # budget covers between 1/4 of a unit and the whole supply plus one
        B = v * Fraction(rng.randint(1, 4 * (max_supply + 1)), 4)
        if rng.random() < 0.3:
            B = _rational(rng, 1, 24)
        buyers.append(Buyer(v, B))
    return buyers


def _multi_unit(rng, n, max_supply, supply=None):
    m = supply if supply is not None else rng.randint(1, max_supply)
    return MultiUnitOracle(n, m)


def _bipartite(rng, n, max_supply, goods=None):
    g = goods if goods is not None else rng.randint(1, min(4, max_supply))
    if g > max_supply:
        raise GenerationFailed(f"{g} goods cannot fit in supply {max_supply}")
    units = [1] * g
    for _ in range(rng.randint(0, max_supply - g)):
        units[rng.randrange(g)] += 1
    edges = {(b, j) for b in range(n) for j in range(g) if rng.random() < 0.5}
    # competition repair: every good needs two neighbours so that no single
    # buyer's removal changes f(N)
    for j in range(g):
        nbrs = {b for b, jj in edges if jj == j}
        while len(nbrs) < 2:
            b = rng.randrange(n)
            nbrs.add(b)
            edges.add((b, j))
    return BipartiteOracle(n, units, sorted(edges))


def _explicit(rng, n, max_supply, elements=None):
    count = elements if elements is not None else rng.randint(1, min(5, max_supply))
    weights = [1] * count
    for _ in range(rng.randint(0, max(0, max_supply - count))):
        weights[rng.randrange(count)] += 1
    cover = []
    for _ in range(count):
        owners = {b for b in range(n) if rng.random() < 0.5}
        while len(owners) < 2:
            owners.add(rng.randrange(n))
        mask = 0
        for b in owners:
            mask |= 1 << b
        cover.append(mask)
    total = sum(weights)
    cap = rng.randint(1, total) if rng.random() < 0.5 else total
    table = [min(cap, sum(w for w, c in zip(weights, cover) if c & m)) for m in range(1 << n)]
    return TableOracle(n, table)


_BUILDERS = {"multi_unit": _multi_unit, "bipartite": _bipartite, "explicit": _explicit}


def generate(family: str, n: int, seed: int, max_supply: int = 8, retries: int = 20, **params) -> AuctionInstance:
    """Deterministic random instance of the given oracle family.

    ``params``: ``supply`` (multi_unit), ``goods`` (bipartite) or
    ``elements`` (explicit) pin the structure size instead of drawing it.
    """
    if family not in _BUILDERS:
        raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    if n < 2:
        raise GenerationFailed("the competition condition needs at least two buyers")
    rng = random.Random(f"{family}:{n}:{seed}:{max_supply}:{sorted(params.items())}")
    last = None
    for _ in range(retries):
        oracle = _BUILDERS[family](rng, n, max_supply, **params)
        rep = validate_oracle(oracle, exhaustive=n <= 12)
        if rep.ok and oracle.value(oracle.full) <= max_supply:
            return AuctionInstance(tuple(_random_buyers(rng, n, max_supply)), oracle)
        last = rep.failures()
    raise GenerationFailed(f"no valid {family} instance after {retries} tries (last failure {last})")


def corpus(count: int, seed: int = 0, max_n: int = 6, max_supply: int = 8, families=FAMILIES) -> Iterator[AuctionInstance]:
    """A reproducible stream cycling through the families with n in [2, max_n]."""
    rng = random.Random(seed)
    for k in range(count):
        family = families[k % len(families)]
        n = rng.randint(2, max_n)
        yield generate(family, n, seed=rng.randrange(1 << 30), max_supply=max_supply)

