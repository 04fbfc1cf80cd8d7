"""Clinching auctions for indivisible goods under polymatroid constraints.

Exact-arithmetic auction engine, welfare benchmarks and property audits.
"""

from .auction import (
    AuctionInstance,
    AuctionOutcome,
    AuctionState,
    Buyer,
    DropCause,
    clinch_amounts,
    clinching,
    next_price,
    run_auction,
    utility,
)
from .audit import AuditReport, build_layers, run_checks
from .errors import (
    ClinchError,
    GuardExceeded,
    InvalidInstance,
    MalformedTrace,
    NotInPolymatroid,
    ParseError,
    UnknownFixture,
    ValidationError,
)
from .instances import corpus, dumps, fixture, generate, load, save
from .polymatroid import (
    BipartiteOracle,
    FunctionOracle,
    MultiUnitOracle,
    RemnantContext,
    SubmodularOracle,
    TableOracle,
    clinch_brute_oracle,
    dep,
    f_xd,
    membership,
    validate_oracle,
)
from .welfare import liquid_welfare, lw_brute, lw_optimal, social_welfare

__version__ = "0.1.0"
