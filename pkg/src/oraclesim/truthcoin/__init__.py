"""Sidechain prediction-market simulation: two-coin ledger, LMSR markets,
commit/reveal voting with stake redistribution, and the miner veto window."""

from . import lmsr
from .ledger import (
    COIN,
    Ballot,
    BallotPhase,
    Binary,
    CommitClosedError,
    Decision,
    DecisionKind,
    DecisionState,
    InsufficientCSHError,
    InsufficientSharesError,
    InsufficientVTCError,
    Market,
    NotConfirmedError,
    PastMaturityError,
    Resolution,
    RevealClosedError,
    RevealMismatchError,
    RevealOpenError,
    Scalar,
    SideBlock,
    SideLedger,
    StateError,
    TradingClosedError,
    TruthcoinError,
    VetoOutcome,
    VoteRecord,
    WindowOpenError,
    apportion,
    commitment_digest,
    evaluate_veto,
    resolve_votes,
    weighted_binary_outcome,
    weighted_median,
)
from .sim import (
    DEFAULT_QUORUM,
    DEFAULT_SEVERITY,
    DEFAULT_VETO_WINDOW,
    WEEK_SECONDS,
    TruthcoinSim,
)

__all__ = [
    "COIN",
    "Ballot",
    "BallotPhase",
    "Binary",
    "CommitClosedError",
    "DEFAULT_QUORUM",
    "DEFAULT_SEVERITY",
    "DEFAULT_VETO_WINDOW",
    "Decision",
    "DecisionKind",
    "DecisionState",
    "InsufficientCSHError",
    "InsufficientSharesError",
    "InsufficientVTCError",
    "Market",
    "NotConfirmedError",
    "PastMaturityError",
    "Resolution",
    "RevealClosedError",
    "RevealMismatchError",
    "RevealOpenError",
    "Scalar",
    "SideBlock",
    "SideLedger",
    "StateError",
    "TradingClosedError",
    "TruthcoinError",
    "TruthcoinSim",
    "VetoOutcome",
    "VoteRecord",
    "WEEK_SECONDS",
    "WindowOpenError",
    "apportion",
    "commitment_digest",
    "evaluate_veto",
    "lmsr",
    "resolve_votes",
    "weighted_binary_outcome",
    "weighted_median",
]
