"""Sieve-MMR: time-travel-resilient broadcast and MMR consensus over a simulated DPoW oracle."""

from .core import (
    EMPTY_CHAIN,
    Block,
    Chain,
    SieveMessage,
    are_compatible,
    is_consistent_dag,
    is_consistent_successor,
    restrict_to_timestamp,
    weight,
)
from .oracle import DpowOracle, OracleClient, audit_correct_supremacy
from .sieve import (
    SieveNode,
    bootstrap_sieve,
    exists_heavier_disjoint_dag,
    find_heaviest_consistent_dag,
    online_sieve,
)

__version__ = "0.1.0"

__all__ = [
    "EMPTY_CHAIN",
    "Block",
    "Chain",
    "DpowOracle",
    "OracleClient",
    "SieveMessage",
    "SieveNode",
    "are_compatible",
    "audit_correct_supremacy",
    "bootstrap_sieve",
    "exists_heavier_disjoint_dag",
    "find_heaviest_consistent_dag",
    "is_consistent_dag",
    "is_consistent_successor",
    "online_sieve",
    "restrict_to_timestamp",
    "weight",
]
