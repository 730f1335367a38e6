"""Relay pool with standardness tagging, conflict tracking, and expiry.

Every accepted tx is validated against the confirmed UTXO set, so pool
entries never spend each other's outputs: a child must wait until its
parent confirms. Standardness is recorded at submit time and consulted
by miners, never by validation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from .policy import StandardnessDecision, classify
from .tx import Transaction, tx_size, txid
from .validate import InvalidReason

if TYPE_CHECKING:
    from .chain import Block, SimChain

REASON_INVALID = "invalid"
REASON_DUPLICATE = "duplicate"
REASON_CONFLICT = "conflict"


@dataclass(frozen=True)
class SubmitResult:
    txid: bytes
    accepted: bool
    standard: StandardnessDecision | None = None
    reason: str | None = None
    invalid_reason: InvalidReason | None = None

    def __bool__(self) -> bool:
        return self.accepted


@dataclass(frozen=True)
class MempoolEntry:
    tx: Transaction
    txid: bytes
    fee: int
    size: int
    arrival_height: int
    arrival_seq: int
    standard: StandardnessDecision

    @property
    def fee_rate(self) -> float:
        return self.fee / self.size


class Mempool:
    def __init__(self, expiry_blocks: int = 100) -> None:
        if expiry_blocks < 1:
            raise ValueError("expiry_blocks must be positive")
        self.expiry_blocks = expiry_blocks
        self.entries: dict[bytes, MempoolEntry] = {}
        self._claimed: dict[tuple[bytes, int], bytes] = {}
        self._next_seq = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, tx_id: bytes) -> bool:
        return tx_id in self.entries

    def submit(self, chain: "SimChain", tx: Transaction) -> SubmitResult:
        tid = txid(tx)
        if tid in self.entries:
            return SubmitResult(txid=tid, accepted=False, reason=REASON_DUPLICATE)
        for txin in tx.inputs:
            if txin.outpoint in self._claimed:
                return SubmitResult(txid=tid, accepted=False, reason=REASON_CONFLICT)
        verdict = chain.validate(tx)
        if not verdict:
            return SubmitResult(
                txid=tid, accepted=False, reason=REASON_INVALID, invalid_reason=verdict.reason
            )
        fee = sum(chain.utxo[txin.outpoint].value for txin in tx.inputs) - sum(
            out.value for out in tx.outputs
        )
        decision = classify(tx, chain.policy)
        entry = MempoolEntry(
            tx=tx,
            txid=tid,
            fee=fee,
            size=tx_size(tx),
            arrival_height=chain.height,
            arrival_seq=self._next_seq,
            standard=decision,
        )
        self._next_seq += 1
        self.entries[tid] = entry
        for txin in tx.inputs:
            self._claimed[txin.outpoint] = tid
        return SubmitResult(txid=tid, accepted=True, standard=decision)

    def candidates(self, include_nonstandard: bool) -> list[MempoolEntry]:
        """Entries a miner will consider, best fee rate first, FIFO on ties."""
        pool = [
            e
            for e in self.entries.values()
            if include_nonstandard or e.standard.standard
        ]
        pool.sort(key=lambda e: (-e.fee_rate, e.arrival_seq))
        return pool

    def on_block(self, block: "Block", height: int) -> None:
        for tx in block.txs:
            self._remove(txid(tx))
        expired = [
            tid
            for tid, entry in self.entries.items()
            if height - entry.arrival_height >= self.expiry_blocks
        ]
        for tid in expired:
            self._remove(tid)

    def _remove(self, tid: bytes) -> None:
        entry = self.entries.pop(tid, None)
        if entry is None:
            return
        for txin in entry.tx.inputs:
            self._claimed.pop(txin.outpoint, None)
