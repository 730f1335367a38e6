"""Chain state: blocks, the UTXO set, and block application.

The chain owns the key registry, the standardness policy, and the mempool.
There are no reorgs, no difficulty, and no coinbase: value enters at the
genesis allocation and only ever decreases by fees (burned) or by being
locked behind unspendable scripts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from ..codec import Writer, sha256
from .keys import KeyRegistry
from .mempool import Mempool, SubmitResult
from .policy import POLICY_V090, StandardnessPolicy, classify
from .script import PayToKey
from .tx import Transaction, TxOutput, serialize_tx, tx_to_json, txid
from .validate import ValidationResult, validate_tx

GENESIS_PARENT = bytes(32)


@dataclass(frozen=True)
class Block:
    height: int
    miner_id: str
    txs: tuple[Transaction, ...]
    parent: bytes


def serialize_block(block: Block) -> bytes:
    w = Writer()
    w.u64(block.height).string(block.miner_id).raw(block.parent)
    w.u32(len(block.txs))
    for tx in block.txs:
        w.raw(serialize_tx(tx))
    return w.getvalue()


def block_hash(block: Block) -> bytes:
    return sha256(serialize_block(block))


class SimChain:
    def __init__(
        self,
        policy: StandardnessPolicy = POLICY_V090,
        genesis: Sequence[TxOutput] = (),
        keys: KeyRegistry | None = None,
        expiry_blocks: int = 100,
    ) -> None:
        self.policy = policy
        self.keys = keys if keys is not None else KeyRegistry()
        self.mempool = Mempool(expiry_blocks=expiry_blocks)
        self.utxo: dict[tuple[bytes, int], TxOutput] = {}
        self.blocks: list[Block] = []
        self.txs_by_id: dict[bytes, Transaction] = {}
        self.confirmed_height: dict[bytes, int] = {}

        genesis_tx = Transaction(inputs=(), outputs=tuple(genesis))
        self._apply_block(Block(height=0, miner_id="genesis", txs=(genesis_tx,), parent=GENESIS_PARENT))

    # --- queries ----------------------------------------------------------

    @property
    def height(self) -> int:
        return self.blocks[-1].height

    @property
    def tip_hash(self) -> bytes:
        return block_hash(self.blocks[-1])

    def utxos_for(self, pub: bytes) -> list[tuple[tuple[bytes, int], TxOutput]]:
        found = [
            (op, out)
            for op, out in self.utxo.items()
            if isinstance(out.lock, PayToKey) and out.lock.pub == pub
        ]
        found.sort(key=lambda item: item[0])
        return found

    def balance(self, pub: bytes) -> int:
        return sum(out.value for _, out in self.utxos_for(pub))

    def supply(self) -> int:
        return sum(out.value for out in self.utxo.values())

    def output_at(self, outpoint: tuple[bytes, int]) -> TxOutput | None:
        """Output for an outpoint, spent or not; None if the tx is unknown."""
        tx = self.txs_by_id.get(outpoint[0])
        if tx is None or outpoint[1] >= len(tx.outputs):
            return None
        return tx.outputs[outpoint[1]]

    def is_confirmed(self, tx_id: bytes) -> bool:
        return tx_id in self.confirmed_height

    def validate(self, tx: Transaction) -> ValidationResult:
        """Validity if the tx were included at the next height."""
        return validate_tx(tx, self.utxo, self.height + 1, self.keys)

    # --- state transitions --------------------------------------------------

    def submit(self, tx: Transaction) -> SubmitResult:
        return self.mempool.submit(self, tx)

    def mine_next(self, miners, rng) -> Block:
        from .mining import mine_next

        return mine_next(self, self.mempool, miners, rng)

    def _apply_block(self, block: Block) -> None:
        for tx in block.txs:
            tid = txid(tx)
            for txin in tx.inputs:
                del self.utxo[txin.outpoint]
            for idx, out in enumerate(tx.outputs):
                self.utxo[(tid, idx)] = out
            self.txs_by_id[tid] = tx
            self.confirmed_height[tid] = block.height
        self.blocks.append(block)
        self.mempool.on_block(block, self.height)

    # --- dumps --------------------------------------------------------------

    def utxo_json(self) -> str:
        from .tx import _lock_to_json

        entries = [
            {"txid": op[0].hex(), "index": op[1], "value": out.value, "lock": _lock_to_json(out.lock)}
            for op, out in sorted(self.utxo.items())
        ]
        return json.dumps(entries, sort_keys=True, separators=(",", ":"))

    def chain_json(self) -> str:
        blocks = [
            {
                "height": b.height,
                "miner": b.miner_id,
                "parent": b.parent.hex(),
                "hash": block_hash(b).hex(),
                "txs": [tx_to_json(tx) for tx in b.txs],
            }
            for b in self.blocks
        ]
        return json.dumps(blocks, sort_keys=True, separators=(",", ":"))
