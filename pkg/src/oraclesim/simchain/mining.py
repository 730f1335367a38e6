"""Hashrate-weighted block production.

One block per call: a winning miner is drawn with probability equal to
its hashrate share, then fills its block greedily by fee rate. Policy
compliance matters only here: a compliant miner never considers
nonstandard txs, which is what makes nonstandard inclusion a waiting
game rather than a validity question.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from random import Random
from typing import Sequence

from .chain import Block, SimChain
from .mempool import Mempool
from .tx import Transaction

DEFAULT_BLOCK_SIZE_BUDGET = 16384


class NoMinersError(RuntimeError):
    """Raised when asked to mine with an empty miner table."""


@dataclass(frozen=True)
class Miner:
    miner_id: str
    hashrate: float
    accepts_nonstandard: bool = True
    block_size_budget: int = DEFAULT_BLOCK_SIZE_BUDGET

    def __post_init__(self) -> None:
        if not 0.0 < self.hashrate <= 1.0:
            raise ValueError("hashrate must be in (0, 1]")
        if self.block_size_budget < 1:
            raise ValueError("block_size_budget must be positive")


def _draw_winner(miners: Sequence[Miner], rng: Random) -> Miner:
    roll = rng.random()
    acc = 0.0
    for miner in miners:
        acc += miner.hashrate
        if roll < acc:
            return miner
    return miners[-1]


def mine_next(chain: SimChain, mempool: Mempool, miners: Sequence[Miner], rng: Random) -> Block:
    if not miners:
        raise NoMinersError("cannot mine without miners")
    total = sum(m.hashrate for m in miners)
    if not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=1e-9):
        raise ValueError(f"miner hashrates must sum to 1, got {total}")

    winner = _draw_winner(miners, rng)
    included: list[Transaction] = []
    spent_in_block: set[tuple[bytes, int]] = set()
    used = 0
    for entry in mempool.candidates(include_nonstandard=winner.accepts_nonstandard):
        if used + entry.size > winner.block_size_budget:
            continue
        if any(txin.outpoint in spent_in_block for txin in entry.tx.inputs):
            continue
        if not chain.validate(entry.tx):
            continue
        included.append(entry.tx)
        spent_in_block.update(txin.outpoint for txin in entry.tx.inputs)
        used += entry.size

    block = Block(
        height=chain.height + 1,
        miner_id=winner.miner_id,
        txs=tuple(included),
        parent=chain.tip_hash,
    )
    chain._apply_block(block)
    return block
