"""Consensus validity of transactions against a UTXO view.

A transaction is valid when every input exists and is unspent, every
witness satisfies its lock, the locktime has passed, and outputs do not
exceed inputs.  Standardness plays no part here.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

from .keys import KeyRegistry
from .script import (
    DataCarrier,
    Either,
    LockScript,
    MultiSig,
    PayToKey,
    ScriptHash,
    TimeLocked,
    script_digest,
)
from .tx import Transaction, TxOutput, Witness, sighash


class InvalidReason(enum.Enum):
    MISSING_INPUT = "missing_input"
    DOUBLE_SPEND = "double_spend"
    BAD_WITNESS = "bad_witness"
    OVERSPEND = "overspend"
    PREMATURE = "premature"
    UNSPENDABLE_INPUT = "unspendable_input"


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    reason: InvalidReason | None = None

    def __bool__(self) -> bool:
        return self.ok


VALID = ValidationResult(True)


def _invalid(reason: InvalidReason) -> ValidationResult:
    return ValidationResult(False, reason)


def _satisfies(
    lock: LockScript,
    witness: Witness,
    digest: bytes,
    height: int,
    keys: KeyRegistry,
) -> InvalidReason | None:
    """None when the witness satisfies the lock, else the failure reason."""
    if isinstance(lock, PayToKey):
        for sig in witness.signatures:
            if sig.signer_pub == lock.pub and keys.verify_known(sig, lock.pub, digest):
                return None
        return InvalidReason.BAD_WITNESS
    if isinstance(lock, MultiSig):
        # commitment is a published hash, not a spend condition
        satisfied = set()
        for sig in witness.signatures:
            if sig.signer_pub in lock.keys and keys.verify_known(sig, sig.signer_pub, digest):
                satisfied.add(sig.signer_pub)
        return None if len(satisfied) >= lock.m else InvalidReason.BAD_WITNESS
    if isinstance(lock, ScriptHash):
        if witness.redeem is None or script_digest(witness.redeem) != lock.h:
            return InvalidReason.BAD_WITNESS
        return _satisfies(witness.redeem, witness, digest, height, keys)
    if isinstance(lock, DataCarrier):
        return InvalidReason.UNSPENDABLE_INPUT
    if isinstance(lock, TimeLocked):
        if height < lock.unlock_height:
            return InvalidReason.PREMATURE
        return _satisfies(lock.inner, witness, digest, height, keys)
    if isinstance(lock, Either):
        if _satisfies(lock.left, witness, digest, height, keys) is None:
            return None
        if _satisfies(lock.right, witness, digest, height, keys) is None:
            return None
        return InvalidReason.BAD_WITNESS
    raise TypeError(f"not a lock script: {lock!r}")


def validate_tx(
    tx: Transaction,
    utxo_set: Mapping[tuple[bytes, int], TxOutput],
    height: int,
    keys: KeyRegistry,
) -> ValidationResult:
    """Validity of `tx` if included in a block at `height`."""
    if tx.locktime > height:
        return _invalid(InvalidReason.PREMATURE)

    outpoints = [txin.outpoint for txin in tx.inputs]
    if len(set(outpoints)) != len(outpoints):
        return _invalid(InvalidReason.DOUBLE_SPEND)

    total_in = 0
    digest = sighash(tx)
    for txin in tx.inputs:
        source = utxo_set.get(txin.outpoint)
        if source is None:
            return _invalid(InvalidReason.MISSING_INPUT)
        failure = _satisfies(source.lock, txin.witness, digest, height, keys)
        if failure is not None:
            return _invalid(failure)
        total_in += source.value

    total_out = sum(o.value for o in tx.outputs)
    if total_out > total_in:
        return _invalid(InvalidReason.OVERSPEND)
    return VALID
