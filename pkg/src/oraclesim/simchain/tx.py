"""Transactions: canonical serialization, ids, signing digests, builders.

Two digests matter.  `txid` hashes the full canonical serialization,
witnesses included, and is the transaction's identity.  `sighash` hashes
the transaction with every witness blanked — that is what signatures
commit to, so co-signers can add their signatures to a partially signed
transaction without invalidating earlier ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Iterable, Sequence

from ..codec import Reader, Writer, sha256
from .keys import KeyPair, Signature, sign
from .script import LockScript, PayToKey, lock_from_reader, write_lock

if TYPE_CHECKING:
    from .chain import SimChain


class InsufficientFundsError(ValueError):
    """Payment builder could not cover outputs plus fee."""


@dataclass(frozen=True)
class Witness:
    signatures: tuple[Signature, ...] = ()
    redeem: LockScript | None = None
    expr_preimage: bytes | None = None


EMPTY_WITNESS = Witness()


@dataclass(frozen=True)
class TxInput:
    outpoint: tuple[bytes, int]  # (txid, output index)
    witness: Witness = EMPTY_WITNESS


@dataclass(frozen=True)
class TxOutput:
    value: int  # satoshi
    lock: LockScript

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ValueError("output value must be non-negative")


@dataclass(frozen=True)
class Transaction:
    inputs: tuple[TxInput, ...]
    outputs: tuple[TxOutput, ...]
    locktime: int = 0  # block height; 0 = no lock

    def with_witness(self, index: int, witness: Witness) -> "Transaction":
        """New transaction with input `index`'s witness replaced."""
        inputs = list(self.inputs)
        inputs[index] = replace(inputs[index], witness=witness)
        return replace(self, inputs=tuple(inputs))

    def without_witnesses(self) -> "Transaction":
        return replace(
            self, inputs=tuple(replace(i, witness=EMPTY_WITNESS) for i in self.inputs)
        )


def _write_signature(w: Writer, sig: Signature) -> None:
    w.raw(sig.signer_pub).raw(sig.digest_signed).raw(sig.tag)


def _signature_from_reader(r: Reader) -> Signature:
    return Signature(signer_pub=r.raw(32), digest_signed=r.raw(32), tag=r.raw(32))


def _write_witness(w: Writer, wit: Witness) -> None:
    w.u16(len(wit.signatures))
    for sig in wit.signatures:
        _write_signature(w, sig)
    if wit.redeem is None:
        w.u8(0)
    else:
        w.u8(1)
        write_lock(w, wit.redeem)
    if wit.expr_preimage is None:
        w.u8(0)
    else:
        w.u8(1)
        w.bytes(wit.expr_preimage)


def _witness_from_reader(r: Reader) -> Witness:
    sigs = tuple(_signature_from_reader(r) for _ in range(r.u16()))
    redeem = lock_from_reader(r) if r.u8() else None
    preimage = r.bytes() if r.u8() else None
    return Witness(signatures=sigs, redeem=redeem, expr_preimage=preimage)


def serialize_tx(tx: Transaction) -> bytes:
    w = Writer()
    w.u16(len(tx.inputs))
    for txin in tx.inputs:
        w.raw(txin.outpoint[0]).u32(txin.outpoint[1])
        _write_witness(w, txin.witness)
    w.u16(len(tx.outputs))
    for txout in tx.outputs:
        w.u64(txout.value)
        write_lock(w, txout.lock)
    w.u64(tx.locktime)
    return w.getvalue()


def deserialize_tx(data: bytes) -> Transaction:
    r = Reader(data)
    inputs = []
    for _ in range(r.u16()):
        outpoint = (r.raw(32), r.u32())
        inputs.append(TxInput(outpoint=outpoint, witness=_witness_from_reader(r)))
    outputs = []
    for _ in range(r.u16()):
        value = r.u64()
        outputs.append(TxOutput(value=value, lock=lock_from_reader(r)))
    locktime = r.u64()
    r.expect_done()
    return Transaction(inputs=tuple(inputs), outputs=tuple(outputs), locktime=locktime)


def txid(tx: Transaction) -> bytes:
    return sha256(serialize_tx(tx))


def sighash(tx: Transaction) -> bytes:
    return sha256(serialize_tx(tx.without_witnesses()))


def tx_size(tx: Transaction) -> int:
    return len(serialize_tx(tx))


def sign_input(tx: Transaction, index: int, keys: KeyPair, **witness_fields) -> Transaction:
    """Attach a single-signature witness for `keys` to input `index`."""
    sig = sign(keys.secret, sighash(tx))
    return tx.with_witness(index, Witness(signatures=(sig,), **witness_fields))


def build_payment(
    chain: "SimChain",
    sender: KeyPair,
    outputs: Sequence[TxOutput],
    fee: int = 0,
    locktime: int = 0,
    extra_inputs: Iterable[tuple[bytes, int]] = (),
) -> Transaction:
    """Spend the sender's pay-to-key UTXOs into `outputs` plus change.

    Coin selection is deterministic (outpoints in sorted order).  Raises
    InsufficientFundsError when the sender's spendable value cannot cover
    outputs plus fee.
    """
    if fee < 0:
        raise ValueError("fee must be non-negative")
    target = sum(o.value for o in outputs) + fee
    selected: list[tuple[bytes, int]] = list(extra_inputs)
    gathered = sum(chain.utxo[op].value for op in selected)
    for outpoint, txout in chain.utxos_for(sender.pub):
        if gathered >= target:
            break
        selected.append(outpoint)
        gathered += txout.value
    if gathered < target:
        raise InsufficientFundsError(f"need {target}, have {gathered}")

    change = gathered - target
    outs = list(outputs)
    if change > 0:
        outs.append(TxOutput(value=change, lock=PayToKey(sender.pub)))
    unsigned = Transaction(
        inputs=tuple(TxInput(outpoint=op) for op in selected),
        outputs=tuple(outs),
        locktime=locktime,
    )
    digest = sighash(unsigned)
    sig = sign(sender.secret, digest)
    tx = unsigned
    for i in range(len(selected)):
        tx = tx.with_witness(i, Witness(signatures=(sig,)))
    return tx


# --- JSON form (CLI and harness dumps; hex for byte fields) ---------------


def _lock_to_json(lock: LockScript):
    from .script import DataCarrier, Either, MultiSig, PayToKey, ScriptHash, TimeLocked

    if isinstance(lock, PayToKey):
        return {"type": "pay_to_key", "pub": lock.pub.hex()}
    if isinstance(lock, MultiSig):
        out = {"type": "multisig", "m": lock.m, "keys": [k.hex() for k in lock.keys]}
        if lock.commitment is not None:
            out["commitment"] = lock.commitment.hex()
        return out
    if isinstance(lock, ScriptHash):
        return {"type": "script_hash", "hash": lock.h.hex()}
    if isinstance(lock, DataCarrier):
        return {"type": "data_carrier", "payload": lock.payload.hex()}
    if isinstance(lock, TimeLocked):
        return {
            "type": "time_locked",
            "unlock_height": lock.unlock_height,
            "inner": _lock_to_json(lock.inner),
        }
    if isinstance(lock, Either):
        return {"type": "either", "left": _lock_to_json(lock.left), "right": _lock_to_json(lock.right)}
    raise TypeError(f"not a lock script: {lock!r}")


def _lock_from_json(obj) -> LockScript:
    from .script import DataCarrier, Either, MultiSig, PayToKey, ScriptHash, TimeLocked

    kind = obj["type"]
    if kind == "pay_to_key":
        return PayToKey(pub=bytes.fromhex(obj["pub"]))
    if kind == "multisig":
        commitment = bytes.fromhex(obj["commitment"]) if "commitment" in obj else None
        return MultiSig(
            m=obj["m"], keys=tuple(bytes.fromhex(k) for k in obj["keys"]), commitment=commitment
        )
    if kind == "script_hash":
        return ScriptHash(h=bytes.fromhex(obj["hash"]))
    if kind == "data_carrier":
        return DataCarrier(payload=bytes.fromhex(obj["payload"]))
    if kind == "time_locked":
        return TimeLocked(inner=_lock_from_json(obj["inner"]), unlock_height=obj["unlock_height"])
    if kind == "either":
        return Either(left=_lock_from_json(obj["left"]), right=_lock_from_json(obj["right"]))
    raise ValueError(f"unknown lock type {kind!r}")


def tx_to_json(tx: Transaction) -> dict:
    def wit(w: Witness):
        out: dict = {
            "signatures": [
                {
                    "signer_pub": s.signer_pub.hex(),
                    "digest_signed": s.digest_signed.hex(),
                    "tag": s.tag.hex(),
                }
                for s in w.signatures
            ]
        }
        if w.redeem is not None:
            out["redeem"] = _lock_to_json(w.redeem)
        if w.expr_preimage is not None:
            out["expr_preimage"] = w.expr_preimage.hex()
        return out

    return {
        "txid": txid(tx).hex(),
        "inputs": [
            {"txid": i.outpoint[0].hex(), "index": i.outpoint[1], "witness": wit(i.witness)}
            for i in tx.inputs
        ],
        "outputs": [{"value": o.value, "lock": _lock_to_json(o.lock)} for o in tx.outputs],
        "locktime": tx.locktime,
    }


def tx_from_json(obj: dict) -> Transaction:
    def wit(w: dict) -> Witness:
        sigs = tuple(
            Signature(
                signer_pub=bytes.fromhex(s["signer_pub"]),
                digest_signed=bytes.fromhex(s["digest_signed"]),
                tag=bytes.fromhex(s["tag"]),
            )
            for s in w.get("signatures", [])
        )
        redeem = _lock_from_json(w["redeem"]) if "redeem" in w else None
        preimage = bytes.fromhex(w["expr_preimage"]) if "expr_preimage" in w else None
        return Witness(signatures=sigs, redeem=redeem, expr_preimage=preimage)

    return Transaction(
        inputs=tuple(
            TxInput(
                outpoint=(bytes.fromhex(i["txid"]), i["index"]),
                witness=wit(i.get("witness", {})),
            )
            for i in obj["inputs"]
        ),
        outputs=tuple(
            TxOutput(value=o["value"], lock=_lock_from_json(o["lock"])) for o in obj["outputs"]
        ),
        locktime=obj.get("locktime", 0),
    )


def dump_tx_json(tx: Transaction) -> str:
    return json.dumps(tx_to_json(tx), sort_keys=True, separators=(",", ":"))
