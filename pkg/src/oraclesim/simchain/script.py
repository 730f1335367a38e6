"""Lock script templates.

The script engine is a closed set of templates covering every construction
the protocol modules need: pay-to-key, M-of-N multisig (15-key cap), P2SH,
unspendable data carriers, height timelocks, and a two-branch disjunction
used for hash-committed contract redeems.  MultiSig carries an optional
32-byte commitment — the "two signatures plus committed hash" template —
which is inert for spending (the committed hash is published for off-chain
checks, not enforced on-chain) but changes the script's identity and
standardness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from ..codec import Reader, Writer, sha256

MAX_MULTISIG_KEYS = 15

_TAG_PAY_TO_KEY = 1
_TAG_MULTISIG = 2
_TAG_SCRIPT_HASH = 3
_TAG_DATA_CARRIER = 4
_TAG_TIME_LOCKED = 5
_TAG_EITHER = 6


@dataclass(frozen=True)
class PayToKey:
    pub: bytes


@dataclass(frozen=True)
class MultiSig:
    m: int
    keys: tuple[bytes, ...]
    commitment: bytes | None = None  # published hash, not a spend condition

    def __post_init__(self) -> None:
        if not 1 <= self.m <= len(self.keys):
            raise ValueError(f"multisig requires 1 <= m <= n, got {self.m} of {len(self.keys)}")
        if len(self.keys) > MAX_MULTISIG_KEYS:
            raise ValueError(f"multisig capped at {MAX_MULTISIG_KEYS} keys, got {len(self.keys)}")
        if self.commitment is not None and len(self.commitment) != 32:
            raise ValueError("commitment must be 32 bytes")


@dataclass(frozen=True)
class ScriptHash:
    h: bytes  # sha256 of the serialized redeem script


@dataclass(frozen=True)
class DataCarrier:
    payload: bytes


@dataclass(frozen=True)
class TimeLocked:
    inner: "LockScript"
    unlock_height: int


@dataclass(frozen=True)
class Either:
    left: "LockScript"
    right: "LockScript"


LockScript = Union[PayToKey, MultiSig, ScriptHash, DataCarrier, TimeLocked, Either]


def write_lock(w: Writer, lock: LockScript) -> None:
    if isinstance(lock, PayToKey):
        w.u8(_TAG_PAY_TO_KEY).raw(lock.pub)
    elif isinstance(lock, MultiSig):
        w.u8(_TAG_MULTISIG).u8(lock.m).u8(len(lock.keys))
        for k in lock.keys:
            w.raw(k)
        if lock.commitment is None:
            w.u8(0)
        else:
            w.u8(1).raw(lock.commitment)
    elif isinstance(lock, ScriptHash):
        w.u8(_TAG_SCRIPT_HASH).raw(lock.h)
    elif isinstance(lock, DataCarrier):
        w.u8(_TAG_DATA_CARRIER).bytes(lock.payload)
    elif isinstance(lock, TimeLocked):
        w.u8(_TAG_TIME_LOCKED).u64(lock.unlock_height)
        write_lock(w, lock.inner)
    elif isinstance(lock, Either):
        w.u8(_TAG_EITHER)
        write_lock(w, lock.left)
        write_lock(w, lock.right)
    else:
        raise TypeError(f"not a lock script: {lock!r}")


def lock_from_reader(r: Reader) -> LockScript:
    tag = r.u8()
    if tag == _TAG_PAY_TO_KEY:
        return PayToKey(pub=r.raw(32))
    if tag == _TAG_MULTISIG:
        m = r.u8()
        n = r.u8()
        keys = tuple(r.raw(32) for _ in range(n))
        commitment = r.raw(32) if r.u8() else None
        return MultiSig(m=m, keys=keys, commitment=commitment)
    if tag == _TAG_SCRIPT_HASH:
        return ScriptHash(h=r.raw(32))
    if tag == _TAG_DATA_CARRIER:
        return DataCarrier(payload=r.bytes())
    if tag == _TAG_TIME_LOCKED:
        unlock_height = r.u64()
        return TimeLocked(inner=lock_from_reader(r), unlock_height=unlock_height)
    if tag == _TAG_EITHER:
        return Either(left=lock_from_reader(r), right=lock_from_reader(r))
    raise ValueError(f"unknown lock script tag {tag}")


def serialize_lock(lock: LockScript) -> bytes:
    w = Writer()
    write_lock(w, lock)
    return w.getvalue()


def deserialize_lock(data: bytes) -> LockScript:
    r = Reader(data)
    lock = lock_from_reader(r)
    r.expect_done()
    return lock


def script_digest(lock: LockScript) -> bytes:
    return sha256(serialize_lock(lock))


def p2sh_lock(redeem: LockScript) -> ScriptHash:
    """Wrap a redeem script into a pay-to-script-hash output lock."""
    return ScriptHash(h=script_digest(redeem))
