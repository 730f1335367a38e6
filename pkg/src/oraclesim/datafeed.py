"""Fixture-backed data sources with signed observations and digest proofs.

A source is a time series per key with carry-forward reads: a query at
time t returns the latest entry at or before t. Sources that sign their
data attach a signature over the canonical observation digest; a proof
binds a query, the response digest, the source, and an attestor into one
recomputable attestation digest. Values are typed (bool, int, float,
string) and are encoded with a one-letter type prefix so that, say, the
number 1 and the string "1" never collide.
"""

from __future__ import annotations

import enum
import json
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

from .codec import Writer, sha256
from .simchain.keys import KeyPair, Signature, derive_pair, sign

FeedValue = Union[bool, int, float, str]


class NoDataError(LookupError):
    """No entry at or before the queried time for that key."""


def encode_value(value: FeedValue) -> bytes:
    """Canonical typed encoding; bool checked first since bool <: int."""
    if isinstance(value, bool):
        return b"b:true" if value else b"b:false"
    if isinstance(value, int):
        return b"i:%d" % value
    if isinstance(value, float):
        return b"f:" + repr(value).encode("ascii")
    if isinstance(value, str):
        return b"s:" + value.encode("utf-8")
    raise TypeError(f"unsupported feed value type: {type(value).__name__}")


@dataclass(frozen=True)
class Observation:
    source_id: str
    key: str
    time: int
    value: FeedValue
    source_signature: Signature | None = None


def observation_digest(source_id: str, key: str, time: int, value: FeedValue) -> bytes:
    w = Writer()
    w.string(source_id).string(key).u64(time).bytes(encode_value(value))
    return sha256(w.getvalue())


@dataclass(frozen=True)
class AuthenticityProof:
    key: str
    time: int
    response_digest: bytes
    source_id: str
    attestor_id: str
    attestation: bytes


def _attestation(key: str, time: int, response_digest: bytes, source_id: str, attestor_id: str) -> bytes:
    w = Writer()
    w.string(key).u64(time).raw(response_digest).string(source_id).string(attestor_id)
    return sha256(w.getvalue())


class DataSource:
    """Deterministic fixture source. Read-only after construction."""

    def __init__(
        self,
        source_id: str,
        entries: Iterable[tuple[str, int, FeedValue]],
        ssl: bool = True,
        signs_data: bool = False,
    ) -> None:
        self.id = source_id
        self.ssl = ssl
        self.signs_data = signs_data
        self.keypair: KeyPair = derive_pair(b"feed:" + source_id.encode("utf-8"))
        by_key: dict[str, list[tuple[int, FeedValue]]] = {}
        for key, time, value in entries:
            by_key.setdefault(key, []).append((int(time), value))
        for series in by_key.values():
            series.sort(key=lambda e: e[0])
            times = [t for t, _ in series]
            if len(set(times)) != len(times):
                raise ValueError(f"duplicate entry times in source {source_id!r}")
        self._series = by_key
        self._times = {key: [t for t, _ in series] for key, series in by_key.items()}

    @classmethod
    def from_json(cls, obj: Mapping) -> "DataSource":
        entries = [(e["key"], e["time"], e["value"]) for e in obj.get("entries", [])]
        return cls(
            source_id=obj["id"],
            entries=entries,
            ssl=obj.get("ssl", True),
            signs_data=obj.get("signs_data", False),
        )

    def keys(self) -> list[str]:
        return sorted(self._series)


def load_sources(text: str) -> dict[str, DataSource]:
    """Parse a fixture document: a JSON array of source objects."""
    sources = [DataSource.from_json(obj) for obj in json.loads(text)]
    return {s.id: s for s in sources}


def query(source: DataSource, key: str, time: int) -> Observation:
    """Latest entry at or before `time`, carry-forward; NoDataError if none."""
    times = source._times.get(key)
    if not times:
        raise NoDataError(f"{source.id}: no series for key {key!r}")
    idx = bisect_right(times, time) - 1
    if idx < 0:
        raise NoDataError(f"{source.id}: no entry for {key!r} at or before t={time}")
    entry_time, value = source._series[key][idx]
    signature = None
    if source.signs_data:
        digest = observation_digest(source.id, key, entry_time, value)
        signature = sign(source.keypair.secret, digest)
    return Observation(
        source_id=source.id, key=key, time=entry_time, value=value, source_signature=signature
    )


def verify_observation(obs: Observation, source: DataSource) -> bool:
    """Check the source signature against a recomputed observation digest."""
    if obs.source_signature is None:
        return not source.signs_data
    digest = observation_digest(obs.source_id, obs.key, obs.time, obs.value)
    expected = sign(source.keypair.secret, digest)
    return obs.source_signature == expected


def make_proof(source: DataSource, key: str, time: int, attestor_id: str) -> AuthenticityProof:
    obs = query(source, key, time)
    response_digest = sha256(encode_value(obs.value))
    return AuthenticityProof(
        key=key,
        time=time,
        response_digest=response_digest,
        source_id=source.id,
        attestor_id=attestor_id,
        attestation=_attestation(key, time, response_digest, source.id, attestor_id),
    )


def verify_proof(proof: AuthenticityProof, obs: Observation) -> bool:
    if proof.source_id != obs.source_id or proof.key != obs.key:
        return False
    if sha256(encode_value(obs.value)) != proof.response_digest:
        return False
    recomputed = _attestation(
        proof.key, proof.time, proof.response_digest, proof.source_id, proof.attestor_id
    )
    return recomputed == proof.attestation


class Comparator(enum.IntEnum):
    """Threshold comparators shared by bet and condition vocabularies."""

    EQ = 1
    NE = 2
    LT = 3
    LE = 4
    GT = 5
    GE = 6


_COMPARE = {
    Comparator.EQ: lambda a, b: a == b,
    Comparator.NE: lambda a, b: a != b,
    Comparator.LT: lambda a, b: a < b,
    Comparator.LE: lambda a, b: a <= b,
    Comparator.GT: lambda a, b: a > b,
    Comparator.GE: lambda a, b: a >= b,
}


def compare(cmp: Comparator, value, target) -> bool:
    """Apply a comparator; ordering comparators require same-kind operands."""
    if cmp in (Comparator.EQ, Comparator.NE):
        return _COMPARE[cmp](value, target)
    if isinstance(value, bool) or isinstance(target, bool):
        raise TypeError("ordering comparators need numeric operands")
    if isinstance(value, str) != isinstance(target, str):
        raise TypeError("cannot order a string against a number")
    return _COMPARE[cmp](value, target)
