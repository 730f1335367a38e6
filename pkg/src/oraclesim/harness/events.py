"""Append-only event log with a canonical byte encoding.

One event per line: canonical JSON (sorted keys, no spaces), UTF-8, one
trailing newline per line. The digest is the hash of exactly those bytes,
so two logs compare equal iff their files are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..codec import sha256


@dataclass(frozen=True)
class Event:
    tick: int
    module: str
    kind: str
    payload: dict


def _encode(event: Event) -> str:
    doc = {
        "tick": event.tick,
        "module": event.module,
        "kind": event.kind,
        "payload": event.payload,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


@dataclass
class EventLog:
    events: list[Event] = field(default_factory=list)

    def append(self, tick: int, module: str, kind: str, **payload) -> Event:
        event = Event(tick=tick, module=module, kind=kind, payload=payload)
        _encode(event)  # reject non-serializable payloads at the source
        self.events.append(event)
        return event

    def lines(self) -> list[str]:
        return [_encode(e) for e in self.events]

    def encode(self) -> bytes:
        return "".join(line + "\n" for line in self.lines()).encode("utf-8")

    def digest(self) -> bytes:
        return sha256(self.encode())

    def write(self, path) -> None:
        Path(path).write_bytes(self.encode())

    @classmethod
    def read(cls, path) -> "EventLog":
        log = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line:
                continue
            doc = json.loads(line)
            log.events.append(
                Event(
                    tick=doc["tick"],
                    module=doc["module"],
                    kind=doc["kind"],
                    payload=doc["payload"],
                )
            )
        return log

    def matching(self, kind: str, where: dict | None = None) -> list[Event]:
        found = []
        for event in self.events:
            if event.kind != kind:
                continue
            if where and any(event.payload.get(k) != v for k, v in where.items()):
                continue
            found.append(event)
        return found


def verify_replay(log_a: EventLog, log_b: EventLog) -> bool:
    """Two runs replicated iff their logs hash identically."""
    return log_a.digest() == log_b.digest()
