"""Meta-chain replicated over host transactions.

Protocol messages ride inside ordinary host transactions:  the payload is
magic-prefixed, obfuscated with a repeating-key XOR stream keyed by the
first input's txid (a documented stand-in cipher, isolated so a real one
could be substituted), and embedded either as a data-carrier output (40
bytes or less) or split across the spare keys of a 1-of-N multisig output.

Every replica folds the host chain in (block, tx index) order into the same
MetaState.  Host validity and meta validity are independent: a host-valid
transaction whose meta message breaks a rule (overspend, stale broadcast,
wrong burn output) confirms on the host chain but is marked invalid in the
meta log and changes nothing.

XCP exists only through proof-of-burn: paying host coin to the configured
vanity address (nobody holds its key) credits the sender at the configured
rate.  Feeds are broadcast histories per address; bets escrow XCP at match
time and settle on the first feed broadcast at or past their deadline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

from .codec import Reader, TruncatedError, Writer, sha256
from .datafeed import Comparator, compare
from .simchain import (
    DataCarrier,
    KeyPair,
    MultiSig,
    PayToKey,
    Transaction,
    TxOutput,
    build_payment,
    txid,
)

if TYPE_CHECKING:
    from .simchain import SimChain

MAGIC = b"CNTRPRTY"
DATA_CARRIER_LIMIT = 40  # larger payloads fall back to multisig embedding
CHUNK = 31  # payload bytes per embedded multisig key (1 length byte + 31)
DEFAULT_BURN_RATE = 1000  # XCP base units issued per satoshi burned
FEE_FRACTION_UNIT = 10**8  # fee_fraction is a fraction in 1e-8 steps

# a vanity lock nobody can sign for: its preimage secret was never generated
BURN_PUB = sha256(b"proof-of-burn vanity address, key unknown")

XCP = "XCP"


class CounterpartyError(Exception):
    """Base for meta-protocol failures."""


class BadMagicError(CounterpartyError):
    """Payload does not start with the protocol magic after decryption."""


class TruncatedPayloadError(CounterpartyError):
    """Payload ended mid-field or carried trailing bytes."""


class NoBroadcastYetError(CounterpartyError):
    """The feed has not published any value yet."""


class BadStarsError(CounterpartyError):
    """Feed ratings take 1 to 5 stars."""


# ----------------------------------------------------------------- messages


@dataclass(frozen=True)
class Send:
    asset: str
    qty: int
    dest: str


@dataclass(frozen=True)
class Broadcast:
    timestamp: int
    value: int  # fixed point, 1e-8 steps
    fee_fraction: int  # of FEE_FRACTION_UNIT
    text: str


@dataclass(frozen=True)
class Bet:
    feed: str
    comparator: Comparator
    target: int  # fixed point, 1e-8 steps
    deadline: int
    wager: int  # XCP base units this side escrows
    counterwager: int  # XCP base units required from the other side
    side: int  # 1 bets the comparison holds, 0 bets against


@dataclass(frozen=True)
class Burn:
    btc_qty: int  # satoshi the host transaction pays to the burn address


MetaMessage = Send | Broadcast | Bet | Burn

_SEND, _BROADCAST, _BET, _BURN = 1, 2, 3, 4


def _xor_stream(data: bytes, key: bytes) -> bytes:
    if not key:
        raise ValueError("empty cipher key")
    return bytes(b ^ key[i % len(key)] for i, b in enumerate(data))


def _write_body(message: MetaMessage) -> bytes:
    w = Writer()
    if isinstance(message, Send):
        w.u8(_SEND).string(message.asset).u64(message.qty).string(message.dest)
    elif isinstance(message, Broadcast):
        w.u8(_BROADCAST).u64(message.timestamp).i64(message.value)
        w.u32(message.fee_fraction).string(message.text)
    elif isinstance(message, Bet):
        w.u8(_BET).string(message.feed).u8(int(message.comparator)).i64(message.target)
        w.u64(message.deadline).u64(message.wager).u64(message.counterwager)
        w.u8(message.side)
    elif isinstance(message, Burn):
        w.u8(_BURN).u64(message.btc_qty)
    else:
        raise TypeError(f"not a protocol message: {message!r}")
    return w.getvalue()


def encode_message(message: MetaMessage, key_txid: bytes) -> bytes:
    """Serialized, obfuscated payload: XOR(magic || body, first-input txid)."""
    return _xor_stream(MAGIC + _write_body(message), key_txid)


def decode_payload(payload: bytes, key_txid: bytes) -> MetaMessage:
    """Inverse of encode_message; the wrong key scrambles the magic."""
    plain = _xor_stream(payload, key_txid)
    if not plain.startswith(MAGIC):
        raise BadMagicError("payload magic missing after decryption")
    r = Reader(plain[len(MAGIC):])
    try:
        tag = r.u8()
        if tag == _SEND:
            message: MetaMessage = Send(asset=r.string(), qty=r.u64(), dest=r.string())
        elif tag == _BROADCAST:
            message = Broadcast(
                timestamp=r.u64(), value=r.i64(), fee_fraction=r.u32(), text=r.string()
            )
        elif tag == _BET:
            message = Bet(
                feed=r.string(),
                comparator=Comparator(r.u8()),
                target=r.i64(),
                deadline=r.u64(),
                wager=r.u64(),
                counterwager=r.u64(),
                side=r.u8(),
            )
        elif tag == _BURN:
            message = Burn(btc_qty=r.u64())
        else:
            raise ValueError(f"unknown message tag {tag}")
        if not r.done():
            raise TruncatedPayloadError("trailing bytes after message")
    except TruncatedError as exc:
        raise TruncatedPayloadError(str(exc)) from exc
    return message


# ----------------------------------------------------- host transaction glue


def carrier_output(payload: bytes, owner_pub: bytes) -> TxOutput:
    """Wrap an encoded payload into a host output.

    Up to 40 bytes ride in a data-carrier output; anything larger is split
    over the spare keys of a 1-of-N multisig whose first key stays the
    owner's, 31 payload bytes per key behind a length byte.
    """
    if len(payload) <= DATA_CARRIER_LIMIT:
        return TxOutput(value=0, lock=DataCarrier(payload))
    chunks = [payload[i : i + CHUNK] for i in range(0, len(payload), CHUNK)]
    if len(chunks) + 1 > 15:
        raise ValueError(f"payload of {len(payload)} bytes exceeds multisig capacity")
    data_keys = tuple(
        bytes([len(chunk)]) + chunk + b"\0" * (CHUNK - len(chunk)) for chunk in chunks
    )
    return TxOutput(value=0, lock=MultiSig(m=1, keys=(owner_pub, *data_keys)))


def carried_ciphertexts(tx: Transaction) -> list[bytes]:
    """Candidate payloads in a host transaction, in output order."""
    found = []
    for out in tx.outputs:
        lock = out.lock
        if isinstance(lock, DataCarrier):
            found.append(lock.payload)
        elif isinstance(lock, MultiSig) and lock.m == 1 and len(lock.keys) >= 2:
            chunks = []
            for key in lock.keys[1:]:
                size = key[0]
                if size > CHUNK:
                    chunks = None
                    break
                chunks.append(key[1 : 1 + size])
            if chunks:
                found.append(b"".join(chunks))
    return found


def compose_message_tx(
    chain: "SimChain",
    sender: KeyPair,
    message: MetaMessage,
    *,
    fee: int = 1000,
    extra_outputs: tuple[TxOutput, ...] = (),
) -> Transaction:
    """Build and sign a host transaction carrying one protocol message."""
    coins = chain.utxos_for(sender.pub)
    if not coins:
        raise ValueError("sender has no spendable coins")
    key_txid = coins[0][0][0]  # coin selection takes outpoints in sorted order
    payload = encode_message(message, key_txid)
    outputs = [carrier_output(payload, sender.pub), *extra_outputs]
    return build_payment(chain, sender, outputs, fee=fee)


def compose_burn_tx(
    chain: "SimChain",
    sender: KeyPair,
    btc_qty: int,
    *,
    fee: int = 1000,
    burn_pub: bytes = BURN_PUB,
) -> Transaction:
    """Pay host coin to the unspendable vanity address, declaring the burn."""
    burn_out = TxOutput(value=btc_qty, lock=PayToKey(burn_pub))
    return compose_message_tx(
        chain, sender, Burn(btc_qty=btc_qty), fee=fee, extra_outputs=(burn_out,)
    )


def burned_host_value(chain: "SimChain", burn_pub: bytes = BURN_PUB) -> int:
    """Host coin sitting on the burn address, unspendable forever."""
    return sum(
        out.value
        for out in chain.utxo.values()
        if isinstance(out.lock, PayToKey) and out.lock.pub == burn_pub
    )


def circulating_host_supply(chain: "SimChain", burn_pub: bytes = BURN_PUB) -> int:
    """Host supply minus coin provably parked on the burn address."""
    return chain.supply() - burned_host_value(chain, burn_pub)


# -------------------------------------------------------------- meta state


class BetStatus(Enum):
    OPEN = "open"
    MATCHED = "matched"
    EXPIRED = "expired"
    CANCELLED = "cancelled"  # owner could not fund the escrow at match time


@dataclass
class BetRecord:
    bet_id: int
    owner: str
    bet: Bet
    status: BetStatus = BetStatus.OPEN


@dataclass
class MatchRecord:
    match_id: int
    feed: str
    comparator: Comparator
    target: int
    deadline: int
    yes_owner: str
    yes_escrow: int
    no_owner: str
    no_escrow: int
    settled: bool = False
    winner: str | None = None  # "yes" or "no"
    fee_paid: int = 0

    @property
    def escrow(self) -> int:
        return self.yes_escrow + self.no_escrow if not self.settled else 0


@dataclass
class FeedEntry:
    timestamp: int
    value: int
    fee_fraction: int
    text: str


@dataclass
class AppliedMessage:
    height: int
    tx_index: int
    txid: bytes
    source: str
    message: MetaMessage
    valid: bool
    reason: str | None = None


@dataclass
class MetaState:
    burn_rate: int = DEFAULT_BURN_RATE
    burn_pub: bytes = BURN_PUB
    balances: dict[tuple[str, str], int] = field(default_factory=dict)
    feeds: dict[str, list[FeedEntry]] = field(default_factory=dict)
    bets: list[BetRecord] = field(default_factory=list)
    matches: list[MatchRecord] = field(default_factory=list)
    log: list[AppliedMessage] = field(default_factory=list)
    burned: int = 0
    issued: int = 0

    def balance(self, address: str, asset: str = XCP) -> int:
        return self.balances.get((address, asset), 0)

    def latest_broadcast(self, feed: str) -> FeedEntry:
        entries = self.feeds.get(feed)
        if not entries:
            raise NoBroadcastYetError(f"feed {feed} has not broadcast")
        return entries[-1]

    def escrowed(self) -> int:
        return sum(m.escrow for m in self.matches)

    def _credit(self, address: str, qty: int, asset: str = XCP) -> None:
        self.balances[(address, asset)] = self.balance(address, asset) + qty

    def _debit(self, address: str, qty: int, asset: str = XCP) -> None:
        self.balances[(address, asset)] = self.balance(address, asset) - qty


def xcp_in_circulation(state: MetaState) -> int:
    """Balances plus live escrows; equals issuance at every height."""
    held = sum(qty for (_, asset), qty in state.balances.items() if asset == XCP)
    return held + state.escrowed()


# invalid-message reasons, fixed strings so digests are comparable
R_BALANCE = "insufficient balance"
R_STALE = "stale broadcast"
R_FEE_FRACTION = "bad fee fraction"
R_WRONG_BURN = "wrong burn address"
R_ZERO_WAGER = "zero wager"
R_BAD_SIDE = "bad side"
R_NO_SOURCE = "unidentifiable source"


def _source_address(chain: "SimChain", tx: Transaction) -> str | None:
    spent = chain.output_at(tx.inputs[0].outpoint)
    if spent is None:
        return None
    lock = spent.lock
    if isinstance(lock, PayToKey):
        return lock.pub.hex()
    if isinstance(lock, MultiSig):
        return lock.keys[0].hex()
    return None


def replay(
    chain: "SimChain",
    *,
    burn_pub: bytes = BURN_PUB,
    burn_rate: int = DEFAULT_BURN_RATE,
) -> MetaState:
    """Fold the host chain into the replicated meta state.

    Pure function of the chain contents: any replica gets a bit-identical
    state, compared via state_digest.
    """
    state = MetaState(burn_rate=burn_rate, burn_pub=burn_pub)
    for block in chain.blocks:
        for tx_index, tx in enumerate(block.txs):
            if not tx.inputs:
                continue
            key_txid = tx.inputs[0].outpoint[0]
            message = None
            for cipher in carried_ciphertexts(tx):
                plain = _xor_stream(cipher, key_txid)
                if not plain.startswith(MAGIC):
                    continue
                try:
                    message = decode_payload(cipher, key_txid)
                except (TruncatedPayloadError, ValueError):
                    continue  # magic matched but the body is garbage: skip
                break
            if message is None:
                continue
            source = _source_address(chain, tx)
            if source is None:
                entry = AppliedMessage(
                    block.height, tx_index, txid(tx), "", message, False, R_NO_SOURCE
                )
            else:
                valid, reason = _apply(state, source, message, tx, burn_pub, burn_rate)
                entry = AppliedMessage(
                    block.height, tx_index, txid(tx), source, message, valid, reason
                )
            state.log.append(entry)
    return state


def _apply(
    state: MetaState,
    source: str,
    message: MetaMessage,
    tx: Transaction,
    burn_pub: bytes,
    burn_rate: int,
) -> tuple[bool, str | None]:
    if isinstance(message, Send):
        if state.balance(source, message.asset) < message.qty:
            return False, R_BALANCE
        state._debit(source, message.qty, message.asset)
        state._credit(message.dest, message.qty, message.asset)
        return True, None
    if isinstance(message, Broadcast):
        return _apply_broadcast(state, source, message)
    if isinstance(message, Bet):
        return _apply_bet(state, source, message)
    if isinstance(message, Burn):
        paid = sum(
            out.value
            for out in tx.outputs
            if isinstance(out.lock, PayToKey) and out.lock.pub == burn_pub
        )
        if paid != message.btc_qty or paid == 0:
            return False, R_WRONG_BURN
        issued = message.btc_qty * burn_rate
        state._credit(source, issued)
        state.burned += message.btc_qty
        state.issued += issued
        return True, None
    raise TypeError(f"not a protocol message: {message!r}")


def _apply_broadcast(
    state: MetaState, source: str, message: Broadcast
) -> tuple[bool, str | None]:
    if message.fee_fraction > FEE_FRACTION_UNIT:
        return False, R_FEE_FRACTION
    entries = state.feeds.setdefault(source, [])
    if entries and message.timestamp <= entries[-1].timestamp:
        return False, R_STALE
    entries.append(
        FeedEntry(message.timestamp, message.value, message.fee_fraction, message.text)
    )
    _settle_feed(state, source, message)
    return True, None


def _settle_feed(state: MetaState, feed: str, broadcast: Broadcast) -> None:
    # first broadcast at or past a deadline settles every match behind it
    for match in state.matches:
        if match.settled or match.feed != feed or match.deadline > broadcast.timestamp:
            continue
        pot = match.yes_escrow + match.no_escrow
        fee = pot * broadcast.fee_fraction // FEE_FRACTION_UNIT
        holds = compare(match.comparator, broadcast.value, match.target)
        winner_side = "yes" if holds else "no"
        winner = match.yes_owner if winner_side == "yes" else match.no_owner
        match.settled = True
        match.winner = winner_side
        match.fee_paid = fee
        state._credit(feed, fee)
        state._credit(winner, pot - fee)
    for record in state.bets:
        if record.status is BetStatus.OPEN and record.bet.feed == feed:
            if record.bet.deadline <= broadcast.timestamp:
                record.status = BetStatus.EXPIRED


def _apply_bet(state: MetaState, source: str, bet: Bet) -> tuple[bool, str | None]:
    if bet.wager == 0 or bet.counterwager == 0:
        return False, R_ZERO_WAGER
    if bet.side not in (0, 1):
        return False, R_BAD_SIDE
    for record in state.bets:
        if record.status is not BetStatus.OPEN:
            continue
        other = record.bet
        if (
            other.feed != bet.feed
            or other.comparator != bet.comparator
            or other.target != bet.target
            or other.deadline != bet.deadline
            or other.side == bet.side
            or other.wager != bet.counterwager
            or other.counterwager != bet.wager
        ):
            continue
        if state.balance(record.owner) < other.wager:
            record.status = BetStatus.CANCELLED  # maker spent the stake meanwhile
            continue
        if state.balance(source) < bet.wager:
            return False, R_BALANCE
        state._debit(record.owner, other.wager)
        state._debit(source, bet.wager)
        record.status = BetStatus.MATCHED
        taker = BetRecord(len(state.bets) + 1, source, bet, BetStatus.MATCHED)
        state.bets.append(taker)
        yes_first = bet.side == 1
        state.matches.append(
            MatchRecord(
                match_id=len(state.matches) + 1,
                feed=bet.feed,
                comparator=bet.comparator,
                target=bet.target,
                deadline=bet.deadline,
                yes_owner=source if yes_first else record.owner,
                yes_escrow=bet.wager if yes_first else other.wager,
                no_owner=record.owner if yes_first else source,
                no_escrow=other.wager if yes_first else bet.wager,
            )
        )
        return True, None
    state.bets.append(BetRecord(len(state.bets) + 1, source, bet, BetStatus.OPEN))
    return True, None


# ------------------------------------------------------------- feed ratings


@dataclass(frozen=True)
class FeedRating:
    feed: str
    rater: str
    stars: int
    comment: str = ""


class RatingBook:
    """Append-only reputation notes about feeds; never touches consensus."""

    def __init__(self) -> None:
        self._ratings: list[FeedRating] = []

    def rate(self, feed: str, rater: str, stars: int, comment: str = "") -> FeedRating:
        if not 1 <= stars <= 5:
            raise BadStarsError(f"stars must be 1..5, got {stars}")
        rating = FeedRating(feed, rater, stars, comment)
        self._ratings.append(rating)
        return rating

    def for_feed(self, feed: str) -> tuple[FeedRating, ...]:
        return tuple(r for r in self._ratings if r.feed == feed)

    def average(self, feed: str) -> float | None:
        ratings = self.for_feed(feed)
        if not ratings:
            return None
        return sum(r.stars for r in ratings) / len(ratings)


# ------------------------------------------------------------ state digest


def _message_json(message: MetaMessage) -> dict:
    if isinstance(message, Send):
        return {"type": "send", "asset": message.asset, "qty": message.qty, "dest": message.dest}
    if isinstance(message, Broadcast):
        return {
            "type": "broadcast",
            "timestamp": message.timestamp,
            "value": message.value,
            "fee_fraction": message.fee_fraction,
            "text": message.text,
        }
    if isinstance(message, Bet):
        return {
            "type": "bet",
            "feed": message.feed,
            "comparator": int(message.comparator),
            "target": message.target,
            "deadline": message.deadline,
            "wager": message.wager,
            "counterwager": message.counterwager,
            "side": message.side,
        }
    return {"type": "burn", "btc_qty": message.btc_qty}


def state_to_json(state: MetaState) -> dict:
    return {
        "burn_rate": state.burn_rate,
        "burn_pub": state.burn_pub.hex(),
        "burned": state.burned,
        "issued": state.issued,
        "balances": {
            f"{address}/{asset}": qty
            for (address, asset), qty in sorted(state.balances.items())
        },
        "feeds": {
            feed: [
                {
                    "timestamp": e.timestamp,
                    "value": e.value,
                    "fee_fraction": e.fee_fraction,
                    "text": e.text,
                }
                for e in entries
            ]
            for feed, entries in sorted(state.feeds.items())
        },
        "bets": [
            {
                "bet_id": r.bet_id,
                "owner": r.owner,
                "status": r.status.value,
                **_message_json(r.bet),
            }
            for r in state.bets
        ],
        "matches": [
            {
                "match_id": m.match_id,
                "feed": m.feed,
                "comparator": int(m.comparator),
                "target": m.target,
                "deadline": m.deadline,
                "yes_owner": m.yes_owner,
                "yes_escrow": m.yes_escrow,
                "no_owner": m.no_owner,
                "no_escrow": m.no_escrow,
                "settled": m.settled,
                "winner": m.winner,
                "fee_paid": m.fee_paid,
            }
            for m in state.matches
        ],
        "log": [
            {
                "height": e.height,
                "tx_index": e.tx_index,
                "txid": e.txid.hex(),
                "source": e.source,
                "valid": e.valid,
                "reason": e.reason,
                "message": _message_json(e.message),
            }
            for e in state.log
        ],
    }


def state_digest(state: MetaState) -> bytes:
    """H(canonical JSON): replicas compare replays with one hash."""
    doc = json.dumps(state_to_json(state), sort_keys=True, separators=(",", ":"))
    return sha256(doc.encode("utf-8"))
