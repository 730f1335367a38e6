"""Polled conditional contracts with an oracle co-signer and proof audit.

Two agents escrow funds behind a 2-of-3 multisig shared with an oracle.
The oracle checks each contract's conditions against fixture data sources
on a fixed schedule; the first satisfied condition yields a settlement
paying that condition's beneficiary, carrying the triggering observation
and an authenticity proof.  With the proof shield on the oracle refuses
to sign anything whose proof fails verification; with it off it signs
regardless and the audit record is marked failed.  If no condition holds
within the timeframe the oracle co-signs a payment to the default
beneficiary, and a refund draft pre-signed by both agents with a locktime
lets them recover the escrow without the oracle at all.

An arbitrated variant puts a fourth party's key in the oracle's multisig
slot; that contract is resolved by the arbitrator's scripted decision
rather than by polling.

Conditions on the same (source, key) must be pairwise disjoint so at most
one can fire on any value; conditions on different keys can be true at
once, and the earliest poll resolves ties by list order.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

from .datafeed import (
    AuthenticityProof,
    Comparator,
    DataSource,
    FeedValue,
    Observation,
    compare,
    make_proof,
    query,
    verify_proof,
)
from .simchain import (
    InsufficientFundsError,
    KeyPair,
    MultiSig,
    PayToKey,
    Transaction,
    TxOutput,
    Witness,
    sighash,
    sign,
    txid,
)
from .simchain.chain import SimChain
from .simchain.tx import TxInput

DEFAULT_POLL_INTERVAL = 3600  # seconds


class OraclizeError(Exception):
    """Base for conditional-contract failures."""


class OverlappingConditionsError(OraclizeError):
    """Two conditions on the same source key can hold at once."""


class NonSSLSourceError(OraclizeError):
    """Only encrypted sources are accepted."""


class EmptyTimeframeError(OraclizeError):
    pass


class ProofInvalidError(OraclizeError):
    """Shielded oracle refused to sign over a proof that fails to verify."""


class TooEarlyError(OraclizeError):
    pass


class AlreadySettledError(OraclizeError):
    pass


class BadWitnessError(OraclizeError):
    """The settlement or refund did not satisfy the escrow lock."""


class ArbitrationRequiredError(OraclizeError):
    """Polling cannot resolve a contract whose co-signer is the arbitrator."""


# ------------------------------------------------------------- conditions

_ORDERING = (Comparator.LT, Comparator.LE, Comparator.GE, Comparator.GT)
_ALLOWED = (*_ORDERING, Comparator.EQ)


def _kind(value: FeedValue) -> str:
    """Typed feeds never collide across kinds; bool checked before int."""
    if isinstance(value, bool):
        return "event"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, str):
        return "label"
    raise TypeError(f"unsupported threshold type: {type(value).__name__}")


@dataclass(frozen=True)
class Condition:
    source_id: str
    key: str
    comparator: Comparator
    threshold: FeedValue
    beneficiary: bytes

    def __post_init__(self) -> None:
        if self.comparator not in _ALLOWED:
            raise ValueError("conditions take <, <=, =, >= or >")
        if _kind(self.threshold) != "number" and self.comparator is not Comparator.EQ:
            raise ValueError("event and label conditions compare with equality only")


def condition_holds(condition: Condition, value: FeedValue) -> bool:
    """Whether an observed value satisfies the condition; total over kinds."""
    if _kind(value) != _kind(condition.threshold):
        return False
    return compare(condition.comparator, value, condition.threshold)


_NEG = float("-inf")
_POS = float("inf")


def _interval(cmp: Comparator, t) -> tuple[float, bool, float, bool]:
    """Satisfying set over the number line: (lo, lo closed, hi, hi closed)."""
    if cmp is Comparator.LT:
        return (_NEG, False, t, False)
    if cmp is Comparator.LE:
        return (_NEG, False, t, True)
    if cmp is Comparator.EQ:
        return (t, True, t, True)
    if cmp is Comparator.GE:
        return (t, True, _POS, False)
    return (t, False, _POS, False)


def _contains(iv: tuple, x) -> bool:
    lo, lo_closed, hi, hi_closed = iv
    return (x > lo or (x == lo and lo_closed)) and (x < hi or (x == hi and hi_closed))


def conditions_overlap(a: Condition, b: Condition) -> bool:
    """Whether some feed value satisfies both conditions.

    Decided by interval intersection for number thresholds; event and
    label conditions are points, and distinct kinds never meet because
    feed values are typed.  Only comparisons are used, so the answer is
    exact for float thresholds too.
    """
    if (a.source_id, a.key) != (b.source_id, b.key):
        return False
    ka, kb = _kind(a.threshold), _kind(b.threshold)
    if ka != kb:
        return False
    if ka != "number":
        return a.threshold == b.threshold
    ia, ib = _interval(a.comparator, a.threshold), _interval(b.comparator, b.threshold)
    lo = max(ia[0], ib[0])
    hi = min(ia[2], ib[2])
    if lo > hi:
        return False
    if lo < hi:
        return True  # the reals are dense: an open gap still has points
    return _contains(ia, lo) and _contains(ib, lo)


def check_disjoint(conditions) -> None:
    conditions = list(conditions)
    for i, a in enumerate(conditions):
        for b in conditions[i + 1 :]:
            if conditions_overlap(a, b):
                raise OverlappingConditionsError(
                    f"conditions on {a.source_id}/{a.key} can hold at once"
                )


# -------------------------------------------------------------- contracts


class ContractState(enum.Enum):
    ACTIVE = "active"
    SETTLED_CONDITION = "settled_condition"
    SETTLED_DEFAULT = "settled_default"
    REFUNDED = "refunded"


@dataclass
class ConditionalContract:
    contract_id: str
    alice_pub: bytes
    bob_pub: bytes
    third_pub: bytes  # the oracle, or the arbitrator in the carol variant
    arbitrated: bool
    conditions: tuple[Condition, ...]
    default_beneficiary: bytes
    start: int
    end: int
    poll_interval: int
    proofshield: bool
    funding_outpoint: tuple[bytes, int]
    escrow_value: int
    refund_locktime: int
    refund_draft: Transaction
    state: ContractState = ContractState.ACTIVE
    settled_condition: int | None = None


def poll_times(contract: ConditionalContract) -> range:
    """Scheduled checks: one interval after start, then every interval
    until the end of the window (inclusive when it divides evenly)."""
    return range(
        contract.start + contract.poll_interval, contract.end + 1, contract.poll_interval
    )


@dataclass(frozen=True)
class SignedSettlement:
    contract_id: str
    tx: Transaction
    condition_index: int | None  # None on the default path
    observation: Observation | None
    proof: AuthenticityProof | None
    proof_ok: bool | None
    verified_before_signing: bool


@dataclass(frozen=True)
class AuditRecord:
    contract_id: str
    time: int
    kind: str  # "condition" | "default" | "refused" | "arbitration"
    condition_index: int | None
    observation: Observation | None
    proof: AuthenticityProof | None
    proof_ok: bool | None
    signed: bool
    verified_before_signing: bool


def _select_coins(chain: SimChain, pub: bytes, amount: int):
    picked, total = [], 0
    for outpoint, out in chain.utxos_for(pub):
        picked.append(outpoint)
        total += out.value
        if total >= amount:
            return picked, total
    raise InsufficientFundsError(f"need {amount}, have {total}")


def _escrow_spend(contract: ConditionalContract, beneficiary: bytes, fee: int) -> Transaction:
    return Transaction(
        inputs=(TxInput(outpoint=contract.funding_outpoint),),
        outputs=(TxOutput(value=contract.escrow_value - fee, lock=PayToKey(beneficiary)),),
    )


class Oracle:
    """Scheduled co-signer: builds contracts, polls sources, signs payouts.

    `proof_hook`, when set, rewrites each proof between fetch and the
    pre-signature check; adversarial fixtures use it to model tampering
    anywhere along the data path.  Every signing decision lands in
    `audit`, including refusals.
    """

    def __init__(
        self,
        keys,
        sources: dict[str, DataSource],
        oracle_id: str = "oraclize",
        proof_hook=None,
    ) -> None:
        self.id = oracle_id
        self.pair: KeyPair = keys.keygen(f"oracle:{oracle_id}".encode())
        self.sources = sources
        self.proof_hook = proof_hook
        self.audit: list[AuditRecord] = []
        self._next_id = 1

    # --- construction ----------------------------------------------------

    def build_contract(
        self,
        chain: SimChain,
        *,
        alice: KeyPair,
        bob: KeyPair,
        stakes: tuple[int, int],
        conditions,
        default_beneficiary: bytes,
        start: int,
        end: int,
        refund_locktime: int,
        poll_interval: int = DEFAULT_POLL_INTERVAL,
        proofshield: bool = False,
        arbitrator: KeyPair | None = None,
        fee: int = 1000,
    ) -> ConditionalContract:
        """Escrow both stakes behind the 2-of-3 lock and pre-sign the refund.

        The funding transaction is broadcast; the refund draft spends the
        escrow back to the agents (split pro rata, fees from the pot) and
        carries the locktime, so it only becomes minable if the oracle
        goes dark past that height.
        """
        if end <= start:
            raise EmptyTimeframeError(f"window [{start}, {end}] has no duration")
        if poll_interval <= 0:
            raise ValueError("poll_interval must be positive")
        conditions = tuple(conditions)
        for condition in conditions:
            source = self.sources[condition.source_id]
            if not source.ssl:
                raise NonSSLSourceError(f"{source.id} is not encrypted")
        check_disjoint(conditions)

        third = arbitrator.pub if arbitrator is not None else self.pair.pub
        lock = MultiSig(m=2, keys=(alice.pub, bob.pub, third))
        escrow_value = sum(stakes) - fee

        coins_a, total_a = _select_coins(chain, alice.pub, stakes[0])
        coins_b, total_b = _select_coins(chain, bob.pub, stakes[1])
        outputs = [TxOutput(value=escrow_value, lock=lock)]
        if total_a > stakes[0]:
            outputs.append(TxOutput(value=total_a - stakes[0], lock=PayToKey(alice.pub)))
        if total_b > stakes[1]:
            outputs.append(TxOutput(value=total_b - stakes[1], lock=PayToKey(bob.pub)))
        funding = Transaction(
            inputs=tuple(TxInput(outpoint=op) for op in (*coins_a, *coins_b)),
            outputs=tuple(outputs),
        )
        digest = sighash(funding)
        for index in range(len(funding.inputs)):
            owner = alice if index < len(coins_a) else bob
            funding = funding.with_witness(
                index, Witness(signatures=(sign(owner.secret, digest),))
            )
        result = chain.submit(funding)
        if not result.accepted:
            raise BadWitnessError(f"funding rejected: {result.reason}")

        contract_id = f"oc-{self._next_id}"
        self._next_id += 1
        funding_outpoint = (txid(funding), 0)

        refund_value = escrow_value - fee
        alice_share = refund_value * stakes[0] // sum(stakes)
        refund = Transaction(
            inputs=(TxInput(outpoint=funding_outpoint),),
            outputs=(
                TxOutput(value=alice_share, lock=PayToKey(alice.pub)),
                TxOutput(value=refund_value - alice_share, lock=PayToKey(bob.pub)),
            ),
            locktime=refund_locktime,
        )
        refund_digest = sighash(refund)
        refund = refund.with_witness(
            0,
            Witness(
                signatures=(
                    sign(alice.secret, refund_digest),
                    sign(bob.secret, refund_digest),
                )
            ),
        )

        return ConditionalContract(
            contract_id=contract_id,
            alice_pub=alice.pub,
            bob_pub=bob.pub,
            third_pub=third,
            arbitrated=arbitrator is not None,
            conditions=conditions,
            default_beneficiary=default_beneficiary,
            start=start,
            end=end,
            poll_interval=poll_interval,
            proofshield=proofshield,
            funding_outpoint=funding_outpoint,
            escrow_value=escrow_value,
            refund_locktime=refund_locktime,
            refund_draft=refund,
        )

    # --- scheduled resolution ---------------------------------------------

    def poll(
        self, contract: ConditionalContract, now: int, fee: int = 1000
    ) -> SignedSettlement | None:
        """One scheduled check; first satisfied condition wins, list order
        breaking ties.  Returns the oracle-signed settlement, or None."""
        if contract.arbitrated:
            raise ArbitrationRequiredError(contract.contract_id)
        if contract.state is not ContractState.ACTIVE:
            raise AlreadySettledError(contract.contract_id)
        if not contract.start < now <= contract.end:
            raise ValueError(f"poll at {now} outside ({contract.start}, {contract.end}]")
        if (now - contract.start) % contract.poll_interval != 0:
            raise ValueError(f"poll at {now} is off the schedule")

        for index, condition in enumerate(contract.conditions):
            source = self.sources[condition.source_id]
            observation = query(source, condition.key, now)
            if not condition_holds(condition, observation.value):
                continue
            proof = make_proof(source, condition.key, now, self.id)
            if self.proof_hook is not None:
                proof = self.proof_hook(proof)
            proof_ok = verify_proof(proof, observation)
            if contract.proofshield and not proof_ok:
                self.audit.append(
                    AuditRecord(
                        contract.contract_id, now, "refused", index, observation,
                        proof, proof_ok, signed=False, verified_before_signing=True,
                    )
                )
                raise ProofInvalidError(f"{contract.contract_id}: proof failed verification")
            tx = _escrow_spend(contract, condition.beneficiary, fee)
            tx = tx.with_witness(
                0, Witness(signatures=(sign(self.pair.secret, sighash(tx)),))
            )
            contract.state = ContractState.SETTLED_CONDITION
            contract.settled_condition = index
            self.audit.append(
                AuditRecord(
                    contract.contract_id, now, "condition", index, observation,
                    proof, proof_ok, signed=True,
                    verified_before_signing=contract.proofshield,
                )
            )
            return SignedSettlement(
                contract_id=contract.contract_id,
                tx=tx,
                condition_index=index,
                observation=observation,
                proof=proof,
                proof_ok=proof_ok,
                verified_before_signing=contract.proofshield,
            )
        return None

    def settle_default(
        self, contract: ConditionalContract, now: int, fee: int = 1000
    ) -> SignedSettlement:
        """After the window, co-sign the payout to the default beneficiary."""
        if contract.arbitrated:
            raise ArbitrationRequiredError(contract.contract_id)
        if contract.state is not ContractState.ACTIVE:
            raise AlreadySettledError(contract.contract_id)
        if now <= contract.end:
            raise TooEarlyError(f"window open until {contract.end}")
        tx = _escrow_spend(contract, contract.default_beneficiary, fee)
        tx = tx.with_witness(0, Witness(signatures=(sign(self.pair.secret, sighash(tx)),)))
        contract.state = ContractState.SETTLED_DEFAULT
        self.audit.append(
            AuditRecord(
                contract.contract_id, now, "default", None, None, None, None,
                signed=True, verified_before_signing=contract.proofshield,
            )
        )
        return SignedSettlement(
            contract_id=contract.contract_id,
            tx=tx,
            condition_index=None,
            observation=None,
            proof=None,
            proof_ok=None,
            verified_before_signing=contract.proofshield,
        )

    def audit_json(self) -> str:
        rows = [
            {
                "contract": r.contract_id,
                "time": r.time,
                "kind": r.kind,
                "condition_index": r.condition_index,
                "observation": None
                if r.observation is None
                else {
                    "source": r.observation.source_id,
                    "key": r.observation.key,
                    "time": r.observation.time,
                    "value": r.observation.value,
                },
                "attestation": None if r.proof is None else r.proof.attestation.hex(),
                "proof_ok": r.proof_ok,
                "signed": r.signed,
                "verified_before_signing": r.verified_before_signing,
            }
            for r in self.audit
        ]
        return json.dumps(rows, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------- agent-side operations


def co_sign_and_broadcast(
    chain: SimChain, settlement: SignedSettlement, agent: KeyPair
) -> Transaction:
    """Second signature over the oracle's settlement, then broadcast.

    The escrow script only counts keys; it cannot see which beneficiary
    the agents meant, so any two of the three holders can move the funds.
    """
    tx = settlement.tx
    digest = sighash(tx)
    witness = tx.inputs[0].witness
    tx = tx.with_witness(
        0, Witness(signatures=(*witness.signatures, sign(agent.secret, digest)))
    )
    result = chain.submit(tx)
    if not result.accepted:
        raise BadWitnessError(f"settlement rejected: {result.reason}")
    return tx


def refund_expiry(chain: SimChain, contract: ConditionalContract) -> Transaction:
    """Broadcast the agents' pre-signed refund once its locktime has passed.

    Needs nothing from the oracle: this is the recovery path for a dead
    co-signer."""
    if contract.state is not ContractState.ACTIVE:
        raise AlreadySettledError(contract.contract_id)
    if chain.height + 1 < contract.refund_locktime:
        raise TooEarlyError(
            f"refund minable at height {contract.refund_locktime}, next is {chain.height + 1}"
        )
    result = chain.submit(contract.refund_draft)
    if not result.accepted:
        raise BadWitnessError(f"refund rejected: {result.reason}")
    contract.state = ContractState.REFUNDED
    return contract.refund_draft


def arbitrate(
    contract: ConditionalContract,
    arbitrator: KeyPair,
    condition_index: int | None,
    fee: int = 1000,
) -> SignedSettlement:
    """The fourth party's scripted decision on an arbitrated contract:
    a condition's beneficiary, or the default when given None."""
    if not contract.arbitrated:
        raise OraclizeError(f"{contract.contract_id} is oracle-resolved")
    if contract.state is not ContractState.ACTIVE:
        raise AlreadySettledError(contract.contract_id)
    if condition_index is None:
        beneficiary = contract.default_beneficiary
        contract.state = ContractState.SETTLED_DEFAULT
    else:
        beneficiary = contract.conditions[condition_index].beneficiary
        contract.state = ContractState.SETTLED_CONDITION
        contract.settled_condition = condition_index
    tx = _escrow_spend(contract, beneficiary, fee)
    tx = tx.with_witness(0, Witness(signatures=(sign(arbitrator.secret, sighash(tx)),)))
    return SignedSettlement(
        contract_id=contract.contract_id,
        tx=tx,
        condition_index=condition_index,
        observation=None,
        proof=None,
        proof_ok=None,
        verified_before_signing=False,
    )
