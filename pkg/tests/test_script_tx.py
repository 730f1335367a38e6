"""Lock script and transaction serialization, digests, and builders."""

import hashlib
import struct

import pytest

from oraclesim.codec import TruncatedError
from oraclesim.simchain import (
    DataCarrier,
    Either,
    InsufficientFundsError,
    KeyRegistry,
    MultiSig,
    PayToKey,
    POLICY_TEST2013,
    ScriptHash,
    SimChain,
    TimeLocked,
    Transaction,
    TxInput,
    TxOutput,
    Witness,
    build_payment,
    deserialize_tx,
    p2sh_lock,
    script_digest,
    serialize_lock,
    serialize_tx,
    sighash,
    tx_from_json,
    tx_to_json,
    txid,
)
from oraclesim.simchain.script import deserialize_lock
from oraclesim.simchain.tx import sign_input

PUB_A = bytes([0x11]) * 32
PUB_B = bytes([0x22]) * 32
PUB_C = bytes([0x33]) * 32


def sample_locks():
    multisig = MultiSig(m=2, keys=(PUB_A, PUB_B, PUB_C))
    return [
        PayToKey(PUB_A),
        multisig,
        MultiSig(m=1, keys=(PUB_A,), commitment=bytes(32)),
        p2sh_lock(multisig),
        DataCarrier(b""),
        DataCarrier(b"hello world"),
        TimeLocked(inner=PayToKey(PUB_B), unlock_height=144),
        Either(left=PayToKey(PUB_A), right=TimeLocked(inner=PayToKey(PUB_B), unlock_height=7)),
        p2sh_lock(Either(left=multisig, right=PayToKey(PUB_C))),
    ]


def test_every_lock_round_trips():
    for lock in sample_locks():
        assert deserialize_lock(serialize_lock(lock)) == lock


def test_lock_digests_are_pairwise_distinct():
    digests = [script_digest(lock) for lock in sample_locks()]
    assert len(set(digests)) == len(digests)


def test_multisig_constraints():
    with pytest.raises(ValueError):
        MultiSig(m=0, keys=(PUB_A,))
    with pytest.raises(ValueError):
        MultiSig(m=3, keys=(PUB_A, PUB_B))
    with pytest.raises(ValueError):
        MultiSig(m=1, keys=tuple(bytes([i]) * 32 for i in range(16)))
    with pytest.raises(ValueError):
        MultiSig(m=1, keys=(PUB_A,), commitment=b"short")
    MultiSig(m=15, keys=tuple(bytes([i]) * 32 for i in range(15)))


def test_negative_output_value_rejected():
    with pytest.raises(ValueError):
        TxOutput(value=-1, lock=PayToKey(PUB_A))


def test_minimal_tx_bytes_match_hand_packed_layout():
    tx = Transaction(
        inputs=(TxInput(outpoint=(PUB_A, 3)),),
        outputs=(TxOutput(value=5000, lock=PayToKey(PUB_B)),),
        locktime=9,
    )
    expected = b"".join(
        [
            struct.pack("<H", 1),  # input count
            PUB_A,  # source txid
            struct.pack("<I", 3),  # output index
            struct.pack("<H", 0),  # witness: no signatures
            b"\x00",  # witness: no redeem script
            b"\x00",  # witness: no preimage
            struct.pack("<H", 1),  # output count
            struct.pack("<Q", 5000),  # value
            b"\x01",  # pay-to-key tag
            PUB_B,
            struct.pack("<Q", 9),  # locktime
        ]
    )
    assert serialize_tx(tx) == expected
    assert txid(tx) == hashlib.sha256(expected).digest()


def test_sighash_ignores_witnesses_txid_does_not():
    reg = KeyRegistry()
    alice = reg.keygen(b"alice")
    base = Transaction(
        inputs=(TxInput(outpoint=(PUB_A, 0)),),
        outputs=(TxOutput(value=1, lock=PayToKey(PUB_B)),),
    )
    signed = sign_input(base, 0, alice)
    assert sighash(signed) == sighash(base)
    assert txid(signed) != txid(base)
    assert signed.inputs[0].witness.signatures[0].digest_signed == sighash(base)


def test_cosigning_preserves_existing_signatures():
    reg = KeyRegistry()
    alice = reg.keygen(b"alice")
    bob = reg.keygen(b"bob")
    base = Transaction(
        inputs=(TxInput(outpoint=(PUB_A, 0)), TxInput(outpoint=(PUB_B, 1))),
        outputs=(TxOutput(value=1, lock=PayToKey(PUB_C)),),
    )
    once = sign_input(base, 0, alice)
    twice = sign_input(once, 1, bob)
    assert twice.inputs[0].witness == once.inputs[0].witness
    assert sighash(twice) == sighash(base)


def test_tx_round_trips_with_rich_witness():
    reg = KeyRegistry()
    alice = reg.keygen(b"alice")
    redeem = MultiSig(m=1, keys=(alice.pub,))
    tx = Transaction(
        inputs=(TxInput(outpoint=(PUB_A, 0)),),
        outputs=(
            TxOutput(value=10, lock=p2sh_lock(redeem)),
            TxOutput(value=0, lock=DataCarrier(b"payload")),
        ),
        locktime=42,
    )
    tx = sign_input(tx, 0, alice, redeem=redeem, expr_preimage=b"if this then that")
    assert deserialize_tx(serialize_tx(tx)) == tx
    assert tx_from_json(tx_to_json(tx)) == tx


def test_deserialize_rejects_truncation_and_trailing_bytes():
    tx = Transaction(
        inputs=(TxInput(outpoint=(PUB_A, 0)),),
        outputs=(TxOutput(value=1, lock=PayToKey(PUB_B)),),
    )
    data = serialize_tx(tx)
    with pytest.raises(TruncatedError):
        deserialize_tx(data[:-1])
    with pytest.raises(ValueError):
        deserialize_tx(data + b"\x00")


@pytest.fixture
def funded_chain():
    reg = KeyRegistry()
    alice = reg.keygen(b"alice")
    bob = reg.keygen(b"bob")
    chain = SimChain(
        policy=POLICY_TEST2013,
        genesis=[
            TxOutput(value=30_000, lock=PayToKey(alice.pub)),
            TxOutput(value=20_000, lock=PayToKey(alice.pub)),
        ],
        keys=reg,
    )
    return chain, alice, bob


def test_build_payment_selects_coins_and_returns_change(funded_chain):
    chain, alice, bob = funded_chain
    tx = build_payment(chain, alice, [TxOutput(value=35_000, lock=PayToKey(bob.pub))], fee=100)
    assert len(tx.inputs) == 2
    total_in = sum(chain.utxo[i.outpoint].value for i in tx.inputs)
    change = [o for o in tx.outputs if isinstance(o.lock, PayToKey) and o.lock.pub == alice.pub]
    assert total_in - sum(o.value for o in tx.outputs) == 100
    assert change and change[0].value == total_in - 35_000 - 100
    assert chain.validate(tx)


def test_build_payment_is_deterministic(funded_chain):
    chain, alice, bob = funded_chain
    a = build_payment(chain, alice, [TxOutput(value=1_000, lock=PayToKey(bob.pub))], fee=10)
    b = build_payment(chain, alice, [TxOutput(value=1_000, lock=PayToKey(bob.pub))], fee=10)
    assert serialize_tx(a) == serialize_tx(b)


def test_build_payment_insufficient_funds(funded_chain):
    chain, alice, bob = funded_chain
    with pytest.raises(InsufficientFundsError):
        build_payment(chain, alice, [TxOutput(value=50_001, lock=PayToKey(bob.pub))], fee=0)
    build_payment(chain, alice, [TxOutput(value=50_000, lock=PayToKey(bob.pub))], fee=0)
    with pytest.raises(InsufficientFundsError):
        build_payment(chain, alice, [TxOutput(value=50_000, lock=PayToKey(bob.pub))], fee=1)
