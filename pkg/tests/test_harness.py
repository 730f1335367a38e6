"""Scenario runner, event log, metrics export, and the CLI entry point."""

import csv
import json
from pathlib import Path

import pytest

from oraclesim.counterparty import Send, encode_message
from oraclesim.harness import (
    AssertionFailed,
    EventLog,
    ParseError,
    Scenario,
    bundled_scenarios,
    export_metrics,
    run_scenario,
    verify_replay,
)
from oraclesim.harness.cli import main
from oraclesim.simchain import DataCarrier, Transaction, TxOutput, tx_to_json

T0 = 1_700_000_000


# ------------------------------------------------------------- event log


def test_event_line_is_canonical_json():
    log = EventLog()
    log.append(3, "host", "block", height=1, txs=2)
    assert log.lines() == [
        '{"kind":"block","module":"host","payload":{"height":1,"txs":2},"tick":3}'
    ]


def test_digest_hashes_exact_bytes():
    from oraclesim.codec import sha256

    log = EventLog()
    log.append(0, "a", "b", x=1)
    log.append(1, "a", "c", y=[1, 2])
    assert log.digest() == sha256(log.encode())
    assert log.encode().count(b"\n") == 2


def test_write_read_round_trip(tmp_path):
    log = EventLog()
    log.append(0, "host", "block", height=1)
    log.append(5, "cp", "balance", actor="alice", qty=10)
    path = tmp_path / "run.log.jsonl"
    log.write(path)
    loaded = EventLog.read(path)
    assert loaded.digest() == log.digest()
    assert loaded.events[1].payload == {"actor": "alice", "qty": 10}


def test_matching_filters_kind_and_payload():
    log = EventLog()
    log.append(0, "cp", "balance", actor="alice", qty=10)
    log.append(1, "cp", "balance", actor="bob", qty=20)
    log.append(2, "cp", "replay", issued=30)
    assert len(log.matching("balance")) == 2
    assert log.matching("balance", {"actor": "bob"})[0].payload["qty"] == 20
    assert log.matching("balance", {"actor": "zoe"}) == []


def test_append_rejects_unserializable_payload():
    log = EventLog()
    with pytest.raises(TypeError):
        log.append(0, "host", "block", raw=b"\x00")
    assert log.events == []


def test_verify_replay_detects_any_difference():
    a, b = EventLog(), EventLog()
    a.append(0, "m", "k", v=1)
    b.append(0, "m", "k", v=1)
    assert verify_replay(a, b)
    b.append(1, "m", "k", v=2)
    assert not verify_replay(a, b)


# --------------------------------------------------------------- parsing


def _minimal(**extra):
    doc = {"name": "t", "seed": 1, "ticks": 2}
    doc.update(extra)
    return doc


def test_minimal_scenario_parses_and_runs():
    result = run_scenario(_minimal())
    assert result.passed
    assert result.exit_code == 0
    kinds = [(e.module, e.kind) for e in result.log.events]
    assert kinds[0] == ("run", "start")
    assert kinds[-1] == ("run", "end")
    assert result.log.events[-1].payload["ticks"] == 2


@pytest.mark.parametrize(
    "doc",
    [
        {"seed": 1, "ticks": 2},
        {"name": "t", "ticks": 2},
        {"name": "t", "seed": 1},
        _minimal(ticks=0),
        _minimal(seed="one"),
        _minimal(policy="v091"),
        _minimal(mine_every=0),
        _minimal(actions=[{"tick": 0, "op": "no_such_op"}]),
        _minimal(actions=[{"tick": 2, "op": "mine"}]),
        _minimal(actions=[{"tick": -1, "op": "mine"}]),
        _minimal(assertions=[{"kind": "wishful"}]),
        _minimal(assertions=[{"kind": "balance", "actor": "a", "op": "~", "value": 1}]),
    ],
)
def test_malformed_scenarios_raise_parse_error(doc):
    with pytest.raises(ParseError):
        Scenario.from_dict(doc)


def test_load_rejects_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ParseError):
        Scenario.load(path)


def test_unknown_actor_reference_raises_parse_error():
    doc = _minimal(
        actors=["alice"],
        genesis=[{"actor": "alice", "coins": 1, "value": 10_000_000}],
        actions=[{"tick": 0, "op": "pay", "from": "alice", "to": "nobody", "value": 1000}],
    )
    with pytest.raises(ParseError):
        run_scenario(doc)


# ------------------------------------------------------ bundled scenarios


def test_twelve_scenarios_ship_with_the_package():
    names = [p.stem for p in bundled_scenarios()]
    assert len(names) == 12
    assert len(set(names)) == 12


@pytest.mark.parametrize("path", bundled_scenarios(), ids=lambda p: p.stem)
def test_bundled_scenario_passes(path):
    result = run_scenario(path)
    assert result.failures == []
    assert result.exit_code == 0


@pytest.mark.parametrize("path", bundled_scenarios(), ids=lambda p: p.stem)
def test_bundled_scenario_is_deterministic(path):
    first = run_scenario(path)
    second = run_scenario(path)
    assert verify_replay(first.log, second.log)
    assert first.log.encode() == second.log.encode()


def test_flipped_assertion_fails_the_run():
    doc = json.loads(bundled_scenarios()[0].read_text(encoding="utf-8"))
    doc["assertions"] = [{"kind": "count", "event": "run/start", "value": 99}]
    result = run_scenario(doc)
    assert not result.passed
    assert result.exit_code == 1
    assert "run/start" in result.failures[0]


def test_seed_override_still_passes():
    path = next(p for p in bundled_scenarios() if p.stem == "counterparty_bet")
    result = run_scenario(path, seed_override=424242)
    assert result.passed


def test_clock_follows_tick_seconds():
    doc = _minimal(
        ticks=3,
        tick_seconds=7200,
        actors=["owner", "heir", "notary"],
        genesis=[{"actor": "owner", "coins": 1, "value": 100_000_000}],
        sources=[
            {
                "id": "registry",
                "entries": [
                    {"key": "owner.deceased", "time": T0, "value": False},
                    {"key": "owner.deceased", "time": T0 + 9000, "value": True},
                ],
            }
        ],
        actions=[
            {
                "tick": 0,
                "op": "will_create",
                "id": "w",
                "creator": "owner",
                "oracle": "notary",
                "heir": "heir",
                "source": "registry",
                "expression": "owner.deceased",
                "amount": 10_000_000,
                "fee": 1000,
            },
            # tick 1 = T0 + 7200 < 9000: still alive; tick 2 = T0 + 14400: not
            {"tick": 1, "op": "will_claim", "id": "w", "oracle": "notary",
             "heir": "heir", "expression": "owner.deceased", "fee": 1000},
            {"tick": 2, "op": "will_claim", "id": "w", "oracle": "notary",
             "heir": "heir", "expression": "owner.deceased", "fee": 1000},
        ],
    )
    result = run_scenario(doc)
    log = result.log
    assert [e.tick for e in log.matching("refused")] == [1]
    assert [e.tick for e in log.matching("claimed")] == [2]


def test_assertion_ops_compare_with_the_requested_operator():
    doc = _minimal(
        actors=["alice"],
        genesis=[{"actor": "alice", "coins": 2, "value": 50_000_000}],
        assertions=[
            {"kind": "balance", "actor": "alice", "op": ">=", "value": 100_000_000},
            {"kind": "balance", "actor": "alice", "op": "<", "value": 100_000_001},
            {"kind": "count", "event": "host/block", "op": ">", "value": 1},
        ],
    )
    assert run_scenario(doc).passed


def test_mine_every_none_leaves_mempool_alone():
    doc = _minimal(
        mine_every=None,
        actors=["alice", "bob"],
        genesis=[{"actor": "alice", "coins": 1, "value": 50_000_000}],
        actions=[{"tick": 0, "op": "pay", "from": "alice", "to": "bob", "value": 1000}],
        assertions=[
            {"kind": "count", "event": "host/block", "value": 0},
            {"kind": "balance", "actor": "bob", "value": 0},
        ],
    )
    assert run_scenario(doc).passed


# ---------------------------------------------------------------- metrics


def test_metrics_row_count_matches_ticks(tmp_path):
    doc = _minimal(
        ticks=4,
        actors=["alice", "bob"],
        genesis=[{"actor": "alice", "coins": 4, "value": 50_000_000}],
        track_balances=["alice", "bob"],
        actions=[
            {"tick": 0, "op": "pay", "from": "alice", "to": "bob", "value": 1000},
            {"tick": 2, "op": "pay", "from": "alice", "to": "bob", "value": 2000},
        ],
    )
    result = run_scenario(doc)
    out = tmp_path / "metrics.csv"
    rows_written = export_metrics(result.log, out)
    with out.open(newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    header, data = rows[0], rows[1:]
    assert rows_written == 4
    assert len(data) == 4
    assert header[:5] == ["tick", "events", "submitted", "confirmed", "mean_delay"]
    assert "bal_alice" in header and "bal_bob" in header
    bob = header.index("bal_bob")
    assert data[0][bob] == "1000"
    assert data[3][bob] == "3000"
    # both payments confirmed in the same tick they entered the mempool
    assert data[2][header.index("mean_delay")] == "0.0000"


def test_metrics_carries_stake_columns(tmp_path):
    path = next(p for p in bundled_scenarios() if p.stem == "truthcoin_capture")
    result = run_scenario(path)
    out = tmp_path / "tc.csv"
    export_metrics(result.log, out)
    header = out.read_text(encoding="utf-8").splitlines()[0].split(",")
    assert "stake_attacker" in header
    assert "stake_honest_a" in header


# -------------------------------------------------------------------- cli


def _scenario_path(stem: str) -> str:
    return str(next(p for p in bundled_scenarios() if p.stem == stem))


def test_cli_run_writes_log_and_exits_zero(tmp_path, capsys):
    code = main(["run", _scenario_path("will_claim"), "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "PASS" in out
    assert "digest" in out
    assert (tmp_path / "will_claim.log.jsonl").exists()


def test_cli_run_reports_assertion_failures(tmp_path, capsys):
    doc = json.loads(Path(_scenario_path("will_claim")).read_text(encoding="utf-8"))
    doc["assertions"] = [{"kind": "balance", "actor": "heir", "value": 1}]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc), encoding="utf-8")
    code = main(["run", str(bad), "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 1
    assert "FAIL" in out


def test_cli_run_rejects_malformed_script(tmp_path, capsys):
    bad = tmp_path / "broken.json"
    bad.write_text("{", encoding="utf-8")
    code = main(["run", str(bad), "--out", str(tmp_path)])
    assert code == 2
    assert "parse error" in capsys.readouterr().err


def test_cli_verify_compares_logs(tmp_path, capsys):
    main(["run", _scenario_path("will_claim"), "--out", str(tmp_path)])
    log = tmp_path / "will_claim.log.jsonl"
    twin = tmp_path / "twin.jsonl"
    twin.write_bytes(log.read_bytes())
    assert main(["verify", str(log), str(twin)]) == 0
    twin.write_bytes(log.read_bytes() + b'{"kind":"x","module":"m","payload":{},"tick":9}\n')
    assert main(["verify", str(log), str(twin)]) == 1
    assert "differ" in capsys.readouterr().out


def test_cli_metrics_writes_csv(tmp_path, capsys):
    main(["run", _scenario_path("counterparty_bet"), "--out", str(tmp_path)])
    code = main(
        ["metrics", str(tmp_path / "counterparty_bet.log.jsonl"), str(tmp_path / "m.csv")]
    )
    assert code == 0
    assert (tmp_path / "m.csv").read_text(encoding="utf-8").startswith("tick,")


def test_cli_orisi_params(capsys):
    assert main(["orisi-params", "4", "7"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc == {"m": 4, "n": 7, "threshold": 8, "total_keys": 11, "agent_keys": 4}
    assert main(["orisi-params", "0", "5"]) == 2


def test_cli_decode_payload_round_trips(capsys):
    key_txid = bytes(range(32))
    payload = encode_message(Send(asset="XCP", qty=77, dest="ab" * 32), key_txid)
    code = main(["decode-payload", payload.hex(), key_txid.hex()])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc == {"type": "send", "asset": "XCP", "qty": 77, "dest": "ab" * 32}
    assert main(["decode-payload", payload.hex(), bytes(32).hex()]) == 2


def test_cli_classify_tx_era_split(tmp_path, capsys):
    tx = Transaction(inputs=(), outputs=(TxOutput(0, DataCarrier(bytes(60))),))
    path = tmp_path / "tx.json"
    path.write_text(json.dumps(tx_to_json(tx)), encoding="utf-8")
    assert main(["classify-tx", str(path), "--era", "test2013"]) == 0
    assert json.loads(capsys.readouterr().out) == {"standard": True}
    assert main(["classify-tx", str(path), "--era", "v090"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["standard"] is False
    assert doc["reason"] == "data_payload_too_large"


def test_assertion_failed_type_is_exported():
    assert issubclass(AssertionFailed, Exception)
