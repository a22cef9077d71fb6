import random
import struct
from decimal import Decimal

import pytest

from dlrep_anchor import keys
from dlrep_anchor.ledger import (
    BadAuthorization,
    DoubleSpend,
    DustOutput,
    ForkDetected,
    FormatError,
    IntegrityAlarm,
    Ledger,
    LookupFailed,
    NegativeFee,
    Outpoint,
    SimTransaction,
    TxIn,
    TxOut,
    UnknownOutpoint,
    build_enroll_tx,
    canonical_enroll_tx,
    chain_genesis,
    daily_cost_usd,
    data_script,
    encode_raw_tx,
    estimate_bandwidth,
    estimate_fee,
    fee_sat,
    follow_chain,
    follow_unique,
    verify_cm_history,
)
from dlrep_anchor.smt import advance_cm

import oracles


def test_canonical_size_by_field_count():
    raw = encode_raw_tx(canonical_enroll_tx())
    # version, 1 input (outpoint, script len, 107-byte script, sequence),
    # output count, P2PKH output, OP_RETURN output (0x6a 0x40 + 64 bytes), locktime
    want = 4 + 1 + (36 + 1 + 107 + 4) + 1 + (8 + 1 + 25) + (8 + 1 + 66) + 4
    assert len(raw) == want == 267


def test_txid_is_double_sha_and_decode_roundtrip():
    tx = canonical_enroll_tx()
    raw = tx.encode()
    assert tx.txid == oracles.dsha(raw)
    assert SimTransaction.decode(raw) == tx
    with pytest.raises(FormatError):
        SimTransaction.decode(raw[:50])


def test_data_script_layout():
    payload = bytes(range(64))
    assert data_script(payload) == b"\x6a\x40" + payload
    with pytest.raises(FormatError):
        data_script(bytes(81))


def test_spend_signature_over_stripped_tx():
    tx = canonical_enroll_tx()
    stripped = tx.encode(strip_sigs=True)
    sighash = oracles.dsha(stripped + struct.pack("<I", 1))
    assert keys.verify(tx.inputs[0].pubkey, sighash, tx.inputs[0].signature)


@pytest.fixture
def funded():
    led = Ledger()
    key = keys.KeyPair.generate(random.Random(1))
    out = led.fund(key.address, 1_000_000)
    return led, key, out


def anchor_chain(led, key, out, epochs):
    chain, txids, amount = None, [], led.utxo()[out].amount
    roots = []
    for t in range(epochs):
        root = oracles.sha(b"root" + bytes([t]))
        chain = advance_cm(chain, root)
        amount -= 1000
        txid = led.submit(build_enroll_tx(out, key, root, chain.cm, amount))
        led.mine()
        out = Outpoint(txid, 0)
        txids.append(txid)
        roots.append(root)
    return txids, roots


def test_follow_chain_from_any_epoch(funded):
    led, key, out = funded
    txids, roots = anchor_chain(led, key, out, 6)
    for start in txids:
        head = follow_chain(led, start)
        assert head.txid == txids[-1] and head.t == 6 and head.root == roots[-1]
    assert chain_genesis(led, txids[4]) == txids[0]
    assert verify_cm_history(led, txids[0])


def test_history_rejects_any_altered_root(funded):
    led, key, out = funded
    txids, _ = anchor_chain(led, key, out, 4)
    for t, txid in enumerate(txids, start=1):
        copy = led.copy()
        payload = copy.get(txid).anchor_payload()
        copy.rewrite_payload(txid, bytes([payload[0] ^ 0x80]) + payload[1:])
        check = verify_cm_history(copy, txids[0])
        assert not check and check.epoch == t
    assert verify_cm_history(led, txids[0])


def test_double_spend_rejected(funded):
    led, key, out = funded
    led.submit(build_enroll_tx(out, key, bytes(32), bytes(32), 900_000))
    with pytest.raises(DoubleSpend):
        led.submit(build_enroll_tx(out, key, b"\x01" * 32, bytes(32), 900_000))


def test_validation_errors(funded):
    led, key, out = funded
    with pytest.raises(DustOutput):
        led.submit(build_enroll_tx(out, key, bytes(32), bytes(32), 499))
    with pytest.raises(NegativeFee):
        led.submit(build_enroll_tx(out, key, bytes(32), bytes(32), 2_000_000))
    thief = keys.KeyPair.generate(random.Random(2))
    with pytest.raises(BadAuthorization):
        led.submit(build_enroll_tx(out, thief, bytes(32), bytes(32), 900_000))
    with pytest.raises(UnknownOutpoint):
        led.submit(build_enroll_tx(Outpoint(b"\x07" * 32, 0), key, bytes(32), bytes(32), 900_000))
    with pytest.raises(DustOutput):
        led.fund(key.address, 10)


def test_value_conservation(funded):
    led, key, out = funded
    anchor_chain(led, key, out, 5)
    assert led.funded_total == sum(o.amount for o in led.utxo().values()) + led.fees_total
    assert led.fees_total == 5000


def test_unconfirmed_anchor_not_trusted(funded):
    led, key, out = funded
    txid = led.submit(build_enroll_tx(out, key, bytes(32), bytes(32), 900_000))
    with pytest.raises(LookupFailed):
        follow_unique(led, txid)
    led.mine()
    assert follow_unique(led, txid).txid == txid
    with pytest.raises(LookupFailed):
        follow_unique(led, txid, min_conf=2)


def test_integrity_alarm_on_foreign_spend(funded):
    led, key, out = funded
    txids, _ = anchor_chain(led, key, out, 2)
    spend = SimTransaction((TxIn(Outpoint(txids[-1], 0)),), (TxOut("pay", 5000, address=key.address),)).signed(key)
    led.submit(spend)
    led.mine()
    with pytest.raises(IntegrityAlarm):
        follow_chain(led, txids[0])


def test_fork_gives_two_heads_until_resolved(funded):
    led, key, out = funded
    txids, _ = anchor_chain(led, key, out, 1)
    led.fork()
    nxt = Outpoint(txids[0], 0)
    led.submit(build_enroll_tx(nxt, key, b"\x01" * 32, b"\x02" * 32, 990_000 - 1000), "main")
    led.submit(build_enroll_tx(nxt, key, b"\x03" * 32, b"\x04" * 32, 990_000 - 1000), "fork")
    led.mine()
    with pytest.raises(ForkDetected) as exc:
        follow_unique(led, txids[0])
    assert len(exc.value.heads) == 2
    led.resolve_fork("fork")
    assert follow_unique(led, txids[0]).root == b"\x03" * 32


def test_dump_load_roundtrip(funded):
    led, key, out = funded
    txids, _ = anchor_chain(led, key, out, 3)
    back = Ledger.load(led.dump())
    assert back.height == led.height
    assert back.utxo() == led.utxo()
    assert follow_chain(back, txids[0]).txid == txids[-1]


def test_fee_and_cost_arithmetic():
    fee = estimate_fee(265, Decimal("0.0000036"))
    assert fee == Decimal("0.000954")
    assert fee_sat(265, Decimal("0.0000036")) == 95_400
    assert daily_cost_usd(fee, 2280) == Decimal("313.21728")
    assert daily_cost_usd(fee, 0) == 0
    with pytest.raises(ValueError):
        estimate_fee(265, 0)


def test_bandwidth_figures():
    r = estimate_bandwidth(2**26, 0.01)
    assert r.se_storage_bytes == 64 * 2**26
    assert r.se_per_block_bytes == pytest.approx(64 * 0.01 / 144 * 2**26)
    assert r.user_storage_bytes == 64 * 26
    assert r.user_per_block_bytes == pytest.approx(779.92, abs=0.01)


def test_bandwidth_degenerate_cases():
    assert "single user" in estimate_bandwidth(1, 0.01).note
    small = estimate_bandwidth(1000, 0.01)
    assert small.user_per_block_bytes == 0 and "rounds to 0" in small.note
    with pytest.raises(ValueError):
        estimate_bandwidth(10, 1.5)
    with pytest.raises(ValueError):
        estimate_bandwidth(0, 0.1)
