import random

import pytest

from dlrep_anchor import keys
from dlrep_anchor.group import TEST_GROUP
from dlrep_anchor.smt import MerkleBranch
from dlrep_anchor.wire import (
    ChannelEnd,
    ChannelRejected,
    Envelope,
    WireError,
    decode_message,
    encode_message,
    pack_branch,
    pack_scalars,
    unpack_branch,
    unpack_scalars,
)

import oracles


def test_message_layout():
    raw = encode_message("CHALLENGE", [b"\x01\x02", b""])
    assert raw == bytes([5]) + b"\x00\x02" + b"\x00\x00\x00\x02\x01\x02" + b"\x00\x00\x00\x00"
    assert decode_message(raw) == ("CHALLENGE", [b"\x01\x02", b""])


@pytest.mark.parametrize("raw", [b"", b"\x63\x00\x00", b"\x01\x00\x01\x00\x00\x00\x09ab", b"\x01\x00\x00extra"])
def test_malformed_messages(raw):
    with pytest.raises(WireError):
        decode_message(raw)


def test_schnorr_signature_and_address():
    k = keys.KeyPair.generate(random.Random(4))
    sig = k.sign(b"msg")
    assert len(sig) == 64 and keys.verify(k.pk_bytes, b"msg", sig)
    assert not keys.verify(k.pk_bytes, b"msh", sig)
    assert not keys.verify(k.pk_bytes, b"msg", sig[:63] + bytes([sig[63] ^ 1]))
    assert k.sign(b"msg") == sig  # deterministic nonce
    assert k.address == oracles.dsha(k.pk_bytes)[:20]
    assert k.pk_bytes == oracles.compress(oracles.ec_mul(k.sk, oracles.G))


def pair():
    rng = random.Random(1)
    a, b = keys.KeyPair.generate(rng), keys.KeyPair.generate(rng)
    return ChannelEnd(a, b.pk_bytes), ChannelEnd(b, a.pk_bytes), a


def test_channel_roundtrip_and_replay():
    alice, bob, _ = pair()
    m1 = alice.seal("REQUEST", [b"svc", b"SP1"])
    m2 = alice.seal("REQUEST", [b"svc2", b"SP1"])
    assert bob.open(m1) == ("REQUEST", [b"svc", b"SP1"])
    assert bob.open(m2)[1][0] == b"svc2"
    with pytest.raises(ChannelRejected, match="replayed"):
        bob.open(m1)


def test_channel_rejects_tampering_and_strangers():
    alice, bob, akey = pair()
    m = bytearray(alice.seal("REQUEST", [b"x"]))
    m[-70] ^= 1
    with pytest.raises(ChannelRejected, match="signature"):
        bob.open(bytes(m))
    mallory = ChannelEnd(keys.KeyPair.generate(random.Random(9)), akey.pk_bytes)
    with pytest.raises(ChannelRejected, match="peer"):
        bob.open(mallory.seal("REQUEST", [b"x"]))


def test_sequence_cannot_be_rebound():
    alice, bob, _ = pair()
    env = Envelope.from_bytes(alice.seal("REQUEST", [b"x"]))
    moved = Envelope(env.seq + 5, env.sender, env.body, env.signature)
    with pytest.raises(ChannelRejected):
        bob.open(moved.to_bytes())


def test_branch_and_scalar_packing():
    br = MerkleBranch(((1, b"\x01" * 32), (200, b"\x02" * 32)))
    assert unpack_branch(pack_branch(br)) == br
    with pytest.raises(WireError):
        unpack_branch(pack_branch(br)[:-1])
    vals = (0, 5, 22)
    assert unpack_scalars(TEST_GROUP, pack_scalars(TEST_GROUP, vals)) == vals
    with pytest.raises(WireError):
        unpack_scalars(TEST_GROUP, pack_scalars(TEST_GROUP, vals) + b"\x00")
