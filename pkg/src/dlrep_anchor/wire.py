"""Length-prefixed message framing and the authenticated channel.

Message body:   tag (1 byte) || count (u16) || count * (len (u32) || field)
Envelope:       seq (u64) || sender pk (33) || len (u32) || body || signature (64)

The signature covers everything before it, so a recorded envelope cannot be
re-bound to another sequence number, and receivers reject any sequence number
that is not strictly greater than the last one accepted from that sender.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import keys

TAGS = {
    "REQUEST": 1,
    "REQUIREMENTS": 2,
    "CREDENTIAL": 3,
    "PROOF-A": 4,
    "CHALLENGE": 5,
    "PROOF-B": 6,
    "CONFIRM": 7,
    "GRANT": 8,
    "REJECT": 9,
}
TAG_NAMES = {v: k for k, v in TAGS.items()}


class WireError(ValueError):
    pass


class ChannelRejected(Exception):
    """Envelope failed authentication, sequencing or sender checks."""


def encode_message(tag: str, fields: Sequence[bytes]) -> bytes:
    out = bytearray([TAGS[tag]])
    out += struct.pack(">H", len(fields))
    for f in fields:
        out += struct.pack(">I", len(f)) + f
    return bytes(out)


def decode_message(data: bytes) -> tuple[str, list[bytes]]:
    try:
        tag = TAG_NAMES[data[0]]
        (count,) = struct.unpack_from(">H", data, 1)
        pos = 3
        fields = []
        for _ in range(count):
            (ln,) = struct.unpack_from(">I", data, pos)
            pos += 4
            if pos + ln > len(data):
                raise WireError("field overruns message")
            fields.append(bytes(data[pos : pos + ln]))
            pos += ln
    except (IndexError, KeyError, struct.error) as exc:
        raise WireError(f"malformed message: {exc}") from exc
    if pos != len(data):
        raise WireError("trailing bytes after message")
    return tag, fields


@dataclass(frozen=True)
class Envelope:
    seq: int
    sender: bytes
    body: bytes
    signature: bytes

    def signed_part(self) -> bytes:
        return struct.pack(">Q", self.seq) + self.sender + struct.pack(">I", len(self.body)) + self.body

    def to_bytes(self) -> bytes:
        return self.signed_part() + self.signature

    @classmethod
    def from_bytes(cls, data: bytes) -> "Envelope":
        try:
            (seq,) = struct.unpack_from(">Q", data, 0)
            sender = bytes(data[8:41])
            (ln,) = struct.unpack_from(">I", data, 41)
            body = bytes(data[45 : 45 + ln])
            sig = bytes(data[45 + ln :])
        except struct.error as exc:
            raise WireError(f"malformed envelope: {exc}") from exc
        if len(body) != ln or len(sig) != keys.SIG_SIZE:
            raise WireError("truncated envelope")
        return cls(seq, sender, body, sig)


@dataclass
class ChannelEnd:
    """One side of an authenticated channel: signs outgoing, checks incoming."""

    key: keys.KeyPair
    peer_pk: Optional[bytes] = None
    send_seq: int = 0
    recv_seq: int = 0
    log: list[bytes] = field(default_factory=list)

    def seal(self, tag: str, fields: Sequence[bytes]) -> bytes:
        self.send_seq += 1
        body = encode_message(tag, fields)
        env = Envelope(self.send_seq, self.key.pk_bytes, body, b"")
        env = Envelope(env.seq, env.sender, body, self.key.sign(env.signed_part()))
        raw = env.to_bytes()
        self.log.append(raw)
        return raw

    def open(self, raw: bytes) -> tuple[str, list[bytes]]:
        env = Envelope.from_bytes(raw)
        if self.peer_pk is None or env.sender != self.peer_pk:
            raise ChannelRejected("sender key is not the registered peer key")
        if not keys.verify(env.sender, env.signed_part(), env.signature):
            raise ChannelRejected("bad envelope signature")
        if env.seq <= self.recv_seq:
            raise ChannelRejected(f"replayed or reordered message (seq {env.seq} <= {self.recv_seq})")
        self.recv_seq = env.seq
        self.log.append(raw)
        return decode_message(env.body)


def pack_branch(branch) -> bytes:
    out = bytearray(struct.pack(">H", len(branch.siblings)))
    for depth, sib in branch.siblings:
        out += struct.pack(">H", depth) + sib
    return bytes(out)


def unpack_branch(data: bytes):
    from .smt import MerkleBranch

    try:
        (count,) = struct.unpack_from(">H", data, 0)
        sibs = []
        pos = 2
        for _ in range(count):
            (d,) = struct.unpack_from(">H", data, pos)
            sib = bytes(data[pos + 2 : pos + 34])
            if len(sib) != 32:
                raise WireError("truncated sibling hash")
            sibs.append((d, sib))
            pos += 34
    except struct.error as exc:
        raise WireError(f"malformed branch: {exc}") from exc
    if pos != len(data):
        raise WireError("trailing bytes after branch")
    return MerkleBranch(tuple(sibs))


def pack_scalars(group, values: Sequence[int]) -> bytes:
    return struct.pack(">H", len(values)) + b"".join(group.encode_scalar(v) for v in values)


def unpack_scalars(group, data: bytes) -> tuple[int, ...]:
    (count,) = struct.unpack_from(">H", data, 0)
    s = group.scalar_size
    if len(data) != 2 + count * s:
        raise WireError("scalar list length mismatch")
    return tuple(group.decode_scalar(data[2 + i * s : 2 + (i + 1) * s]) for i in range(count))
