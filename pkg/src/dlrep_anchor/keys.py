"""Schnorr signatures over secp256k1 for spend authorization and channel messages.

Nonces are derived deterministically from the secret key and message so that
seeded simulations produce byte-identical transactions and transcripts.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Optional

from .group import SECP256K1, GroupElement, GroupError, random_scalar

_N = SECP256K1.order
_G = SECP256K1.G

SIG_SIZE = 64


def _h(*parts: bytes) -> int:
    return int.from_bytes(hashlib.sha256(b"".join(parts)).digest(), "big") % _N


@dataclass(frozen=True)
class KeyPair:
    sk: int
    pk: GroupElement

    @classmethod
    def generate(cls, rng: Optional[random.Random] = None) -> "KeyPair":
        sk = 0
        while sk == 0:
            sk = random_scalar(_N, rng)
        return cls(sk, _G**sk)

    @property
    def pk_bytes(self) -> bytes:
        return self.pk.encode()

    @property
    def address(self) -> bytes:
        return address_of(self.pk_bytes)

    def sign(self, msg: bytes) -> bytes:
        return sign(self.sk, msg)


def address_of(pk_bytes: bytes) -> bytes:
    """20-byte pay-to-address hash (double SHA-256, truncated)."""
    return hashlib.sha256(hashlib.sha256(pk_bytes).digest()).digest()[:20]


def sign(sk: int, msg: bytes) -> bytes:
    k = _h(b"nonce", sk.to_bytes(32, "big"), msg) or 1
    R = _G**k
    pk = _G**sk
    e = _h(R.encode(), pk.encode(), msg)
    s = (k + e * sk) % _N
    return e.to_bytes(32, "big") + s.to_bytes(32, "big")


def verify(pk: bytes | GroupElement, msg: bytes, sig: bytes) -> bool:
    if len(sig) != SIG_SIZE:
        return False
    try:
        P = pk if isinstance(pk, GroupElement) else SECP256K1.decode(pk)
    except GroupError:
        return False
    if P.is_identity():
        return False
    e = int.from_bytes(sig[:32], "big")
    s = int.from_bytes(sig[32:], "big")
    if e >= _N or s >= _N:
        return False
    R = _G**s / P**e
    return _h(R.encode(), P.encode(), msg) == e
