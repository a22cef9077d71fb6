"""Enrollment, hash-chain updates, revocation and re-issue of identity commitments.

The blinding secret is split as X_0 = X_00 + X_01: the user picks X_00 and only
ever reveals h_00 = g_0^{X_00}; the issuer picks X_01.  The k-th update uses

    X_0^(k) = X_00 + H^k(X_01)      (H^0(x) = x)

so the user recomputes her secret offline while the issuer, knowing h_00 and
the chain value, can publish the new commitment without learning X_00.
"""

from __future__ import annotations

import hashlib
import logging
import random
import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping, Optional, Sequence

from .dlrep import KNOWLEDGE, ProofTranscript, prove_begin, prove_respond, verify
from .group import GroupElement, GroupParams, random_scalar

if TYPE_CHECKING:
    from .smt import MerkleBranch

log = logging.getLogger(__name__)

MAX_METADATA = 1024


class LifecycleError(Exception):
    """Operation not allowed in the record's current state."""


class EnrollmentRejected(LifecycleError):
    pass


def chain_value(x01: int, k: int, q: int) -> int:
    """H^k(X_01): SHA-256 over the 32-byte big-endian encoding, reduced mod q each step."""
    if k < 0:
        raise ValueError("k must be non-negative")
    v = x01 % q
    for _ in range(k):
        v = int.from_bytes(hashlib.sha256(v.to_bytes(32, "big")).digest(), "big") % q
    return v


@dataclass
class UserSecret:
    x00: int
    x01: int
    k: int
    attributes: list[int]

    def x0(self, q: int) -> int:
        return (self.x00 + chain_value(self.x01, self.k, q)) % q

    def secrets(self, q: int) -> list[int]:
        """Full representation (X_0^(k), X_1, ..., X_n) for the current k."""
        return [self.x0(q)] + [a % q for a in self.attributes]


def user_recompute_x0(secret: UserSecret, k: int, q: int) -> int:
    return (secret.x00 + chain_value(secret.x01, k, q)) % q


@dataclass
class UserInit:
    x00: int
    h00: GroupElement
    proof: ProofTranscript


def user_init(
    params: GroupParams,
    rng: Optional[random.Random] = None,
    challenge: Optional[int] = None,
    x00: Optional[int] = None,
) -> UserInit:
    """Pick X_00 and prove knowledge of log_{g_0} h_00.

    The issuer plays verifier; ``challenge`` lets a caller supply its move
    (a random one is drawn otherwise).
    """
    q = params.q
    if x00 is None:
        x00 = random_scalar(q, rng)
    x00 %= q
    h00 = params.generators[0] ** x00
    c = random_scalar(q, rng) if challenge is None else challenge
    return UserInit(x00, h00, schnorr_prove(params, x00, c, rng))


def _g0(params: GroupParams) -> GroupParams:
    return params.restrict([0])


def schnorr_prove(params: GroupParams, x: int, c: int, rng=None) -> ProofTranscript:
    """Knowledge of x with h = g_0^x: the DLREP proof with n=0 over basis (g_0)."""
    base = _g0(params)
    state = prove_begin(base, [x], KNOWLEDGE, rng)
    return prove_respond(base, state, c, [x])


def schnorr_verify(params: GroupParams, h: GroupElement, proof: ProofTranscript) -> bool:
    return verify(_g0(params), h, KNOWLEDGE, proof)


@dataclass
class IssuerRecord:
    """What the issuer keeps per account.

    ``g0_x0`` is g_0^{X_0} for the currently published commitment and
    ``next_chain`` is the single chain value needed for the next update; no
    earlier chain value and never X_01 itself is kept.
    """

    account: bytes
    h: GroupElement
    h00: GroupElement
    g0_x0: GroupElement
    next_chain: int
    k: int = 0
    attributes: dict[int, int] = field(default_factory=dict)
    metadata: bytes = b""
    revoked: bool = False

    def forget(self, *indices: int) -> None:
        """Drop attribute values the issuer never expects to update."""
        for j in indices:
            self.attributes.pop(j, None)


def _check_metadata(metadata: bytes) -> None:
    if len(metadata) > MAX_METADATA:
        raise LifecycleError(f"metadata is {len(metadata)} bytes; limit is {MAX_METADATA}")


def issuer_enroll(
    params: GroupParams,
    account: bytes,
    h00: GroupElement,
    proof: ProofTranscript,
    attributes: Sequence[int],
    metadata: bytes = b"",
    rng: Optional[random.Random] = None,
    x01: Optional[int] = None,
) -> tuple[int, IssuerRecord, GroupElement]:
    """Verify the h_00 proof, pick X_01 and compute h = h_00 g_0^{X_01} prod g_j^{X_j}.

    Returns X_01 for transmission to the user; the record keeps only H^1(X_01).
    """
    q = params.q
    if len(attributes) != params.n:
        raise LifecycleError(f"expected {params.n} attributes, got {len(attributes)}")
    _check_metadata(metadata)
    if not schnorr_verify(params, h00, proof):
        raise EnrollmentRejected("h_00 well-formedness proof does not verify")
    if x01 is None:
        x01 = random_scalar(q, rng)
    x01 %= q
    attrs = [a % q for a in attributes]
    g0_x0 = h00 * params.generators[0] ** x01
    h = g0_x0 * params.group.multi_exp(params.generators[1:], attrs)
    record = IssuerRecord(
        account=account,
        h=h,
        h00=h00,
        g0_x0=g0_x0,
        next_chain=chain_value(x01, 1, q),
        attributes={j + 1: a for j, a in enumerate(attrs)},
        metadata=metadata,
    )
    return x01, record, h


def issuer_update(
    params: GroupParams,
    record: IssuerRecord,
    changes: Mapping[int, int],
    k: int,
    metadata: Optional[bytes] = None,
) -> GroupElement:
    """Publish update number ``k``: refresh X_0 via the chain and apply attribute changes.

    h^(k) = h * g_0^{X_0^(k)} / g_0^{X_0} * prod_{j changed} g_j^{X_j^(k) - X_j}

    Only the old values of the changed attributes are needed.
    """
    q = params.q
    if record.revoked:
        raise LifecycleError("record is revoked")
    if k == record.k:
        raise LifecycleError(f"update {k} already published; reusing X_0 would expose the attributes")
    if k != record.k + 1:
        raise LifecycleError(f"next update must be k={record.k + 1}, got {k}")
    delta = params.group.identity()
    for j, new in changes.items():
        if not 1 <= j <= params.n:
            raise LifecycleError(f"attribute index {j} outside 1..{params.n}")
        if j not in record.attributes:
            raise LifecycleError(f"issuer does not retain X_{j}; cannot form its delta")
        delta = delta * params.generators[j] ** ((new - record.attributes[j]) % q)
    if metadata is not None:
        _check_metadata(metadata)
        record.metadata = metadata

    g0_x0_new = record.h00 * params.generators[0] ** record.next_chain
    h_new = record.h * g0_x0_new / record.g0_x0 * delta

    record.h = h_new
    record.g0_x0 = g0_x0_new
    record.k = k
    record.next_chain = chain_value(record.next_chain, 1, q)
    for j, new in changes.items():
        record.attributes[j] = new % q
    return h_new


def revoke(record: IssuerRecord) -> bytes:
    """Mark revoked and return the tombstone leaf hash (empty h, empty metadata)."""
    from .smt import leaf_hash

    if record.revoked:
        warnings.warn(f"account {record.account!r} already revoked", stacklevel=2)
        return leaf_hash(None, b"")
    record.revoked = True
    record.metadata = b""
    return leaf_hash(None, b"")


def reissue_secret(
    params: GroupParams,
    record: IssuerRecord,
    init: UserInit,
    reauthenticated: bool,
    rng: Optional[random.Random] = None,
    x01: Optional[int] = None,
) -> tuple[int, GroupElement]:
    """Install a fresh X_00/X_01 pair after key loss; the chain restarts at k=0.

    Attributes are untouched.  Returns the new X_01 and the new commitment.
    """
    q = params.q
    if record.revoked:
        raise LifecycleError("record is revoked")
    if not reauthenticated:
        raise LifecycleError("user must re-establish identity in person before reissue")
    if not schnorr_verify(params, init.h00, init.proof):
        raise EnrollmentRejected("h_00 well-formedness proof does not verify")
    if x01 is None:
        x01 = random_scalar(q, rng)
    x01 %= q
    g0_x0_new = init.h00 * params.generators[0] ** x01
    record.h = record.h / record.g0_x0 * g0_x0_new
    record.h00 = init.h00
    record.g0_x0 = g0_x0_new
    record.k = 0
    record.next_chain = chain_value(x01, 1, q)
    return x01, record.h


@dataclass
class IdentityCredential:
    """Everything the user presents or needs to authenticate against one issuer."""

    txid: bytes
    index: bytes
    branch: "MerkleBranch"
    h: GroupElement
    secret: UserSecret
    metadata: bytes = b""
