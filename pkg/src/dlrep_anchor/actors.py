"""Users, issuers (IV), service enablers (SE) and service providers (SP).

The proof-of-identity session follows five steps:

1. USR -> SE   REQUEST(service, SP)
2. SE <-> SP   requirements and the accepted issuer list, SE -> USR REQUIREMENTS
3. USR -> SE   CREDENTIAL(txid, index, h, branch, metadata); SE checks the
               branch against the newest anchored root, then
               PROOF-A / CHALLENGE / PROOF-B
4. SE -> SP    CONFIRM (signed by SE)
5. SP -> USR   GRANT, relayed by SE

USR<->SE traffic goes through :class:`wire.ChannelEnd` envelopes so that every
message is authenticated and sequence-checked.
"""

from __future__ import annotations

import hashlib
import logging
import random
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from . import keys
from .dlrep import (
    LinearRelation,
    PolicyError,
    ProofCommitmentState,
    ProofTranscript,
    Statement,
    prove_begin,
    prove_respond,
    verification_failure,
)
from .group import GroupElement, GroupParams, random_scalar
from .ledger import (
    DEFAULT_FEE_RATE,
    ForkDetected,
    IntegrityAlarm,
    Ledger,
    LedgerError,
    Outpoint,
    build_enroll_tx,
    encode_raw_tx,
    fee_sat,
    follow_unique,
)
from .lifecycle import (
    IdentityCredential,
    IssuerRecord,
    UserSecret,
    issuer_enroll,
    issuer_update,
    reissue_secret,
    revoke,
    user_init,
)
from .smt import CommitmentChain, MerkleBranch, SparseTree, advance_cm, index_for_account, leaf_hash, verify_branch
from .wire import ChannelEnd, ChannelRejected, WireError, pack_branch, pack_scalars, unpack_branch, unpack_scalars

log = logging.getLogger(__name__)


class ProtocolViolation(Exception):
    """Message arrived out of order or for a session in the wrong state."""


# -- set-up ---------------------------------------------------------------------------


@dataclass
class SetupEntry:
    name: str
    address: bytes
    params: GroupParams
    genesis_txid: Optional[bytes] = None


class SetupRegistry:
    def __init__(self):
        self._by_name: dict[str, SetupEntry] = {}

    def register(self, entry: SetupEntry) -> None:
        self._by_name[entry.name] = entry

    def get(self, name: str) -> SetupEntry:
        return self._by_name[name]

    def by_address(self, address: bytes) -> Optional[SetupEntry]:
        for e in self._by_name.values():
            if e.address == address:
                return e
        return None

    def names(self) -> list[str]:
        return sorted(self._by_name)


# -- what an SP asks for --------------------------------------------------------------


@dataclass(frozen=True)
class Requirement:
    """Attributes to reveal plus relations to prove; X_0 may appear in neither."""

    reveal: tuple[int, ...] = ()
    relations: tuple[LinearRelation, ...] = ()

    def __post_init__(self):
        if 0 in self.reveal:
            raise PolicyError("X_0 is secret and can never be revealed")

    def statement_for(self, secrets: Sequence[int]) -> Statement:
        return Statement.disclosure({j: secrets[j] for j in self.reveal}, self.relations)

    def matches(self, statement: Statement, q: int) -> bool:
        norm = statement.normalized(q)
        want = Statement((), self.relations).normalized(q)
        return sorted(j for j, _ in norm.revealed) == sorted(self.reveal) and norm.relations == want.relations

    def to_bytes(self, group) -> bytes:
        head = struct.pack(">H", len(self.reveal)) + b"".join(struct.pack(">H", j) for j in self.reveal)
        return head + Statement((), self.relations).to_bytes(group)

    @classmethod
    def from_bytes(cls, data: bytes, group) -> "Requirement":
        (cnt,) = struct.unpack_from(">H", data, 0)
        reveal = tuple(struct.unpack_from(">H", data, 2 + 2 * i)[0] for i in range(cnt))
        st = Statement.from_bytes(data[2 + 2 * cnt :], group)
        return cls(reveal, st.relations)


# -- user -------------------------------------------------------------------------------


class User:
    def __init__(self, name: str, rng: Optional[random.Random] = None):
        self.name = name
        self.rng = rng
        self.key = keys.KeyPair.generate(rng)
        self.channel: Optional[ChannelEnd] = None
        self.se_account: Optional[bytes] = None
        self.credentials: dict[str, IdentityCredential] = {}
        self.params: dict[str, GroupParams] = {}
        self._proof_state: Optional[ProofCommitmentState] = None
        self._proof_secrets: Optional[list[int]] = None
        self._used_A: dict[bytes, set[bytes]] = {}
        self.grants: list[bytes] = []

    # channel with the SE
    def connect(self, se: "ServiceEnabler") -> None:
        self.se_account = se.register_user(self.key.pk_bytes)
        self.channel = ChannelEnd(self.key, peer_pk=se.key.pk_bytes)

    def rekey(self, se: "ServiceEnabler") -> None:
        """New channel keypair; identity secrets, index and branch are untouched."""
        self.key = keys.KeyPair.generate(self.rng)
        se.rekey_user(self.se_account, self.key.pk_bytes)
        self.channel = ChannelEnd(self.key, peer_pk=se.key.pk_bytes)

    # identity side
    def on_update(self, iv_name: str, k: int, changes: dict[int, int], h: GroupElement, metadata: bytes) -> None:
        """Issuer notification: bump k, take new attribute values and the new h."""
        cred = self.credentials[iv_name]
        if k != cred.secret.k + 1:
            log.warning("%s: update counter jumped from %d to %d", self.name, cred.secret.k, k)
        cred.secret.k = k
        for j, v in changes.items():
            cred.secret.attributes[j - 1] = v
        cred.h = h
        cred.metadata = metadata

    def refresh(self, iv_name: str, se: "ServiceEnabler", txid: Optional[bytes] = None) -> None:
        """Download the current branch (and optionally a newer txid) from a service enabler."""
        cred = self.credentials[iv_name]
        cred.branch = se.branch_for(iv_name, cred.index)
        if txid is not None:
            cred.txid = txid

    # session messages, user side
    def request(self, service: str, sp_name: str) -> bytes:
        return self.channel.seal("REQUEST", [service.encode(), sp_name.encode()])

    def read_requirements(self, raw: bytes, group) -> tuple[bytes, Requirement, list[str]]:
        tag, f = self.channel.open(raw)
        if tag == "REJECT":
            raise ProtocolViolation(f[1].decode() if len(f) > 1 else "rejected")
        if tag != "REQUIREMENTS":
            raise ProtocolViolation(f"expected REQUIREMENTS, got {tag}")
        sid, req, issuers = f[0], Requirement.from_bytes(f[1], group), f[2].decode().split(",")
        return sid, req, [i for i in issuers if i]

    def send_credential(self, sid: bytes, iv_name: str) -> bytes:
        cred = self.credentials[iv_name]
        return self.channel.seal(
            "CREDENTIAL",
            [sid, iv_name.encode(), cred.txid, cred.index, cred.h.encode(), pack_branch(cred.branch), cred.metadata],
        )

    def proof_a(self, sid: bytes, iv_name: str, requirement: Requirement, secrets: Optional[list[int]] = None) -> bytes:
        params = self.params[iv_name]
        cred = self.credentials[iv_name]
        secrets = cred.secret.secrets(params.q) if secrets is None else secrets
        statement = requirement.statement_for(secrets)
        used = self._used_A.setdefault(cred.h.encode(), set())
        for _ in range(64):
            # in a tiny group distinct nonces can repeat A; the SE would refuse it
            self._proof_state = prove_begin(params, secrets, statement, self.rng)
            if self._proof_state.A.encode() not in used:
                break
        used.add(self._proof_state.A.encode())
        self._proof_secrets = secrets
        grp = params.group
        return self.channel.seal("PROOF-A", [sid, self._proof_state.A.encode(), statement.to_bytes(grp)])

    def proof_b(self, raw_challenge: bytes, iv_name: str) -> bytes:
        params = self.params[iv_name]
        tag, f = self.channel.open(raw_challenge)
        if tag != "CHALLENGE":
            raise ProtocolViolation(f"expected CHALLENGE, got {tag}")
        sid, c = f[0], params.group.decode_scalar(f[1])
        t = prove_respond(params, self._proof_state, c, self._proof_secrets)
        return self.channel.seal("PROOF-B", [sid, pack_scalars(params.group, t.responses)])

    def read_grant(self, raw: bytes) -> bytes:
        tag, f = self.channel.open(raw)
        if tag != "GRANT":
            raise ProtocolViolation(f"expected GRANT, got {tag}")
        self.grants.append(f[1])
        return f[1]


# -- issuer -------------------------------------------------------------------------------


class IdentityVerifier:
    def __init__(
        self,
        name: str,
        params: GroupParams,
        ledger: Ledger,
        rng: Optional[random.Random] = None,
        fee_rate=DEFAULT_FEE_RATE,
    ):
        self.name = name
        self.params = params
        self.ledger = ledger
        self.rng = rng
        self.fee_rate = fee_rate
        self.key = keys.KeyPair.generate(rng)
        self.tree = SparseTree()
        self.records: dict[bytes, IssuerRecord] = {}
        self.users: dict[bytes, User] = {}
        self.chain: Optional[CommitmentChain] = None
        self.anchor_out: Optional[Outpoint] = None
        self.txids: list[bytes] = []
        self._next_account = 0
        self.registry: Optional[SetupRegistry] = None

    @property
    def address(self) -> bytes:
        return self.key.address

    def setup(self, registry: SetupRegistry, funding_sat: int) -> SetupEntry:
        """Fund a_IV and publish (a_IV, g_0..g_n) to the service enablers' registry."""
        self.anchor_out = self.ledger.fund(self.address, funding_sat)
        entry = SetupEntry(self.name, self.address, self.params)
        registry.register(entry)
        self.registry = registry
        return entry

    def enroll(self, user: User, attributes: Sequence[int], metadata: bytes = b"") -> bytes:
        """In-person enrollment; returns the new account number."""
        q = self.params.q
        c = random_scalar(q, self.rng)
        init = user_init(self.params, user.rng, challenge=c)
        account = f"{self.name}/{self._next_account:08d}".encode()
        self._next_account += 1
        x01, record, h = issuer_enroll(self.params, account, init.h00, init.proof, attributes, metadata, self.rng)
        self.records[account] = record
        self.users[account] = user
        index = index_for_account(account)
        self.tree.upsert(index, leaf_hash(h, metadata))
        secret = UserSecret(init.x00, x01, 0, [a % q for a in attributes])
        user.credentials[self.name] = IdentityCredential(
            txid=self.txids[-1] if self.txids else b"", index=index, branch=MerkleBranch(()), h=h, secret=secret,
            metadata=metadata,
        )
        user.params[self.name] = self.params
        return account

    def update(self, account: bytes, changes: dict[int, int], metadata: Optional[bytes] = None) -> GroupElement:
        rec = self.records[account]
        h = issuer_update(self.params, rec, changes, rec.k + 1, metadata)
        self.tree.upsert(index_for_account(account), leaf_hash(h, rec.metadata))
        user = self.users.get(account)
        if user is not None:
            user.on_update(self.name, rec.k, dict(changes), h, rec.metadata)
        return h

    def revoke(self, account: bytes) -> None:
        tomb = revoke(self.records[account])
        self.tree.upsert(index_for_account(account), tomb)

    def reissue(self, account: bytes, user: User) -> GroupElement:
        """Key loss: re-run the X_00/X_01 exchange on the existing record."""
        q = self.params.q
        init = user_init(self.params, user.rng, challenge=random_scalar(q, self.rng))
        rec = self.records[account]
        x01, h = reissue_secret(self.params, rec, init, reauthenticated=True, rng=self.rng)
        self.tree.upsert(index_for_account(account), leaf_hash(h, rec.metadata))
        cred = user.credentials[self.name]
        cred.secret.x00, cred.secret.x01, cred.secret.k = init.x00, x01, 0
        cred.h = h
        return h

    def anchor(self) -> bytes:
        """Publish the current root and cm in a transaction spending the previous anchor."""
        root = self.tree.root
        chain = advance_cm(self.chain, root)
        prev_amount = self.ledger.utxo()[self.anchor_out].amount
        size = len(encode_raw_tx(build_enroll_tx(self.anchor_out, self.key, root, chain.cm, prev_amount)))
        amount = prev_amount - fee_sat(size, self.fee_rate)
        tx = build_enroll_tx(self.anchor_out, self.key, root, chain.cm, amount)
        txid = self.ledger.submit(tx)
        self.chain = chain
        self.anchor_out = Outpoint(txid, 0)
        self.txids.append(txid)
        if self.registry is not None and self.registry.get(self.name).genesis_txid is None:
            self.registry.get(self.name).genesis_txid = txid
        return txid

    def distribute(self, se: "ServiceEnabler") -> None:
        """Hand the (index, leaf hash) pairs to a service enabler."""
        se.receive_tree(self.name, self.tree.leaves())


# -- service provider -------------------------------------------------------------------------


@dataclass(frozen=True)
class Grant:
    session_id: bytes
    service: str
    token: bytes


class ServiceProvider:
    def __init__(self, name: str, se_pk: bytes):
        self.name = name
        self.se_pk = se_pk
        self.services: dict[str, tuple[Requirement, tuple[str, ...]]] = {}
        self.confirmed: dict[bytes, str] = {}
        self.grants: dict[bytes, Grant] = {}
        self.online = True

    def offer(self, service: str, requirement: Requirement, issuers: Sequence[str]) -> None:
        self.services[service] = (requirement, tuple(issuers))

    def requirements(self, service: str, session_id: bytes) -> Optional[tuple[Requirement, tuple[str, ...]]]:
        if not self.online:
            return None  # models a timeout
        return self.services.get(service)

    def on_confirm(self, session_id: bytes, service: str, signature: bytes) -> Grant:
        msg = confirm_message(session_id, self.name, service)
        if not keys.verify(self.se_pk, msg, signature):
            raise ProtocolViolation("confirmation not signed by the service enabler")
        self.confirmed[session_id] = service
        return self.grant(session_id)

    def grant(self, session_id: bytes) -> Grant:
        if session_id in self.grants:
            return self.grants[session_id]
        service = self.confirmed.get(session_id)
        if service is None:
            raise ProtocolViolation("no confirmation received for this session")
        token = hashlib.sha256(b"grant" + session_id + self.name.encode() + service.encode()).digest()
        g = Grant(session_id, service, token)
        self.grants[session_id] = g
        return g


def confirm_message(session_id: bytes, sp_name: str, service: str) -> bytes:
    return b"CONFIRM" + session_id + struct.pack(">H", len(sp_name)) + sp_name.encode() + service.encode()


# -- service enabler ---------------------------------------------------------------------------

REQUESTED = "requested"
REQUIREMENTS_SENT = "requirements-sent"
PROVING = "proving"
CONFIRMED = "confirmed"
FAILED = "failed"
SUSPENDED = "suspended"


@dataclass
class Session:
    session_id: bytes
    account: bytes
    service: str
    sp_name: str
    state: str = REQUESTED
    requirement: Optional[Requirement] = None
    issuers: tuple[str, ...] = ()
    reason: str = ""
    iv_name: str = ""
    h: Optional[GroupElement] = None
    A: Optional[GroupElement] = None
    statement: Optional[Statement] = None
    challenge: Optional[int] = None
    proof_ok: bool = False
    grant: Optional[Grant] = None
    transcript: Optional[ProofTranscript] = None


class ServiceEnabler:
    def __init__(
        self,
        registry: SetupRegistry,
        ledger: Ledger,
        rng: Optional[random.Random] = None,
        min_conf: int = 1,
        metadata_policy: Optional[Callable[[bytes, int], Optional[str]]] = None,
    ):
        self.registry = registry
        self.ledger = ledger
        self.rng = rng
        self.min_conf = min_conf
        self.metadata_policy = metadata_policy or expiry_policy
        self.key = keys.KeyPair.generate(rng)
        self.mirrors: dict[str, SparseTree] = {}
        self.channels: dict[bytes, ChannelEnd] = {}
        self.sps: dict[str, ServiceProvider] = {}
        self.sessions: dict[bytes, Session] = {}
        self.seen_A: set[tuple[bytes, bytes]] = set()  # (h, A)
        self.log: list[dict] = []
        self.alarms: list[str] = []

    # accounts and infrastructure
    def register_user(self, pk: bytes) -> bytes:
        account = hashlib.sha256(b"se-account" + pk).digest()[:16]
        self.channels[account] = ChannelEnd(self.key, peer_pk=pk)
        return account

    def rekey_user(self, account: bytes, new_pk: bytes) -> None:
        self.channels[account] = ChannelEnd(self.key, peer_pk=new_pk)

    def register_sp(self, sp: ServiceProvider) -> None:
        self.sps[sp.name] = sp

    def receive_tree(self, iv_name: str, leaves: dict[bytes, bytes]) -> None:
        tree = SparseTree()
        for idx, leaf in leaves.items():
            tree.upsert(idx, leaf)
        self.mirrors[iv_name] = tree

    def branch_for(self, iv_name: str, index: bytes) -> MerkleBranch:
        return self.mirrors[iv_name].branch(index)

    def _fail(self, session: Session, reason: str, state: str = FAILED) -> bytes:
        session.state = state
        session.reason = reason
        log.info("session %s %s: %s", session.session_id.hex(), state, reason)
        return self.channels[session.account].seal("REJECT", [session.session_id, reason.encode()])

    def _expect(self, session: Session, state: str) -> None:
        if session.state != state:
            reason = f"expected state {state}, session is {session.state}"
            if session.state not in (FAILED, SUSPENDED, CONFIRMED):
                session.state = FAILED
                session.reason = reason
            raise ProtocolViolation(reason)

    # step 1
    def usr_request(self, account: bytes, raw: bytes) -> Session:
        chan = self.channels.get(account)
        if chan is None:
            raise ChannelRejected("unknown account")
        tag, f = chan.open(raw)
        if tag != "REQUEST":
            raise ProtocolViolation(f"expected REQUEST, got {tag}")
        sid = bytes(random_scalar(1 << 128, self.rng).to_bytes(16, "big"))
        session = Session(sid, account, f[0].decode(), f[1].decode())
        self.sessions[sid] = session
        if session.sp_name not in self.sps:
            self._fail(session, f"unknown service provider {session.sp_name!r}")
        return session

    # step 2
    def sp_requirements(self, session: Session) -> bytes:
        self._expect(session, REQUESTED)
        sp = self.sps[session.sp_name]
        answer = sp.requirements(session.service, session.session_id)
        if answer is None:
            return self._fail(session, "service provider did not answer")
        req, issuers = answer
        if not issuers:
            return self._fail(session, "no acceptable IV")
        session.requirement, session.issuers = req, tuple(issuers)
        session.state = REQUIREMENTS_SENT
        some = self.registry.get(issuers[0]).params.group if issuers[0] in self.registry.names() else None
        grp = some or next(iter(self.registry._by_name.values())).params.group
        return self.channels[session.account].seal(
            "REQUIREMENTS", [session.session_id, req.to_bytes(grp), ",".join(issuers).encode()]
        )

    # step 3a
    def se_verify(self, session: Session, raw: bytes) -> Optional[bytes]:
        """Check the credential against the newest anchored root; None means proceed."""
        self._expect(session, REQUIREMENTS_SENT)
        tag, f = self.channels[session.account].open(raw)
        if tag != "CREDENTIAL" or f[0] != session.session_id:
            raise ProtocolViolation("expected CREDENTIAL for this session")
        _, iv_name, txid, index, h_bytes, branch_bytes, metadata = f
        try:
            head = follow_unique(self.ledger, txid, self.min_conf)
            entry = self.registry.by_address(head.address)
            if entry is not None and entry.genesis_txid is not None:
                # a competing head may branch off before the txid the user holds
                follow_unique(self.ledger, entry.genesis_txid, self.min_conf)
        except ForkDetected:
            return self._fail(session, "fork detected; authentication suspended", SUSPENDED)
        except IntegrityAlarm as exc:
            self.alarms.append(str(exc))
            return self._fail(session, f"integrity alarm: {exc}")
        except LedgerError as exc:
            return self._fail(session, f"anchor lookup failed: {exc}")
        if entry is None or entry.name not in session.issuers:
            return self._fail(session, "credential not issued by an accepted IV")
        try:
            h = entry.params.group.decode(h_bytes)
            branch = unpack_branch(branch_bytes)
        except (ValueError, WireError) as exc:
            return self._fail(session, f"malformed credential: {exc}")
        if not verify_branch(head.root, index, leaf_hash(h, metadata), branch):
            return self._fail(session, "identity updated or revoked")
        problem = self.metadata_policy(metadata, self.ledger.height)
        if problem:
            return self._fail(session, problem)
        session.iv_name, session.h = entry.name, h
        session.state = PROVING
        return None

    # step 3b
    def on_proof_a(self, session: Session, raw: bytes) -> bytes:
        self._expect(session, PROVING)
        params = self.registry.get(session.iv_name).params
        grp = params.group
        tag, f = self.channels[session.account].open(raw)
        if tag != "PROOF-A" or f[0] != session.session_id or session.A is not None:
            raise ProtocolViolation("expected a single PROOF-A for this session")
        try:
            A = grp.decode(f[1])
            statement = Statement.from_bytes(f[2], grp)
        except (ValueError, Exception) as exc:  # noqa: BLE001 - any decode failure rejects
            return self._fail(session, f"malformed proof commitment: {exc}")
        if not session.requirement.matches(statement, params.q):
            return self._fail(session, "statement does not match the service provider's requirement")
        if (session.h.encode(), f[1]) in self.seen_A:
            return self._fail(session, "proof commitment A reused")
        self.seen_A.add((session.h.encode(), f[1]))
        session.A, session.statement = A, statement
        session.challenge = random_scalar(params.q, self.rng)
        return self.channels[session.account].seal(
            "CHALLENGE", [session.session_id, grp.encode_scalar(session.challenge)]
        )

    def on_proof_b(self, session: Session, raw: Optional[bytes]) -> bool:
        self._expect(session, PROVING)
        if session.challenge is None:
            raise ProtocolViolation("no challenge issued yet")
        if raw is None:
            self._fail(session, "prover timed out")
            return False
        params = self.registry.get(session.iv_name).params
        tag, f = self.channels[session.account].open(raw)
        if tag != "PROOF-B" or f[0] != session.session_id:
            raise ProtocolViolation("expected PROOF-B for this session")
        try:
            responses = unpack_scalars(params.group, f[1])
        except (ValueError, struct.error) as exc:
            self._fail(session, f"malformed responses: {exc}")
            return False
        t = ProofTranscript(session.A, session.challenge, responses, session.statement)
        session.transcript = t
        reason = verification_failure(params, session.h, session.statement, t)
        if reason:
            self._fail(session, f"proof rejected: {reason}")
            return False
        session.proof_ok = True
        self.log.append(
            {
                "sp": session.sp_name,
                "service": session.service,
                "iv": session.iv_name,
                "statement": session.statement.to_bytes(params.group).hex(),
                "revealed": dict(session.statement.revealed),
                "height": self.ledger.height,
            }
        )
        return True

    # steps 4-5
    def se_confirm(self, session: Session) -> bytes:
        if session.state == CONFIRMED and session.grant is not None:
            return self.channels[session.account].seal("GRANT", [session.session_id, session.grant.token])
        if session.state != PROVING or not session.proof_ok:
            raise ProtocolViolation("cannot confirm a session without an accepted proof")
        sp = self.sps[session.sp_name]
        sig = self.key.sign(confirm_message(session.session_id, sp.name, session.service))
        session.grant = sp.on_confirm(session.session_id, session.service, sig)
        session.state = CONFIRMED
        return self.channels[session.account].seal("GRANT", [session.session_id, session.grant.token])


def expiry_policy(metadata: bytes, height: int) -> Optional[str]:
    """Reject if metadata carries ``expires=<block height>`` that has passed."""
    for part in metadata.split(b";"):
        key, _, value = part.partition(b"=")
        if key.strip() == b"expires" and value.strip().isdigit() and height >= int(value):
            return "identity expired"
    return None


# -- one whole session ---------------------------------------------------------------------------


@dataclass
class AuthResult:
    granted: bool
    session: Optional[Session]
    reason: str = ""
    messages: list[bytes] = field(default_factory=list)


def authenticate(
    user: User,
    se: ServiceEnabler,
    sp_name: str,
    service: str,
    iv_name: Optional[str] = None,
    secrets: Optional[list[int]] = None,
) -> AuthResult:
    """Drive the five steps with honest parties; ``secrets`` overrides the user's own."""
    msgs: list[bytes] = []

    def out(raw):
        msgs.append(raw)
        return raw

    session = se.usr_request(user.se_account, out(user.request(service, sp_name)))
    if session.state == FAILED:
        return AuthResult(False, session, session.reason, msgs)
    reply = out(se.sp_requirements(session))
    if session.state != REQUIREMENTS_SENT:
        user.channel.open(reply)
        return AuthResult(False, session, session.reason, msgs)
    iv_any = iv_name or next(iter(user.params))
    sid, req, issuers = user.read_requirements(reply, user.params[iv_any].group)
    chosen = iv_name or next((i for i in issuers if i in user.credentials), None)
    if chosen is None:
        return AuthResult(False, session, "user holds no credential from an accepted IV", msgs)
    rej = se.se_verify(session, out(user.send_credential(sid, chosen)))
    if rej is not None:
        out(rej)
        user.channel.open(rej)
        return AuthResult(False, session, session.reason, msgs)
    try:
        raw_a = out(user.proof_a(sid, chosen, req, secrets))
    except PolicyError as exc:
        return AuthResult(False, session, str(exc), msgs)
    ch = out(se.on_proof_a(session, raw_a))
    if session.state != PROVING:
        user.channel.open(ch)
        return AuthResult(False, session, session.reason, msgs)
    ok = se.on_proof_b(session, out(user.proof_b(ch, chosen)))
    if not ok:
        return AuthResult(False, session, session.reason, msgs)
    token = user.read_grant(out(se.se_confirm(session)))
    return AuthResult(bool(token), session, "", msgs)
