import itertools
import random

import pytest

from dlrep_anchor import dlrep
from dlrep_anchor.actors import (
    CONFIRMED,
    FAILED,
    PROVING,
    REQUESTED,
    REQUIREMENTS_SENT,
    SUSPENDED,
    ProtocolViolation,
    Requirement,
    Statement,
)
from dlrep_anchor.dlrep import LinearRelation, PolicyError
from dlrep_anchor.simulator import Simulation
from dlrep_anchor.wire import ChannelRejected, pack_scalars


def world(n_users=3, seed=1, backend="test", attrs=(20, 1, 2, 3), **kw):
    sim = Simulation(seed=seed, backend=backend, n=4, **kw)
    sim.sp.offer("adult", Requirement((2,), (LinearRelation.of({1: 1}, 20),)), [sim.iv.name])
    sim.sp.offer("open", Requirement(), [sim.iv.name])
    sim.enroll(n_users, list(attrs))
    sim.anchor()
    sim.refresh()
    return sim


def start(sim, user, service="adult"):
    """Run steps 1-2 by hand; return the SE session and the parsed requirement."""
    u = sim.users[user]
    session = sim.se.usr_request(u.se_account, u.request(service, sim.sp.name))
    reply = sim.se.sp_requirements(session)
    sid, req, _ = u.read_requirements(reply, sim.params.group)
    return u, session, sid, req


def test_honest_session_reaches_grant():
    sim = world()
    r = sim.authenticate(0, "adult")
    assert r.granted and r.session.state == CONFIRMED
    assert sim.sp.grants[r.session.session_id].token == sim.users[0].grants[-1]


def test_end_to_end_completeness_randomized():
    # one world per trial: with q=23 distinct users share h values and the
    # SE would rightly refuse a repeated (h, A) pair across them
    rng = random.Random(5)
    failures = []
    for i in range(200):
        sim = Simulation(seed=1000 + i, backend="test", n=4)
        q = sim.q
        attrs = [rng.randrange(q) for _ in range(4)]
        reveal = tuple(sorted(rng.sample(range(1, 5), rng.randint(0, 3))))
        rels = []
        if rng.random() < 0.7:
            js = rng.sample(range(1, 5), rng.randint(1, 3))
            coeffs = {j: rng.randrange(1, q) for j in js}
            rels.append(LinearRelation.of(coeffs, sum(a * attrs[j - 1] for j, a in coeffs.items())))
        sim.sp.offer("svc", Requirement(reveal, tuple(rels)), [sim.iv.name])
        sim.enroll(1, attrs)
        sim.anchor()
        sim.refresh()
        r = sim.authenticate(0, "svc")
        if not r.granted:
            failures.append((i, r.reason))
    assert not failures


def test_session_ids_fresh_and_states_advance():
    sim = world()
    u, s1, sid, req = start(sim, 0)
    assert s1.state == REQUIREMENTS_SENT and len(sid) == 16
    s2 = sim.se.usr_request(u.se_account, u.request("adult", sim.sp.name))
    assert s2.state == REQUESTED and s2.session_id != s1.session_id
    assert req == Requirement((2,), (LinearRelation.of({1: 1}, 20),))


def test_replayed_request_rejected_by_channel():
    sim = world()
    u = sim.users[0]
    raw = u.request("adult", sim.sp.name)
    sim.se.usr_request(u.se_account, raw)
    with pytest.raises(ChannelRejected):
        sim.se.usr_request(u.se_account, raw)


def test_unknown_sp_and_timeout_and_empty_issuers():
    sim = world()
    u = sim.users[0]
    s = sim.se.usr_request(u.se_account, u.request("adult", "nobody"))
    assert s.state == FAILED
    sim.sp.offer("nobody-accepted", Requirement(), [])
    r = sim.authenticate(0, "nobody-accepted")
    assert not r.granted and r.reason == "no acceptable IV"
    sim.sp.online = False
    r = sim.authenticate(0, "adult")
    assert not r.granted and "did not answer" in r.reason


def test_requirement_on_x0_rejected_at_construction():
    with pytest.raises(PolicyError):
        Requirement(reveal=(0,))
    with pytest.raises(PolicyError):
        Requirement(relations=(LinearRelation.of({0: 1}, 1),))


def test_unaccepted_issuer_rejected():
    sim = world()
    sim.sp.offer("other", Requirement(), ["IV9"])
    r = sim.authenticate(0, "other")
    assert not r.granted


def test_out_of_order_messages_are_violations():
    sim = world()
    u, session, sid, req = start(sim, 0)
    with pytest.raises(ProtocolViolation):
        sim.se.on_proof_a(session, u.proof_a(sid, sim.iv.name, req))
    assert session.state == FAILED
    with pytest.raises(ProtocolViolation):
        sim.se.se_confirm(session)


def test_revoked_user_fails_at_se_verify():
    sim = world()
    sim.revoke(1)
    sim.anchor()
    sim.refresh()
    r = sim.authenticate(1, "adult")
    assert not r.granted and r.reason == "identity updated or revoked"
    assert r.session.state == FAILED and r.session.A is None


def test_revocation_safety_over_message_orderings():
    """No ordering or subset of the user's messages gets a revoked credential granted."""
    sim = world()
    stale_branch = sim.users[1].credentials[sim.iv.name].branch
    sim.revoke(1)
    sim.anchor()
    for refreshed in (False, True):
        cred = sim.users[1].credentials[sim.iv.name]
        cred.branch = sim.se.branch_for(sim.iv.name, cred.index) if refreshed else stale_branch
        cred.txid = sim.iv.txids[-1]
        for k in range(0, 4):
            for order in itertools.permutations(["cred", "A", "B"], k):
                u, session, sid, req = start(sim, 1)
                challenge = None
                for msg in order:
                    try:
                        if msg == "cred":
                            sim.se.se_verify(session, u.send_credential(sid, sim.iv.name))
                        elif msg == "A":
                            challenge = sim.se.on_proof_a(session, u.proof_a(sid, sim.iv.name, req))
                        else:
                            if challenge is None:
                                raw = u.channel.seal("PROOF-B", [sid, pack_scalars(sim.params.group, (0, 0, 0))])
                            else:
                                raw = u.proof_b(challenge, sim.iv.name)
                            sim.se.on_proof_b(session, raw)
                    except (ProtocolViolation, ChannelRejected, dlrep.ProofError):
                        pass
                with pytest.raises(ProtocolViolation):
                    sim.se.se_confirm(session)
                assert session.state != CONFIRMED
                assert session.session_id not in sim.sp.grants


def test_own_update_keeps_branch_valid():
    # only the user's own leaf changes, so the siblings they hold still verify
    sim = world()
    sim.update(0, {2: 9})
    sim.anchor()
    assert sim.authenticate(0, "adult").granted


def test_other_users_update_makes_branch_stale():
    sim = world()
    sim.update(2, {3: 11})
    sim.anchor()
    assert not sim.authenticate(0, "adult").granted
    sim.refresh(0)
    assert sim.authenticate(0, "adult").granted


def test_update_freshness_stale_x0_rejected_on_secp():
    sim = world(backend="secp256k1")
    sim.update(0, {3: 5})
    sim.anchor()
    sim.refresh()
    r = sim.authenticate(0, "adult", stale=True)
    assert not r.granted and r.reason.startswith("proof rejected")
    assert sim.authenticate(0, "adult").granted


def test_mitm_replay_in_new_session_rejected():
    sim = world(n_users=2)
    r = sim.authenticate(0, "adult")
    assert r.granted
    # replaying the recorded envelopes on the same channel fails the sequence check
    u, session, sid, req = start(sim, 0)
    with pytest.raises(ChannelRejected):
        sim.se.se_verify(session, r.messages[2])
    # an attacker with its own channel reusing the recorded proof content
    old_session = r.session
    mallory = sim.users[1]
    m_session = sim.se.usr_request(mallory.se_account, mallory.request("adult", sim.sp.name))
    mallory.read_requirements(sim.se.sp_requirements(m_session), sim.params.group)
    victim = sim.users[0].credentials[sim.iv.name]
    raw = mallory.channel.seal(
        "CREDENTIAL",
        [m_session.session_id, sim.iv.name.encode(), victim.txid, victim.index, victim.h.encode(),
         __import__("dlrep_anchor.wire", fromlist=["pack_branch"]).pack_branch(victim.branch), victim.metadata],
    )
    assert sim.se.se_verify(m_session, raw) is None
    a_raw = mallory.channel.seal(
        "PROOF-A", [m_session.session_id, old_session.A.encode(), old_session.statement.to_bytes(sim.params.group)]
    )
    sim.se.on_proof_a(m_session, a_raw)
    assert m_session.state == FAILED and "reused" in m_session.reason


def test_confirm_idempotent_and_grant_needs_confirm():
    sim = world()
    r = sim.authenticate(0, "adult")
    session = r.session
    again = sim.se.se_confirm(session)
    assert sim.users[0].read_grant(again) == r.session.grant.token
    assert len(sim.sp.grants) == 1
    with pytest.raises(ProtocolViolation):
        sim.sp.grant(b"\x00" * 16)
    with pytest.raises(ProtocolViolation):
        sim.sp.on_confirm(b"\x01" * 16, "adult", b"\x00" * 64)


def test_statement_minimality_in_se_log():
    sim = world(attrs=(20, 13, 17, 19))
    sim.authenticate(0, "adult")
    entry = sim.se.log[-1]
    assert set(entry) == {"sp", "service", "iv", "statement", "revealed", "height"}
    assert entry["revealed"] == {2: 13}
    st = Statement.from_bytes(bytes.fromhex(entry["statement"]), sim.params.group)
    assert dict(st.revealed) == {2: 13}
    secrets = sim.users[0].credentials[sim.iv.name].secret.secrets(sim.q)
    hidden = {secrets[0], 17, 19}
    logged_scalars = set(entry["revealed"].values()) | {st.relations[0].constant}
    assert not hidden & (logged_scalars - {20, 13})


def test_rekey_keeps_identity_and_rejects_old_key():
    sim = world()
    u = sim.users[0]
    cred = u.credentials[sim.iv.name]
    before = (cred.index, cred.h, cred.branch)
    old_channel = u.channel
    u.rekey(sim.se)
    assert (cred.index, cred.h, cred.branch) == before
    assert sim.authenticate(0, "adult").granted
    with pytest.raises(ChannelRejected):
        sim.se.usr_request(u.se_account, old_channel.seal("REQUEST", [b"adult", b"SP1"]))


def test_metadata_expiry_policy():
    sim = Simulation(seed=2, backend="test", n=4)
    sim.sp.offer("open", Requirement(), [sim.iv.name])
    sim.enroll(1, [1, 2, 3, 4], b"expires=3")
    sim.anchor()
    sim.refresh()
    assert sim.authenticate(0, "open").granted
    sim.ledger.mine()
    sim.ledger.mine()
    r = sim.authenticate(0, "open")
    assert not r.granted and r.reason == "identity expired"


def test_prover_timeout_rejects():
    sim = world()
    u, session, sid, req = start(sim, 0)
    assert sim.se.se_verify(session, u.send_credential(sid, sim.iv.name)) is None
    sim.se.on_proof_a(session, u.proof_a(sid, sim.iv.name, req))
    assert sim.se.on_proof_b(session, None) is False
    assert session.state == FAILED


def test_confirmation_depth():
    sim = Simulation(seed=3, backend="test", n=4, min_conf=2)
    sim.sp.offer("open", Requirement(), [sim.iv.name])
    sim.enroll(1)
    sim.anchor()
    sim.refresh()
    r = sim.authenticate(0, "open")
    assert not r.granted and "lookup failed" in r.reason
    sim.ledger.mine()
    assert sim.authenticate(0, "open").granted


def test_fork_suspends_until_one_head():
    sim = world()
    h = sim.ledger.height
    sim.enroll(1)
    sim.anchor()
    sim.refresh()
    sim.fork(h)
    sim.equivocate("fork")
    sim.ledger.mine()
    r = sim.authenticate(0, "adult")
    assert r.session.state == SUSPENDED and not r.granted
    sim.ledger.resolve_fork("main")
    assert sim.authenticate(0, "adult").granted


def test_reissue_after_key_loss():
    sim = world()
    sim.iv.reissue(sim.accounts[0], sim.users[0])
    sim.anchor()
    sim.refresh()
    assert sim.authenticate(0, "adult").granted
    assert sim.users[0].credentials[sim.iv.name].secret.k == 0


def test_proving_state_reached_only_after_branch_check():
    sim = world()
    u, session, sid, req = start(sim, 0)
    assert sim.se.se_verify(session, u.send_credential(sid, sim.iv.name)) is None
    assert session.state == PROVING and session.h == sim.users[0].credentials[sim.iv.name].h
