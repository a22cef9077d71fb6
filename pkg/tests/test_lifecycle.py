import hashlib
import random
import warnings

import pytest

from dlrep_anchor.dlrep import ProofTranscript
from dlrep_anchor.group import make_params, multi_exp
from dlrep_anchor.lifecycle import (
    EnrollmentRejected,
    LifecycleError,
    UserSecret,
    chain_value,
    issuer_enroll,
    issuer_update,
    reissue_secret,
    revoke,
    schnorr_verify,
    user_init,
    user_recompute_x0,
)
from dlrep_anchor.smt import leaf_hash

import oracles


def sha_step(v, q):
    return int.from_bytes(hashlib.sha256(v.to_bytes(32, "big")).digest(), "big") % q


@pytest.mark.parametrize("q", [23, make_params("secp256k1", 1).q])
def test_chain_value_matches_hashlib(q):
    x = 17
    want = x % q
    for k in range(5):
        assert chain_value(x, k, q) == want
        want = sha_step(want, q)


def test_chain_value_rejects_negative_k():
    with pytest.raises(ValueError):
        chain_value(1, -1, 23)


def enrolled(backend="test", n=3, seed=1, attrs=None):
    params = make_params(backend, n)
    rng = random.Random(seed)
    init = user_init(params, rng)
    attrs = attrs or [rng.randrange(params.q) for _ in range(n)]
    x01, rec, h = issuer_enroll(params, b"acct-1", init.h00, init.proof, attrs, rng=rng)
    return params, init, x01, rec, h, list(attrs)


def test_h00_proof_and_enrollment_commitment():
    params, init, x01, rec, h, attrs = enrolled()
    assert schnorr_verify(params, init.h00, init.proof)
    assert h == multi_exp(params, [(init.x00 + x01) % params.q] + attrs)
    assert rec.next_chain == sha_step(x01, params.q)
    assert rec.g0_x0 == params.generators[0] ** ((init.x00 + x01) % 23)
    assert not hasattr(rec, "x01")


def test_forged_h00_proof_rejected():
    params = make_params("test", 2)
    init = user_init(params, random.Random(3))
    t = init.proof
    forged = ProofTranscript(t.A, t.c, ((t.responses[0] + 1) % 23,), t.statement)
    with pytest.raises(EnrollmentRejected):
        issuer_enroll(params, b"a", init.h00, forged, [1, 2])


def test_wrong_attribute_count():
    params = make_params("test", 2)
    init = user_init(params, random.Random(3))
    with pytest.raises(LifecycleError):
        issuer_enroll(params, b"a", init.h00, init.proof, [1])


@pytest.mark.parametrize("backend", ["test", "secp256k1"])
def test_updates_equal_direct_recommitment(backend):
    params, init, x01, rec, h, attrs = enrolled(backend, seed=4)
    rng = random.Random(8)
    secret = UserSecret(init.x00, x01, 0, attrs)
    for k in range(1, 5):
        changes = {rng.randrange(1, 4): rng.randrange(params.q)}
        h = issuer_update(params, rec, changes, k)
        for j, v in changes.items():
            attrs[j - 1] = v
        x0 = (init.x00 + chain_value(x01, k, params.q)) % params.q
        assert h == multi_exp(params, [x0] + attrs)
        assert user_recompute_x0(secret, k, params.q) == x0


def test_update_guards():
    params, _, _, rec, _, _ = enrolled()
    issuer_update(params, rec, {1: 5}, 1)
    with pytest.raises(LifecycleError, match="already published"):
        issuer_update(params, rec, {1: 6}, 1)
    with pytest.raises(LifecycleError, match="next update"):
        issuer_update(params, rec, {1: 6}, 3)
    with pytest.raises(LifecycleError):
        issuer_update(params, rec, {4: 1}, 2)
    rec.forget(2)
    with pytest.raises(LifecycleError, match="does not retain"):
        issuer_update(params, rec, {2: 1}, 2)
    assert issuer_update(params, rec, {1: 1}, 2) is not None  # X_2 unchanged is fine


def test_update_only_needs_changed_attribute():
    params, init, x01, rec, h, attrs = enrolled(seed=6)
    rec.forget(2, 3)
    h = issuer_update(params, rec, {1: 9}, 1)
    x0 = (init.x00 + chain_value(x01, 1, 23)) % 23
    assert h == multi_exp(params, [x0, 9, attrs[1], attrs[2]])


def test_metadata_limit():
    params, _, _, rec, _, _ = enrolled()
    with pytest.raises(LifecycleError):
        issuer_update(params, rec, {}, 1, metadata=b"x" * 1025)
    issuer_update(params, rec, {}, 1, metadata=b"x" * 1024)


def test_revoke_tombstone_and_repeat_warning():
    params, _, _, rec, _, _ = enrolled()
    tomb = revoke(rec)
    assert tomb == oracles.leaf(b"", b"") == leaf_hash(None, b"")
    with pytest.warns(UserWarning):
        assert revoke(rec) == tomb
    with pytest.raises(LifecycleError):
        issuer_update(params, rec, {1: 1}, 1)


def test_reissue_restarts_chain():
    params, init, x01, rec, h, attrs = enrolled(seed=9)
    issuer_update(params, rec, {1: 2}, 1)
    attrs[0] = 2
    new = user_init(params, random.Random(10))
    with pytest.raises(LifecycleError):
        reissue_secret(params, rec, new, reauthenticated=False)
    x01b, h2 = reissue_secret(params, rec, new, reauthenticated=True, rng=random.Random(1))
    assert rec.k == 0
    assert h2 == multi_exp(params, [(new.x00 + x01b) % 23] + attrs)
    h3 = issuer_update(params, rec, {}, 1)
    assert h3 == multi_exp(params, [(new.x00 + chain_value(x01b, 1, 23)) % 23] + attrs)


def test_revoked_record_cannot_be_reissued():
    params, *_ = enrolled()
    rec = enrolled()[3]
    with warnings.catch_warnings():
        revoke(rec)
    with pytest.raises(LifecycleError):
        reissue_secret(params, rec, user_init(params, random.Random(1)), True)
