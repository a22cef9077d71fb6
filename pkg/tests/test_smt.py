import random

import pytest

from dlrep_anchor.group import make_params
from dlrep_anchor.smt import (
    DEFAULTS,
    EMPTY_LEAF,
    CommitmentChain,
    MerkleBranch,
    MetadataTooLarge,
    SparseTree,
    advance_cm,
    compute_root,
    index_for_account,
    leaf_hash,
    verify_branch,
)

import oracles


def idx(first_byte, rest=0):
    return bytes([first_byte]) + rest.to_bytes(31, "big")


def test_empty_root_and_defaults():
    assert SparseTree().root == oracles.empty_subtree(256)
    assert DEFAULTS[256] == bytes(32)
    assert DEFAULTS[255] == oracles.sha(b"\x01" + bytes(64))


def test_two_leaf_tree_by_hand():
    a, b = idx(0x00), idx(0x80)  # split at the very first bit
    la, lb = oracles.sha(b"A"), oracles.sha(b"B")

    def fold(leaf, index):
        cur = leaf
        for depth in range(256, 1, -1):  # only defaults below depth 1
            bit = (int.from_bytes(index, "big") >> (256 - depth)) & 1
            sib = oracles.empty_subtree(256 - depth)
            cur = oracles.sha(b"\x01" + (sib + cur if bit else cur + sib))
        return cur

    want = oracles.sha(b"\x01" + fold(la, a) + fold(lb, b))
    t = SparseTree()
    t.upsert(a, la)
    t.upsert(b, lb)
    assert t.root == want
    assert t.branch(a).siblings == ((1, fold(lb, b)),)


def test_root_matches_recursive_oracle():
    rng = random.Random(1)
    leaves = {rng.randbytes(32): rng.randbytes(32) for _ in range(40)}
    t = SparseTree()
    for i, v in leaves.items():
        t.upsert(i, v)
    assert t.root == oracles.smt_root(leaves) == compute_root(leaves.items()) == t.recompute_root()


def test_branches_verify_and_are_short():
    rng = random.Random(2)
    t = SparseTree()
    keys = [rng.randbytes(32) for _ in range(64)]
    for k in keys:
        t.upsert(k, rng.randbytes(32))
    for k in keys:
        br = t.branch(k)
        assert verify_branch(t.root, k, t.get(k), br)
        assert [d for d, _ in br.siblings] == sorted({d for d, _ in br.siblings})
    assert sum(len(t.branch(k)) for k in keys) / 64 < 10


def test_wrong_leaf_or_index_rejected():
    t = SparseTree()
    a, b = idx(1), idx(2)
    t.upsert(a, oracles.sha(b"a"))
    t.upsert(b, oracles.sha(b"b"))
    br = t.branch(a)
    assert not verify_branch(t.root, a, oracles.sha(b"x"), br)
    assert not verify_branch(t.root, b, oracles.sha(b"a"), br)
    assert not verify_branch(t.root, a, oracles.sha(b"a"), MerkleBranch(((3, bytes(32)), (2, bytes(32)))))
    assert not verify_branch(t.root, a[:31], oracles.sha(b"a"), br)


def test_stale_branch_after_overlapping_update():
    t = SparseTree()
    a, b = idx(0x10), idx(0x11)
    t.upsert(a, oracles.sha(b"a"))
    t.upsert(b, oracles.sha(b"b"))
    old = t.branch(a)
    t.upsert(b, oracles.sha(b"b2"))
    assert not verify_branch(t.root, a, oracles.sha(b"a"), old)
    assert verify_branch(t.root, a, oracles.sha(b"a"), t.branch(a))


def test_removal_restores_previous_root():
    t = SparseTree()
    t.upsert(idx(5), oracles.sha(b"x"))
    before = t.root
    t.upsert(idx(9), oracles.sha(b"y"))
    t.upsert(idx(9), EMPTY_LEAF)
    assert t.root == before
    assert len(t) == 1


def test_leaf_hash_encoding():
    h = make_params("test", 1).generators[1]
    assert leaf_hash(h, b"exp") == oracles.leaf(h.encode(), b"exp")
    with pytest.raises(MetadataTooLarge):
        leaf_hash(h, bytes(1025))


def test_index_is_sha256_of_account():
    assert index_for_account(b"IV1/00000001") == oracles.sha(b"IV1/00000001")


def test_snapshot_roundtrip():
    rng = random.Random(3)
    t = SparseTree()
    for _ in range(10):
        t.upsert(rng.randbytes(32), rng.randbytes(32))
    text = t.dump(4, b"\x01" * 32)
    back, epoch, cm = SparseTree.load(text)
    assert (back.root, epoch, cm) == (t.root, 4, b"\x01" * 32)
    with pytest.raises(ValueError):
        SparseTree.load(text.replace(f"root {t.root.hex()}", "root " + "00" * 32))


def test_cm_chain():
    r1, r2, r3 = (oracles.sha(bytes([i])) for i in range(3))
    c = advance_cm(None, r1)
    assert c == CommitmentChain(r1, 1)
    c = advance_cm(c, r2)
    assert c.cm == oracles.sha(r1 + r2) and c.t == 2
    assert advance_cm(c, r3).cm == oracles.sha(oracles.sha(r1 + r2) + r3)


def test_branch_hex_roundtrip():
    br = MerkleBranch(((3, b"\x01" * 32), (9, b"\x02" * 32)))
    assert MerkleBranch.from_hex(br.to_hex()) == br
