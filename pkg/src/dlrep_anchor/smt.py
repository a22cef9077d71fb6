"""Sparse Merkle tree over 2^256 leaves and the running commitment chain.

Each account lives at a fixed leaf, index = SHA-256(account number), read
MSB-first: bit i picks the child taken below depth i (0 = left).  Untouched
subtrees hash to per-depth defaults, so only the path nodes of occupied leaves
are stored.

Hashing is domain separated:
    leaf  = SHA-256(0x00 || enc(h) || len(metadata) as u32 || metadata)
    node  = SHA-256(0x01 || left || right)
    empty = 32 zero bytes at depth 256
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .group import GroupElement

DEPTH = 256
MAX_METADATA = 1024
EMPTY_LEAF = bytes(32)


class MetadataTooLarge(ValueError):
    pass


def _sha(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def node_hash(left: bytes, right: bytes) -> bytes:
    return _sha(b"\x01" + left + right)


def leaf_hash(h: Union[GroupElement, bytes, None], metadata: bytes = b"") -> bytes:
    """Leaf content hash; ``h=None`` (or b"") is the revocation tombstone."""
    if len(metadata) > MAX_METADATA:
        raise MetadataTooLarge(f"metadata is {len(metadata)} bytes; limit is {MAX_METADATA}")
    if h is None:
        enc = b""
    elif isinstance(h, GroupElement):
        enc = h.encode()
    else:
        enc = bytes(h)
    return _sha(b"\x00" + enc + len(metadata).to_bytes(4, "big") + metadata)


def _default_hashes() -> tuple[bytes, ...]:
    out = [EMPTY_LEAF]
    for _ in range(DEPTH):
        out.append(node_hash(out[-1], out[-1]))
    return tuple(reversed(out))  # out[d] is the empty-subtree hash at depth d


DEFAULTS = _default_hashes()


def default_hashes() -> tuple[bytes, ...]:
    """257 hashes; element d is the hash of an empty subtree rooted at depth d."""
    return DEFAULTS


def index_for_account(account: bytes) -> bytes:
    return _sha(account)


def _bit(index_int: int, i: int) -> int:
    """Bit taken when descending from depth i to i+1."""
    return (index_int >> (DEPTH - 1 - i)) & 1


def _key(depth: int, prefix: int) -> int:
    return (1 << depth) | prefix


@dataclass(frozen=True)
class MerkleBranch:
    """Non-default siblings only, as (depth, hash) with strictly increasing depth.

    The sibling at depth d is the child of the depth d-1 path node that the
    path does not take; omitted depths mean DEFAULTS[d].
    """

    siblings: tuple[tuple[int, bytes], ...]

    def __len__(self) -> int:
        return len(self.siblings)

    def to_hex(self) -> list[list]:
        return [[d, s.hex()] for d, s in self.siblings]

    @classmethod
    def from_hex(cls, items) -> "MerkleBranch":
        return cls(tuple((int(d), bytes.fromhex(s)) for d, s in items))


class SparseTree:
    def __init__(self):
        self._leaves: dict[int, bytes] = {}
        self._nodes: dict[int, bytes] = {}

    def __len__(self) -> int:
        return len(self._leaves)

    @property
    def root(self) -> bytes:
        return self._nodes.get(_key(0, 0), DEFAULTS[0])

    def leaves(self) -> dict[bytes, bytes]:
        return {i.to_bytes(32, "big"): v for i, v in self._leaves.items()}

    def get(self, index: bytes) -> bytes:
        return self._leaves.get(int.from_bytes(index, "big"), EMPTY_LEAF)

    def _node(self, depth: int, prefix: int) -> bytes:
        return self._nodes.get(_key(depth, prefix), DEFAULTS[depth])

    def upsert(self, index: bytes, leaf: bytes) -> bytes:
        """Write ``leaf`` at ``index`` (EMPTY_LEAF removes it); returns the new root."""
        if len(index) != 32 or len(leaf) != 32:
            raise ValueError("index and leaf must be 32 bytes")
        idx = int.from_bytes(index, "big")
        if leaf == EMPTY_LEAF:
            self._leaves.pop(idx, None)
        else:
            self._leaves[idx] = leaf
        cur = leaf
        prefix = idx
        for depth in range(DEPTH, 0, -1):
            k = _key(depth, prefix)
            if cur == DEFAULTS[depth]:
                self._nodes.pop(k, None)
            else:
                self._nodes[k] = cur
            sib = self._node(depth, prefix ^ 1)
            cur = node_hash(sib, cur) if prefix & 1 else node_hash(cur, sib)
            prefix >>= 1
        if cur == DEFAULTS[0]:
            self._nodes.pop(_key(0, 0), None)
        else:
            self._nodes[_key(0, 0)] = cur
        return cur

    def branch(self, index: bytes) -> MerkleBranch:
        idx = int.from_bytes(index, "big")
        out = []
        for depth in range(1, DEPTH + 1):
            prefix = idx >> (DEPTH - depth)
            k = _key(depth, prefix ^ 1)
            if k in self._nodes:
                out.append((depth, self._nodes[k]))
        return MerkleBranch(tuple(out))

    def recompute_root(self) -> bytes:
        """Root from the occupied leaves alone, ignoring cached nodes."""
        return compute_root(self.leaves().items())

    # snapshot: one record per line
    def dump(self, epoch: int, cm: Optional[bytes]) -> str:
        lines = [f"epoch {epoch}", f"root {self.root.hex()}", f"cm {(cm or b'').hex()}"]
        for i in sorted(self._leaves):
            lines.append(f"leaf {i.to_bytes(32, 'big').hex()} {self._leaves[i].hex()}")
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str) -> tuple["SparseTree", int, bytes]:
        tree = cls()
        epoch, root, cm = 0, None, b""
        for line in text.splitlines():
            if not line.strip():
                continue
            tag, *rest = line.split()
            if tag == "epoch":
                epoch = int(rest[0])
            elif tag == "root":
                root = bytes.fromhex(rest[0])
            elif tag == "cm":
                cm = bytes.fromhex(rest[0]) if rest else b""
            elif tag == "leaf":
                tree.upsert(bytes.fromhex(rest[0]), bytes.fromhex(rest[1]))
            else:
                raise ValueError(f"unknown snapshot record {tag!r}")
        if root is not None and root != tree.root:
            raise ValueError("snapshot root does not match its leaves")
        return tree, epoch, cm


def compute_root(leaves: Iterable[tuple[bytes, bytes]]) -> bytes:
    items = sorted((int.from_bytes(i, "big"), v) for i, v in leaves if v != EMPTY_LEAF)

    def build(depth: int, lo: int, hi: int) -> bytes:
        if lo == hi:
            return DEFAULTS[depth]
        if depth == DEPTH:
            return items[lo][1]
        # first item whose bit at this depth is 1
        mid = lo
        while mid < hi and not _bit(items[mid][0], depth):
            mid += 1
        return node_hash(build(depth + 1, lo, mid), build(depth + 1, mid, hi))

    return build(0, 0, len(items))


def verify_branch(root: bytes, index: bytes, leaf: bytes, branch: MerkleBranch) -> bool:
    """Fold from the leaf up; accept iff the result equals ``root``."""
    if len(index) != 32 or len(leaf) != 32:
        return False
    provided = {}
    last = 0
    for depth, sib in branch.siblings:
        if not last < depth <= DEPTH or len(sib) != 32:
            return False
        provided[depth] = sib
        last = depth
    idx = int.from_bytes(index, "big")
    cur = leaf
    for depth in range(DEPTH, 0, -1):
        sib = provided.get(depth, DEFAULTS[depth])
        cur = node_hash(sib, cur) if _bit(idx, depth - 1) else node_hash(cur, sib)
    return cur == root


@dataclass(frozen=True)
class CommitmentChain:
    cm: bytes
    t: int


def advance_cm(chain: Optional[CommitmentChain], root: bytes) -> CommitmentChain:
    """cm_1 = r_1, cm_t = SHA-256(cm_{t-1} || r_t)."""
    if chain is None or chain.t == 0:
        return CommitmentChain(root, 1)
    return CommitmentChain(_sha(chain.cm + root), chain.t + 1)
