"""Independent reference computations used by the tests.

Nothing here imports the package: each helper is a direct, slow transcription
of the textbook definition.
"""

import hashlib

# secp256k1 from SEC 2
P = 2**256 - 2**32 - 977
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
G = (
    0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798,
    0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8,
)


def ec_add(a, b):
    if a is None:
        return b
    if b is None:
        return a
    if a[0] == b[0] and (a[1] + b[1]) % P == 0:
        return None
    if a == b:
        lam = 3 * a[0] * a[0] * pow(2 * a[1], -1, P) % P
    else:
        lam = (b[1] - a[1]) * pow(b[0] - a[0], -1, P) % P
    x = (lam * lam - a[0] - b[0]) % P
    return (x, (lam * (a[0] - x) - a[1]) % P)


def ec_mul(k, pt):
    out = None
    while k:
        if k & 1:
            out = ec_add(out, pt)
        pt = ec_add(pt, pt)
        k >>= 1
    return out


def compress(pt):
    if pt is None:
        return bytes(33)
    return bytes([2 + (pt[1] & 1)]) + pt[0].to_bytes(32, "big")


def sha(b):
    return hashlib.sha256(b).digest()


def empty_subtree(height_above_leaf):
    """Hash of an empty subtree whose leaves sit ``height_above_leaf`` levels below."""
    h = bytes(32)
    for _ in range(height_above_leaf):
        h = sha(b"\x01" + h + h)
    return h


def leaf(enc_h, metadata=b""):
    return sha(b"\x00" + enc_h + len(metadata).to_bytes(4, "big") + metadata)


def smt_root(leaves, depth=256):
    """Root of a sparse tree by direct recursion on index bits (dict index->leaf)."""
    items = {int.from_bytes(i, "big"): v for i, v in leaves.items()}

    def rec(d, prefix, members):
        if not members:
            return empty_subtree(depth - d)
        if d == depth:
            return items[members[0]]
        left = [m for m in members if not (m >> (depth - 1 - d)) & 1]
        right = [m for m in members if (m >> (depth - 1 - d)) & 1]
        return sha(b"\x01" + rec(d + 1, prefix * 2, left) + rec(d + 1, prefix * 2 + 1, right))

    return rec(0, 0, sorted(items))


def dsha(b):
    return sha(sha(b))
