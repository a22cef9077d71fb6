"""Prime-order groups used by the commitment and proof layers.

Two backends share one interface:

* ``SchnorrGroup`` -- the order-q subgroup of integers mod a safe prime p.  The
  bundled instance (p=47, q=23) is tiny on purpose so every result can be
  checked by brute force.
* ``Secp256k1`` -- the Bitcoin curve, points in Jacobian coordinates internally
  and 33-byte compressed SEC1 encodings externally.

Group elements are wrapped in :class:`GroupElement`, which uses multiplicative
notation (``*``, ``**``, ``/``) for both backends.  Scalars are plain ints
reduced mod ``q``.
"""

from __future__ import annotations

import hashlib
import random
import secrets
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence


class GroupError(ValueError):
    """Invalid encoding, arity mismatch or other misuse of a group."""


@dataclass(frozen=True, eq=False)
class GroupElement:
    group: "Group"
    value: Any

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return self.group._wrap(self.group._op(self.value, other.value))

    def __truediv__(self, other: "GroupElement") -> "GroupElement":
        return self * other.inverse()

    def __pow__(self, e: int) -> "GroupElement":
        return self.group.exp(self, e)

    def inverse(self) -> "GroupElement":
        return self.group._wrap(self.group._inv(self.value))

    def is_identity(self) -> bool:
        return self.group._is_identity(self.value)

    def encode(self) -> bytes:
        return self.group.encode(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroupElement):
            return NotImplemented
        return self.group is other.group and self.group._eq(self.value, other.value)

    def __hash__(self) -> int:
        return hash(self.encode())

    def __repr__(self) -> str:
        return f"GroupElement({self.group.name}, {self.encode().hex()})"


class Group:
    """Common interface; subclasses implement the raw ``_op``/``_inv``/codec hooks."""

    name: str
    order: int
    scalar_size: int
    element_size: int

    def _wrap(self, raw: Any) -> GroupElement:
        return GroupElement(self, raw)

    # -- hooks ---------------------------------------------------------------
    def _op(self, a: Any, b: Any) -> Any:
        raise NotImplementedError

    def _inv(self, a: Any) -> Any:
        raise NotImplementedError

    def _is_identity(self, a: Any) -> bool:
        raise NotImplementedError

    def _eq(self, a: Any, b: Any) -> bool:
        return a == b

    def encode(self, element: GroupElement) -> bytes:
        raise NotImplementedError

    def decode(self, data: bytes) -> GroupElement:
        raise NotImplementedError

    def identity(self) -> GroupElement:
        raise NotImplementedError

    def exp(self, base: GroupElement, e: int) -> GroupElement:
        raise NotImplementedError

    # -- shared --------------------------------------------------------------
    def multi_exp(self, bases: Sequence[GroupElement], exponents: Sequence[int]) -> GroupElement:
        if len(bases) != len(exponents):
            raise GroupError(f"arity mismatch: {len(bases)} bases, {len(exponents)} exponents")
        acc = self.identity()
        for b, e in zip(bases, exponents):
            e %= self.order
            if e:
                acc = acc * self.exp(b, e)
        return acc

    def encode_scalar(self, x: int) -> bytes:
        if not 0 <= x < self.order:
            raise GroupError(f"scalar {x} out of range [0, {self.order})")
        return x.to_bytes(self.scalar_size, "big")

    def decode_scalar(self, data: bytes) -> int:
        if len(data) != self.scalar_size:
            raise GroupError(f"scalar encoding must be {self.scalar_size} bytes")
        x = int.from_bytes(data, "big")
        if x >= self.order:
            raise GroupError("scalar encoding out of range")
        return x

    def hash_to_element(self, label: bytes) -> GroupElement:
        raise NotImplementedError


class SchnorrGroup(Group):
    """Order-q subgroup of Z_p^*; elements are residues r with r^q = 1 mod p."""

    def __init__(self, p: int, q: int, name: str = "test"):
        if (p - 1) % q:
            raise GroupError("q must divide p - 1")
        self.p = p
        self.order = q
        self.name = name
        self.scalar_size = 4
        self.element_size = 4

    def _op(self, a: int, b: int) -> int:
        return a * b % self.p

    def _inv(self, a: int) -> int:
        return pow(a, -1, self.p)

    def _is_identity(self, a: int) -> bool:
        return a == 1

    def identity(self) -> GroupElement:
        return self._wrap(1)

    def element(self, residue: int) -> GroupElement:
        if not (0 < residue < self.p and pow(residue, self.order, self.p) == 1):
            raise GroupError(f"{residue} is not in the order-{self.order} subgroup mod {self.p}")
        return self._wrap(residue)

    def exp(self, base: GroupElement, e: int) -> GroupElement:
        return self._wrap(pow(base.value, e % self.order, self.p))

    def encode(self, element: GroupElement) -> bytes:
        return element.value.to_bytes(self.element_size, "big")

    def decode(self, data: bytes) -> GroupElement:
        if len(data) != self.element_size:
            raise GroupError(f"element encoding must be {self.element_size} bytes")
        return self.element(int.from_bytes(data, "big"))

    def elements(self) -> list[GroupElement]:
        """Every subgroup element, identity first (only sensible for toy parameters)."""
        return [self._wrap(r) for r in range(1, self.p) if pow(r, self.order, self.p) == 1]

    def hash_to_element(self, label: bytes) -> GroupElement:
        cofactor = (self.p - 1) // self.order
        ctr = 0
        while True:
            d = hashlib.sha256(label + ctr.to_bytes(4, "big")).digest()
            r = pow(int.from_bytes(d, "big") % self.p, cofactor, self.p)
            if r > 1:
                return self._wrap(r)
            ctr += 1


# secp256k1 domain parameters
_P = 2**256 - 2**32 - 977
_N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
_GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
_GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8

_INF = None  # point at infinity (affine)


def _jac_double(P):
    X1, Y1, Z1 = P
    if Y1 == 0 or Z1 == 0:
        return (0, 1, 0)
    YY = Y1 * Y1 % _P
    S = 4 * X1 * YY % _P
    M = 3 * X1 * X1 % _P
    X3 = (M * M - 2 * S) % _P
    Y3 = (M * (S - X3) - 8 * YY * YY) % _P
    Z3 = 2 * Y1 * Z1 % _P
    return (X3, Y3, Z3)


def _jac_add_affine(P, x2, y2):
    """Mixed addition: Jacobian P plus affine (x2, y2)."""
    X1, Y1, Z1 = P
    if Z1 == 0:
        return (x2, y2, 1)
    Z1Z1 = Z1 * Z1 % _P
    U2 = x2 * Z1Z1 % _P
    S2 = y2 * Z1 * Z1Z1 % _P
    H = (U2 - X1) % _P
    R = (S2 - Y1) % _P
    if H == 0:
        if R == 0:
            return _jac_double(P)
        return (0, 1, 0)
    HH = H * H % _P
    HHH = H * HH % _P
    V = X1 * HH % _P
    X3 = (R * R - HHH - 2 * V) % _P
    Y3 = (R * (V - X3) - Y1 * HHH) % _P
    Z3 = Z1 * H % _P
    return (X3, Y3, Z3)


def _jac_add(P, Q):
    X2, Y2, Z2 = Q
    if Z2 == 0:
        return P
    if Z2 == 1:
        return _jac_add_affine(P, X2, Y2)
    X1, Y1, Z1 = P
    if Z1 == 0:
        return Q
    Z1Z1 = Z1 * Z1 % _P
    Z2Z2 = Z2 * Z2 % _P
    U1 = X1 * Z2Z2 % _P
    U2 = X2 * Z1Z1 % _P
    S1 = Y1 * Z2 * Z2Z2 % _P
    S2 = Y2 * Z1 * Z1Z1 % _P
    H = (U2 - U1) % _P
    R = (S2 - S1) % _P
    if H == 0:
        if R == 0:
            return _jac_double(P)
        return (0, 1, 0)
    HH = H * H % _P
    HHH = H * HH % _P
    V = U1 * HH % _P
    X3 = (R * R - HHH - 2 * V) % _P
    Y3 = (R * (V - X3) - S1 * HHH) % _P
    Z3 = Z1 * Z2 * H % _P
    return (X3, Y3, Z3)


def _to_affine(P):
    X, Y, Z = P
    if Z == 0:
        return _INF
    zi = pow(Z, -1, _P)
    zi2 = zi * zi % _P
    return (X * zi2 % _P, Y * zi2 * zi % _P)


def _to_jac(a):
    return (0, 1, 0) if a is _INF else (a[0], a[1], 1)


class Secp256k1(Group):
    """secp256k1 with fixed-base tables for registered bases (generators)."""

    _WINDOW = 4

    def __init__(self):
        self.name = "secp256k1"
        self.p = _P
        self.order = _N
        self.scalar_size = 32
        self.element_size = 33
        self._tables: dict[tuple[int, int], list[list[tuple[int, int]]]] = {}
        self.G = self._wrap((_GX, _GY))
        self.precompute(self.G)

    def _op(self, a, b):
        if a is _INF:
            return b
        if b is _INF:
            return a
        return _to_affine(_jac_add_affine(_to_jac(a), b[0], b[1]))

    def _inv(self, a):
        return _INF if a is _INF else (a[0], (-a[1]) % _P)

    def _is_identity(self, a) -> bool:
        return a is _INF

    def identity(self) -> GroupElement:
        return self._wrap(_INF)

    def is_on_curve(self, x: int, y: int) -> bool:
        return (y * y - x * x * x - 7) % _P == 0

    def precompute(self, element: GroupElement) -> None:
        """Build a 4-bit fixed-window table so later ``exp`` calls need no doublings."""
        pt = element.value
        if pt is _INF or pt in self._tables:
            return
        table = []
        base = _to_jac(pt)
        for _ in range(256 // self._WINDOW):
            row = [(0, 1, 0)]
            for _d in range(1, 1 << self._WINDOW):
                row.append(_jac_add(row[-1], base))
            table.append([_to_affine(r) if r[2] else _INF for r in row])
            base = _jac_add(row[-1], base)  # 16 * base
        self._tables[pt] = table

    def exp(self, base: GroupElement, e: int) -> GroupElement:
        e %= _N
        pt = base.value
        if pt is _INF or e == 0:
            return self.identity()
        table = self._tables.get(pt)
        if table is not None:
            acc = (0, 1, 0)
            i = 0
            while e:
                d = e & 0xF
                if d:
                    x, y = table[i][d]
                    acc = _jac_add_affine(acc, x, y)
                e >>= 4
                i += 1
            return self._wrap(_to_affine(acc))
        # sliding 4-bit window, table of odd multiples is overkill here
        small = [(0, 1, 0), _to_jac(pt)]
        for _ in range(14):
            small.append(_jac_add(small[-1], small[1]))
        acc = (0, 1, 0)
        for shift in range((e.bit_length() + 3) // 4 * 4 - 4, -4, -4):
            for _ in range(4):
                acc = _jac_double(acc)
            d = (e >> shift) & 0xF
            if d:
                acc = _jac_add(acc, small[d])
        return self._wrap(_to_affine(acc))

    def multi_exp(self, bases, exponents):
        if len(bases) != len(exponents):
            raise GroupError(f"arity mismatch: {len(bases)} bases, {len(exponents)} exponents")
        acc = (0, 1, 0)
        for b, e in zip(bases, exponents):
            e %= _N
            if e and b.value is not _INF:
                term = self.exp(b, e).value
                if term is not _INF:
                    acc = _jac_add_affine(acc, term[0], term[1])
        return self._wrap(_to_affine(acc))

    def encode(self, element: GroupElement) -> bytes:
        pt = element.value
        if pt is _INF:
            # SEC1 infinity is a single 0x00; pad so the width stays fixed
            return bytes(self.element_size)
        x, y = pt
        return bytes([2 + (y & 1)]) + x.to_bytes(32, "big")

    def decode(self, data: bytes) -> GroupElement:
        if len(data) != self.element_size:
            raise GroupError("compressed point must be 33 bytes")
        if data == bytes(self.element_size):
            return self.identity()
        prefix = data[0]
        if prefix not in (2, 3):
            raise GroupError("bad SEC1 prefix")
        x = int.from_bytes(data[1:], "big")
        y = self._lift_x(x, prefix & 1)
        if y is None:
            raise GroupError("x coordinate not on secp256k1")
        return self._wrap((x, y))

    @staticmethod
    def _lift_x(x: int, parity: int) -> Optional[int]:
        if x >= _P:
            return None
        rhs = (pow(x, 3, _P) + 7) % _P
        y = pow(rhs, (_P + 1) // 4, _P)
        if y * y % _P != rhs:
            return None
        return y if (y & 1) == parity else _P - y

    def hash_to_element(self, label: bytes) -> GroupElement:
        """Try-and-increment: x = SHA-256(label || ctr), first x on the curve, even y."""
        ctr = 0
        while True:
            x = int.from_bytes(hashlib.sha256(label + ctr.to_bytes(4, "big")).digest(), "big")
            y = self._lift_x(x, 0)
            if y is not None:
                return self._wrap((x, y))
            ctr += 1


TEST_GROUP = SchnorrGroup(47, 23)
SECP256K1 = Secp256k1()

BACKENDS = ("test", "secp256k1")
GENERATOR_LABEL = b"dlrep-anchor/gen/"


@dataclass(frozen=True)
class GroupParams:
    """A generator basis g_0..g_n over one backend."""

    backend: str
    group: Group = field(repr=False)
    generators: tuple[GroupElement, ...]

    def __post_init__(self):
        # issuer bases always have n >= 1 (make_params); a lone g_0 basis is the
        # Schnorr instance used for the h_00 well-formedness proof
        if not self.generators:
            raise GroupError("empty generator basis")
        if any(g.is_identity() for g in self.generators):
            raise GroupError("generators must be non-identity")

    @property
    def q(self) -> int:
        return self.group.order

    @property
    def n(self) -> int:
        """Number of attributes (generators minus the blinding one)."""
        return len(self.generators) - 1

    def restrict(self, indices: Sequence[int]) -> "GroupParams":
        return GroupParams(self.backend, self.group, tuple(self.generators[i] for i in indices))


def make_params(backend: str = "test", n: int = 2) -> GroupParams:
    """Generator basis for ``n`` attributes.

    The test backend uses g_j = 2^(j+1) mod 47, i.e. (2, 4, 8) for n=2.  On
    secp256k1 g_j is derived from ``"dlrep-anchor/gen/" + str(j)``.
    """
    if n < 1:
        raise GroupError("n must be at least 1")
    if backend == "test":
        if n + 1 > 22:
            raise GroupError("test backend supports at most 21 attributes")
        gens = tuple(TEST_GROUP.element(pow(2, j + 1, 47)) for j in range(n + 1))
        return GroupParams("test", TEST_GROUP, gens)
    if backend == "secp256k1":
        gens = tuple(_secp_generator(j) for j in range(n + 1))
        return GroupParams("secp256k1", SECP256K1, gens)
    raise GroupError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


_SECP_GEN_CACHE: dict[int, GroupElement] = {}


def _secp_generator(j: int) -> GroupElement:
    g = _SECP_GEN_CACHE.get(j)
    if g is None:
        g = SECP256K1.hash_to_element(GENERATOR_LABEL + str(j).encode("ascii"))
        SECP256K1.precompute(g)
        _SECP_GEN_CACHE[j] = g
    return g


def group_for(backend: str) -> Group:
    if backend == "test":
        return TEST_GROUP
    if backend == "secp256k1":
        return SECP256K1
    raise GroupError(f"unknown backend {backend!r}")


def multi_exp(params: GroupParams, exponents: Sequence[int]) -> GroupElement:
    """prod_j g_j^{exponents[j]} over the params' basis."""
    if len(exponents) != len(params.generators):
        raise GroupError(
            f"arity mismatch: {len(params.generators)} generators, {len(exponents)} exponents"
        )
    return params.group.multi_exp(params.generators, exponents)


def hash_to_scalar(data: bytes, q: int) -> int:
    return int.from_bytes(hashlib.sha256(data).digest(), "big") % q


def random_scalar(q: int, rng: Optional[random.Random] = None) -> int:
    """Uniform in [0, q).  Pass a seeded ``random.Random`` for reproducible runs."""
    if rng is None:
        return secrets.randbelow(q)
    return rng.randrange(q)
