"""DLREP commitments and the interactive proofs run against them.

A commitment is h = prod_j g_j^{X_j}; X_0 is the blinding secret and X_1..X_n
are attributes.  Every statement supported here (plain knowledge, revealing a
subset of attributes, AND of linear relations over attributes) is reduced to a
proof of knowledge of a representation over a derived basis:

1. revealed attributes are divided out of h;
2. the relations are put in reduced row-echelon form mod q, each pivot
   attribute becomes an affine function of the free ones and is folded into the
   basis, so the verifier recomputes the pivot responses rather than receiving
   them.

For the knowledge statement the derived basis is the original one and the
protocol is exactly: A = prod g_j^{a_j}; b_j = a_j + c X_j; check
prod g_j^{b_j} h^{-c} == A.
"""

from __future__ import annotations

import logging
import random
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .group import GroupElement, GroupError, GroupParams, hash_to_scalar, multi_exp, random_scalar

log = logging.getLogger(__name__)


class ProofError(Exception):
    """Base class for proof-layer failures."""


class PolicyError(ProofError):
    """Statement asks for something forbidden, e.g. revealing or constraining X_0."""


class CannotProve(ProofError):
    """The prover's secrets do not satisfy the statement, or the statement is inconsistent."""


class StateReused(ProofError):
    """A proof commitment was answered more than once."""


class ExtractionError(ProofError, ZeroDivisionError):
    pass


@dataclass(frozen=True)
class LinearRelation:
    """sum_j coefficients[j] * X_j = constant (mod q), j >= 1."""

    coefficients: tuple[tuple[int, int], ...]
    constant: int

    def __post_init__(self):
        idx = [j for j, _ in self.coefficients]
        if 0 in idx:
            raise PolicyError("relations may not reference X_0")
        if any(j < 0 for j in idx) or len(set(idx)) != len(idx):
            raise PolicyError("relation indices must be distinct positive integers")

    @classmethod
    def of(cls, coefficients: Mapping[int, int], constant: int) -> "LinearRelation":
        return cls(tuple(sorted((int(j), int(a)) for j, a in coefficients.items())), int(constant))

    def holds(self, secrets: Sequence[int], q: int) -> bool:
        return sum(a * secrets[j] for j, a in self.coefficients) % q == self.constant % q


@dataclass(frozen=True)
class Statement:
    """What the prover demonstrates about h: revealed attributes plus AND-ed relations."""

    revealed: tuple[tuple[int, int], ...] = ()
    relations: tuple[LinearRelation, ...] = ()

    def __post_init__(self):
        idx = [j for j, _ in self.revealed]
        if 0 in idx:
            raise PolicyError("X_0 is secret and can never be revealed")
        if len(set(idx)) != len(idx):
            raise PolicyError("duplicate revealed index")

    @classmethod
    def disclosure(cls, revealed: Mapping[int, int], relations: Iterable[LinearRelation] = ()):
        return cls(tuple(sorted((int(j), int(v)) for j, v in revealed.items())), tuple(relations))

    @property
    def revealed_map(self) -> dict[int, int]:
        return dict(self.revealed)

    @property
    def kind(self) -> str:
        if not self.revealed and not self.relations:
            return "knowledge"
        if not self.relations:
            return "disclosure"
        if not self.revealed:
            return "linear"
        return "mixed"

    def indices(self) -> set[int]:
        out = {j for j, _ in self.revealed}
        for r in self.relations:
            out.update(j for j, _ in r.coefficients)
        return out

    def holds(self, secrets: Sequence[int], q: int) -> bool:
        return all(secrets[j] % q == v % q for j, v in self.revealed) and all(
            r.holds(secrets, q) for r in self.relations
        )

    def normalized(self, q: int) -> "Statement":
        """Relation coefficients and constants reduced mod q (revealed values untouched)."""
        rels = tuple(
            LinearRelation(tuple((j, a % q) for j, a in r.coefficients if a % q), r.constant % q)
            for r in self.relations
        )
        return Statement(self.revealed, rels)

    def to_bytes(self, group) -> bytes:
        scalar_size = group.scalar_size

        def sc(x: int) -> bytes:
            return x.to_bytes(scalar_size, "big")

        norm = self.normalized(group.order)

        kind = {"knowledge": 1, "disclosure": 2, "linear": 3, "mixed": 4}[norm.kind]
        out = bytearray([kind])
        out += struct.pack(">H", len(norm.revealed))
        for j, v in norm.revealed:
            out += struct.pack(">H", j) + sc(v)
        out += struct.pack(">H", len(norm.relations))
        for r in norm.relations:
            out += struct.pack(">H", len(r.coefficients))
            for j, a in r.coefficients:
                out += struct.pack(">H", j) + sc(a)
            out += sc(r.constant)
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes, group) -> "Statement":
        pos = 1
        s = group.scalar_size

        def u16() -> int:
            nonlocal pos
            (v,) = struct.unpack_from(">H", data, pos)
            pos += 2
            return v

        def sc() -> int:
            nonlocal pos
            if pos + s > len(data):
                raise ProofError("truncated statement")
            v = int.from_bytes(data[pos : pos + s], "big")
            pos += s
            return v

        if not data or data[0] not in (1, 2, 3, 4):
            raise ProofError("bad statement tag")
        try:
            return cls._parse(data, group, u16, sc)
        except (struct.error, PolicyError) as exc:
            raise ProofError(f"malformed statement: {exc}") from exc

    @classmethod
    def _parse(cls, data, group, u16, sc) -> "Statement":
        revealed = []
        for _ in range(u16()):
            j = u16()
            revealed.append((j, sc()))
        relations = []
        for _ in range(u16()):
            coeffs = []
            for _ in range(u16()):
                j = u16()
                coeffs.append((j, sc()))
            relations.append(LinearRelation(tuple(coeffs), sc()))
        st = cls(tuple(revealed), tuple(relations))
        if st.to_bytes(group) != bytes(data):
            raise ProofError("statement tag does not match contents")
        return st


KNOWLEDGE = Statement()


@dataclass(frozen=True)
class _Reduction:
    free: tuple[int, ...]
    # pivot index -> (constant, {free index: multiplier}); X_p = constant - sum m_f X_f
    pivots: dict[int, tuple[int, dict[int, int]]]
    basis: tuple[GroupElement, ...]
    target: GroupElement


def _reduce(params: GroupParams, h: GroupElement, statement: Statement) -> _Reduction:
    """Fold revealed values and relations into a derived basis and target.

    Raises CannotProve if the relations are inconsistent once revealed values
    are substituted, and PolicyError for indices outside 1..n.
    """
    q = params.q
    n = params.n
    g = params.generators
    for j in statement.indices():
        if not 1 <= j <= n:
            raise PolicyError(f"attribute index {j} outside 1..{n}")
    revealed = statement.revealed_map
    for v in revealed.values():
        if not 0 <= v < q:
            raise ProofError(f"revealed value {v} outside [0, q)")
    hidden = [j for j in range(n + 1) if j not in revealed]

    target = h
    for j, v in revealed.items():
        target = target / (g[j] ** v)

    # rows: [coeff per hidden col] + [rhs]
    col = {j: i for i, j in enumerate(hidden)}
    rows = []
    for r in statement.relations:
        row = [0] * (len(hidden) + 1)
        rhs = r.constant
        for j, a in r.coefficients:
            if j in revealed:
                rhs -= a * revealed[j]
            else:
                row[col[j]] = (row[col[j]] + a) % q
        row[-1] = rhs % q
        rows.append(row)

    pivot_cols: list[int] = []
    r_i = 0
    for c_i in range(len(hidden)):
        sel = next((k for k in range(r_i, len(rows)) if rows[k][c_i]), None)
        if sel is None:
            continue
        rows[r_i], rows[sel] = rows[sel], rows[r_i]
        inv = pow(rows[r_i][c_i], -1, q)
        rows[r_i] = [x * inv % q for x in rows[r_i]]
        for k in range(len(rows)):
            if k != r_i and rows[k][c_i]:
                f = rows[k][c_i]
                rows[k] = [(x - f * y) % q for x, y in zip(rows[k], rows[r_i])]
        pivot_cols.append(c_i)
        r_i += 1
    for row in rows[r_i:]:
        if row[-1]:
            raise CannotProve("relations are inconsistent")

    pivots: dict[int, tuple[int, dict[int, int]]] = {}
    pivot_set = set(pivot_cols)
    free = tuple(j for i, j in enumerate(hidden) if i not in pivot_set)
    for k, c_i in enumerate(pivot_cols):
        row = rows[k]
        mult = {hidden[i]: row[i] for i in range(len(hidden)) if i not in pivot_set and row[i]}
        pivots[hidden[c_i]] = (row[-1], mult)

    basis = []
    for f in free:
        b = g[f]
        for p, (_, mult) in pivots.items():
            if f in mult:
                b = b / (g[p] ** mult[f])
        basis.append(b)
    for p, (const, _) in pivots.items():
        target = target / (g[p] ** const)
    return _Reduction(free, pivots, tuple(basis), target)


def _expand(red: _Reduction, free_values: Sequence[int], c_scale: int, q: int, n: int) -> dict[int, int]:
    """Full hidden vector from free values; pivots get c_scale * const - sum m_f v_f."""
    out = dict(zip(red.free, free_values))
    for p, (const, mult) in red.pivots.items():
        out[p] = (c_scale * const - sum(m * out[f] for f, m in mult.items())) % q
    return out


@dataclass(frozen=True)
class DlrepCommitment:
    params: GroupParams
    h: GroupElement


def commit(params: GroupParams, secrets: Sequence[int]) -> DlrepCommitment:
    return DlrepCommitment(params, multi_exp(params, secrets))


@dataclass
class ProofCommitmentState:
    """Prover's first move.  Answer exactly one challenge with it."""

    A: GroupElement
    nonces: tuple[int, ...]
    statement: Statement
    used: bool = field(default=False)


@dataclass(frozen=True)
class ProofTranscript:
    A: GroupElement
    c: int
    responses: tuple[int, ...]  # one per free index of the reduced statement
    statement: Statement = KNOWLEDGE

    def to_bytes(self, params: GroupParams) -> bytes:
        grp = params.group
        st = self.statement.to_bytes(grp)
        return (
            b"\x50"
            + grp.encode(self.A)
            + grp.encode_scalar(self.c)
            + struct.pack(">H", len(self.responses))
            + b"".join(grp.encode_scalar(b) for b in self.responses)
            + struct.pack(">I", len(st))
            + st
        )

    @classmethod
    def from_bytes(cls, params: GroupParams, data: bytes) -> "ProofTranscript":
        grp = params.group
        es, ss = grp.element_size, grp.scalar_size
        try:
            if data[0] != 0x50:
                raise ProofError("bad transcript tag")
            pos = 1
            A = grp.decode(data[pos : pos + es])
            pos += es
            c = grp.decode_scalar(data[pos : pos + ss])
            pos += ss
            (cnt,) = struct.unpack_from(">H", data, pos)
            pos += 2
            bs = []
            for _ in range(cnt):
                bs.append(grp.decode_scalar(data[pos : pos + ss]))
                pos += ss
            (slen,) = struct.unpack_from(">I", data, pos)
            pos += 4
            st = Statement.from_bytes(data[pos : pos + slen], grp)
            if pos + slen != len(data):
                raise ProofError("trailing bytes after transcript")
        except (IndexError, struct.error, GroupError) as exc:
            raise ProofError(f"malformed transcript: {exc}") from exc
        return cls(A, c, tuple(bs), st)


def prove_begin(
    params: GroupParams,
    secrets: Sequence[int],
    statement: Statement = KNOWLEDGE,
    rng: Optional[random.Random] = None,
    nonces: Optional[Sequence[int]] = None,
) -> ProofCommitmentState:
    """Step 1: fresh nonces for the free positions, A = prod g_j^{a_j}.

    ``secrets`` are checked against the statement up front so an unsatisfiable
    request fails here instead of producing a transcript that will not verify.
    """
    q = params.q
    if len(secrets) != params.n + 1:
        raise GroupError(f"expected {params.n + 1} secrets, got {len(secrets)}")
    h = multi_exp(params, secrets)
    red = _reduce(params, h, statement)
    if not statement.holds(secrets, q):
        raise CannotProve("secrets do not satisfy the statement")
    if nonces is None:
        nonces = tuple(random_scalar(q, rng) for _ in red.free)
    elif len(nonces) != len(red.free):
        raise GroupError(f"expected {len(red.free)} nonces, got {len(nonces)}")
    nonces = tuple(a % q for a in nonces)
    A = params.group.multi_exp(red.basis, nonces)
    return ProofCommitmentState(A, nonces, statement.normalized(q))


def prove_respond(
    params: GroupParams, state: ProofCommitmentState, c: int, secrets: Sequence[int]
) -> ProofTranscript:
    """Step 3: b_j = a_j + c X_j over the free positions."""
    if state.used:
        raise StateReused("this commitment already answered a challenge; start a new proof")
    q = params.q
    if not 0 <= c < q:
        raise ProofError(f"challenge {c} outside [0, q)")
    state.used = True
    red = _reduce(params, multi_exp(params, secrets), state.statement)
    bs = tuple((a + c * secrets[j]) % q for a, j in zip(state.nonces, red.free))
    return ProofTranscript(state.A, c, bs, state.statement)


def verification_failure(
    params: GroupParams, h: GroupElement, statement: Statement, transcript: ProofTranscript
) -> Optional[str]:
    """None if the transcript proves ``statement`` about ``h``, else a reason."""
    q = params.q
    if transcript.statement.normalized(q) != statement.normalized(q):
        return "transcript is for a different statement"
    if not 0 <= transcript.c < q:
        return "challenge out of range"
    if any(not 0 <= b < q for b in transcript.responses):
        return "response out of range"
    try:
        red = _reduce(params, h, statement)
    except CannotProve:
        return "statement is unsatisfiable"
    except ProofError as exc:
        return str(exc)
    if len(transcript.responses) != len(red.free):
        return f"expected {len(red.free)} responses, got {len(transcript.responses)}"
    lhs = params.group.multi_exp(red.basis, transcript.responses) / (red.target ** transcript.c)
    if lhs != transcript.A:
        return "verification equation does not hold"
    return None


def verify(params: GroupParams, h: GroupElement, statement: Statement, transcript: ProofTranscript) -> bool:
    reason = verification_failure(params, h, statement, transcript)
    if reason is not None:
        log.debug("proof rejected: %s", reason)
    return reason is None


def verify_knowledge(params: GroupParams, h: GroupElement, transcript: ProofTranscript) -> bool:
    return verify(params, h, KNOWLEDGE, transcript)


def verify_disclosure(
    params: GroupParams, h: GroupElement, revealed: Mapping[int, int], transcript: ProofTranscript
) -> bool:
    return verify(params, h, Statement.disclosure(revealed), transcript)


def verify_linear(
    params: GroupParams,
    h: GroupElement,
    relations: Sequence[LinearRelation],
    transcript: ProofTranscript,
) -> bool:
    return verify(params, h, Statement((), tuple(relations)), transcript)


def prove(
    params: GroupParams,
    secrets: Sequence[int],
    c: int,
    statement: Statement = KNOWLEDGE,
    rng: Optional[random.Random] = None,
) -> ProofTranscript:
    """Run both prover moves against a known challenge (local testing)."""
    state = prove_begin(params, secrets, statement, rng)
    return prove_respond(params, state, c, secrets)


def prove_disclosure(params, secrets, revealed_indices: Iterable[int], c: int, rng=None) -> ProofTranscript:
    st = Statement.disclosure({j: secrets[j] for j in revealed_indices})
    return prove(params, secrets, c, st, rng)


def prove_linear(params, secrets, relations: Sequence[LinearRelation], c: int, rng=None) -> ProofTranscript:
    return prove(params, secrets, c, Statement((), tuple(relations)), rng)


def simulate_transcript(
    params: GroupParams,
    h: GroupElement,
    c: int,
    statement: Statement = KNOWLEDGE,
    rng: Optional[random.Random] = None,
) -> ProofTranscript:
    """Accepting transcript for a fixed challenge, built without any secrets."""
    q = params.q
    red = _reduce(params, h, statement)
    bs = tuple(random_scalar(q, rng) for _ in red.free)
    A = params.group.multi_exp(red.basis, bs) / (red.target ** c)
    return ProofTranscript(A, c % q, bs, statement)


def extract_witness(
    params: GroupParams, h: GroupElement, t1: ProofTranscript, t2: ProofTranscript
) -> list[int]:
    """Special-soundness extractor: two accepting answers to one A give the secrets."""
    q = params.q
    if t1.A != t2.A or t1.statement.normalized(q) != t2.statement.normalized(q):
        raise ProofError("transcripts must share A and statement")
    if (t1.c - t2.c) % q == 0:
        raise ExtractionError("challenges are equal; nothing to extract")
    red = _reduce(params, h, t1.statement)
    inv = pow((t1.c - t2.c) % q, -1, q)
    free_vals = [(b1 - b2) * inv % q for b1, b2 in zip(t1.responses, t2.responses)]
    hidden = _expand(red, free_vals, 1, q, params.n)
    secrets = [0] * (params.n + 1)
    for j, v in t1.statement.revealed:
        secrets[j] = v
    for j, v in hidden.items():
        secrets[j] = v
    return secrets


def fiat_shamir_challenge(
    params: GroupParams, h: GroupElement, A: GroupElement, session_id: bytes, statement: Statement
) -> int:
    """Deterministic challenge for self-tests only; the protocol itself is interactive."""
    grp = params.group
    data = grp.encode(h) + grp.encode(A) + session_id + statement.to_bytes(grp)
    return hash_to_scalar(data, params.q)


def blinding_reuse_attack(
    params: GroupParams, h: GroupElement, h_prime: GroupElement, deltas: Sequence[int]
) -> bool:
    """True iff h / h' == prod_{j>=1} g_j^{deltas[j-1]}.

    When two commitments share X_0 the quotient has no blinding factor left, so
    guessing the attribute differences confirms them.
    """
    if len(deltas) != params.n:
        raise GroupError(f"expected {params.n} deltas")
    rhs = params.group.multi_exp(params.generators[1:], [d % params.q for d in deltas])
    return h / h_prime == rhs


def dictionary_search(
    params: GroupParams, h: GroupElement, h_prime: GroupElement, candidates: Iterable[Sequence[int]]
) -> list[tuple[int, ...]]:
    """All candidate delta vectors that explain h / h'."""
    return [tuple(d) for d in candidates if blinding_reuse_attack(params, h, h_prime, d)]
