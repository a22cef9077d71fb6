"""Simulated Bitcoin-style ledger for anchoring issuer roots.

Transactions serialize in the legacy Bitcoin raw format (version, inputs,
outputs, locktime) so sizes and txids behave like the real thing; spend
authorization is a Schnorr signature in a fixed 107-byte signature script
rather than interpreted Script.  Amounts are integer satoshi.

An issuer's anchoring chain is a sequence of enrollment transactions, each
spending output 0 of the previous one (a pay-to-address output back to the
issuer) and carrying ``root || cm`` in an OP_RETURN output.  Exactly one output
of the chain is unspent at any time, which is what makes the latest root
unequivocal.
"""

from __future__ import annotations

import copy
import hashlib
import logging
import struct
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import Optional

from . import keys
from .smt import CommitmentChain, advance_cm

log = logging.getLogger(__name__)

SAT_PER_BTC = 100_000_000
DEFAULT_DUST = 500
MAX_DATA = 80
ANCHOR_PAYLOAD = 64
SCRIPT_SIG_SIZE = 107
NULL_TXID = bytes(32)
COINBASE_INDEX = 0xFFFFFFFF


class LedgerError(Exception):
    pass


class DoubleSpend(LedgerError):
    def __init__(self, outpoint: "Outpoint", spender: bytes):
        super().__init__(f"outpoint {outpoint} already spent by {spender.hex()}")
        self.outpoint = outpoint
        self.spender = spender


class UnknownOutpoint(LedgerError):
    pass


class DustOutput(LedgerError):
    pass


class NegativeFee(LedgerError):
    pass


class BadAuthorization(LedgerError):
    pass


class FormatError(LedgerError):
    pass


class LookupFailed(LedgerError):
    pass


class IntegrityAlarm(LedgerError):
    """Anchoring chain spent by something that is not an enrollment transaction."""


class ForkDetected(LedgerError):
    def __init__(self, heads):
        super().__init__(f"{len(heads)} competing anchoring heads visible")
        self.heads = heads


def dsha256(data: bytes) -> bytes:
    return hashlib.sha256(hashlib.sha256(data).digest()).digest()


def varint(n: int) -> bytes:
    if n < 0xFD:
        return bytes([n])
    if n <= 0xFFFF:
        return b"\xfd" + struct.pack("<H", n)
    if n <= 0xFFFFFFFF:
        return b"\xfe" + struct.pack("<I", n)
    return b"\xff" + struct.pack("<Q", n)


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    first = data[pos]
    if first < 0xFD:
        return first, pos + 1
    fmt, size = {0xFD: ("<H", 2), 0xFE: ("<I", 4), 0xFF: ("<Q", 8)}[first]
    return struct.unpack_from(fmt, data, pos + 1)[0], pos + 1 + size


def p2pkh_script(address: bytes) -> bytes:
    return b"\x76\xa9\x14" + address + b"\x88\xac"


def data_script(payload: bytes) -> bytes:
    if len(payload) > MAX_DATA:
        raise FormatError(f"OP_RETURN payload of {len(payload)} bytes exceeds {MAX_DATA}")
    if len(payload) <= 75:
        return b"\x6a" + bytes([len(payload)]) + payload
    return b"\x6a\x4c" + bytes([len(payload)]) + payload


@dataclass(frozen=True)
class Outpoint:
    txid: bytes
    index: int

    def __str__(self) -> str:
        return f"{self.txid.hex()}:{self.index}"


@dataclass(frozen=True)
class TxOut:
    kind: str  # "pay" or "data"
    amount: int
    address: bytes = b""
    payload: bytes = b""

    def script(self) -> bytes:
        return p2pkh_script(self.address) if self.kind == "pay" else data_script(self.payload)


@dataclass(frozen=True)
class TxIn:
    prev: Outpoint
    pubkey: bytes = b""
    signature: bytes = b""
    coinbase: bytes = b""  # tag for funding transactions, which have a null prev

    @property
    def is_coinbase(self) -> bool:
        return self.prev.txid == NULL_TXID and self.prev.index == COINBASE_INDEX

    def script_sig(self) -> bytes:
        if self.is_coinbase:
            return self.coinbase
        if not self.signature:
            return b""
        # <push 72: sig64 || pad || sighash_all> <push 33: pubkey>
        return b"\x48" + self.signature + bytes(7) + b"\x01" + b"\x21" + self.pubkey


@dataclass(frozen=True)
class SimTransaction:
    inputs: tuple[TxIn, ...]
    outputs: tuple[TxOut, ...]
    version: int = 1
    locktime: int = 0

    def encode(self, strip_sigs: bool = False) -> bytes:
        out = bytearray(struct.pack("<i", self.version))
        out += varint(len(self.inputs))
        for tin in self.inputs:
            out += tin.prev.txid + struct.pack("<I", tin.prev.index)
            ss = b"" if strip_sigs and not tin.is_coinbase else tin.script_sig()
            out += varint(len(ss)) + ss + b"\xff\xff\xff\xff"
        out += varint(len(self.outputs))
        for o in self.outputs:
            sc = o.script()
            out += struct.pack("<q", o.amount) + varint(len(sc)) + sc
        out += struct.pack("<I", self.locktime)
        return bytes(out)

    @property
    def txid(self) -> bytes:
        return dsha256(self.encode())

    def sighash(self) -> bytes:
        return dsha256(self.encode(strip_sigs=True) + struct.pack("<I", 1))

    def signed(self, key: keys.KeyPair) -> "SimTransaction":
        """Sign every non-coinbase input with ``key``."""
        sig = key.sign(self.sighash())
        ins = tuple(
            tin if tin.is_coinbase else TxIn(tin.prev, key.pk_bytes, sig) for tin in self.inputs
        )
        return SimTransaction(ins, self.outputs, self.version, self.locktime)

    def anchor_payload(self) -> Optional[bytes]:
        for o in self.outputs:
            if o.kind == "data" and len(o.payload) == ANCHOR_PAYLOAD:
                return o.payload
        return None

    @classmethod
    def decode(cls, raw: bytes) -> "SimTransaction":
        try:
            return cls._decode(raw)
        except (IndexError, struct.error, KeyError) as exc:
            raise FormatError(f"malformed raw transaction: {exc}") from exc

    @classmethod
    def _decode(cls, raw: bytes) -> "SimTransaction":
        (version,) = struct.unpack_from("<i", raw, 0)
        pos = 4
        nin, pos = _read_varint(raw, pos)
        ins = []
        for _ in range(nin):
            txid = raw[pos : pos + 32]
            (idx,) = struct.unpack_from("<I", raw, pos + 32)
            pos += 36
            slen, pos = _read_varint(raw, pos)
            ss = raw[pos : pos + slen]
            pos += slen + 4
            prev = Outpoint(bytes(txid), idx)
            if txid == NULL_TXID and idx == COINBASE_INDEX:
                ins.append(TxIn(prev, coinbase=bytes(ss)))
            elif not ss:
                ins.append(TxIn(prev))
            else:
                if slen != SCRIPT_SIG_SIZE or ss[0] != 0x48 or ss[73] != 0x21:
                    raise FormatError("unexpected signature script layout")
                ins.append(TxIn(prev, bytes(ss[74:107]), bytes(ss[1:65])))
        nout, pos = _read_varint(raw, pos)
        outs = []
        for _ in range(nout):
            (amount,) = struct.unpack_from("<q", raw, pos)
            pos += 8
            slen, pos = _read_varint(raw, pos)
            sc = bytes(raw[pos : pos + slen])
            pos += slen
            if slen == 25 and sc[:3] == b"\x76\xa9\x14" and sc[23:] == b"\x88\xac":
                outs.append(TxOut("pay", amount, address=sc[3:23]))
            elif sc[:1] == b"\x6a":
                body = sc[2:] if sc[1] != 0x4C else sc[3:]
                outs.append(TxOut("data", amount, payload=body))
            else:
                raise FormatError("unsupported output script")
        (locktime,) = struct.unpack_from("<I", raw, pos)
        if pos + 4 != len(raw):
            raise FormatError("trailing bytes after locktime")
        return cls(tuple(ins), tuple(outs), version, locktime)


def encode_raw_tx(tx: SimTransaction) -> bytes:
    return tx.encode()


def canonical_enroll_tx() -> SimTransaction:
    """A representative signed single-input enrollment transaction (for sizing)."""
    key = keys.KeyPair(1, keys._G)
    prev = Outpoint(bytes(range(32)), 0)
    tx = build_enroll_tx(prev, key, bytes(32), bytes(32), amount=DEFAULT_DUST)
    return tx


def build_enroll_tx(
    prev: Outpoint, key: keys.KeyPair, root: bytes, cm: bytes, amount: int
) -> SimTransaction:
    """Spend the previous anchor output; pay ``amount`` back to the issuer; publish root||cm.

    ``amount`` is what stays on the anchoring output; the rest of the input
    value is the fee.
    """
    payload = root + cm
    if len(payload) != ANCHOR_PAYLOAD:
        raise FormatError(f"anchor payload must be {ANCHOR_PAYLOAD} bytes, got {len(payload)}")
    tx = SimTransaction(
        (TxIn(prev),),
        (TxOut("pay", amount, address=key.address), TxOut("data", 0, payload=payload)),
    )
    return tx.signed(key)


@dataclass(frozen=True)
class EnrollChainHead:
    txid: bytes
    root: bytes
    cm: bytes
    t: int
    address: bytes


@dataclass
class HistoryCheck:
    ok: bool
    epoch: Optional[int] = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


@dataclass
class _State:
    utxo: dict[Outpoint, TxOut] = field(default_factory=dict)
    spent_by: dict[Outpoint, bytes] = field(default_factory=dict)
    txs: dict[bytes, SimTransaction] = field(default_factory=dict)
    height_of: dict[bytes, Optional[int]] = field(default_factory=dict)
    blocks: list[list[bytes]] = field(default_factory=list)
    pending: list[bytes] = field(default_factory=list)
    funded: int = 0
    fees: int = 0


class Ledger:
    """UTXO ledger with logical blocks and an optional competing fork branch.

    ``submit`` validates against the UTXO set (including transactions already
    waiting in the open block) and applies atomically; ``mine`` closes the
    block.  Queries count a transaction as confirmed once its block is mined.
    """

    def __init__(self, dust: int = DEFAULT_DUST):
        self.dust = dust
        self._s = _State()
        self._fork: Optional[_State] = None
        self._fund_counter = 0

    # -- basic queries ---------------------------------------------------------
    @property
    def height(self) -> int:
        return len(self._s.blocks)

    def get(self, txid: bytes, branch: str = "main") -> SimTransaction:
        st = self._state(branch)
        try:
            return st.txs[txid]
        except KeyError:
            raise LookupFailed(f"unknown txid {txid.hex()}") from None

    def confirmations(self, txid: bytes, branch: str = "main") -> int:
        st = self._state(branch)
        h = st.height_of.get(txid)
        if h is None:
            return 0
        return len(st.blocks) - h

    def utxo(self, branch: str = "main") -> dict[Outpoint, TxOut]:
        return dict(self._state(branch).utxo)

    def spender(self, outpoint: Outpoint, branch: str = "main", min_conf: int = 0) -> Optional[bytes]:
        st = self._state(branch)
        txid = st.spent_by.get(outpoint)
        if txid is None or self.confirmations(txid, branch) < min_conf:
            return None
        return txid

    @property
    def funded_total(self) -> int:
        return self._s.funded

    @property
    def fees_total(self) -> int:
        return self._s.fees

    def blocks(self, branch: str = "main") -> list[list[bytes]]:
        return [list(b) for b in self._state(branch).blocks]

    def _state(self, branch: str) -> _State:
        if branch == "main":
            return self._s
        if branch == "fork":
            if self._fork is None:
                raise LedgerError("no fork is active")
            return self._fork
        raise LedgerError(f"unknown branch {branch!r}")

    @property
    def forked(self) -> bool:
        return self._fork is not None

    def branches(self) -> list[str]:
        return ["main", "fork"] if self._fork is not None else ["main"]

    # -- mutation ----------------------------------------------------------------
    def fund(self, address: bytes, amount: int, branch: str = "main") -> Outpoint:
        """Mint a funding output (a coinbase-like transaction with no real input)."""
        if amount < self.dust:
            raise DustOutput(f"funding amount {amount} below dust threshold {self.dust}")
        self._fund_counter += 1
        tin = TxIn(Outpoint(NULL_TXID, COINBASE_INDEX), coinbase=b"fund" + struct.pack(">Q", self._fund_counter))
        tx = SimTransaction((tin,), (TxOut("pay", amount, address=address),))
        st = self._state(branch)
        self._apply(st, tx, fee=0)
        st.funded += amount
        return Outpoint(tx.txid, 0)

    def submit(self, tx: SimTransaction, branch: str = "main") -> bytes:
        st = self._state(branch)
        fee = self._validate(st, tx)
        self._apply(st, tx, fee)
        log.debug("accepted %s into %s (fee %d)", tx.txid.hex(), branch, fee)
        return tx.txid

    def _validate(self, st: _State, tx: SimTransaction) -> int:
        if not tx.inputs:
            raise LedgerError("transaction has no inputs")
        seen = set()
        total_in = 0
        sighash = tx.sighash()
        for tin in tx.inputs:
            if tin.is_coinbase:
                raise LedgerError("coinbase inputs are only created by fund()")
            if tin.prev in seen:
                raise DoubleSpend(tin.prev, tx.txid)
            seen.add(tin.prev)
            prev_out = st.utxo.get(tin.prev)
            if prev_out is None:
                if tin.prev in st.spent_by:
                    raise DoubleSpend(tin.prev, st.spent_by[tin.prev])
                raise UnknownOutpoint(f"no such output {tin.prev}")
            if keys.address_of(tin.pubkey) != prev_out.address:
                raise BadAuthorization(f"public key does not match address of {tin.prev}")
            if not keys.verify(tin.pubkey, sighash, tin.signature):
                raise BadAuthorization(f"bad signature on input {tin.prev}")
            total_in += prev_out.amount
        total_out = 0
        for o in tx.outputs:
            if o.kind == "data":
                if o.amount != 0:
                    raise FormatError("OP_RETURN outputs must carry zero amount")
                if len(o.payload) > MAX_DATA:
                    raise FormatError("OP_RETURN payload too large")
            else:
                if o.amount < self.dust:
                    raise DustOutput(f"output of {o.amount} sat below dust threshold {self.dust}")
            total_out += o.amount
        fee = total_in - total_out
        if fee < 0:
            raise NegativeFee(f"outputs exceed inputs by {-fee} sat")
        return fee

    def _apply(self, st: _State, tx: SimTransaction, fee: int) -> None:
        txid = tx.txid
        for tin in tx.inputs:
            if not tin.is_coinbase:
                del st.utxo[tin.prev]
                st.spent_by[tin.prev] = txid
        for i, o in enumerate(tx.outputs):
            if o.kind == "pay":
                st.utxo[Outpoint(txid, i)] = o
        st.txs[txid] = tx
        st.height_of[txid] = None
        st.pending.append(txid)
        st.fees += fee

    def mine(self, branch: Optional[str] = None) -> int:
        """Close the open block on ``branch`` (all active branches if None)."""
        for name in [branch] if branch else self.branches():
            st = self._state(name)
            for txid in st.pending:
                st.height_of[txid] = len(st.blocks)
            st.blocks.append(st.pending)
            st.pending = []
        return self.height

    # -- forks -------------------------------------------------------------------
    def fork(self, at_height: Optional[int] = None) -> None:
        """Start a competing branch diverging after ``at_height`` blocks (default: tip)."""
        if self._fork is not None:
            raise LedgerError("a fork is already active")
        h = self.height if at_height is None else at_height
        if not 0 <= h <= self.height:
            raise LedgerError(f"fork height {h} outside 0..{self.height}")
        self._fork = self._replay(self._s.blocks[:h])

    def resolve_fork(self, keep: str = "main") -> None:
        if self._fork is None:
            return
        if keep == "fork":
            self._s = self._fork
        elif keep != "main":
            raise LedgerError(f"unknown branch {keep!r}")
        self._fork = None

    def _replay(self, blocks: list[list[bytes]]) -> _State:
        st = _State()
        for block in blocks:
            for txid in block:
                tx = self._s.txs[txid]
                if tx.inputs[0].is_coinbase:
                    self._apply(st, tx, 0)
                    st.funded += sum(o.amount for o in tx.outputs)
                else:
                    self._apply(st, tx, self._validate(st, tx))
            for txid in st.pending:
                st.height_of[txid] = len(st.blocks)
            st.blocks.append(st.pending)
            st.pending = []
        return st

    def copy(self) -> "Ledger":
        return copy.deepcopy(self)

    def rewrite_payload(self, txid: bytes, payload: bytes, branch: str = "main") -> None:
        """Overwrite a stored anchor payload in place, keeping the txid key.

        Models a corrupted or dishonest copy of the chain for audit tests;
        never used by honest parties.
        """
        st = self._state(branch)
        tx = st.txs[txid]
        outs = tuple(replace(o, payload=payload) if o.kind == "data" else o for o in tx.outputs)
        st.txs[txid] = replace(tx, outputs=outs)

    # -- persistence: one "block <h>" line, then one hex raw tx per line -----------
    def dump(self) -> str:
        lines = [f"dust {self.dust}"]
        for h, block in enumerate(self._s.blocks):
            lines.append(f"block {h}")
            lines.extend(self._s.txs[t].encode().hex() for t in block)
        if self._s.pending:
            lines.append("pending")
            lines.extend(self._s.txs[t].encode().hex() for t in self._s.pending)
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str) -> "Ledger":
        ledger = cls()
        in_block = False
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("dust "):
                ledger.dust = int(line.split()[1])
            elif line.startswith("block ") or line == "pending":
                if in_block:
                    ledger.mine()
                in_block = line != "pending"
            else:
                tx = SimTransaction.decode(bytes.fromhex(line))
                if tx.inputs[0].is_coinbase:
                    st = ledger._s
                    ledger._apply(st, tx, 0)
                    st.funded += sum(o.amount for o in tx.outputs)
                    ledger._fund_counter += 1
                else:
                    ledger.submit(tx)
        if in_block:
            ledger.mine()
        return ledger


# -- anchoring chain walks ------------------------------------------------------------


def _is_enroll(tx: SimTransaction, address: Optional[bytes] = None) -> bool:
    if len(tx.outputs) < 2 or tx.outputs[0].kind != "pay" or tx.anchor_payload() is None:
        return False
    return address is None or tx.outputs[0].address == address


def chain_txids(ledger: Ledger, genesis: bytes, branch: str = "main", min_conf: int = 1) -> list[bytes]:
    """Enrollment txids from ``genesis`` forward along spends of output 0."""
    tx = ledger.get(genesis, branch)
    if not _is_enroll(tx):
        raise LookupFailed(f"{genesis.hex()} is not an enrollment transaction")
    if ledger.confirmations(genesis, branch) < min_conf:
        raise LookupFailed(f"{genesis.hex()} has fewer than {min_conf} confirmations")
    address = tx.outputs[0].address
    out = [genesis]
    cur = genesis
    while True:
        nxt = ledger.spender(Outpoint(cur, 0), branch, min_conf)
        if nxt is None:
            return out
        ntx = ledger.get(nxt, branch)
        if not _is_enroll(ntx, address):
            raise IntegrityAlarm(
                f"anchor output of {cur.hex()} spent by non-enrollment transaction {nxt.hex()}"
            )
        out.append(nxt)
        cur = nxt


def _walk_back(ledger: Ledger, txid: bytes, branch: str) -> tuple[bytes, int]:
    """First enrollment of the chain containing ``txid`` and the 1-based epoch of ``txid``."""
    tx = ledger.get(txid, branch)
    address = tx.outputs[0].address
    t = 1
    first = txid
    while True:
        prev = tx.inputs[0].prev
        if prev.txid not in ledger._state(branch).txs:
            return first, t
        ptx = ledger.get(prev.txid, branch)
        if prev.index != 0 or not _is_enroll(ptx, address):
            return first, t
        t += 1
        tx, first = ptx, prev.txid


def _epoch_of(ledger: Ledger, txid: bytes, branch: str) -> int:
    return _walk_back(ledger, txid, branch)[1]


def chain_genesis(ledger: Ledger, txid: bytes, branch: str = "main") -> bytes:
    """The first enrollment transaction of the chain ``txid`` belongs to."""
    return _walk_back(ledger, txid, branch)[0]


def follow_chain(ledger: Ledger, txid: bytes, branch: str = "main", min_conf: int = 1) -> EnrollChainHead:
    """Walk forward from any historical enrollment txid to the unspent head."""
    head = chain_txids(ledger, txid, branch, min_conf)[-1]
    tx = ledger.get(head, branch)
    payload = tx.anchor_payload()
    return EnrollChainHead(
        head, payload[:32], payload[32:], _epoch_of(ledger, head, branch), tx.outputs[0].address
    )


def visible_heads(ledger: Ledger, txid: bytes, min_conf: int = 1) -> list[EnrollChainHead]:
    """Distinct chain heads reachable from ``txid`` across all active branches."""
    heads = []
    for b in ledger.branches():
        try:
            h = follow_chain(ledger, txid, b, min_conf)
        except LookupFailed:
            continue
        if h not in heads:
            heads.append(h)
    return heads


def follow_unique(ledger: Ledger, txid: bytes, min_conf: int = 1) -> EnrollChainHead:
    heads = visible_heads(ledger, txid, min_conf)
    if not heads:
        raise LookupFailed(f"unknown or unconfirmed txid {txid.hex()}")
    if len(heads) > 1:
        raise ForkDetected(heads)
    return heads[0]


def verify_cm_history(ledger: Ledger, genesis: bytes, branch: str = "main", min_conf: int = 1) -> HistoryCheck:
    """Recompute cm_t from the published roots and compare with every published cm."""
    try:
        txids = chain_txids(ledger, genesis, branch, min_conf)
    except LedgerError as exc:
        return HistoryCheck(False, None, str(exc))
    chain: Optional[CommitmentChain] = None
    for t, txid in enumerate(txids, start=1):
        payload = ledger.get(txid, branch).anchor_payload()
        if payload is None or len(payload) != ANCHOR_PAYLOAD:
            return HistoryCheck(False, t, "malformed anchor payload")
        chain = advance_cm(chain, payload[:32])
        if chain.cm != payload[32:]:
            return HistoryCheck(False, t, "published cm does not match recomputed chain")
    return HistoryCheck(True)


# -- cost and bandwidth estimates -----------------------------------------------------

DEFAULT_TX_SIZE = 265
DEFAULT_FEE_RATE = Decimal("0.0000036")  # BTC per byte
DEFAULT_USD_PER_BTC = Decimal(2280)
BLOCKS_PER_DAY = 144


def _dec(x) -> Decimal:
    return x if isinstance(x, Decimal) else Decimal(str(x))


def estimate_fee(size_bytes: int, rate_btc_per_byte) -> Decimal:
    rate = _dec(rate_btc_per_byte)
    if rate <= 0:
        raise ValueError("fee rate must be positive")
    return Decimal(size_bytes) * rate


def fee_sat(size_bytes: int, rate_btc_per_byte) -> int:
    return int((estimate_fee(size_bytes, rate_btc_per_byte) * SAT_PER_BTC).to_integral_value())


def daily_cost_usd(fee_btc, usd_per_btc=DEFAULT_USD_PER_BTC, blocks_per_day: int = BLOCKS_PER_DAY) -> Decimal:
    return _dec(fee_btc) * blocks_per_day * _dec(usd_per_btc)


@dataclass(frozen=True)
class BandwidthReport:
    users: int
    f_daily: float
    f_block: float
    se_storage_bytes: float
    se_per_block_bytes: float
    user_storage_bytes: float
    user_per_block_bytes: float
    note: str = ""


def estimate_bandwidth(n_users: int, f_daily: float, blocks_per_day: int = BLOCKS_PER_DAY) -> BandwidthReport:
    """Storage and per-block traffic for 64-byte (hash, position) records.

    The service enabler stores every occupied leaf; a user stores only the
    ~log2(N) non-default siblings on her path and downloads ~log2(fN) changed
    ones per block.
    """
    import math

    if n_users < 1:
        raise ValueError("N must be at least 1")
    if not 0 <= f_daily <= 1:
        raise ValueError("f_daily must lie in [0, 1]")
    f = f_daily / blocks_per_day
    changed = f * n_users
    note = ""
    if changed < 1:
        per_block_user = 0.0
        note = "fewer than one update per block; user download rounds to 0"
    else:
        per_block_user = 64 * math.log2(changed)
    if n_users == 1:
        note = (note + "; " if note else "") + "single user: no non-default siblings expected"
    return BandwidthReport(
        users=n_users,
        f_daily=f_daily,
        f_block=f,
        se_storage_bytes=64.0 * n_users,
        se_per_block_bytes=64.0 * changed,
        user_storage_bytes=64 * math.log2(n_users),
        user_per_block_bytes=per_block_user,
        note=note,
    )
