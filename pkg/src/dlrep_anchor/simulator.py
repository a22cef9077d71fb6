"""A seeded world of one IV, one SE, one SP and a user cohort, plus the scenario runner.

Scenario files are line oriented, one step per line, ``#`` starts a comment::

    seed 7
    backend test
    attributes 4
    service adult reveal=2 relation=1:1=20
    enroll 10 attrs=20,1,2,3
    anchor
    refresh all
    update 3 1=21
    revoke 4
    anchor
    authenticate 0 adult expect=grant
    authenticate 4 adult expect=reject
    authenticate 3 adult stale expect=reject
    expect-follow 2
    expect-history ok

``seed`` is mandatory and must come first.  Every line is echoed into the
report with its outcome, so two runs with the same seed give identical text.
"""

from __future__ import annotations

import hashlib
import random
import shlex
from dataclasses import dataclass, field
from typing import Optional

from .actors import (
    SUSPENDED,
    AuthResult,
    IdentityVerifier,
    ProtocolViolation,
    Requirement,
    ServiceEnabler,
    ServiceProvider,
    SetupRegistry,
    User,
    authenticate,
)
from .dlrep import LinearRelation, PolicyError
from .group import GroupParams, make_params
from .ledger import (
    DEFAULT_DUST,
    DEFAULT_FEE_RATE,
    Ledger,
    LedgerError,
    Outpoint,
    build_enroll_tx,
    follow_unique,
    verify_cm_history,
)
from .lifecycle import user_recompute_x0

DEFAULT_FUNDING = 100_000_000  # 1 BTC in satoshi, enough for thousands of anchors


class ScenarioError(ValueError):
    """Malformed scenario line."""


@dataclass
class Simulation:
    seed: int
    backend: str = "test"
    n: int = 4
    dust: int = DEFAULT_DUST
    fee_rate: object = DEFAULT_FEE_RATE
    funding: int = DEFAULT_FUNDING
    min_conf: int = 1
    iv_name: str = "IV1"
    sp_name: str = "SP1"
    fork_at_height: Optional[int] = None

    def __post_init__(self):
        self.rng = random.Random(self.seed)
        self.params: GroupParams = make_params(self.backend, self.n)
        self.ledger = Ledger(dust=self.dust)
        self.registry = SetupRegistry()
        self.iv = IdentityVerifier(self.iv_name, self.params, self.ledger, self.rng, self.fee_rate)
        self.iv.setup(self.registry, self.funding)
        self.se = ServiceEnabler(self.registry, self.ledger, self.rng, min_conf=self.min_conf)
        self.sp = ServiceProvider(self.sp_name, self.se.key.pk_bytes)
        self.se.register_sp(self.sp)
        self.users: list[User] = []
        self.accounts: list[bytes] = []
        self.last_result: Optional[AuthResult] = None

    @property
    def q(self) -> int:
        return self.params.q

    def random_attributes(self) -> list[int]:
        return [self.rng.randrange(self.q) for _ in range(self.n)]

    def enroll(self, count: int, attributes: Optional[list[int]] = None, metadata: bytes = b"") -> list[int]:
        ids = []
        for _ in range(count):
            u = User(f"user{len(self.users)}", self.rng)
            u.connect(self.se)
            attrs = list(attributes) if attributes is not None else self.random_attributes()
            self.accounts.append(self.iv.enroll(u, attrs, metadata))
            self.users.append(u)
            ids.append(len(self.users) - 1)
        return ids

    def anchor(self, mine: bool = True) -> bytes:
        txid = self.iv.anchor()
        if mine:
            self.ledger.mine()
        self.iv.distribute(self.se)
        if self.fork_at_height is not None and self.ledger.height >= self.fork_at_height and not self.ledger.forked:
            self.fork()
        return txid

    def refresh(self, who: Optional[int] = None) -> None:
        latest = self.iv.txids[-1] if self.iv.txids else None
        for i in range(len(self.users)) if who is None else [who]:
            self.users[i].refresh(self.iv.name, self.se, latest)

    def update(self, user: int, changes: dict[int, int], metadata: Optional[bytes] = None) -> None:
        self.iv.update(self.accounts[user], changes, metadata)

    def revoke(self, user: int) -> None:
        self.iv.revoke(self.accounts[user])

    def stale_secrets(self, user: int) -> list[int]:
        """The user's representation with the previous epoch's X_0."""
        cred = self.users[user].credentials[self.iv.name]
        k = max(cred.secret.k - 1, 0)
        return [user_recompute_x0(cred.secret, k, self.q)] + [a % self.q for a in cred.secret.attributes]

    def authenticate(self, user: int, service: str, stale: bool = False) -> AuthResult:
        secrets = self.stale_secrets(user) if stale else None
        self.last_result = authenticate(self.users[user], self.se, self.sp.name, service, self.iv.name, secrets)
        return self.last_result

    # equivocation
    def fork(self, at_height: Optional[int] = None) -> None:
        self.ledger.fork(at_height)

    def equivocate(self, branch: str = "fork", root: Optional[bytes] = None) -> bytes:
        """Spend the IV's previous anchor output with a competing root on ``branch``."""
        if len(self.iv.txids) < 2:
            raise LedgerError("need at least two anchors to equivocate")
        prev = Outpoint(self.iv.txids[-2], 0)
        root = root or hashlib.sha256(b"competing root" + self.iv.tree.root).digest()
        amount = self.ledger.get(prev.txid).outputs[0].amount - 1000
        tx = build_enroll_tx(prev, self.iv.key, root, hashlib.sha256(root).digest(), amount)
        return self.ledger.submit(tx, branch)

    def head(self):
        return follow_unique(self.ledger, self.iv.txids[0], self.min_conf)


# -- scenario scripts -------------------------------------------------------------------------


@dataclass
class Step:
    line_no: int
    text: str
    verb: str
    args: list[str]
    options: dict[str, str] = field(default_factory=dict)


@dataclass
class ScenarioScript:
    seed: int
    steps: list[Step]
    settings: dict[str, str] = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "ScenarioScript":
        seed = None
        steps: list[Step] = []
        settings: dict[str, str] = {}
        for no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            words = shlex.split(line)
            verb, rest = words[0], words[1:]
            if verb == "seed":
                if seed is not None or steps or settings:
                    raise ScenarioError(f"line {no}: seed must be the first statement, given once")
                seed = _int(rest, no)
                continue
            if seed is None:
                raise ScenarioError(f"line {no}: scenario must start with 'seed <int>'")
            if verb in ("backend", "attributes", "dust", "fee-rate", "min-conf", "funding", "fork-at-height"):
                if steps:
                    raise ScenarioError(f"line {no}: setting {verb!r} must precede all steps")
                settings[verb] = rest[0] if rest else ""
                continue
            if verb not in STEP_VERBS:
                raise ScenarioError(f"line {no}: unknown step {verb!r}")
            args = [w for w in rest if "=" not in w or w.split("=", 1)[0].isdigit()]
            opts: dict[str, str] = {}
            for w in rest:
                key, eq, value = w.partition("=")
                if not eq or key.isdigit():
                    continue
                if key == "relation" and key in opts:
                    value = opts[key] + ";" + value
                opts[key] = value
            steps.append(Step(no, line, verb, args, opts))
        if seed is None:
            raise ScenarioError("scenario has no seed")
        return cls(seed, steps, settings)


STEP_VERBS = frozenset(
    "service enroll anchor mine refresh update revoke rekey authenticate fork equivocate resolve "
    "expect-follow expect-history".split()
)


def _int(words: list[str], no: int) -> int:
    try:
        return int(words[0])
    except (IndexError, ValueError):
        raise ScenarioError(f"line {no}: expected an integer") from None


def parse_relation(text: str) -> LinearRelation:
    """``1:1,3:-1=0`` means X_1 - X_3 = 0."""
    lhs, eq, const = text.partition("=")
    try:
        if not eq:
            raise ValueError("missing '=constant'")
        coeffs = {}
        for term in lhs.split(","):
            j, _, a = term.partition(":")
            coeffs[int(j)] = int(a or 1)
        return LinearRelation.of(coeffs, int(const))
    except ValueError as exc:
        raise ScenarioError(f"bad relation {text!r}: {exc}") from None


def parse_requirement(opts: dict[str, str]) -> Requirement:
    reveal = tuple(int(j) for j in opts.get("reveal", "").split(",") if j)
    rels = tuple(parse_relation(r) for r in opts.get("relation", "").split(";") if r)
    return Requirement(reveal, rels)


@dataclass
class StepOutcome:
    step: Step
    ok: bool
    detail: str
    expectation: Optional[bool] = None  # None when the step sets no expectation


@dataclass
class ScenarioReport:
    seed: int
    outcomes: list[StepOutcome]
    root: str
    cm: str
    height: int
    aborted: bool = False

    @property
    def passed(self) -> bool:
        return not self.aborted and all(o.ok and o.expectation is not False for o in self.outcomes)

    def render(self) -> str:
        lines = [f"scenario seed={self.seed}"]
        for o in self.outcomes:
            mark = {None: "    ", True: "PASS", False: "FAIL"}[o.expectation]
            status = "ok" if o.ok else "error"
            lines.append(f"{o.step.line_no:4d} {mark} {status:5s} {o.step.text} :: {o.detail}")
        lines.append(f"root {self.root}")
        lines.append(f"cm {self.cm}")
        lines.append(f"height {self.height}")
        n_exp = sum(o.expectation is not None for o in self.outcomes)
        n_ok = sum(o.expectation is True for o in self.outcomes)
        lines.append(f"expectations {n_ok}/{n_exp} passed")
        lines.append("result " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines) + "\n"


def build_simulation(script: ScenarioScript, **overrides) -> Simulation:
    s = dict(script.settings)
    kwargs = dict(
        seed=script.seed,
        backend=s.get("backend", "test"),
        n=int(s.get("attributes", 4)),
        dust=int(s.get("dust", DEFAULT_DUST)),
        min_conf=int(s.get("min-conf", 1)),
        funding=int(s.get("funding", DEFAULT_FUNDING)),
        fork_at_height=int(s["fork-at-height"]) if s.get("fork-at-height") else None,
    )
    if "fee-rate" in s:
        from decimal import Decimal

        kwargs["fee_rate"] = Decimal(s["fee-rate"])
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return Simulation(**kwargs)


def run_scenario(
    script: ScenarioScript, abort_on_error: bool = False, sim: Optional[Simulation] = None, **overrides
) -> tuple[ScenarioReport, Simulation]:
    sim = sim or build_simulation(script, **overrides)
    outcomes: list[StepOutcome] = []
    aborted = False
    for step in script.steps:
        try:
            detail, expectation = _execute(sim, step)
            outcomes.append(StepOutcome(step, True, detail, expectation))
        except (ScenarioError, LedgerError, ProtocolViolation, PolicyError, ValueError, KeyError, IndexError) as exc:
            outcomes.append(StepOutcome(step, False, f"{type(exc).__name__}: {exc}"))
            if abort_on_error:
                aborted = True
                break
    chain = sim.iv.chain
    report = ScenarioReport(
        script.seed,
        outcomes,
        sim.iv.tree.root.hex(),
        chain.cm.hex() if chain else "",
        sim.ledger.height,
        aborted,
    )
    return report, sim


def _users(sim: Simulation, arg: str) -> list[int]:
    return list(range(len(sim.users))) if arg == "all" else [int(x) for x in arg.split(",")]


def _execute(sim: Simulation, step: Step) -> tuple[str, Optional[bool]]:
    v, a, o = step.verb, step.args, step.options
    if v == "service":
        req = parse_requirement(o)
        issuers = [i for i in o.get("issuers", sim.iv.name).split(",") if i]
        sim.sp.offer(a[0], req, issuers)
        return f"offered {a[0]} reveal={list(req.reveal)} relations={len(req.relations)}", None
    if v == "enroll":
        attrs = [int(x) for x in o["attrs"].split(",")] if "attrs" in o else None
        ids = sim.enroll(int(a[0]), attrs, o.get("metadata", "").encode())
        return f"users {ids[0]}..{ids[-1]}", None
    if v == "anchor":
        txid = sim.anchor(mine=o.get("mine", "yes") != "no")
        return f"epoch {sim.iv.chain.t} txid {txid.hex()}", None
    if v == "mine":
        for _ in range(int(a[0]) if a else 1):
            sim.ledger.mine()
        return f"height {sim.ledger.height}", None
    if v == "refresh":
        for i in _users(sim, a[0] if a else "all"):
            sim.refresh(i)
        return "branches refreshed", None
    if v == "update":
        changes = {int(k): int(val) for k, val in (w.split("=") for w in a[1:])}
        sim.update(int(a[0]), changes, o["metadata"].encode() if "metadata" in o else None)
        return f"k={sim.iv.records[sim.accounts[int(a[0])]].k}", None
    if v == "revoke":
        sim.revoke(int(a[0]))
        return "tombstoned", None
    if v == "rekey":
        sim.users[int(a[0])].rekey(sim.se)
        return "new channel key", None
    if v == "authenticate":
        outcomes = []
        for i in _users(sim, a[0]):
            r = sim.authenticate(i, a[1], stale="stale" in a[2:])
            outcomes.append((i, r))
        granted = sum(r.granted for _, r in outcomes)
        reasons = sorted({r.reason for _, r in outcomes if not r.granted})
        detail = f"granted {granted}/{len(outcomes)}" + (f" ({'; '.join(reasons)})" if reasons else "")
        want = o.get("expect")
        if want is None:
            return detail, None
        if want not in ("grant", "reject", "suspend"):
            raise ScenarioError(f"line {step.line_no}: expect must be grant, reject or suspend")
        if want == "grant":
            return detail, granted == len(outcomes)
        if want == "suspend":
            return detail, all(r.session is not None and r.session.state == SUSPENDED for _, r in outcomes)
        return detail, granted == 0
    if v == "fork":
        sim.fork(int(a[0]) if a else None)
        return f"fork at height {sim.ledger.height if not a else a[0]}", None
    if v == "equivocate":
        txid = sim.equivocate(o.get("branch", "fork"))
        return f"competing anchor {txid.hex()}", None
    if v == "resolve":
        sim.ledger.resolve_fork(a[0] if a else "main")
        return f"kept {a[0] if a else 'main'}", None
    if v == "expect-follow":
        head = sim.head()
        return f"head epoch {head.t}", head.t == int(a[0]) and head.txid == sim.iv.txids[-1]
    if v == "expect-history":
        chk = verify_cm_history(sim.ledger, sim.iv.txids[0], min_conf=sim.min_conf)
        want = (a[0] if a else "ok") == "ok"
        return ("history ok" if chk else f"history rejected at epoch {chk.epoch}: {chk.reason}"), bool(chk) == want
    raise ScenarioError(f"line {step.line_no}: unknown step {v!r}")
