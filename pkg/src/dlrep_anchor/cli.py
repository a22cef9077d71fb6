"""Command-line entry point.

Operational commands (enroll, update, revoke, anchor, authenticate) work on a
state directory whose journal is itself a scenario script; every invocation
replays it under the recorded seed, applies one more step and appends that
step when it succeeds.  ``run-scenario`` and ``check`` run self-contained.
"""

from __future__ import annotations

import argparse
import logging
import sys
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import acceptance
from .ledger import (
    BLOCKS_PER_DAY,
    DEFAULT_FEE_RATE,
    DEFAULT_TX_SIZE,
    DEFAULT_USD_PER_BTC,
    Ledger,
    LedgerError,
    chain_genesis,
    daily_cost_usd,
    estimate_bandwidth,
    estimate_fee,
    follow_chain,
    verify_cm_history,
)
from .report import bandwidth_rows, plot_bandwidth, plot_branch_lengths, write_csv
from .simulator import ScenarioError, ScenarioScript, Simulation, run_scenario
from .store import StateDir, export_credential
from .wire import Envelope, decode_message

log = logging.getLogger("dlrep_anchor")

MUTATING = ("enroll", "update", "revoke", "anchor", "authenticate")


def _decimal(text: str) -> Decimal:
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"not a decimal number: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dlrep-anchor",
        description="Blockchain-anchored identity commitments: issue, update, revoke and prove attributes.",
    )
    p.add_argument("--backend", choices=["test", "secp256k1"], default="test", help="group backend (default: test)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed; fixed at state creation (default 1)")
    p.add_argument("--state-dir", type=Path, default=Path("dlrep-state"), help="state directory (default: ./dlrep-state)")
    p.add_argument("--ledger-file", type=Path, default=None, help="ledger file to write (or read, for follow)")
    p.add_argument("--attributes", type=_positive, default=4, help="attributes per identity (default 4)")
    p.add_argument("--fee-rate", type=_decimal, default=DEFAULT_FEE_RATE, help="BTC per byte (default 0.0000036)")
    p.add_argument("--dust", type=int, default=500, help="dust threshold in satoshi (default 500)")
    p.add_argument("--min-conf", type=int, default=1, help="confirmations before SE trusts an anchor")
    p.add_argument("--fork-at-height", type=int, default=None, help="start a competing branch at this height")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("enroll", help="enroll users with the issuer")
    s.add_argument("--count", type=_positive, default=1)
    s.add_argument("--attrs", help="comma-separated attribute values (default: random)")
    s.add_argument("--metadata", default="", help="leaf metadata, e.g. expires=1000")

    s = sub.add_parser("update", help="publish the next update for a user")
    s.add_argument("user", type=int)
    s.add_argument("changes", nargs="*", metavar="J=V", help="new attribute values")
    s.add_argument("--metadata")

    s = sub.add_parser("revoke", help="replace a user's leaf with the tombstone")
    s.add_argument("user", type=int)

    sub.add_parser("anchor", help="publish the current root and cm on the ledger and mine a block")

    for name, text in [("authenticate", "run one proof-of-identity session"), ("dump-transcript", "print a session's wire messages in hex")]:
        s = sub.add_parser(name, help=text)
        s.add_argument("user", type=int)
        s.add_argument("--service", default="default")
        s.add_argument("--reveal", default="", help="attribute indices to disclose, e.g. 2,3")
        s.add_argument("--relation", action="append", default=[], help="linear relation J:a,K:b=const (repeatable)")
        s.add_argument("--stale", action="store_true", help="prove with the previous epoch's X_0")
        s.add_argument("--no-refresh", action="store_true", help="keep the user's stored branch")

    s = sub.add_parser("follow", help="walk an anchoring chain to its head")
    s.add_argument("txid", nargs="?", help="any enrollment txid (default: the issuer's first)")

    s = sub.add_parser("estimate", help="fee and bandwidth table")
    s.add_argument("--users", type=_positive, default=2**26)
    s.add_argument("--f-daily", type=_fraction, default=0.01)
    s.add_argument("--price", type=_decimal, default=DEFAULT_USD_PER_BTC, help="USD per BTC (default 2280)")
    s.add_argument("--tx-size", type=_positive, default=DEFAULT_TX_SIZE)
    s.add_argument("--out", type=Path, help="directory for estimate.csv and bandwidth.png")

    s = sub.add_parser("run-scenario", help="run a scenario file (or a bundled one by name)")
    s.add_argument("scenario")
    s.add_argument("--out", type=Path, help="directory for report.txt, steps.csv and branches.png")
    s.add_argument("--abort-on-error", action="store_true")

    s = sub.add_parser("check", help="run acceptance checks")
    s.add_argument("numbers", nargs="*", help="criterion numbers 1-10 (default: all)")
    return p


# -- helpers ---------------------------------------------------------------------------------


def _settings(args) -> dict[str, str]:
    out = {
        "backend": args.backend,
        "attributes": str(args.attributes),
        "dust": str(args.dust),
        "fee-rate": str(args.fee_rate),
        "min-conf": str(args.min_conf),
    }
    if args.fork_at_height is not None:
        out["fork-at-height"] = str(args.fork_at_height)
    return out


def _requirement_words(args) -> list[str]:
    words = []
    if args.reveal:
        words.append(f"reveal={args.reveal}")
    words += [f"relation={r}" for r in args.relation]
    return words


def _step_lines(args) -> list[str]:
    c = args.command
    if c == "enroll":
        words = [f"enroll {args.count}"]
        if args.attrs:
            words.append(f"attrs={args.attrs}")
        if args.metadata:
            words.append(f"metadata={args.metadata}")
        return [" ".join(words)]
    if c == "update":
        extra = [f"metadata={args.metadata}"] if args.metadata is not None else []
        return [" ".join([f"update {args.user}", *args.changes, *extra])]
    if c == "revoke":
        return [f"revoke {args.user}"]
    if c == "anchor":
        return ["anchor"]
    if c in ("authenticate", "dump-transcript"):
        lines = [" ".join([f"service {args.service}", *_requirement_words(args)])]
        if not args.no_refresh:
            lines.append(f"refresh {args.user}")
        lines.append(" ".join([f"authenticate {args.user} {args.service}"] + (["stale"] if args.stale else [])))
        return lines
    raise ValueError(c)


def _persist(state: StateDir, sim: Simulation, ledger_file: Optional[Path]) -> None:
    (ledger_file or state.path / "ledger.txt").write_text(sim.ledger.dump())
    chain = sim.iv.chain
    state.tree_file.write_text(sim.iv.tree.dump(chain.t if chain else 0, chain.cm if chain else None))
    for i, u in enumerate(sim.users):
        cred = u.credentials.get(sim.iv.name)
        if cred is not None:
            export_credential(state.credentials, f"user{i}", cred, sim.iv.name)


def _operate(args, out) -> int:
    state = StateDir(args.state_dir)
    if not state.exists():
        state.init(args.seed if args.seed is not None else 1, _settings(args))
    elif args.seed is not None and args.seed != state.seed():
        log.warning("state directory was created with seed %s; ignoring --seed %s", state.seed(), args.seed)
    new_lines = _step_lines(args)
    text = state.read() + "\n".join(new_lines) + "\n"
    script = ScenarioScript.parse(text)
    report, sim = run_scenario(script)
    last = report.outcomes[-len(new_lines) :]
    failed = [o for o in last if not o.ok]
    if args.command == "dump-transcript":
        return _dump(sim, last[-1], out)
    if failed:
        out.write(f"error: {failed[0].detail}\n")
        return 1
    for line in new_lines:
        state.append(line)
    _persist(state, sim, args.ledger_file)
    out.write(f"{last[-1].detail}\n")
    if args.command == "authenticate":
        return 0 if sim.last_result and sim.last_result.granted else 1
    return 0


def _dump(sim: Simulation, outcome, out) -> int:
    res = sim.last_result
    if not outcome.ok or res is None:
        out.write(f"error: {outcome.detail}\n")
        return 1
    for raw in res.messages:
        env = Envelope.from_bytes(raw)
        tag, _ = decode_message(env.body)
        out.write(f"{tag:<12} seq={env.seq:<3d} {raw.hex()}\n")
    if res.session is not None and res.session.transcript is not None:
        t = res.session.transcript
        out.write(f"{'TRANSCRIPT':<12} {t.to_bytes(sim.params).hex()}\n")
    out.write(f"result {'granted' if res.granted else 'rejected: ' + res.reason}\n")
    return 0 if res.granted else 1


def _follow(args, out) -> int:
    state = StateDir(args.state_dir)
    if state.exists():
        _, sim = run_scenario(ScenarioScript.parse(state.read()))
        ledger = sim.ledger
        genesis = sim.iv.txids[0] if sim.iv.txids else None
    elif args.ledger_file is not None and args.ledger_file.exists():
        ledger = Ledger.load(args.ledger_file.read_text())
        genesis = None
    else:
        out.write("error: no ledger file and no state directory\n")
        return 1
    start = bytes.fromhex(args.txid) if args.txid else genesis
    if start is None:
        out.write("error: nothing anchored yet; pass a txid\n")
        return 1
    try:
        head = follow_chain(ledger, start, min_conf=args.min_conf)
    except LedgerError as exc:
        out.write(f"error: {exc}\n")
        return 1
    out.write(f"head   {head.txid.hex()}\nepoch  {head.t}\nroot   {head.root.hex()}\ncm     {head.cm.hex()}\n")
    hist = verify_cm_history(ledger, chain_genesis(ledger, start), min_conf=args.min_conf)
    out.write("history ok\n" if hist else f"history REJECTED at epoch {hist.epoch}: {hist.reason}\n")
    return 0 if hist else 1


def _estimate(args, out) -> int:
    fee = estimate_fee(args.tx_size, args.fee_rate) if args.fee_rate > 0 else Decimal(0)
    usd = daily_cost_usd(fee, args.price)
    bw = estimate_bandwidth(args.users, args.f_daily)
    rows = [
        ("anchor size (bytes)", str(args.tx_size)),
        ("fee per anchor (BTC)", f"{fee.normalize():f}"),
        ("anchors per day", str(BLOCKS_PER_DAY)),
        ("cost per day (USD)", f"{usd.normalize():f}"),
        ("users N", str(args.users)),
        ("daily update fraction", f"{args.f_daily:g}"),
        ("SE storage (bytes)", f"{bw.se_storage_bytes:.0f}"),
        ("SE download per block (bytes)", f"{bw.se_per_block_bytes:.1f}"),
        ("user storage (bytes)", f"{bw.user_storage_bytes:.2f}"),
        ("user download per block (bytes)", f"{bw.user_per_block_bytes:.2f}"),
    ]
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        out.write(f"{k:<{width}}  {v}\n")
    if bw.note:
        out.write(f"note: {bw.note}\n")
    if args.out:
        sizes = sorted({2**e for e in range(4, 31, 2)} | {args.users})
        table = bandwidth_rows(sizes, args.f_daily)
        write_csv(args.out / "estimate.csv", [{"quantity": k, "value": v} for k, v in rows])
        write_csv(args.out / "bandwidth.csv", table)
        plot_bandwidth(table, args.out / "bandwidth.png")
        out.write(f"wrote {args.out / 'estimate.csv'}, {args.out / 'bandwidth.csv'}, {args.out / 'bandwidth.png'}\n")
    return 0


def load_scenario_text(name: str) -> str:
    path = Path(name)
    if path.exists():
        return path.read_text()
    bundled = resources.files("dlrep_anchor") / "scenarios" / name
    if bundled.is_file():
        return bundled.read_text()
    raise FileNotFoundError(f"no scenario file {name!r} and no bundled scenario of that name")


def _run_scenario(args, out) -> int:
    try:
        script = ScenarioScript.parse(load_scenario_text(args.scenario))
    except (FileNotFoundError, ScenarioError) as exc:
        out.write(f"error: {exc}\n")
        return 2
    report, sim = run_scenario(script, abort_on_error=args.abort_on_error)
    text = report.render()
    out.write(text)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "report.txt").write_text(text)
        write_csv(
            args.out / "steps.csv",
            [
                {
                    "line": o.step.line_no,
                    "step": o.step.text,
                    "ok": o.ok,
                    "expectation": "" if o.expectation is None else ("pass" if o.expectation else "fail"),
                    "detail": o.detail,
                }
                for o in report.outcomes
            ],
        )
        leaves = list(sim.iv.tree.leaves())
        lengths = [len(sim.iv.tree.branch(i)) for i in leaves]
        plot_branch_lengths(lengths, len(leaves), args.out / "branches.png")
    return 0 if report.passed else 1


def _check(args, out) -> int:
    try:
        numbers = [int(n) for n in args.numbers] or sorted(acceptance.CHECKS)
        if any(n not in acceptance.CHECKS for n in numbers):
            raise ValueError
    except ValueError:
        out.write("error: criterion numbers are 1-10\n")
        return 2
    ok = True
    for n in numbers:
        res = acceptance.run_check(n, seed=args.seed if args.seed is not None else 1)
        out.write(res.line() + "\n")
        out.flush()
        ok &= res.passed and res.within_budget
    return 0 if ok else 1


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command in MUTATING or args.command == "dump-transcript":
        return _operate(args, out)
    if args.command == "follow":
        return _follow(args, out)
    if args.command == "estimate":
        return _estimate(args, out)
    if args.command == "run-scenario":
        return _run_scenario(args, out)
    return _check(args, out)


if __name__ == "__main__":
    sys.exit(main())
