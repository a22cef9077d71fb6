"""CSV tables and matplotlib figures written next to each other."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .ledger import estimate_bandwidth  # noqa: E402


def write_csv(path: Path, rows: Sequence[dict]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if rows:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return path


def bandwidth_rows(users: Iterable[int], f_daily: float) -> list[dict]:
    rows = []
    for n in users:
        r = estimate_bandwidth(n, f_daily)
        rows.append(
            {
                "users": n,
                "f_daily": f_daily,
                "se_storage_bytes": f"{r.se_storage_bytes:.1f}",
                "se_per_block_bytes": f"{r.se_per_block_bytes:.2f}",
                "user_storage_bytes": f"{r.user_storage_bytes:.2f}",
                "user_per_block_bytes": f"{r.user_per_block_bytes:.2f}",
                "note": r.note,
            }
        )
    return rows


def plot_bandwidth(rows: Sequence[dict], path: Path) -> Path:
    """Log-log plot of SE versus per-user storage and traffic as N grows."""
    n = [r["users"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for key, label in [
        ("se_storage_bytes", "SE storage"),
        ("se_per_block_bytes", "SE per block"),
        ("user_storage_bytes", "user storage"),
        ("user_per_block_bytes", "user per block"),
    ]:
        ys = [float(r[key]) for r in rows]
        pts = [(x, y) for x, y in zip(n, ys) if y > 0]
        if pts:
            ax.plot(*zip(*pts), marker="o", label=label)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("registered identities N")
    ax.set_ylabel("bytes")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_branch_lengths(lengths: Sequence[int], n_leaves: int, path: Path) -> Path:
    """Histogram of non-default sibling counts with log2(N) marked."""
    import math

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    if lengths:
        lo, hi = min(lengths), max(lengths)
        ax.hist(lengths, bins=range(lo, hi + 2), align="left", rwidth=0.85)
    if n_leaves > 1:
        ax.axvline(math.log2(n_leaves), color="black", linestyle="--", label=f"log2 N = {math.log2(n_leaves):.1f}")
        ax.legend()
    ax.set_xlabel("non-default siblings in branch")
    ax.set_ylabel("leaves")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path
