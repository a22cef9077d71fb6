"""On-disk formats: credential export, the user keystore and the CLI state directory.

A credential file holds only public material (txid, index, h, branch,
metadata, k) and can be handed to a service enabler.  The secrets X_00, X_01
and the attribute values go to a separate keystore file.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from .group import GroupParams
from .lifecycle import IdentityCredential, UserSecret
from .smt import MerkleBranch

FORMAT_VERSION = 1


def credential_to_dict(cred: IdentityCredential, iv_name: str) -> dict:
    return {
        "version": FORMAT_VERSION,
        "iv": iv_name,
        "txid": cred.txid.hex(),
        "index": cred.index.hex(),
        "h": cred.h.encode().hex(),
        "branch": cred.branch.to_hex(),
        "metadata": cred.metadata.hex(),
        "k": cred.secret.k,
    }


def keystore_to_dict(secret: UserSecret) -> dict:
    return {
        "version": FORMAT_VERSION,
        "x00": format(secret.x00, "x"),
        "x01": format(secret.x01, "x"),
        "k": secret.k,
        "attributes": [format(a, "x") for a in secret.attributes],
    }


def credential_from_dicts(cred: dict, keystore: dict, params: GroupParams) -> IdentityCredential:
    if cred.get("version") != FORMAT_VERSION or keystore.get("version") != FORMAT_VERSION:
        raise ValueError("unsupported credential file version")
    if cred["k"] != keystore["k"]:
        raise ValueError("credential and keystore disagree on the update counter")
    secret = UserSecret(
        int(keystore["x00"], 16),
        int(keystore["x01"], 16),
        int(keystore["k"]),
        [int(a, 16) for a in keystore["attributes"]],
    )
    return IdentityCredential(
        txid=bytes.fromhex(cred["txid"]),
        index=bytes.fromhex(cred["index"]),
        branch=MerkleBranch.from_hex(cred["branch"]),
        h=params.group.decode(bytes.fromhex(cred["h"])),
        secret=secret,
        metadata=bytes.fromhex(cred["metadata"]),
    )


def export_credential(directory: Path, name: str, cred: IdentityCredential, iv_name: str) -> tuple[Path, Path]:
    """Write ``<name>.cred.json`` and ``<name>.key.json``; returns both paths."""
    directory.mkdir(parents=True, exist_ok=True)
    cpath = directory / f"{name}.cred.json"
    kpath = directory / f"{name}.key.json"
    cpath.write_text(json.dumps(credential_to_dict(cred, iv_name), indent=2, sort_keys=True) + "\n")
    kpath.write_text(json.dumps(keystore_to_dict(cred.secret), indent=2, sort_keys=True) + "\n")
    kpath.chmod(0o600)
    return cpath, kpath


def import_credential(directory: Path, name: str, params: GroupParams) -> IdentityCredential:
    cred = json.loads((directory / f"{name}.cred.json").read_text())
    key = json.loads((directory / f"{name}.key.json").read_text())
    return credential_from_dicts(cred, key, params)


class StateDir:
    """Directory behind the operational CLI commands.

    ``journal.scn`` is a scenario script (seed, settings, then one line per
    command run so far); replaying it rebuilds the whole simulated world.
    """

    def __init__(self, path: Path):
        self.path = Path(path)

    @property
    def journal(self) -> Path:
        return self.path / "journal.scn"

    @property
    def tree_file(self) -> Path:
        return self.path / "tree.snapshot"

    @property
    def credentials(self) -> Path:
        return self.path / "credentials"

    def exists(self) -> bool:
        return self.journal.exists()

    def init(self, seed: int, settings: dict[str, str]) -> None:
        self.path.mkdir(parents=True, exist_ok=True)
        lines = [f"seed {seed}"] + [f"{k} {v}" for k, v in settings.items()]
        self.journal.write_text("\n".join(lines) + "\n")

    def read(self) -> str:
        return self.journal.read_text()

    def append(self, line: str) -> None:
        with self.journal.open("a") as fh:
            fh.write(line + "\n")

    def seed(self) -> Optional[int]:
        for line in self.read().splitlines():
            if line.startswith("seed "):
                return int(line.split()[1])
        return None
