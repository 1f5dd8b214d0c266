"""Run manifests: a JSON record of what produced an artifact directory.

Each command that writes artifacts drops exactly one manifest.json next to
them, holding the effective configuration, the seed, a git-describe string
for the working tree, sha256 digests of every input file, and start/end
timestamps. Reruns with identical manifest inputs reproduce the artifacts
in double precision.
"""

from __future__ import annotations

import hashlib
import json
import subprocess
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import FormatError

MANIFEST_NAME = "manifest.json"


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def git_describe(cwd=None) -> str:
    """Best-effort `git describe --always --dirty`; 'unknown' outside a repo."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            cwd=cwd,
            timeout=10,
        )
    except (OSError, subprocess.TimeoutExpired):
        return "unknown"
    if out.returncode != 0:
        return "unknown"
    return out.stdout.strip() or "unknown"


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """Provenance for one artifact directory."""

    command: str
    config: dict
    seed: int
    git: str = field(default_factory=git_describe)
    input_digests: dict = field(default_factory=dict)
    started_at: str = field(default_factory=_now_iso)
    finished_at: str = ""

    def add_input(self, path) -> None:
        self.input_digests[str(path)] = sha256_file(path)

    def finish(self) -> None:
        self.finished_at = _now_iso()

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "git": self.git,
            "input_digests": dict(self.input_digests),
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    def save(self, out_dir) -> Path:
        if not self.finished_at:
            self.finish()
        path = Path(out_dir) / MANIFEST_NAME
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def load_manifest(out_dir) -> RunManifest:
    path = Path(out_dir) / MANIFEST_NAME
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid manifest JSON in {path}: {exc}") from exc
    required = {"command", "config", "seed"}
    missing = required - payload.keys()
    if missing:
        raise FormatError(f"manifest {path} missing keys: {sorted(missing)}")
    return RunManifest(
        command=payload["command"],
        config=payload["config"],
        seed=payload["seed"],
        git=payload.get("git", "unknown"),
        input_digests=payload.get("input_digests", {}),
        started_at=payload.get("started_at", ""),
        finished_at=payload.get("finished_at", ""),
    )


__all__ = ["RunManifest", "load_manifest", "sha256_file", "git_describe", "MANIFEST_NAME"]
