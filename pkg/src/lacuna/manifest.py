"""Run manifests: what produced an artifact, from which inputs, with which digests."""

from __future__ import annotations

import json
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Mapping

from lacuna import __version__
from lacuna.io import canonical_digest, sha256_file

SUFFIX = ".manifest.json"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: list[str]
    config: dict[str, Any] = field(default_factory=dict)
    config_digest: str = ""
    seeds: dict[str, int] = field(default_factory=dict)
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    tool_version: str = __version__
    started: str = field(default_factory=_now)
    finished: str | None = None
    failures: dict[str, int] = field(default_factory=dict)
    status: str = "running"

    @classmethod
    def start(cls, config: Mapping[str, Any], seeds: Mapping[str, int] | None = None, command: list[str] | None = None):
        return cls(
            command=list(command if command is not None else sys.argv),
            config=dict(config),
            config_digest=canonical_digest(config),
            seeds=dict(seeds or {}),
        )

    def add_inputs(self, paths: Iterable[str | Path], base: str | Path) -> None:
        for p in paths:
            self.inputs[_rel(p, base)] = sha256_file(p)

    def add_outputs(self, paths: Iterable[str | Path], base: str | Path) -> None:
        for p in paths:
            self.outputs[_rel(p, base)] = sha256_file(p)

    def finish(self, status: str = "ok") -> None:
        self.finished = _now()
        self.status = status

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def _rel(path: str | Path, base: str | Path) -> str:
    return os.path.relpath(Path(path).resolve(), Path(base).resolve())


def sidecar(path: str | Path) -> Path:
    return Path(str(path) + SUFFIX)


def write_sidecars(
    manifest: RunManifest, inputs: Iterable[str | Path], outputs: Iterable[str | Path]
) -> None:
    """Place a copy of the manifest next to each output.  Recorded paths are
    relative to that output's directory."""
    inputs = [Path(p) for p in inputs]
    outputs = [Path(p) for p in outputs]
    for out in outputs:
        m = RunManifest(**{**asdict(manifest), "inputs": {}, "outputs": {}})
        m.add_inputs(inputs, out.parent)
        m.add_outputs(outputs, out.parent)
        m.write(sidecar(out))


def verify_manifest(path: str | Path) -> list[str]:
    """Recompute every recorded digest; return a description of each mismatch."""
    path = Path(path)
    m = RunManifest.read(path)
    problems = []
    for kind, table in (("input", m.inputs), ("output", m.outputs)):
        for rel, digest in sorted(table.items()):
            target = path.parent / rel
            if not target.exists():
                problems.append(f"{kind} {rel}: missing")
            elif sha256_file(target) != digest:
                problems.append(f"{kind} {rel}: digest mismatch")
    return problems
