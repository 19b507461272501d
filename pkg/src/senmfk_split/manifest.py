"""Run manifests: the reproducibility record the CLI writes per workspace.

A manifest snapshots the full configuration (every threshold and seed), the
digests of all inputs and outputs per stage, the tool version, and per-stage
wall-clock times.  It both documents how to reproduce a run and lets a rerun
skip stages whose parameters, inputs, and outputs all still match on disk.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class StageRecord:
    params: dict[str, Any]
    inputs: dict[str, str]
    outputs: dict[str, str]
    seconds: float
    resumed: bool = False


@dataclass
class RunManifest:
    version: str
    config: dict[str, Any]
    input_digests: dict[str, str] = field(default_factory=dict)
    stages: dict[str, StageRecord] = field(default_factory=dict)

    def record(
        self,
        name: str,
        params: dict[str, Any],
        inputs: dict[str, str],
        outputs: dict[str, str],
        seconds: float,
        resumed: bool = False,
    ) -> None:
        self.stages[name] = StageRecord(
            params=params,
            inputs=inputs,
            outputs=outputs,
            seconds=round(seconds, 6),
            resumed=resumed,
        )

    def can_skip(
        self,
        name: str,
        params: dict[str, Any],
        inputs: dict[str, str],
        workspace: Path,
    ) -> bool:
        """True when the recorded stage ran with identical parameters and
        inputs and all of its output files still match their digests."""
        rec = self.stages.get(name)
        if rec is None or rec.params != params or rec.inputs != inputs:
            return False
        for fname, digest in rec.outputs.items():
            path = workspace / fname
            if not path.is_file() or sha256_file(path) != digest:
                return False
        return True

    def save(self, path: str | Path) -> None:
        payload = {
            "version": self.version,
            "config": self.config,
            "input_digests": self.input_digests,
            "stages": {
                name: {
                    "params": rec.params,
                    "inputs": rec.inputs,
                    "outputs": rec.outputs,
                    "seconds": rec.seconds,
                    "resumed": rec.resumed,
                }
                for name, rec in self.stages.items()
            },
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        payload = json.loads(Path(path).read_text("utf-8"))
        manifest = cls(
            version=payload["version"],
            config=payload["config"],
            input_digests=payload.get("input_digests", {}),
        )
        for name, rec in payload.get("stages", {}).items():
            manifest.stages[name] = StageRecord(
                params=rec["params"],
                inputs=rec["inputs"],
                outputs=rec["outputs"],
                seconds=rec["seconds"],
                resumed=rec.get("resumed", False),
            )
        return manifest
