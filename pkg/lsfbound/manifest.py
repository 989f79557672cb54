"""Run manifests: what was run, on which bytes, producing which bytes."""

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable

from pydantic import BaseModel, ConfigDict

from . import __version__

_CHUNK = 1 << 20


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(_CHUNK), b""):
            digest.update(block)
    return digest.hexdigest()


def digests(paths: Iterable) -> Dict[str, str]:
    return {str(p): sha256_file(p) for p in paths}


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: str
    config: Dict[str, Any]
    inputs: Dict[str, str]
    outputs: Dict[str, str]
    seed: int
    summary: Dict[str, Any] = {}
    version: str = __version__
    started_at: str
    finished_at: str

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / f"{self.command.replace('-', '_')}_manifest.json"
        path.write_text(json.dumps(self.model_dump(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path
