"""Run directories: per-stage JSON checkpoints with atomic writes.

Every checkpoint embeds the run's config fingerprint; stale checkpoints
(fingerprint mismatch) are ignored on resume.  Stage completion times live
in stages.json so resumed runs can prove they did not recompute.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path
from typing import Any, Optional


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, ensure_ascii=False,
                      separators=(",", ":"))


def atomic_write(path: Path, data: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(data, encoding="utf-8")
    os.replace(tmp, path)


class RunDirectory:
    def __init__(self, path: str | Path, fingerprint: str):
        self.path = Path(path)
        self.fingerprint = fingerprint
        (self.path / "checkpoints").mkdir(parents=True, exist_ok=True)
        (self.path / "reports").mkdir(exist_ok=True)
        (self.path / "plots").mkdir(exist_ok=True)

    def checkpoint_path(self, stage: str) -> Path:
        return self.path / "checkpoints" / f"{stage}.json"

    def write_checkpoint(self, stage: str, payload: dict) -> None:
        body = {"fingerprint": self.fingerprint, "stage": stage,
                "payload": payload}
        atomic_write(self.checkpoint_path(stage), canonical_json(body))
        self._mark_complete(stage)

    def load_checkpoint(self, stage: str) -> Optional[dict]:
        path = self.checkpoint_path(stage)
        if not path.exists():
            return None
        body = json.loads(path.read_text("utf-8"))
        if body.get("fingerprint") != self.fingerprint:
            return None
        return body["payload"]

    def _stages_path(self) -> Path:
        return self.path / "stages.json"

    def stage_log(self) -> dict:
        path = self._stages_path()
        if path.exists():
            return json.loads(path.read_text("utf-8"))
        return {}

    def _mark_complete(self, stage: str) -> None:
        log = self.stage_log()
        log[stage] = {"completed_at": time.time(),
                      "fingerprint": self.fingerprint}
        atomic_write(self._stages_path(),
                     json.dumps(log, sort_keys=True, indent=1))

    def write_report(self, name: str, payload: Any) -> Path:
        out = self.path / "reports" / name
        if name.endswith(".json"):
            atomic_write(out, canonical_json(payload))
        else:
            atomic_write(out, payload)
        return out

    def report_path(self, name: str) -> Path:
        return self.path / "reports" / name
