"""Run manifests: config hash, seeds, timestamps and artifact checksums.

A manifest is written with status "running" before any experiment work and
finalized with file checksums afterwards, so an interrupted run is
detectable.  ``verify_manifest`` recomputes the config hash from the
embedded canonical config and the checksum of every listed artifact:
a hash mismatch or missing finalization is "stale", a damaged or missing
artifact is "corrupt".
"""
from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

from . import __version__, kernels
from .config import ExperimentConfig, canonical_json, config_hash
from .serialize import sha256_file, write_json

MANIFEST_NAME = "manifest.json"


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def start_manifest(out_dir, config: ExperimentConfig, seed_source: str) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "artifact_version": __version__,
        "kind": config.kind,
        "seed": config.seed,
        "seed_source": seed_source,
        "kernel_backend": kernels.BACKEND,
        "config_hash": config_hash(config),
        "canonical_config": canonical_json(config.canonical_payload()),
        "status": "running",
        "started_at": _now(),
        "finished_at": None,
        "files": [],
    }
    write_json(out / MANIFEST_NAME, manifest)
    return manifest


def finalize_manifest(out_dir, manifest: dict, files: List[str]) -> dict:
    out = Path(out_dir)
    records = []
    for name in sorted(files):
        p = out / name
        records.append({"name": name, "sha256": sha256_file(p), "bytes": p.stat().st_size})
    manifest = dict(manifest)
    manifest["files"] = records
    manifest["status"] = "complete"
    manifest["finished_at"] = _now()
    write_json(out / MANIFEST_NAME, manifest)
    return manifest


@dataclass(frozen=True)
class ManifestVerdict:
    status: str  # ok | stale | corrupt
    missing: tuple = field(default_factory=tuple)
    mismatched: tuple = field(default_factory=tuple)
    detail: str = ""


def verify_manifest(out_dir) -> ManifestVerdict:
    """Recompute the config hash and artifact checksums under ``out_dir``."""
    import hashlib
    import json

    out = Path(out_dir)
    path = out / MANIFEST_NAME
    if not path.exists():
        return ManifestVerdict(status="corrupt", missing=(MANIFEST_NAME,),
                               detail="manifest file is missing")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        return ManifestVerdict(status="corrupt", detail=f"manifest unreadable: {exc}")

    missing, mismatched = [], []
    for record in manifest.get("files", []):
        p = out / record["name"]
        if not p.exists():
            missing.append(record["name"])
        elif sha256_file(p) != record["sha256"]:
            mismatched.append(record["name"])
    if missing or mismatched:
        return ManifestVerdict(
            status="corrupt", missing=tuple(missing), mismatched=tuple(mismatched),
            detail="artifact checksums do not match the manifest",
        )

    recomputed = hashlib.sha256(
        manifest.get("canonical_config", "").encode("utf-8")
    ).hexdigest()
    if recomputed != manifest.get("config_hash"):
        return ManifestVerdict(status="stale", detail="config hash does not match manifest")
    if manifest.get("status") != "complete":
        return ManifestVerdict(status="stale", detail="run was never finalized")
    return ManifestVerdict(status="ok")
