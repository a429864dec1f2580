"""Run manifests: resolved configuration, seeds and output digests.

Every CLI command writes a manifest next to its outputs. A manifest can be
passed back as ``--config``: the embedded resolved configuration is reused,
which must reproduce byte-identical result CSVs on the same platform.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path


class ConfigError(ValueError):
    """A configuration file failed to parse or validate."""


@dataclass
class RunManifest:
    command: str
    config: dict
    master_seed: int | None
    version: str
    started_utc: str
    finished_utc: str = ""
    outputs: list[dict] = field(default_factory=list)


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def new_manifest(command: str, config: dict, master_seed: int | None, version: str) -> RunManifest:
    return RunManifest(
        command=command,
        config=config,
        master_seed=master_seed,
        version=version,
        started_utc=utc_now(),
    )


def finalize_manifest(manifest: RunManifest, output_paths, base_dir) -> None:
    """Record finish time and content digests of the produced files."""
    base = Path(base_dir)
    manifest.finished_utc = utc_now()
    manifest.outputs = [
        {"path": str(Path(p).relative_to(base)), "sha256": sha256_file(p)}
        for p in output_paths
    ]


def write_manifest(path, manifest: RunManifest) -> None:
    Path(path).write_text(json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n")


def load_config(path, expected_command: str | None = None) -> dict:
    """Load a JSON config file, accepting a previously written manifest.

    Manifest files are recognized by their ``command``/``config`` keys; the
    embedded resolved config is returned so a run can be repeated verbatim.
    Parse failures raise :class:`ConfigError` with line/column context.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top-level value must be an object")
    if "command" in data and "config" in data:
        if expected_command is not None and data["command"] != expected_command:
            raise ConfigError(
                f"{path}: manifest was written by '{data['command']}', "
                f"not '{expected_command}'"
            )
        data = data["config"]
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: manifest 'config' must be an object")
    return data


def check_keys(config: dict, allowed: set[str], context: str) -> None:
    unknown = set(config) - allowed
    if unknown:
        raise ConfigError(
            f"{context}: unknown config keys: {', '.join(sorted(unknown))}; "
            f"allowed: {', '.join(sorted(allowed))}"
        )
