"""
Result writers: CSV tables, JSON documents and the per-run manifest.
"""

import csv
import json
import logging
import platform
from dataclasses import asdict, is_dataclass
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Union

import numpy as np

from qag.config import config_hash

logger = logging.getLogger(__name__)

TRACKED_PACKAGES = ("qag-toolkit", "numpy", "scipy", "pyyaml", "tqdm")


def to_plain(value: Any) -> Any:
    """Convert numpy and dataclass values into JSON/CSV friendly Python objects."""
    if is_dataclass(value) and not isinstance(value, type):
        return to_plain(asdict(value))
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_csv(rows: Iterable[Any], path: Union[str, Path], fieldnames: Optional[Sequence[str]] = None) -> Path:
    """Write dict or dataclass rows; floats keep their full repr precision."""
    rows = [to_plain(r) for r in rows]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    logger.debug("Wrote %d rows to %s", len(rows), path)
    return path


def read_csv(path: Union[str, Path]) -> List[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def write_matrix_csv(matrix: np.ndarray, path: Union[str, Path], labels: Optional[Sequence[str]] = None) -> Path:
    matrix = np.asarray(matrix)
    labels = list(labels) if labels is not None else [f"p{i}" for i in range(matrix.shape[1])]
    rows = [dict(zip(["row"] + labels, [labels[i]] + [float(v) for v in matrix[i]])) for i in range(matrix.shape[0])]
    return write_csv(rows, path, ["row"] + labels)


def write_json(payload: Any, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(to_plain(payload), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def write_jsonl(records: Iterable[Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for record in records:
            f.write(json.dumps(to_plain(record), sort_keys=True) + "\n")
    return path


def package_versions() -> dict:
    versions = {"python": platform.python_version()}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def write_manifest(out_dir: Union[str, Path], subcommand: str, config: dict, seed: int, **extra) -> Path:
    """manifest.json: what ran, with which config hash, seed and versions."""
    manifest = {
        "subcommand": subcommand,
        "seed": seed,
        "config_hash": config_hash(config),
        "config": config,
        "versions": package_versions(),
        "created": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    }
    manifest.update(extra)
    return write_json(manifest, Path(out_dir) / "manifest.json")
