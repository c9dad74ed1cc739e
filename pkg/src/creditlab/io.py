"""CSV/JSON persistence of worlds and run manifests."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import pandas as pd

from creditlab.simkernel import ContractViolation, GenConfig, WorldDatasets
from creditlab.simkernel.generator import PRODUCTION_COLUMNS, TRANSACTION_COLUMNS

WORLD_FILES = {
    "ins_production": "ins_production.csv",
    "css_production": "css_production.csv",
    "ins_transactions": "ins_transactions.csv",
    "css_transactions": "css_transactions.csv",
}
CONFIG_FILE = "config.json"
MANIFEST_FILE = "manifest.json"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_csv(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def write_json(data, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n",
                    encoding="utf-8")
    return path


def _jsonable(v):
    if hasattr(v, "item"):
        return v.item()
    if isinstance(v, (set, tuple)):
        return list(v)
    raise TypeError(f"not JSON serialisable: {type(v).__name__}")


def save_world(world: WorldDatasets, directory) -> list[Path]:
    """Write the four tables (and the config when known); returns the written paths."""
    d = Path(directory)
    out = [write_csv(getattr(world, key), d / name) for key, name in WORLD_FILES.items()]
    if world.config is not None:
        p = d / CONFIG_FILE
        p.write_text(world.config.to_json() + "\n", encoding="utf-8")
        out.append(p)
    return out


def load_world(directory) -> WorldDatasets:
    """Read a world written by :func:`save_world`.

    Raises:
        ContractViolation: a table is missing or lacks required columns.
    """
    d = Path(directory)
    tables = {}
    for key, name in WORLD_FILES.items():
        path = d / name
        if not path.exists():
            raise ContractViolation(f"missing world table {path}")
        frame = pd.read_csv(path)
        need = PRODUCTION_COLUMNS if "production" in key else TRANSACTION_COLUMNS
        lacking = [c for c in need if c not in frame.columns]
        if lacking:
            raise ContractViolation(f"{name} lacks columns {lacking}")
        tables[key] = frame[need]
    cfg_path = d / CONFIG_FILE
    cfg = GenConfig.from_json(cfg_path.read_text(encoding="utf-8")) if cfg_path.exists() else None
    return WorldDatasets(**tables, config=cfg)


@dataclass
class RunManifest:
    """What a command read and wrote, with digests that pin the run down."""

    command: str
    config_digest: str | None = None
    seed: int | None = None
    inputs: dict = field(default_factory=dict)  # path -> sha256
    outputs: dict = field(default_factory=dict)  # path -> sha256
    timings: dict = field(default_factory=dict)  # step -> seconds
    metrics: dict = field(default_factory=dict)

    def add_inputs(self, paths) -> None:
        for p in paths:
            self.inputs[str(p)] = file_digest(p)

    def add_outputs(self, paths) -> None:
        for p in paths:
            self.outputs[str(p)] = file_digest(p)

    def write(self, directory) -> Path:
        return write_json(asdict(self), Path(directory) / MANIFEST_FILE)
