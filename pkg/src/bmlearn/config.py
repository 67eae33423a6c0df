"""Tunable constants.

Every asymptotic statement this package instantiates needs a concrete
constant.  They all live in ``constants.json`` next to this module; the
``_provenance`` block in that file records where each value came from.
Set ``BMLEARN_CONFIG`` (or pass ``--config`` on the command line) to load a
different file.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields, replace
from importlib import resources
from pathlib import Path

ENV_VAR = "BMLEARN_CONFIG"


@dataclass(frozen=True)
class Config:
    # boosting
    c_abort: float = 3.0
    c_T: float = 2.0
    C_sim: float = 4.0
    val_const: float = 8.0
    weak_fail_prob: float = 1 / 3
    # calibrated; see the calibration suite
    c0: float = 0.05
    kappa: float = 4.0
    # reductions
    c_p: float = 8.0
    identify_radius: float = 0.3
    # search
    exact_cap: int = 24
    ball_objective_cap: int = 12
    ball_steps: int = 60
    # floating point slack for ratio and witness comparisons
    close_rtol: float = 1e-12
    witness_atol: float = 1e-12
    # triviality baselines
    triviality_slack: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)


_cache: dict[str, Config] = {}


def default_config_path() -> Path:
    return Path(str(resources.files("bmlearn").joinpath("constants.json")))


def load_config(path: str | os.PathLike | None = None) -> Config:
    """Load constants from ``path``, ``$BMLEARN_CONFIG`` or the packaged file."""
    if path is None:
        path = os.environ.get(ENV_VAR) or default_config_path()
    key = str(path)
    if key not in _cache:
        with open(path) as fh:
            raw = json.load(fh)
        known = {f.name for f in fields(Config)}
        values = {k: v for k, v in raw.items() if k in known}
        _cache[key] = Config(**values)
    return _cache[key]


def get_config() -> Config:
    return load_config()


def write_config(cfg: Config, path: str | os.PathLike, provenance: dict | None = None) -> None:
    """Write ``cfg`` as JSON, merging ``provenance`` notes with any existing ones."""
    path = Path(path)
    notes = {}
    if path.exists():
        with open(path) as fh:
            notes = json.load(fh).get("_provenance", {})
    notes.update(provenance or {})
    payload = cfg.to_dict()
    payload["_provenance"] = notes
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    _cache.pop(str(path), None)


def override(cfg: Config, **changes) -> Config:
    return replace(cfg, **changes)
