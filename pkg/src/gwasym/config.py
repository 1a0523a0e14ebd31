"""Run configuration: defaults, optional JSON file, environment, flags.

Later sources win: defaults < config file < environment < explicit flags.
``GWASYM_PRECISION`` and ``GWASYM_CACHE_DIR`` are the environment overrides.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["RunConfig", "DEFAULT_TOLERANCES", "load_config"]

DEFAULT_TOLERANCES = {
    "x0_cross_method": 1e-8,
    "ratio_genus0": 0.01,
    "ratio_genus1": 0.1,
    "slope": 0.25,
    "root_gap": 1e-2,
}


@dataclass(frozen=True)
class RunConfig:
    precision_bits: int = 256
    d_exact: int = 200
    d_float: int = 5000
    z_init: float = -30
    taylor_order: int = 30
    N: int = 8
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    cache_dir: Path = Path(".gwasym-cache")
    output_dir: Path = Path("gwasym-out")

    def __post_init__(self):
        if self.precision_bits < 64:
            raise ValueError(f"precision_bits must be >= 64, got {self.precision_bits}")
        if self.d_exact < 1 or self.d_exact > self.d_float:
            raise ValueError("need 1 <= d_exact <= d_float")
        if self.N < 4:
            raise ValueError(f"N must be >= 4, got {self.N}")
        if self.taylor_order < 4:
            raise ValueError("taylor_order must be >= 4")
        if self.z_init > -5:
            raise ValueError("z_init must be <= -5")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ValueError(f"unknown tolerances {sorted(unknown)}")
        object.__setattr__(self, "tolerances", {**DEFAULT_TOLERANCES, **self.tolerances})
        object.__setattr__(self, "cache_dir", Path(self.cache_dir))
        object.__setattr__(self, "output_dir", Path(self.output_dir))

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    def table_path(self, genus: int, mode: str) -> Path:
        if mode == "exact":
            return self.cache_dir / f"n{genus}_exact.jsonl"
        return self.cache_dir / f"n{genus}_scaled_p{self.precision_bits}.jsonl"

    def report_path(self, name: str, suffix: str = "json") -> Path:
        return self.output_dir / f"{name}_p{self.precision_bits}.{suffix}"

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        d["cache_dir"] = str(self.cache_dir)
        d["output_dir"] = str(self.output_dir)
        return d


_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def load_config(path=None, env=None, **flags) -> RunConfig:
    """Merge the sources; ``flags`` set to None are treated as absent."""
    env = os.environ if env is None else env
    values = {}
    if path is not None:
        data = json.loads(Path(path).read_text())
        unknown = set(data) - _FIELDS
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        values.update(data)
    if env.get("GWASYM_PRECISION"):
        values["precision_bits"] = int(env["GWASYM_PRECISION"])
    if env.get("GWASYM_CACHE_DIR"):
        values["cache_dir"] = env["GWASYM_CACHE_DIR"]
    for k, v in flags.items():
        if k not in _FIELDS:
            raise TypeError(f"unknown option {k}")
        if v is not None:
            values[k] = v
    return RunConfig(**values)
