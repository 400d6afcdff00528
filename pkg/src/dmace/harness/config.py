"""Scenario configuration for sweeps and CLI runs.

One JSON file per scenario; every field below is a key of that file. Unknown
keys are rejected so typos surface early.
"""

from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from dmace.dma_model import DmaConfig
from dmace.errors import ConfigError

ALGORITHMS = ("fista", "lista", "lista_smo", "lista_smo_ssl")
AXES = ("snr", "layers", "dict", "compression")


@dataclass
class ExperimentConfig:
    scenario: str = "desk"
    dma: dict = field(default_factory=lambda: DmaConfig().to_dict())
    n_train: int = 8000
    n_test: int = 512
    n_val: int = 2048
    k_theta: int = 6
    k_phi: int = 6
    layers: int = 8
    snr_db: list = field(default_factory=lambda: [0.0, 6.0, 12.0, 18.0])
    eval_snr_db: float = 12.0
    pilots: int = 1
    algorithms: list = field(default_factory=lambda: ["fista", "lista", "lista_smo"])
    # sweep axes
    layer_values: list = field(default_factory=lambda: [1, 2, 4, 8])
    dict_values: list = field(default_factory=lambda: [[4, 4], [6, 6], [8, 8], [10, 10]])
    pilot_values: list = field(default_factory=lambda: [4, 2, 1])
    geometry_overrides: list = field(default_factory=list)  # [[n_d, n_e], ...] for the compression axis
    # training
    batch_size: int = 64
    max_epochs: int = 100
    window: int = 10
    lista_lr: float = 1e-3
    smo_lr: float = 1e-2
    lista_init: str = "analytic"
    eta0: float = 1e-4
    kappa0: float = 1.0
    shards: int = 1
    threads: int = 1
    # classic baseline
    fista_iters: int = 300
    fista_etas: list = field(default_factory=lambda: [1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3])
    master_seed: int = 0
    output_dir: str = "runs/desk"
    record_runtime: bool = False

    def __post_init__(self):
        if not self.snr_db:
            raise ConfigError("snr_db must list at least one value")
        if min(self.n_train, self.n_test, self.n_val) < 1:
            raise ConfigError("dataset sizes must be at least 1")
        if self.layers < 1 or self.pilots < 1 or self.k_theta < 1 or self.k_phi < 1:
            raise ConfigError("layers, pilots and grid sizes must be positive")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ConfigError(f"unknown algorithms {bad}; choose from {list(ALGORITHMS)}")
        if self.lista_init not in ("analytic", "random"):
            raise ConfigError("lista_init must be 'analytic' or 'random'")
        self.dma_config()  # validates geometry

    def dma_config(self) -> DmaConfig:
        try:
            return DmaConfig.from_dict(self.dma)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def sub_seed(self, role: str) -> int:
        """Deterministic seed for a named role, e.g. ``"train"`` or ``"model/lista"``."""
        return zlib.crc32(f"{self.master_seed}:{role}".encode()) & 0x7FFFFFFF

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    def config_hash(self) -> str:
        """Hash of everything that affects results (output location excluded)."""
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("record_runtime")
        return stable_hash(d)


def stable_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
