"""Dynamic metasurface antenna front end.

Elements are indexed strip-major: element ``e`` of microstrip ``d`` (both
zero-based) has linear index ``d * n_e + e``. The same indexing is used by
the steering vectors in :mod:`dmace.channel_model`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from dmace.errors import ConfigError, ShapeError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class DmaConfig:
    n_d: int = 4
    n_e: int = 4
    wavelength: float = 0.0107
    dx: float | None = None
    dy: float | None = None
    alpha: float = 0.6
    beta: float = 827.67

    def __post_init__(self):
        # half-wavelength spacing unless given
        if self.dx is None:
            object.__setattr__(self, "dx", self.wavelength / 2)
        if self.dy is None:
            object.__setattr__(self, "dy", self.wavelength / 2)
        if self.n_d < 1 or self.n_e < 1:
            raise ConfigError("n_d and n_e must be at least 1")
        if self.wavelength <= 0 or self.dx <= 0 or self.dy <= 0:
            raise ConfigError("wavelength and spacings must be positive")
        if self.alpha < 0 or self.beta <= 0:
            raise ConfigError("need alpha >= 0 and beta > 0")

    @property
    def n(self) -> int:
        return self.n_d * self.n_e

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DmaConfig":
        return cls(**{k: d[k] for k in ("n_d", "n_e", "wavelength", "dx", "dy", "alpha", "beta") if k in d})


@dataclass(frozen=True)
class DmaWeights:
    phases: np.ndarray

    def __post_init__(self):
        ph = np.mod(np.asarray(self.phases, dtype=float), TWO_PI)
        # mod can round up to exactly 2*pi for tiny negative inputs
        ph[ph >= TWO_PI] = 0.0
        object.__setattr__(self, "phases", ph)

    @property
    def q(self) -> np.ndarray:
        return phase_to_weight(self.phases)


def element_positions(cfg: DmaConfig) -> np.ndarray:
    """Distance of each element from its strip's feed, ``(n_e - 1) * dx``."""
    return np.tile(np.arange(cfg.n_e) * cfg.dx, cfg.n_d)


def build_h_diag(cfg: DmaConfig) -> np.ndarray:
    rho = element_positions(cfg)
    return np.exp(-rho * (cfg.alpha + 1j * cfg.beta))


def build_h(cfg: DmaConfig) -> np.ndarray:
    """Diagonal in-waveguide propagation matrix, ``N x N``."""
    return np.diag(build_h_diag(cfg))


def phase_to_weight(phi):
    """Lorentzian-constrained element weight ``(j + exp(j phi)) / 2``."""
    return (1j + np.exp(1j * np.asarray(phi, dtype=float))) / 2


def strip_mask(cfg: DmaConfig) -> np.ndarray:
    """0/1 ``N_d x N`` pattern: row ``d`` covers the columns of strip ``d``."""
    return np.kron(np.eye(cfg.n_d), np.ones((1, cfg.n_e)))


def build_q(w: DmaWeights, cfg: DmaConfig) -> np.ndarray:
    ph = np.asarray(w.phases)
    if ph.shape != (cfg.n,):
        raise ShapeError(f"expected {cfg.n} phases, got shape {ph.shape}")
    return strip_mask(cfg) * phase_to_weight(ph)[None, :]


def dma_receive(q, h, y) -> np.ndarray:
    """Analog combining ``z = Q H y``; ``y`` may hold one sample per column."""
    q, h, y = np.asarray(q), np.asarray(h), np.asarray(y)
    n = h.shape[0]
    if h.shape != (n, n) or q.ndim != 2 or q.shape[1] != n or y.shape[0] != n:
        raise ShapeError(f"dma_receive shapes Q{q.shape} H{h.shape} y{y.shape}")
    return q @ (h @ y)


def sigmoid_phase_map(x):
    """Map real pre-phases onto ``(0, 2*pi)``."""
    x = np.asarray(x, dtype=float)
    return TWO_PI / (1.0 + np.exp(-x))


def random_dma_weights(cfg: DmaConfig, rng: np.random.Generator) -> DmaWeights:
    return DmaWeights(rng.uniform(0.0, TWO_PI, size=cfg.n))
