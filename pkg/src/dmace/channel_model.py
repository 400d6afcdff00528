"""Multipath channels, planar-array steering vectors, pilots and datasets."""

from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dmace import binio
from dmace.dma_model import DmaConfig
from dmace.errors import DomainError, PersistenceError

DATASET_MAGIC = b"DMAD"

THETA_RANGE = (np.pi / 6, 5 * np.pi / 6)
PHI_RANGE = (np.pi / 12, 5 * np.pi / 12)
DIST_RANGE = (15.0, 60.0)
PATHS_RANGE = (2, 6)
TRAIN_SNR_RANGE = (0.0, 21.0)


@dataclass
class PathSet:
    gains: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    dist: np.ndarray

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=complex).ravel()
        self.theta = np.asarray(self.theta, dtype=float).ravel()
        self.phi = np.asarray(self.phi, dtype=float).ravel()
        self.dist = np.asarray(self.dist, dtype=float).ravel()
        n = len(self.gains)
        if not (len(self.theta) == len(self.phi) == len(self.dist) == n):
            raise ValueError("path arrays must have equal length")

    @property
    def count(self) -> int:
        return len(self.gains)


@dataclass
class ChannelSample:
    paths: PathSet
    g_star: np.ndarray
    alpha_star: np.ndarray
    y: np.ndarray
    sigma: float
    snr_db: float


def steering_vector(theta, phi, cfg: DmaConfig) -> np.ndarray:
    """Unit-norm planar-array response, strip-major element order.

    Entry ``d * n_e + e`` equals ``a_x[e] * a_y[d]`` where ``a_x`` runs along a
    microstrip and ``a_y`` across strips.
    """
    dx_phase = 2 * np.pi * cfg.dx / cfg.wavelength * np.cos(theta) * np.sin(phi)
    dy_phase = 2 * np.pi * cfg.dy / cfg.wavelength * np.sin(theta) * np.sin(phi)
    ax = np.exp(1j * dx_phase * np.arange(cfg.n_e)) / np.sqrt(cfg.n_e)
    ay = np.exp(1j * dy_phase * np.arange(cfg.n_d)) / np.sqrt(cfg.n_d)
    return np.kron(ay, ax)


def path_gain(d, phi, wavelength: float = 0.0107, b: int = 2):
    """Free-space gain scaled by the element radiation profile ``2(b+1)cos^b(phi)``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise DomainError("path length must be positive")
    profile = 2 * (b + 1) * np.cos(phi) ** b
    return np.sqrt(np.maximum(profile, 0.0)) * wavelength / (4 * np.pi * d)


def sample_paths(rng: np.random.Generator, wavelength: float = 0.0107, b: int = 2, random_phase: bool = False) -> PathSet:
    lp = int(rng.integers(PATHS_RANGE[0], PATHS_RANGE[1] + 1))
    d = rng.uniform(*DIST_RANGE, size=lp)
    theta = rng.uniform(*THETA_RANGE, size=lp)
    phi = rng.uniform(*PHI_RANGE, size=lp)
    gains = path_gain(d, phi, wavelength, b).astype(complex)
    if random_phase:
        gains = gains * np.exp(1j * rng.uniform(0, 2 * np.pi, size=lp))
    return PathSet(gains, theta, phi, d)


def synthesize_channel(paths: PathSet, cfg: DmaConfig) -> np.ndarray:
    if paths.count == 0:
        raise DomainError("a channel needs at least one path")
    atoms = np.stack([steering_vector(t, p, cfg) for t, p in zip(paths.theta, paths.phi)], axis=1)
    return np.sqrt(cfg.n / paths.count) * (atoms @ paths.gains)


def noise_sigma(g: np.ndarray, snr_db: float) -> float:
    """Per-element noise std for ``||g||^2 / (N sigma^2) = 10^(snr/10)``."""
    power = float(np.vdot(g, g).real)
    if power == 0.0:
        raise DomainError("SNR is undefined for a zero channel")
    if np.isinf(snr_db) and snr_db > 0:
        return 0.0
    return float(np.sqrt(power / (g.shape[0] * 10 ** (snr_db / 10))))


def complex_noise(rng: np.random.Generator, shape, sigma: float) -> np.ndarray:
    """Circularly symmetric Gaussian with ``E|n|^2 = sigma^2`` per entry."""
    return sigma * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def observe_pilot(g, snr_db: float, cfg: DmaConfig, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Noisy element observation ``y = g + n`` for the unit pilot."""
    g = np.asarray(g, dtype=complex)
    sigma = noise_sigma(g, snr_db)
    return g + complex_noise(rng, g.shape, sigma), sigma


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per sample so generation order does not matter."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),)))


@dataclass
class Dataset:
    cfg: DmaConfig
    samples: list
    k_theta: int
    k_phi: int
    seed: int = 0
    snr_policy: object = "uniform"
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.samples)

    @property
    def d(self) -> int:
        return self.k_theta * self.k_phi

    def _stack(self, attr):
        return np.stack([getattr(s, attr) for s in self.samples], axis=1)

    @property
    def g_star(self) -> np.ndarray:
        """``N x count`` clean channels."""
        return self._stack("g_star")

    @property
    def y(self) -> np.ndarray:
        return self._stack("y")

    @property
    def alpha_star(self) -> np.ndarray:
        return self._stack("alpha_star")

    @property
    def sigma(self) -> np.ndarray:
        return np.array([s.sigma for s in self.samples])

    @property
    def snr_db(self) -> np.ndarray:
        return np.array([s.snr_db for s in self.samples])

    def header(self) -> dict:
        return {
            "n": self.cfg.n,
            "d": self.d,
            "count": len(self.samples),
            "cfg": self.cfg.to_dict(),
            "k_theta": self.k_theta,
            "k_phi": self.k_phi,
            "seed": self.seed,
            "snr_policy": self.snr_policy,
            "meta": self.meta,
        }

    def save(self, path) -> None:
        try:
            with open(path, "wb") as f:
                binio.write_header(f, DATASET_MAGIC, self.header())
                for s in self.samples:
                    f.write(struct.pack("<ddI", s.snr_db, s.sigma, s.paths.count))
                    p = s.paths
                    binio.write_array(f, p.gains)
                    binio.write_array(f, np.stack([p.theta, p.phi, p.dist], axis=1))
                    binio.write_array(f, s.g_star)
                    binio.write_array(f, s.alpha_star)
                    binio.write_array(f, s.y)
        except OSError as exc:
            raise PersistenceError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "Dataset":
        try:
            with open(path, "rb") as f:
                h = binio.read_header(f, DATASET_MAGIC)
                n, d = h["n"], h["d"]
                samples = []
                for _ in range(h["count"]):
                    raw = f.read(20)
                    if len(raw) != 20:
                        raise PersistenceError("truncated sample record")
                    snr, sigma, lp = struct.unpack("<ddI", raw)
                    gains = binio.read_array(f, (lp,), True)
                    angles = binio.read_array(f, (lp, 3), False)
                    g = binio.read_array(f, (n,), True)
                    alpha = binio.read_array(f, (d,), True)
                    y = binio.read_array(f, (n,), True)
                    paths = PathSet(gains, angles[:, 0], angles[:, 1], angles[:, 2])
                    samples.append(ChannelSample(paths, g, alpha, y, sigma, snr))
        except OSError as exc:
            raise PersistenceError(str(exc)) from exc
        return cls(
            DmaConfig.from_dict(h["cfg"]), samples, h["k_theta"], h["k_phi"], h["seed"], h["snr_policy"], h.get("meta", {})
        )

    def to_json(self) -> str:
        def cx(a):
            a = np.asarray(a)
            return [[float(v.real), float(v.imag)] for v in a.ravel()]

        rows = [
            {
                "snr_db": s.snr_db,
                "sigma": s.sigma,
                "paths": {
                    "gains": cx(s.paths.gains),
                    "theta": s.paths.theta.tolist(),
                    "phi": s.paths.phi.tolist(),
                    "dist": s.paths.dist.tolist(),
                },
                "g_star": cx(s.g_star),
                "alpha_star": cx(s.alpha_star),
                "y": cx(s.y),
            }
            for s in self.samples
        ]
        return json.dumps({"header": self.header(), "samples": rows})


def make_sample(index: int, seed: int, snr_policy, cfg: DmaConfig, grid) -> ChannelSample:
    from dmace.dictionary import nearest_grid_label

    rng = sample_rng(seed, index)
    if snr_policy == "uniform":
        snr = float(rng.uniform(*TRAIN_SNR_RANGE))
    else:
        snr = float(snr_policy)
    paths = sample_paths(rng, cfg.wavelength)
    g = synthesize_channel(paths, cfg)
    y, sigma = observe_pilot(g, snr, cfg, rng)
    alpha = nearest_grid_label(paths, grid)
    return ChannelSample(paths, g, alpha, y, sigma, snr)


def generate_dataset(count: int, snr_policy, cfg: DmaConfig, seed: int, grid, path=None, workers: int = 1) -> Dataset:
    """Draw ``count`` samples; ``snr_policy`` is ``"uniform"`` (U(0, 21) dB) or a fixed dB value.

    ``grid`` is a :class:`dmace.dictionary.GridDictionary` used for the sparse
    labels. Parallel generation gives the same samples as serial generation.
    """
    if count < 1:
        raise DomainError("dataset needs at least one sample")
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            samples = list(ex.map(lambda i: make_sample(i, seed, snr_policy, cfg, grid), range(count)))
    else:
        samples = [make_sample(i, seed, snr_policy, cfg, grid) for i in range(count)]
    ds = Dataset(cfg, samples, grid.k_theta, grid.k_phi, int(seed), snr_policy)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        ds.save(path)
    return ds
