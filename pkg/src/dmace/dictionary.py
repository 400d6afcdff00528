"""Angular-grid sparsifying dictionary, nearest-grid labels and grid mismatch."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dmace import binio
from dmace.channel_model import PathSet, steering_vector
from dmace.dma_model import DmaConfig

DICT_MAGIC = b"DMAM"


@dataclass(frozen=True)
class GridDictionary:
    atoms: np.ndarray  # N x D, unit-norm columns
    theta: np.ndarray  # length D
    phi: np.ndarray  # length D
    k_theta: int
    k_phi: int

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    @property
    def grid_angles(self) -> list[tuple[float, float]]:
        return list(zip(self.theta.tolist(), self.phi.tolist()))

    def save(self, path) -> None:
        binio.save_tensors(
            path,
            DICT_MAGIC,
            {"kind": "grid_dictionary", "k_theta": self.k_theta, "k_phi": self.k_phi},
            {"atoms": self.atoms, "theta": self.theta, "phi": self.phi},
        )

    @classmethod
    def load(cls, path) -> "GridDictionary":
        h, t = binio.load_tensors(path, DICT_MAGIC)
        return cls(t["atoms"], t["theta"], t["phi"], h["k_theta"], h["k_phi"])


def build_grid_dictionary(k_phi: int, k_theta: int, cfg: DmaConfig) -> GridDictionary:
    """Product grid ``phi = k pi / (2 K_phi)``, ``theta = k pi / K_theta`` (``k >= 1``).

    Atoms are ordered with ``theta`` varying slowest.
    """
    if k_phi < 1 or k_theta < 1:
        raise ValueError("grid sizes must be positive")
    thetas = np.arange(1, k_theta + 1) * np.pi / k_theta
    phis = np.arange(1, k_phi + 1) * np.pi / (2 * k_phi)
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    tt, pp = tt.ravel(), pp.ravel()
    atoms = np.stack([steering_vector(t, p, cfg) for t, p in zip(tt, pp)], axis=1)
    return GridDictionary(atoms, tt, pp, k_theta, k_phi)


def nearest_index(theta: float, phi: float, grid: GridDictionary) -> int:
    """Grid point closest in Euclidean ``(theta, phi)`` distance; ties go to the lowest index."""
    return int(np.argmin((grid.theta - theta) ** 2 + (grid.phi - phi) ** 2))


def nearest_grid_label(paths: PathSet, grid: GridDictionary) -> np.ndarray:
    """Sparse label with ``sqrt(N/L_p) * gain`` at each path's nearest grid point.

    Paths that land on the same grid point have their coefficients summed.
    """
    n = grid.atoms.shape[0]
    alpha = np.zeros(grid.d, dtype=complex)
    scale = np.sqrt(n / paths.count)
    for a, t, p in zip(paths.gains, paths.theta, paths.phi):
        alpha[nearest_index(t, p, grid)] += scale * a
    return alpha


def mismatch_chi(theta: float, phi: float, grid: GridDictionary, cfg: DmaConfig) -> complex:
    """Inner product between the nearest grid atom and the true steering vector."""
    i = nearest_index(theta, phi, grid)
    return complex(np.vdot(grid.atoms[:, i], steering_vector(theta, phi, cfg)))
