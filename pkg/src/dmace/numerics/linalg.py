"""Dense complex linear algebra helpers.

Matrices and vectors are plain ``numpy`` arrays with ``complex128`` dtype.
Vectors may be 1-D or stored as columns of a 2-D array (one column per
sample), which is how batches flow through the solvers and networks.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from dmace.errors import ShapeError


def as_complex(a) -> np.ndarray:
    return np.asarray(a, dtype=np.complex128)


def cmatmul(a, b) -> np.ndarray:
    a = as_complex(a)
    b = as_complex(b)
    if a.ndim != 2 or b.ndim not in (1, 2):
        raise ShapeError(f"cmatmul expects a matrix and a matrix/vector, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cmatmul: inner dimensions differ ({a.shape} @ {b.shape})")
    return a @ b


def adjoint(a) -> np.ndarray:
    """Conjugate transpose. 1-D input is treated as a column vector."""
    a = as_complex(a)
    if a.ndim == 1:
        return a.conj()[None, :]
    return a.conj().T


def complex_soft_threshold(x, eta: float) -> np.ndarray:
    """Phase-preserving shrinkage ``x/|x| * max(|x| - eta, 0)``.

    Reduces to ``sign(x) * (|x| - eta)_+`` on real input. Entries with
    ``|x| <= eta`` map to exactly zero.
    """
    if eta < 0:
        raise ValueError("threshold must be non-negative")
    x = as_complex(x)
    mag = np.abs(x)
    keep = mag > eta
    out = np.zeros_like(x)
    out[keep] = x[keep] * ((mag[keep] - eta) / mag[keep])
    return out


class EigResult(NamedTuple):
    value: float
    converged: bool
    iterations: int


def _power_seed(n: int) -> np.ndarray:
    # all-ones plus a tiny deterministic perturbation so the start vector is
    # not orthogonal to the top eigenvector for structured inputs
    return np.ones(n, dtype=np.complex128) + 1e-3 * np.sin(np.arange(1, n + 1)) + 1e-3j * np.cos(np.arange(1, n + 1))


def lambda_max(m, tol: float = 1e-10, max_iter: int = 1000) -> EigResult:
    """Largest eigenvalue of a Hermitian PSD matrix by power iteration.

    Stops when the Rayleigh quotient changes by less than ``tol`` relative to
    its magnitude. If the cap is reached the last estimate is returned with
    ``converged=False``.
    """
    m = as_complex(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"lambda_max needs a square matrix, got {m.shape}")
    n = m.shape[0]
    if n == 0:
        return EigResult(0.0, True, 0)
    v = _power_seed(n)
    v /= np.linalg.norm(v)
    lam = float(np.real(np.vdot(v, m @ v)))
    for it in range(1, max_iter + 1):
        w = m @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return EigResult(0.0, True, it)
        v = w / nrm
        new = float(np.real(np.vdot(v, m @ v)))
        if abs(new - lam) <= tol * max(abs(new), np.finfo(float).tiny):
            return EigResult(new, True, it)
        lam = new
    return EigResult(lam, False, max_iter)
