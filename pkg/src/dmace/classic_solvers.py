"""Lasso objective, ISTA, FISTA and a coordinate-descent reference solver.

ISTA and FISTA iterate ``alpha <- h_eta(alpha - Psi^H (Psi alpha - z) / lam)``
with ``lam`` the largest eigenvalue of ``Psi^H Psi``. That step is a proximal
gradient step on the smooth lasso

    0.5 * ||z - Psi alpha||^2 + xi_s * ||alpha||_1,   xi_s = eta * lam,

which is the objective tracked in the traces and used for KKT checks.
Observations may be a single vector or one sample per column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dmace.errors import DegenerateProblemError, ShapeError
from dmace.numerics import complex_soft_threshold, lambda_max

DEFAULT_ETA = 1e-4


@dataclass
class LassoProblem:
    psi: np.ndarray
    z: np.ndarray
    xi: float = 1.0

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=complex)
        self.z = np.asarray(self.z, dtype=complex)
        if self.psi.ndim != 2 or self.z.shape[0] != self.psi.shape[0]:
            raise ShapeError(f"Psi {self.psi.shape} and z {self.z.shape} do not agree")
        if self.xi < 0:
            raise ValueError("regularizer must be non-negative")

    @property
    def d(self) -> int:
        return self.psi.shape[1]


def _check_alpha(p: LassoProblem, alpha):
    alpha = np.asarray(alpha, dtype=complex)
    if alpha.shape[0] != p.d:
        raise ShapeError(f"alpha has {alpha.shape[0]} rows, Psi has {p.d} columns")
    return alpha


def lasso_objective(p: LassoProblem, alpha) -> float:
    """``||z - Psi alpha||_2 + xi ||alpha||_1`` with the unsquared data term."""
    alpha = _check_alpha(p, alpha)
    return float(np.linalg.norm(p.z - p.psi @ alpha) + p.xi * np.abs(alpha).sum())


def smooth_objective(psi, z, alpha, xi_s: float) -> float:
    r = z - psi @ alpha
    return float(0.5 * np.vdot(r, r).real + xi_s * np.abs(alpha).sum())


def step_size(psi) -> float:
    lam = lambda_max(psi.conj().T @ psi).value
    if lam <= 0:
        raise DegenerateProblemError("Psi^H Psi has no positive eigenvalue")
    return lam


def ista(p: LassoProblem, eta: float = DEFAULT_ETA, iters: int = 1000, lam: float | None = None, return_iterates: bool = False):
    """Proximal-gradient iterations from ``alpha = 0``.

    Returns ``(alpha, trace)``, plus the list of iterates when requested.
    The trace holds the smooth objective after every iteration (summed over
    columns for batched ``z``).
    """
    if iters < 1 or eta < 0:
        raise ValueError("need iters >= 1 and eta >= 0")
    lam = step_size(p.psi) if lam is None else lam
    psi, z = p.psi, p.z
    wa = np.eye(p.d) - psi.conj().T @ psi / lam
    bz = psi.conj().T @ z / lam
    alpha = np.zeros((p.d,) + z.shape[1:], dtype=complex)
    trace, its = [], []
    for _ in range(iters):
        alpha = complex_soft_threshold(wa @ alpha + bz, eta)
        trace.append(smooth_objective(psi, z, alpha, eta * lam))
        if return_iterates:
            its.append(alpha)
    if return_iterates:
        return alpha, np.array(trace), its
    return alpha, np.array(trace)


def fista(
    p: LassoProblem,
    eta: float = DEFAULT_ETA,
    iters: int = 300,
    lam: float | None = None,
    monotone: bool = False,
    restart: bool = False,
    return_momentum: bool = False,
):
    """Accelerated proximal gradient with ``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2``.

    ``monotone=True`` selects the monotone variant that keeps the better of
    the new proximal point and the previous iterate, so the trace never rises.
    ``restart=True`` resets the momentum whenever the step points against the
    last update (gradient-based adaptive restart), which restores linear
    convergence once the support has settled.
    """
    if iters < 1 or eta < 0:
        raise ValueError("need iters >= 1 and eta >= 0")
    lam = step_size(p.psi) if lam is None else lam
    psi, z = p.psi, p.z
    xi_s = eta * lam
    gram = psi.conj().T @ psi / lam
    bz = psi.conj().T @ z / lam
    x = np.zeros((p.d,) + z.shape[1:], dtype=complex)
    yk = x.copy()
    t = 1.0
    ts = [t]
    trace = []
    f_x = smooth_objective(psi, z, x, xi_s)
    for _ in range(iters):
        u = complex_soft_threshold(yk - gram @ yk + bz, eta)
        t_next = (1 + np.sqrt(1 + 4 * t * t)) / 2
        if monotone:
            f_u = smooth_objective(psi, z, u, xi_s)
            x_new = u if f_u <= f_x else x
            f_x = min(f_u, f_x)
            yk = x_new + (t / t_next) * (u - x_new) + ((t - 1) / t_next) * (x_new - x)
            x = x_new
            trace.append(f_x)
        elif restart and np.vdot(yk - u, u - x).real > 0:
            t_next = 1.0
            yk = u
            x = u
            trace.append(smooth_objective(psi, z, x, xi_s))
        else:
            yk = u + ((t - 1) / t_next) * (u - x)
            x = u
            trace.append(smooth_objective(psi, z, x, xi_s))
        t = t_next
        ts.append(t)
    if return_momentum:
        return x, np.array(trace), np.array(ts)
    return x, np.array(trace)


def coordinate_descent_oracle(p: LassoProblem, xi_s: float, tol: float = 1e-12, max_sweeps: int = 100000) -> np.ndarray:
    """Cyclic coordinate minimisation of the smooth lasso for one observation."""
    psi = p.psi
    z = p.z.ravel()
    d = p.d
    alpha = np.zeros(d, dtype=complex)
    r = z.copy()
    col_sq = np.sum(np.abs(psi) ** 2, axis=0)
    for _ in range(max_sweeps):
        biggest = 0.0
        for i in range(d):
            if col_sq[i] == 0:
                continue
            ci = psi[:, i]
            old = alpha[i]
            rho = np.vdot(ci, r) + col_sq[i] * old
            mag = abs(rho)
            new = 0j if mag <= xi_s else rho * (mag - xi_s) / mag / col_sq[i]
            if new != old:
                r -= ci * (new - old)
                alpha[i] = new
                biggest = max(biggest, abs(new - old))
        if biggest < tol:
            break
    return alpha


def kkt_residual(psi, z, alpha, xi_s: float) -> float:
    """Largest violation of the complex lasso optimality conditions.

    Zero coordinates need ``|psi_i^H r| <= xi_s``; nonzero ones need
    ``psi_i^H r == xi_s * alpha_i / |alpha_i|``.
    """
    alpha = np.asarray(alpha).ravel()
    corr = psi.conj().T @ (np.asarray(z).ravel() - psi @ alpha)
    nz = alpha != 0
    viol = np.zeros(alpha.shape)
    viol[~nz] = np.maximum(np.abs(corr[~nz]) - xi_s, 0.0)
    viol[nz] = np.abs(corr[nz] - xi_s * alpha[nz] / np.abs(alpha[nz]))
    return float(viol.max()) if viol.size else 0.0
