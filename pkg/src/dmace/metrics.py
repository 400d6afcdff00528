import numpy as np

from dmace.errors import DomainError


def nmse(g_hat, g_star) -> float:
    """``||g* - g_hat||^2 / ||g*||^2`` for a single channel vector."""
    g_hat = np.asarray(g_hat)
    g_star = np.asarray(g_star)
    den = float(np.vdot(g_star, g_star).real)
    if den == 0.0:
        raise DomainError("NMSE is undefined for a zero reference channel")
    r = g_star - g_hat
    return float(np.vdot(r, r).real) / den


def nmse_per_sample(g_hat, g_star) -> np.ndarray:
    """Column-wise NMSE ratios."""
    g_hat = np.asarray(g_hat)
    g_star = np.asarray(g_star)
    den = np.sum(np.abs(g_star) ** 2, axis=0)
    if np.any(den == 0):
        raise DomainError("NMSE is undefined for a zero reference channel")
    return np.sum(np.abs(g_star - g_hat) ** 2, axis=0) / den


def mean_nmse(g_hat, g_star) -> float:
    """Dataset-mean NMSE ratio (average first, convert to dB afterwards)."""
    return float(np.mean(nmse_per_sample(g_hat, g_star)))


def to_db(x) -> float:
    return float(10 * np.log10(x))
