"""Recovery-probability and gridding-loss formulas with Monte Carlo counterparts.

The recovery bound lives on the random DMA weights: ``C = (QH)^H (QH)`` has
``N_d`` non-zero eigenvalues ``s_n = sum_l |q_{n,l} h_{n,l}|^2``, one per
microstrip, and ``N - N_d`` zeros. The gridding loss compares how often a
path's correlation against its nearest grid atom falls below the lasso
threshold, relative to an ideal on-grid atom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dmace.channel_model import PathSet, steering_vector
from dmace.dictionary import GridDictionary, mismatch_chi, nearest_index
from dmace.dma_model import DmaConfig, build_h_diag, phase_to_weight
from dmace.errors import DomainError

SQRT2 = math.sqrt(2.0)
RIP_BOUND = SQRT2 - 1.0
_SERIES_CUTOFF = 3.0


# ----- erf -------------------------------------------------------------------


def _erf_series(x: float) -> float:
    # erf(x) = 2/sqrt(pi) exp(-x^2) sum_n 2^n x^(2n+1) / (2n+1)!!, all terms positive
    term = x
    total = x
    n = 0
    x2 = x * x
    while abs(term) > 1e-17 * abs(total):
        n += 1
        term *= 2.0 * x2 / (2 * n + 1)
        total += term
    return 2.0 / math.sqrt(math.pi) * math.exp(-x2) * total


def _erfc_cf(x: float) -> float:
    # erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), modified Lentz
    tiny = 1e-300
    f = x
    c = x
    d = 0.0
    for k in range(1, 500):
        a = k / 2.0
        d = x + a * d
        d = tiny if d == 0 else d
        c = x + a / c
        c = tiny if c == 0 else c
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x * x) / math.sqrt(math.pi) / f


def _erf_scalar(x: float) -> float:
    if math.isnan(x):
        return x
    if math.isinf(x):
        return math.copysign(1.0, x)
    ax = abs(x)
    r = _erf_series(ax) if ax < _SERIES_CUTOFF else 1.0 - _erfc_cf(ax)
    return math.copysign(r, x)


def erf(x):
    """Error function; scalars in, scalars out, arrays elementwise."""
    if np.ndim(x) == 0:
        return _erf_scalar(float(x))
    a = np.asarray(x, dtype=float)
    return np.vectorize(_erf_scalar, otypes=[float])(a)


def normal_cdf(x, mean=0.0, std=1.0):
    return 0.5 * (1.0 + erf((np.asarray(x, dtype=float) - mean) / (SQRT2 * std)))


# ----- recovery probability ---------------------------------------------------


PRINTED = "printed"
STD_READING = "std"


def p_rec_argument(n_e: float, reading: str = PRINTED) -> float:
    """erf argument of the recovery bound.

    ``printed`` divides by ``sqrt(2) N_e / 12``; ``std`` treats ``N_e / 12``
    as a variance and divides by ``sqrt(2 N_e / 12)``.
    """
    if reading == PRINTED:
        den = SQRT2 * n_e / 12.0
    elif reading == STD_READING:
        den = math.sqrt(2.0 * n_e / 12.0)
    else:
        raise ValueError(f"unknown reading {reading!r}")
    return (SQRT2 - n_e / 2.0) / den


def p_rec_formula(n_e, n_paths, reading: str = PRINTED) -> float:
    """``[1/2 + erf(arg)/2]^(2 L_p)``, clamped to ``[0, 1]``."""
    if n_e < 1 or n_paths < 1:
        raise DomainError("need N_e >= 1 and L_p >= 1")
    base = 0.5 + 0.5 * erf(p_rec_argument(float(n_e), reading))
    return float(min(1.0, max(0.0, base)) ** (2 * int(n_paths)))


# ----- RIP Monte Carlo --------------------------------------------------------


@dataclass
class RipEstimate:
    k: int
    deltas: np.ndarray  # max |s - 1| over the sampled support, per trial
    s_max: np.ndarray  # largest s_n, per trial
    trials: int
    cfg: dict
    exact: np.ndarray | None = None  # ||C_T - I||_2 per trial when requested

    def __post_init__(self):
        if len(self.deltas) != self.trials or np.any(self.deltas < 0):
            raise ValueError("inconsistent RIP samples")

    def summary(self) -> dict:
        out = {"k": self.k, "trials": self.trials}
        for name, v in (("delta", self.deltas), ("s_max", self.s_max), ("exact", self.exact)):
            if v is None:
                continue
            out[f"{name}_mean"] = float(np.mean(v))
            out[f"{name}_se"] = float(np.std(v, ddof=1) / np.sqrt(len(v))) if len(v) > 1 else float("nan")
        p = float(np.mean(self.deltas < RIP_BOUND))
        out["p_delta_below_bound"] = p
        out["p_delta_below_bound_se"] = float(np.sqrt(p * (1 - p) / self.trials))
        return out


def microstrip_energies(phases, cfg: DmaConfig) -> np.ndarray:
    """``s_n = sum_l |q_{n,l} h_{n,l}|^2`` for each microstrip."""
    qh = np.abs(phase_to_weight(np.asarray(phases)) * build_h_diag(cfg)) ** 2
    return qh.reshape(cfg.n_d, cfg.n_e).sum(axis=1)


def full_spectrum(phases, cfg: DmaConfig) -> np.ndarray:
    """Eigenvalues of ``C``: the strip energies followed by ``N - N_d`` zeros."""
    return np.concatenate([microstrip_energies(phases, cfg), np.zeros(cfg.n - cfg.n_d)])


def _gram(phases, cfg: DmaConfig) -> np.ndarray:
    from dmace.dma_model import DmaWeights, build_h, build_q

    m = build_q(DmaWeights(phases), cfg) @ build_h(cfg)
    return m.conj().T @ m


def ric_monte_carlo(cfg: DmaConfig, k: int, trials: int, rng: np.random.Generator, exact: bool = False) -> RipEstimate:
    """Draw ``trials`` random DMA configurations and a random size-``k`` support each.

    One child generator per trial keeps the draws independent of how the
    loop is scheduled.
    """
    if k < 1 or k > cfg.n:
        raise DomainError(f"support size {k} outside [1, {cfg.n}]")
    if trials < 1:
        raise DomainError("need at least one trial")
    children = rng.spawn(trials)
    deltas = np.empty(trials)
    smax = np.empty(trials)
    ex = np.empty(trials) if exact else None
    for t, r in enumerate(children):
        phases = r.uniform(0.0, 2 * np.pi, cfg.n)
        eigs = full_spectrum(phases, cfg)
        support = r.choice(cfg.n, size=k, replace=False)
        deltas[t] = np.max(np.abs(eigs[support] - 1.0))
        smax[t] = eigs[: cfg.n_d].max()
        if exact:
            c = _gram(phases, cfg)[np.ix_(support, support)]
            ex[t] = np.max(np.abs(np.linalg.eigvalsh(c - np.eye(k))))
    return RipEstimate(k, deltas, smax, trials, cfg.to_dict(), ex)


def strip_energy_samples(cfg: DmaConfig, trials: int, rng: np.random.Generator) -> np.ndarray:
    """``trials x N_d`` strip energies under uniform random phases."""
    phases = rng.uniform(0.0, 2 * np.pi, (trials, cfg.n))
    qh = np.abs(phase_to_weight(phases) * build_h_diag(cfg)[None, :]) ** 2
    return qh.reshape(trials, cfg.n_d, cfg.n_e).sum(axis=2)


def ks_statistic(samples, mean: float, std: float) -> float:
    """Two-sided Kolmogorov-Smirnov distance to ``N(mean, std^2)``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = len(x)
    f = normal_cdf(x, mean, std)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


# ----- gridding loss ----------------------------------------------------------


def _amplitudes(paths: PathSet) -> np.ndarray:
    return np.abs(np.asarray(paths.gains))


def _chis(paths: PathSet, grid: GridDictionary, cfg: DmaConfig) -> np.ndarray:
    return np.array([mismatch_chi(t, p, grid, cfg) for t, p in zip(paths.theta, paths.phi)])


def delta_rho_formula(paths: PathSet, xi: float, sigma: float, grid: GridDictionary, cfg: DmaConfig) -> float:
    """Gridding accuracy loss, oriented to be non-negative for ``Re(chi) <= 1``.

    ``sum_l a_l [erf((xi - a_l Re chi_l)/(sqrt2 sigma)) - erf((xi - a_l)/(sqrt2 sigma))]``
    with ``a_l = |gain_l|``.
    """
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    a = _amplitudes(paths)
    chi = _chis(paths, grid, cfg).real
    s = SQRT2 * sigma
    return float(np.sum(a * (erf((xi - a * chi) / s) - erf((xi - a) / s))))


def expected_gridding_loss(paths: PathSet, xi: float, sigma: float, grid: GridDictionary, cfg: DmaConfig) -> float:
    """``sum_l a_l [P(shrunk | grid) - P(shrunk | ideal)]`` under Gaussian correlation noise.

    Equal to half of :func:`delta_rho_formula`, since each erf difference is
    twice the difference of normal CDFs.
    """
    return 0.5 * delta_rho_formula(paths, xi, sigma, grid, cfg)


@dataclass
class GriddingLossEstimate:
    mean: float
    se: float
    trials: int


def empirical_gridding_loss(
    paths: PathSet,
    xi: float,
    sigma: float,
    grid: GridDictionary,
    cfg: DmaConfig,
    trials: int,
    rng: np.random.Generator,
    peak: str = "nearest",
) -> GriddingLossEstimate:
    """Monte Carlo rate at which paths are shrunk to zero because of gridding.

    Each path is observed alone as ``y = a a(theta, phi) + n`` with
    ``n ~ CN(0, 2 sigma^2 I)`` so that any unit atom sees real correlation
    noise of variance ``sigma^2``. A path counts as shrunk when its peak
    correlation ``Re(a_i^H y)`` falls below ``xi``. ``peak="nearest"`` uses the
    nearest grid atom; ``"max"`` maximizes over all atoms. The ideal case uses
    the true steering vector with the same noise draw, and the per-trial
    difference is accumulated weighted by ``a``.
    """
    if trials < 1:
        raise DomainError("need at least one trial")
    if sigma < 0:
        raise DomainError("sigma must be non-negative")
    if peak not in ("nearest", "max"):
        raise ValueError(f"unknown peak rule {peak!r}")
    a = _amplitudes(paths)
    n = cfg.n
    per_trial = np.zeros(trials)
    for amp, t, p in zip(a, paths.theta, paths.phi):
        v = steering_vector(t, p, cfg)
        noise = sigma * (rng.standard_normal((n, trials)) + 1j * rng.standard_normal((n, trials)))
        y = amp * v[:, None] + noise
        ideal = np.real(v.conj() @ y)
        if peak == "nearest":
            atom = grid.atoms[:, nearest_index(t, p, grid)]
            gridded = np.real(atom.conj() @ y)
        else:
            gridded = np.max(np.real(grid.atoms.conj().T @ y), axis=0)
        per_trial += amp * ((gridded < xi).astype(float) - (ideal < xi).astype(float))
    se = float(np.std(per_trial, ddof=1) / np.sqrt(trials)) if trials > 1 else float("nan")
    return GriddingLossEstimate(float(per_trial.mean()), se, trials)


# ----- report -----------------------------------------------------------------


def theory_report(cfg: DmaConfig, trials: int = 2000, seed: int = 0, n_paths: int = 5) -> dict:
    """Formula values next to Monte Carlo estimates, both statistic variants included."""
    rng = np.random.default_rng(seed)
    table = []
    for ne in (1, 2, 4, 8, 12, 16, 20, 30, 40):
        for lp in (1, 2, 4, 8):
            table.append(
                {
                    "n_e": ne,
                    "l_p": lp,
                    "p_rec_printed": p_rec_formula(ne, lp, PRINTED),
                    "p_rec_std": p_rec_formula(ne, lp, STD_READING),
                }
            )
    k = min(2 * n_paths, cfg.n)
    rip = ric_monte_carlo(cfg, k, trials, rng, exact=True).summary()

    ks_cfg = DmaConfig(n_d=cfg.n_d, n_e=20, wavelength=cfg.wavelength, alpha=0.0, beta=cfg.beta)
    s = strip_energy_samples(ks_cfg, trials, rng).ravel()
    ne = ks_cfg.n_e
    energies = {
        "n_e": ne,
        "alpha": 0.0,
        "mean": float(s.mean()),
        "mean_se": float(s.std(ddof=1) / np.sqrt(s.size)),
        "var": float(s.var(ddof=1)),
        "model_mean": ne / 2,
        "var_exact_uniform_phase": ne / 8,
        "ks_variance_reading": ks_statistic(s, ne / 2, math.sqrt(ne / 12)),
        "ks_std_reading": ks_statistic(s, ne / 2, ne / 12),
    }
    return {
        "cfg": cfg.to_dict(),
        "trials": trials,
        "seed": seed,
        "rip_bound": RIP_BOUND,
        "p_rec": table,
        "rip": rip,
        "strip_energy": energies,
    }
