"""Unfolded estimators: LISTA, ALISTA and LISTA-SMO.

Matrices are shared by all layers; thresholds ``eta`` (and step sizes
``kappa``) are per layer. Every forward pass is written once against a
:class:`~dmace.numerics.Tape`, so the same code serves training (with
``tape.param`` leaves) and inference (with constants). Batches are columns.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from dmace.dma_model import DmaConfig, DmaWeights, build_h_diag, sigmoid_phase_map, strip_mask
from dmace.errors import ShapeError
from dmace.numerics import Tape


def _cgauss(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    std = 1.0 / np.sqrt(fan_in)
    return std * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


class _Params:
    """Mixin: dict view of the dataclass fields used by the optimizer."""

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict):
        return cls(**{f.name: np.array(d[f.name], copy=True) for f in fields(cls)})

    @property
    def L(self) -> int:
        return len(self.eta)

    def count(self) -> int:
        """Number of real degrees of freedom."""
        return sum(a.size * (2 if np.iscomplexobj(a) else 1) for a in self.as_dict().values())

    def clamp(self):
        self.eta = np.maximum(self.eta, 0.0)
        return self


@dataclass
class ListaParams(_Params):
    W_a: np.ndarray  # D x D
    W_b: np.ndarray  # D x N_d
    eta: np.ndarray  # L

    @classmethod
    def init(cls, d: int, m: int, layers: int, rng: np.random.Generator, eta0: float = 1e-4):
        return cls(_cgauss(rng, (d, d), d), _cgauss(rng, (d, m), m), np.full(layers, eta0))

    @classmethod
    def analytic(cls, psi: np.ndarray, layers: int, eta: float, lam: float | None = None):
        """Weights that turn the network into ``layers`` ISTA iterations on ``psi``."""
        from dmace.classic_solvers import step_size

        lam = step_size(psi) if lam is None else lam
        d = psi.shape[1]
        return cls(np.eye(d) - psi.conj().T @ psi / lam, psi.conj().T / lam, np.full(layers, float(eta)))


@dataclass
class AlistaParams(_Params):
    W: np.ndarray  # D x N_d
    eta: np.ndarray
    kappa: np.ndarray

    @classmethod
    def init(cls, d: int, m: int, layers: int, rng: np.random.Generator, eta0: float = 1e-4, kappa0: float = 1.0):
        return cls(_cgauss(rng, (d, m), m), np.full(layers, eta0), np.full(layers, kappa0))


@dataclass
class ListaSmoParams(_Params):
    W_phi: np.ndarray  # N, real pre-phases
    W_A: np.ndarray  # D x N
    W_smo: np.ndarray  # N x N_d
    eta: np.ndarray
    kappa: np.ndarray

    @classmethod
    def init(cls, cfg: DmaConfig, d: int, layers: int, rng: np.random.Generator, eta0: float = 1e-4, kappa0: float = 1.0):
        n, m = cfg.n, cfg.n_d
        w_phi = rng.standard_normal(n)
        # fan-in of the synthesis map W_A^H is D, which keeps W_A^H W_A near I
        w_a = _cgauss(rng, (d, n), d)
        # W_smo acts on residuals that each sum a whole strip of N_e elements
        w_smo = _cgauss(rng, (n, m), n * m)
        return cls(w_phi, w_a, w_smo, np.full(layers, eta0), np.full(layers, kappa0))


def bind(tape: Tape, params: _Params, trainable: bool = True) -> dict:
    """Put every parameter on ``tape``; returns name -> Var."""
    if trainable:
        return {k: tape.param(v, k) for k, v in params.as_dict().items()}
    return {k: tape.const(v) for k, v in params.as_dict().items()}


def _cols(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    return x[:, None] if x.ndim == 1 else x


# ----- LISTA -----------------------------------------------------------------


def lista_graph(tape: Tape, pv: dict, z) -> list:
    """Layer outputs ``alpha^(1..L)`` for ``alpha^(l+1) = h(W_a alpha^(l) + W_b z)``."""
    L = pv["eta"].shape[0]
    bz = pv["W_b"] @ z
    outs = []
    alpha = None
    for l in range(L):
        pre = bz if alpha is None else pv["W_a"] @ alpha + bz
        alpha = tape.soft_threshold(pre, tape.take(pv["eta"], l))
        outs.append(alpha)
    return outs


def lista_forward(p: ListaParams, z, trace: bool = False):
    z = _cols(z)
    if z.shape[0] != p.W_b.shape[1] or p.W_a.shape != (p.W_b.shape[0],) * 2:
        raise ShapeError(f"LISTA shapes W_a{p.W_a.shape} W_b{p.W_b.shape} z{z.shape}")
    t = Tape()
    outs = lista_graph(t, bind(t, p, trainable=False), t.const(z))
    vals = [o.value for o in outs]
    return (vals[-1], vals) if trace else vals[-1]


# ----- ALISTA ----------------------------------------------------------------


def alista_graph(tape: Tape, pv: dict, z, psi, alpha0=None) -> list:
    """``alpha <- h(alpha - kappa W (Psi alpha - z))`` with fixed ``Psi = Q H A``."""
    L = pv["eta"].shape[0]
    alpha = alpha0 if alpha0 is not None else tape.const(np.zeros((psi.shape[1], z.shape[1]), dtype=complex))
    outs = []
    for l in range(L):
        resid = psi @ alpha - z
        step = tape.take(pv["kappa"], l) * (pv["W"] @ resid)
        alpha = tape.soft_threshold(alpha - step, tape.take(pv["eta"], l))
        outs.append(alpha)
    return outs


def alista_forward(p: AlistaParams, z, q, h, a, alpha0=None, trace: bool = False):
    z = _cols(z)
    psi = np.asarray(q) @ np.asarray(h) @ np.asarray(a)
    if p.W.shape != (psi.shape[1], psi.shape[0]) or z.shape[0] != psi.shape[0]:
        raise ShapeError(f"ALISTA shapes W{p.W.shape} Psi{psi.shape} z{z.shape}")
    t = Tape()
    a0 = None if alpha0 is None else t.const(_cols(alpha0))
    outs = alista_graph(t, bind(t, p, trainable=False), t.const(z), t.const(psi), a0)
    vals = [o.value for o in outs]
    return (vals[-1], vals) if trace else vals[-1]


# ----- LISTA-SMO -------------------------------------------------------------


def dma_layer_matrix(tape: Tape, w_phi, cfg: DmaConfig):
    """``W_Q H`` built from pre-phases so gradients reach ``W_phi``."""
    phase = tape.sigmoid_phase(w_phi)
    q = (tape.expj(phase) + 1j) * 0.5
    mask = tape.const(strip_mask(cfg).astype(complex))
    h_row = tape.const(build_h_diag(cfg)[None, :])
    return tape.mul(tape.mul(mask, q), h_row)


def lista_smo_graph(tape: Tape, pv: dict, cfg: DmaConfig, y=None, z=None) -> list:
    """Layer outputs ``g^(1..L)``.

    With ``y`` the leading DMA layer forms ``z = W_Q H y``; otherwise ``z`` is
    taken as measured under the exported weights.
    """
    L = pv["eta"].shape[0]
    wqh = dma_layer_matrix(tape, pv["W_phi"], cfg)
    if z is None:
        z = wqh @ y
    w_a = pv["W_A"]
    w_a_h = w_a.H
    g = None
    outs = []
    for l in range(L):
        kappa = tape.take(pv["kappa"], l)
        if g is None:
            # g^(0) = 0, so the residual is -z
            gp = kappa * (pv["W_smo"] @ z)
        else:
            gp = g - kappa * (pv["W_smo"] @ (wqh @ g - z))
        alpha = tape.soft_threshold(w_a @ gp, tape.take(pv["eta"], l))
        g = w_a_h @ alpha
        outs.append(g)
    return outs


def _check_smo(p: ListaSmoParams, cfg: DmaConfig):
    n, m = cfg.n, cfg.n_d
    if p.W_phi.shape != (n,) or p.W_A.shape[1] != n or p.W_smo.shape != (n, m):
        raise ShapeError(f"LISTA-SMO params do not match N={n}, N_d={m}")


def lista_smo_forward(p: ListaSmoParams, cfg: DmaConfig, y=None, z=None, trace: bool = False):
    """Training mode takes ``y`` (element signals); inference mode takes ``z``."""
    if (y is None) == (z is None):
        raise ValueError("pass exactly one of y or z")
    _check_smo(p, cfg)
    t = Tape()
    pv = bind(t, p, trainable=False)
    if y is not None:
        y = _cols(y)
        if y.shape[0] != cfg.n:
            raise ShapeError(f"y has {y.shape[0]} rows, expected {cfg.n}")
        outs = lista_smo_graph(t, pv, cfg, y=t.const(y))
    else:
        z = _cols(z)
        if z.shape[0] != cfg.n_d:
            raise ShapeError(f"z has {z.shape[0]} rows, expected {cfg.n_d}")
        outs = lista_smo_graph(t, pv, cfg, z=t.const(z))
    vals = [o.value for o in outs]
    return (vals[-1], vals) if trace else vals[-1]


def export_trained_dma(p: ListaSmoParams) -> DmaWeights:
    """Phases to configure on the hardware after training."""
    return DmaWeights(sigmoid_phase_map(p.W_phi))
