"""Trainable estimators wrapping the unfolded networks.

A model owns its parameters, its fixed physics (random DMA weights for LISTA,
waveguide response for LISTA-SMO) and a data scale. The scale multiplies
all signals before they enter the network so that thresholds and learning
rates act on order-one quantities; estimates are mapped back afterwards.
Losses are sums of per-sample Euclidean errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dmace.channel_model import Dataset
from dmace.dictionary import GridDictionary
from dmace.dma_model import DmaConfig, DmaWeights, build_h, build_q
from dmace.numerics import Tape
from dmace.unfolded_nets.networks import (
    AlistaParams,
    ListaParams,
    ListaSmoParams,
    alista_graph,
    bind,
    lista_graph,
    lista_smo_graph,
)

SUPERVISED = "supervised"
SELF_SUPERVISED = "self-supervised"


def supervised_loss(labels, outputs):
    """``sum_s ||label_s - output_s||_2`` over batch columns (numpy or tape values)."""
    if hasattr(outputs, "tape"):
        t = outputs.tape
        return t.sum(t.colnorm(t.sub(labels, outputs)))
    diff = np.atleast_2d(np.asarray(labels).T).T - np.atleast_2d(np.asarray(outputs).T).T
    return float(np.linalg.norm(diff, axis=0).sum())


def self_supervised_loss(y, outputs):
    """Same form as :func:`supervised_loss` with the noisy observation as the target."""
    return supervised_loss(y, outputs)


@dataclass
class Batch:
    inputs: np.ndarray  # network input, one column per sample
    labels: np.ndarray  # training target
    g_star: np.ndarray  # clean channel, for NMSE

    def __len__(self):
        return self.inputs.shape[1]

    def take(self, idx) -> "Batch":
        return Batch(self.inputs[:, idx], self.labels[:, idx], self.g_star[:, idx])


class UnfoldedModel:
    arch = "base"
    params: object
    scale: float = 1.0

    def graph(self, tape: Tape, pv: dict, inputs) -> list:
        raise NotImplementedError

    def to_channel(self, out: np.ndarray) -> np.ndarray:
        return out

    def batch_loss(self, tape: Tape, batch: Batch):
        pv = bind(tape, self.params)
        out = self.graph(tape, pv, tape.const(batch.inputs))[-1]
        return supervised_loss(tape.const(batch.labels), out), out.value

    def network_output(self, inputs: np.ndarray) -> np.ndarray:
        t = Tape()
        return self.graph(t, bind(t, self.params, trainable=False), t.const(inputs))[-1].value

    def estimate(self, inputs: np.ndarray) -> np.ndarray:
        """Channel estimate for already-scaled inputs (unscaled output channel)."""
        return self.to_channel(self.network_output(inputs)) / self.scale


class ListaModel(UnfoldedModel):
    """LISTA on ``z = Q_Ran H y`` with a gridded dictionary; trained on ``alpha*``.

    ``weights`` may be a list, one random configuration per pilot; the
    observations of all pilots are then stacked into one ``P N_d`` vector.
    """

    arch = "lista"

    def __init__(self, params: ListaParams, cfg: DmaConfig, weights, grid: GridDictionary, scale: float = 1.0):
        self.params = params
        self.cfg = cfg
        self.weights_list = [weights] if isinstance(weights, DmaWeights) else list(weights)
        self.weights = self.weights_list[0]
        self.grid = grid
        self.scale = scale
        self.q = np.vstack([build_q(w, cfg) for w in self.weights_list])
        self.h = build_h(cfg)
        self.psi = self.q @ self.h @ grid.atoms

    @property
    def pilots(self) -> int:
        return len(self.weights_list)

    @classmethod
    def create(cls, cfg, grid, layers, rng, scale=1.0, weights=None, init="random", eta0=1e-4, pilots=1):
        if weights is None:
            weights = [DmaWeights(rng.uniform(0, 2 * np.pi, cfg.n)) for _ in range(pilots)]
        model = cls(ListaParams.init(grid.d, cfg.n_d * pilots, layers, rng, eta0), cfg, weights, grid, scale)
        if init == "analytic":
            model.params = ListaParams.analytic(model.psi, layers, eta0)
        elif init != "random":
            raise ValueError(f"unknown init {init!r}")
        return model

    def graph(self, tape, pv, inputs):
        return lista_graph(tape, pv, inputs)

    def to_channel(self, out):
        return self.grid.atoms @ out

    def observe(self, y: np.ndarray) -> np.ndarray:
        """All pilots applied to the same ``y`` (use stacked observations for independent noise)."""
        return self.q @ (self.h @ y)

    def make_batch(self, ds: Dataset, mode: str = SUPERVISED, z: np.ndarray | None = None) -> Batch:
        s = self.scale
        z = self.observe(ds.y) if z is None else z
        return Batch(z * s, ds.alpha_star * s, ds.g_star)


class AlistaModel(UnfoldedModel):
    arch = "alista"

    def __init__(self, params: AlistaParams, cfg, weights, grid, scale=1.0):
        self.params = params
        self.cfg = cfg
        self.weights = weights
        self.grid = grid
        self.scale = scale
        self.q = build_q(weights, cfg)
        self.h = build_h(cfg)
        self.psi = self.q @ self.h @ grid.atoms

    @classmethod
    def create(cls, cfg, grid, layers, rng, scale=1.0, weights=None, eta0=1e-4, kappa0=1.0):
        weights = weights if weights is not None else DmaWeights(rng.uniform(0, 2 * np.pi, cfg.n))
        return cls(AlistaParams.init(grid.d, cfg.n_d, layers, rng, eta0, kappa0), cfg, weights, grid, scale)

    def graph(self, tape, pv, inputs):
        return alista_graph(tape, pv, inputs, tape.const(self.psi))

    def to_channel(self, out):
        return self.grid.atoms @ out

    def observe(self, y):
        return self.q @ (self.h @ y)

    def make_batch(self, ds, mode=SUPERVISED):
        s = self.scale
        return Batch(self.observe(ds.y) * s, ds.alpha_star * s, ds.g_star)


class ListaSmoModel(UnfoldedModel):
    """LISTA-SMO; trains from element signals ``y`` and infers from ``z``."""

    arch = "lista_smo"

    def __init__(self, params: ListaSmoParams, cfg: DmaConfig, d: int, scale: float = 1.0):
        self.params = params
        self.cfg = cfg
        self.d = d
        self.scale = scale

    @classmethod
    def create(cls, cfg, d, layers, rng, scale=1.0, eta0=1e-4, kappa0=1.0):
        return cls(ListaSmoParams.init(cfg, d, layers, rng, eta0, kappa0), cfg, d, scale)

    def graph(self, tape, pv, inputs):
        return lista_smo_graph(tape, pv, self.cfg, y=inputs)

    def graph_from_z(self, tape, pv, z):
        return lista_smo_graph(tape, pv, self.cfg, z=z)

    def make_batch(self, ds: Dataset, mode: str = SUPERVISED) -> Batch:
        s = self.scale
        y = ds.y
        labels = ds.g_star if mode == SUPERVISED else y
        return Batch(y * s, labels * s, ds.g_star)

    def estimate_from_z(self, z: np.ndarray) -> np.ndarray:
        """Inference with ``z`` measured under the exported weights (unscaled in and out)."""
        t = Tape()
        out = self.graph_from_z(t, bind(t, self.params, trainable=False), t.const(np.asarray(z) * self.scale))[-1]
        return out.value / self.scale


def estimate_channel(model: UnfoldedModel, signal: np.ndarray, grid: GridDictionary | None = None) -> np.ndarray:
    """Raw-signal channel estimate.

    LISTA family: ``signal`` is the compressed pilot ``z`` and the estimate is
    ``A_G alpha^(L)``. LISTA-SMO: ``signal`` is ``z`` under the exported DMA
    weights.
    """
    signal = np.asarray(signal, dtype=complex)
    col = signal.ndim == 1
    sig = signal[:, None] if col else signal
    if isinstance(model, ListaSmoModel):
        out = model.estimate_from_z(sig)
    else:
        atoms = model.grid.atoms if grid is None else grid.atoms
        out = atoms @ model.network_output(sig * model.scale) / model.scale
    return out[:, 0] if col else out


def fit_scale(ds: Dataset) -> float:
    """Inverse RMS element amplitude of the clean training channels."""
    g = ds.g_star
    return float(1.0 / np.sqrt(np.mean(np.abs(g) ** 2)))
