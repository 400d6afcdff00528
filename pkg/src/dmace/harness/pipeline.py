"""Data preparation, cached training and evaluation shared by sweeps and the CLI."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dmace.channel_model import Dataset, complex_noise, generate_dataset, noise_sigma
from dmace.classic_solvers import LassoProblem, fista
from dmace.dictionary import GridDictionary, build_grid_dictionary
from dmace.dma_model import DmaConfig, build_h, build_q, random_dma_weights
from dmace.errors import ConfigError
from dmace.harness.config import ExperimentConfig, stable_hash
from dmace.metrics import mean_nmse
from dmace.unfolded_nets import (
    SELF_SUPERVISED,
    SUPERVISED,
    ListaModel,
    ListaSmoModel,
    TrainConfig,
    estimate_channel,
    export_trained_dma,
    fit_scale,
    load_checkpoint,
    save_checkpoint,
    train,
)

_DATA_CACHE: dict = {}


def multi_pilot_observe(g, snr_db: float, weights_list, cfg: DmaConfig, rng: np.random.Generator):
    """``z_p = Q_p H (g + n_p)`` for every pilot, stacked.

    ``g`` is one channel or one channel per column. Returns the stacked
    observation (``P N_d`` rows) and the stacked operator ``[Q_1 H; ...]``.
    """
    if len(weights_list) < 1:
        raise ConfigError("need at least one pilot")
    g = np.asarray(g, dtype=complex)
    col = g.ndim == 1
    g2 = g[:, None] if col else g
    sig = np.array([noise_sigma(g2[:, i], snr_db) for i in range(g2.shape[1])])
    h = build_h(cfg)
    zs, ops = [], []
    for w in weights_list:
        op = build_q(w, cfg) @ h
        y = g2 + complex_noise(rng, g2.shape, 1.0) * sig[None, :]
        zs.append(op @ y)
        ops.append(op)
    z = np.vstack(zs)
    return (z[:, 0] if col else z), np.vstack(ops)


def stacked_observation(ds: Dataset, weights_list, cfg: DmaConfig, rng: np.random.Generator) -> np.ndarray:
    """Pilot 0 reuses the stored ``y``; later pilots get fresh noise at the stored sigma."""
    h = build_h(cfg)
    y0 = ds.y
    blocks = [build_q(weights_list[0], cfg) @ (h @ y0)]
    for w in weights_list[1:]:
        y = ds.g_star + complex_noise(rng, y0.shape, 1.0) * ds.sigma[None, :]
        blocks.append(build_q(w, cfg) @ (h @ y))
    return np.vstack(blocks)


@dataclass
class PointData:
    cfg: DmaConfig
    grid: GridDictionary
    train: Dataset
    test: Dataset
    val: dict  # snr -> Dataset
    weights: list  # random DMA configuration per pilot
    scale: float

    @property
    def pilots(self) -> int:
        return len(self.weights)

    def observe(self, ds: Dataset, role: str, ec: ExperimentConfig) -> np.ndarray:
        rng = np.random.default_rng(ec.sub_seed(f"pilots/{role}"))
        return stacked_observation(ds, self.weights, self.cfg, rng)


def _dataset(ec: ExperimentConfig, cfg: DmaConfig, grid: GridDictionary, count: int, role: str, snr) -> Dataset:
    seed = ec.sub_seed(f"data/{role}")
    key = (stable_hash(cfg.to_dict()), grid.k_theta, grid.k_phi, count, seed, str(snr))
    if key not in _DATA_CACHE:
        _DATA_CACHE[key] = generate_dataset(count, snr, cfg, seed, grid)
    return _DATA_CACHE[key]


def clear_data_cache() -> None:
    _DATA_CACHE.clear()


def prepare_point(ec: ExperimentConfig, cfg: DmaConfig | None = None, k_theta=None, k_phi=None, pilots=None, snrs=None) -> PointData:
    """Datasets, dictionary and random DMA weights for one sweep point.

    Validation sets share channels and noise draws across SNR values so the
    SNR curve is not blurred by resampling.
    """
    cfg = cfg or ec.dma_config()
    grid = build_grid_dictionary(k_phi or ec.k_phi, k_theta or ec.k_theta, cfg)
    tr = _dataset(ec, cfg, grid, ec.n_train, "train", "uniform")
    te = _dataset(ec, cfg, grid, ec.n_test, "test", "uniform")
    snrs = ec.snr_db if snrs is None else snrs
    val = {float(s): _dataset(ec, cfg, grid, ec.n_val, "val", float(s)) for s in snrs}
    rng = np.random.default_rng(ec.sub_seed("dma"))
    weights = [random_dma_weights(cfg, rng) for _ in range(pilots or ec.pilots)]
    return PointData(cfg, grid, tr, te, val, weights, fit_scale(tr))


# ----- training -----------------------------------------------------------------


def _train_config(ec: ExperimentConfig, algo: str, seed: int) -> TrainConfig:
    lr = ec.lista_lr if algo == "lista" else ec.smo_lr
    mode = SELF_SUPERVISED if algo == "lista_smo_ssl" else SUPERVISED
    return TrainConfig(ec.batch_size, lr, ec.max_epochs, ec.window, seed, mode, ec.shards, ec.threads)


def model_key(ec: ExperimentConfig, algo: str, data: PointData, layers: int) -> str:
    tc = _train_config(ec, algo, 0).to_dict()
    tc.pop("threads")
    return stable_hash(
        {
            "algo": algo,
            "layers": layers,
            "cfg": data.cfg.to_dict(),
            "grid": [data.grid.k_theta, data.grid.k_phi],
            "pilots": data.pilots,
            "sizes": [ec.n_train, ec.n_test],
            "seed": ec.master_seed,
            "train": tc,
            "init": [ec.lista_init, ec.eta0, ec.kappa0],
        }
    )


def create_model(ec: ExperimentConfig, algo: str, data: PointData, layers: int):
    rng = np.random.default_rng(ec.sub_seed(f"model/{algo}"))
    if algo == "lista":
        return ListaModel.create(
            data.cfg, data.grid, layers, rng, data.scale, weights=data.weights, init=ec.lista_init, eta0=ec.eta0
        )
    if algo in ("lista_smo", "lista_smo_ssl"):
        if data.pilots != 1:
            raise ConfigError("LISTA-SMO learns a single DMA configuration; multi-pilot is not supported")
        return ListaSmoModel.create(data.cfg, data.grid.d, layers, rng, data.scale, ec.eta0, ec.kappa0)
    raise ConfigError(f"{algo!r} is not a trained algorithm")


def _batches(ec, model, data: PointData, algo: str):
    mode = SELF_SUPERVISED if algo == "lista_smo_ssl" else SUPERVISED
    if isinstance(model, ListaModel):
        return (
            model.make_batch(data.train, mode, z=data.observe(data.train, "train", ec)),
            model.make_batch(data.test, mode, z=data.observe(data.test, "test", ec)),
        )
    return model.make_batch(data.train, mode), model.make_batch(data.test, mode)


def train_model(ec: ExperimentConfig, algo: str, data: PointData, layers: int, cache_dir=None):
    """Train (or load from ``cache_dir``) one model; returns ``(model, summary)``."""
    key = model_key(ec, algo, data, layers)
    if cache_dir is not None:
        ck = Path(cache_dir) / f"{algo}-{key}.ckpt"
        js = ck.with_suffix(".json")
        if ck.exists() and js.exists():
            model, _ = load_checkpoint(ck)
            return model, json.loads(js.read_text())
    seed = ec.sub_seed(f"train/{algo}")
    model = create_model(ec, algo, data, layers)
    tb, vb = _batches(ec, model, data, algo)
    t0 = time.perf_counter()
    res = train(model, tb, vb, _train_config(ec, algo, seed))
    summary = {
        "algorithm": algo,
        "key": key,
        "layers": layers,
        "seed": seed,
        "best_epoch": res.best_epoch,
        "converged_epoch": res.converged_epoch,
        "epochs_run": len(res.log),
        "initial_test_nmse": res.initial_test_nmse,
        "train_seconds": time.perf_counter() - t0,
        "log": res.log,
    }
    if cache_dir is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        save_checkpoint(model, ck, seed, {"algorithm": algo, "key": key})
        js.write_text(json.dumps(summary, indent=1, sort_keys=True))
    return model, summary


# ----- evaluation ---------------------------------------------------------------


def evaluate_model(ec: ExperimentConfig, model, data: PointData, ds: Dataset, role: str) -> float:
    """Validation NMSE through the deployment path (raw pilot in, channel out)."""
    if isinstance(model, ListaSmoModel):
        w = export_trained_dma(model.params)
        z = build_q(w, data.cfg) @ (build_h(data.cfg) @ ds.y)
    else:
        z = data.observe(ds, role, ec)
    return mean_nmse(estimate_channel(model, z), ds.g_star)


def fista_estimate(psi, atoms, z, scale: float, eta: float, iters: int) -> np.ndarray:
    alpha, _ = fista(LassoProblem(psi, z * scale), eta, iters)
    return atoms @ alpha / scale


def tune_fista(ec: ExperimentConfig, data: PointData) -> tuple[float, np.ndarray]:
    """Pick the threshold with the lowest test-set NMSE; returns ``(eta, psi)``."""
    q = np.vstack([build_q(w, data.cfg) for w in data.weights])
    psi = q @ build_h(data.cfg) @ data.grid.atoms
    z = data.observe(data.test, "test", ec)
    scores = [
        mean_nmse(fista_estimate(psi, data.grid.atoms, z, data.scale, eta, ec.fista_iters), data.test.g_star)
        for eta in ec.fista_etas
    ]
    return float(ec.fista_etas[int(np.argmin(scores))]), psi


def evaluate_fista(ec: ExperimentConfig, data: PointData, ds: Dataset, role: str, eta: float, psi) -> float:
    z = data.observe(ds, role, ec)
    return mean_nmse(fista_estimate(psi, data.grid.atoms, z, data.scale, eta, ec.fista_iters), ds.g_star)


def untrained_nmse(ec: ExperimentConfig, algo: str, data: PointData, ds: Dataset, layers: int, role: str) -> float:
    """NMSE of the freshly initialized model, for before/after comparisons."""
    return evaluate_model(ec, create_model(ec, algo, data, layers), data, ds, role)


def zero_nmse(ds: Dataset) -> float:
    return mean_nmse(np.zeros_like(ds.g_star), ds.g_star)


__all__ = [
    "PointData",
    "clear_data_cache",
    "create_model",
    "evaluate_fista",
    "evaluate_model",
    "fista_estimate",
    "model_key",
    "multi_pilot_observe",
    "prepare_point",
    "stacked_observation",
    "train_model",
    "tune_fista",
    "untrained_nmse",
    "zero_nmse",
]
