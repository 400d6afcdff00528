"""Model checkpoints in the shared binary tensor format.

The header records the architecture, geometry and parameter counts; the
payload holds every parameter tensor plus whatever fixed physics the model
needs (random DMA phases and grid atoms for the LISTA family).
"""

from __future__ import annotations

import numpy as np

from dmace import binio
from dmace.dictionary import GridDictionary
from dmace.dma_model import DmaConfig, DmaWeights
from dmace.errors import PersistenceError
from dmace.unfolded_nets.models import AlistaModel, ListaModel, ListaSmoModel, UnfoldedModel
from dmace.unfolded_nets.networks import AlistaParams, ListaParams, ListaSmoParams

CHECKPOINT_MAGIC = b"DMAC"

_PARAMS = {"lista": ListaParams, "alista": AlistaParams, "lista_smo": ListaSmoParams}


def _param_shapes(params) -> dict:
    return {k: list(np.shape(v)) for k, v in params.as_dict().items()}


def checkpoint_header(model: UnfoldedModel, seed: int | None = None, extra: dict | None = None) -> dict:
    cfg: DmaConfig = model.cfg
    d = model.d if isinstance(model, ListaSmoModel) else model.grid.d
    h = {
        "kind": "checkpoint",
        "arch": model.arch,
        "L": model.params.L,
        "n_d": cfg.n_d,
        "n_e": cfg.n_e,
        "D": d,
        "seed": seed,
        "scale": model.scale,
        "cfg": cfg.to_dict(),
        "param_count": model.params.count(),
        "param_shapes": _param_shapes(model.params),
    }
    if not isinstance(model, ListaSmoModel):
        h["k_theta"] = model.grid.k_theta
        h["k_phi"] = model.grid.k_phi
    if extra:
        h["extra"] = extra
    return h


def save_checkpoint(model: UnfoldedModel, path, seed: int | None = None, extra: dict | None = None) -> None:
    tensors = {f"param/{k}": v for k, v in model.params.as_dict().items()}
    if not isinstance(model, ListaSmoModel):
        tensors["dma/phases"] = np.stack([w.phases for w in getattr(model, "weights_list", [model.weights])])
        tensors["grid/atoms"] = model.grid.atoms
        tensors["grid/theta"] = model.grid.theta
        tensors["grid/phi"] = model.grid.phi
    binio.save_tensors(path, CHECKPOINT_MAGIC, checkpoint_header(model, seed, extra), tensors)


def load_checkpoint(path) -> tuple[UnfoldedModel, dict]:
    """Rebuild the model; returns ``(model, header)``."""
    h, t = binio.load_tensors(path, CHECKPOINT_MAGIC)
    arch = h.get("arch")
    if arch not in _PARAMS:
        raise PersistenceError(f"unknown architecture {arch!r}")
    raw = {k.split("/", 1)[1]: v for k, v in t.items() if k.startswith("param/")}
    params = _PARAMS[arch].from_dict(raw)
    cfg = DmaConfig.from_dict(h["cfg"])
    if arch == "lista_smo":
        return ListaSmoModel(params, cfg, h["D"], h["scale"]), h
    grid = GridDictionary(t["grid/atoms"], t["grid/theta"], t["grid/phi"], h["k_theta"], h["k_phi"])
    weights = [DmaWeights(p) for p in np.atleast_2d(t["dma/phases"])]
    if arch == "alista":
        return AlistaModel(params, cfg, weights[0], grid, h["scale"]), h
    return ListaModel(params, cfg, weights, grid, h["scale"]), h
