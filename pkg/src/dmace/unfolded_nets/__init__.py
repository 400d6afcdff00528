from dmace.unfolded_nets.checkpoint import CHECKPOINT_MAGIC, load_checkpoint, save_checkpoint
from dmace.unfolded_nets.models import (
    SELF_SUPERVISED,
    SUPERVISED,
    AlistaModel,
    Batch,
    ListaModel,
    ListaSmoModel,
    UnfoldedModel,
    estimate_channel,
    fit_scale,
    self_supervised_loss,
    supervised_loss,
)
from dmace.unfolded_nets.networks import (
    AlistaParams,
    ListaParams,
    ListaSmoParams,
    alista_forward,
    export_trained_dma,
    lista_forward,
    lista_smo_forward,
)
from dmace.unfolded_nets.training import TrainConfig, TrainResult, converged_at, train

__all__ = [
    "CHECKPOINT_MAGIC",
    "load_checkpoint",
    "save_checkpoint",
    "SELF_SUPERVISED",
    "SUPERVISED",
    "AlistaModel",
    "AlistaParams",
    "Batch",
    "ListaModel",
    "ListaParams",
    "ListaSmoModel",
    "ListaSmoParams",
    "TrainConfig",
    "TrainResult",
    "UnfoldedModel",
    "alista_forward",
    "converged_at",
    "estimate_channel",
    "export_trained_dma",
    "fit_scale",
    "lista_forward",
    "lista_smo_forward",
    "self_supervised_loss",
    "supervised_loss",
    "train",
]
