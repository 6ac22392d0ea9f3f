from . import autodiff
from .autodiff import Tensor, grad_check, no_grad
from .batch import GraphBatch, Snapshot, batch_snapshots
from .model import (
    Adam,
    PolicyConfig,
    PolicyOutput,
    encode,
    init_params,
    load_checkpoint,
    policy_value,
    save_checkpoint,
)

__all__ = [
    "autodiff",
    "Tensor",
    "grad_check",
    "no_grad",
    "GraphBatch",
    "Snapshot",
    "batch_snapshots",
    "Adam",
    "PolicyConfig",
    "PolicyOutput",
    "encode",
    "init_params",
    "load_checkpoint",
    "policy_value",
    "save_checkpoint",
]
