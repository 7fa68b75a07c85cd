"""Soft-mask graph neural networks (SMG) on a small numpy autodiff core."""

from .errors import (
    ConfigError,
    ConstraintError,
    ContractError,
    DatasetError,
    DimensionError,
    SmgError,
    TrainingError,
)
from .graph import Batch, FoldSplit, Graph, SubgraphSelection, induced_subgraph, make_batch, stratified_kfold
from .layers import MaskMatrix, ModelConfig, SmgModel, load_checkpoint, model_forward, save_checkpoint
from .tensor import Tensor, backward, no_grad
from .tu import load_tu_dataset

__version__ = "0.1.0"
