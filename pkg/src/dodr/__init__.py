"""Directed ordinal diffusion regularization for ordinal severity scoring."""
from .diffusion import DiffusionStack, diffuse
from .errors import (
    DataFormatError,
    InvalidInputError,
    TrainingDivergedError,
    UndefinedMetricError,
)
from .graph import GraphConfig, build_graph, transition_matrix
from .loss import LossReport, mse_loss, odr_loss, total_loss
from .metrics import (
    EpochMetrics,
    discretize,
    forward_inversion_rate,
    macro_f1,
    qwk,
    select_checkpoint,
)
from .model import ScorerParams, TrainConfig, backward, forward, init_params, train

__version__ = "0.1.0"
