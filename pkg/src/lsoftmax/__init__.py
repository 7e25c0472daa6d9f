from .__about__ import __title__, __version__
from .angular import cos_multiple, psi, psi_derivative, segment_of
from .helpers import logger_quick_setup
from .loss import backward, forward, lambda_at, predict, target_logit
from .models.config import ExperimentConfig, load_config
from .models.network import LayerSpec, NetworkSpec
from .models.training import LambdaSchedule, TrainConfig
from .optim import train

__all__ = [
    "__title__",
    "__version__",
    "cos_multiple",
    "psi",
    "psi_derivative",
    "segment_of",
    "logger_quick_setup",
    "backward",
    "forward",
    "lambda_at",
    "predict",
    "target_logit",
    "ExperimentConfig",
    "load_config",
    "LayerSpec",
    "NetworkSpec",
    "LambdaSchedule",
    "TrainConfig",
    "train",
]
