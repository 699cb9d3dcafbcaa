"""Selective state-space encoder with a pyramid-pooling decoder for semantic
segmentation of remote-sensing imagery, built on a small numpy autodiff core.
"""

from .accounting import count_parameters, estimate_flops
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, load_config, parse_config
from .decoder import DecoderConfig, UperNetHead
from .encoder import FeaturePyramid, SambaBlock, SambaConfig, SambaEncoder
from .errors import (
    CheckpointError,
    ConfigError,
    ContractError,
    GradientCheckError,
    ManifestError,
    MetricError,
    NonFiniteError,
    ShapeError,
    TrainingError,
    ValidationError,
)
from .gradcheck import finite_difference_check
from .losses import cross_entropy_loss
from .metrics import ConfusionMatrix, miou
from .model import SambaSegmenter, desk_config, full_config, tiny_config
from .optim import AdamW, TrainConfig, adamw_step, lr_at
from .ssm import (
    MambaBlock,
    MambaBlockConfig,
    SsmLaneParams,
    selective_scan_chunked,
    selective_scan_sequential,
    zoh_discretize,
)
from .tensor import Parameter, Tape, Tensor, default_dtype, no_grad, set_default_dtype
from .training import evaluate, predict_logits, train_loop

__version__ = "0.1.0"

__all__ = [
    "count_parameters", "estimate_flops", "load_checkpoint", "save_checkpoint",
    "RunConfig", "load_config", "parse_config", "DecoderConfig", "UperNetHead",
    "FeaturePyramid", "SambaBlock", "SambaConfig", "SambaEncoder",
    "CheckpointError", "ConfigError", "ContractError", "GradientCheckError", "ManifestError",
    "MetricError", "NonFiniteError", "ShapeError", "TrainingError", "ValidationError",
    "finite_difference_check", "cross_entropy_loss", "ConfusionMatrix", "miou",
    "SambaSegmenter", "desk_config", "full_config", "tiny_config",
    "AdamW", "TrainConfig", "adamw_step", "lr_at",
    "MambaBlock", "MambaBlockConfig", "SsmLaneParams", "selective_scan_chunked",
    "selective_scan_sequential", "zoh_discretize",
    "Parameter", "Tape", "Tensor", "default_dtype", "no_grad", "set_default_dtype",
    "evaluate", "predict_logits", "train_loop",
]
