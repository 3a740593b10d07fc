"""Dual-human text-to-motion diffusion with tri-stage interaction modeling."""

from .config import RunConfig, config_from_dict, load_config, save_config
from .diffusion import (
    DiffusionSchedule,
    GuidanceConfig,
    LossWeights,
    guided_output,
    make_schedule,
    q_sample,
    reconstruction_loss,
    sample,
    total_loss,
)
from .errors import ContractError, FormatError, NumericError
from .interaction import (
    DistanceProfile,
    build_interaction_weights,
    distance_loss,
    gt_distance_profile,
    predict_distance,
)
from .metrics import (
    diversity,
    fid,
    mm_dist,
    mpjie,
    mpjpe,
    multimodality,
    retrieval_precision,
)
from .motion import (
    DualMotion,
    MotionSequence,
    SegmentLayout,
    feature_dim,
    segment_bounds,
)
from .synth import SCENARIOS, generate_corpus, synth_generate
from .text import PromptRecord, decompose_prompt, load_cache, save_cache

__version__ = "0.1.0"

__all__ = [
    "ContractError",
    "DiffusionSchedule",
    "DistanceProfile",
    "DualMotion",
    "FormatError",
    "GuidanceConfig",
    "LossWeights",
    "MotionSequence",
    "NumericError",
    "PromptRecord",
    "RunConfig",
    "SCENARIOS",
    "SegmentLayout",
    "build_interaction_weights",
    "config_from_dict",
    "decompose_prompt",
    "distance_loss",
    "diversity",
    "feature_dim",
    "fid",
    "generate_corpus",
    "gt_distance_profile",
    "guided_output",
    "load_cache",
    "load_config",
    "make_schedule",
    "mm_dist",
    "mpjie",
    "mpjpe",
    "multimodality",
    "predict_distance",
    "q_sample",
    "reconstruction_loss",
    "retrieval_precision",
    "sample",
    "save_cache",
    "save_config",
    "segment_bounds",
    "synth_generate",
    "total_loss",
]
