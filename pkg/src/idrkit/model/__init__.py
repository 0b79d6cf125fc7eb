from .fusion import (FusionConfig, ModelParams, fuse_audio, init_params,
                     pair_fuse_classify, prosody_attend_pool, stats_pool,
                     weighted_ce_loss)
from .backbone import StubBackbone, TokenStates, MarkerError, tokenize_with_markers
from .training import TrainConfig, class_weights, fit, lr_at_step

__all__ = [
    "FusionConfig", "ModelParams", "TokenStates", "TrainConfig",
    "StubBackbone", "MarkerError", "class_weights", "fit", "fuse_audio",
    "init_params", "lr_at_step", "pair_fuse_classify", "prosody_attend_pool",
    "stats_pool", "tokenize_with_markers", "weighted_ce_loss",
]
