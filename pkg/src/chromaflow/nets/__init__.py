from .cpnet import ColorPropNet, CpnetConfig, cpnet_forward, init_cpnet
from .encoder import FrozenEncoder, build_feature_pyramid
from .ssnet import (
    CombineNet,
    RefineNet,
    SsnetConfig,
    SuperResNet,
    TemporalSmoother,
    combine,
    correspondence_warp,
    init_ssnet,
    refine,
    similarity_matrix,
    super_resolve,
)

__all__ = [
    "ColorPropNet",
    "CpnetConfig",
    "cpnet_forward",
    "init_cpnet",
    "FrozenEncoder",
    "build_feature_pyramid",
    "CombineNet",
    "RefineNet",
    "SsnetConfig",
    "SuperResNet",
    "TemporalSmoother",
    "combine",
    "correspondence_warp",
    "init_ssnet",
    "refine",
    "similarity_matrix",
    "super_resolve",
]
