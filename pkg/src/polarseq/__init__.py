"""Block sequential decoding of polar codes, polar subcodes and eBCH codes."""

from .codespec import (
    CodeSpec,
    attach_crc,
    construct_frozen_set,
    ebch_check_matrix,
    from_check_matrix,
    load_spec,
    make_polar_spec,
    save_spec,
)
from .decomposition import OuterKind, PDTree, TreePolicy, build_tree
from .bsda import (
    DecodeResult,
    DecoderConfig,
    decode,
    decode_sda,
    estimate_bias,
    penalty_profile,
    psi_for_tree,
)
from .baselines import SclConfig, ml_decode, sc_decode, scl_decode
from .sim import Campaign, PointStats, channel_llrs, run_campaign, run_point

__all__ = [
    "CodeSpec", "attach_crc", "construct_frozen_set", "ebch_check_matrix",
    "from_check_matrix", "load_spec", "make_polar_spec", "save_spec",
    "OuterKind", "PDTree", "TreePolicy", "build_tree",
    "DecodeResult", "DecoderConfig", "decode", "decode_sda", "estimate_bias",
    "penalty_profile", "psi_for_tree",
    "SclConfig", "ml_decode", "sc_decode", "scl_decode",
    "Campaign", "PointStats", "channel_llrs", "run_campaign", "run_point",
]
