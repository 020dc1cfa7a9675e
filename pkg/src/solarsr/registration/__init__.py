"""Temporal and geometric registration of LR/HR solar image sequences."""

from .coalign import AlignedPair, coalign_pair
from .correlate import Shift, align_sequence, find_shift
from .geometry import largest_valid_rect, rotate_and_mask, warp_similarity
from .sift import Keypoint, detect_and_match, detect_keypoints, match_descriptors
from .similarity import Transform, estimate_similarity

__all__ = [
    "AlignedPair",
    "Keypoint",
    "Shift",
    "Transform",
    "align_sequence",
    "coalign_pair",
    "detect_and_match",
    "detect_keypoints",
    "estimate_similarity",
    "find_shift",
    "largest_valid_rect",
    "match_descriptors",
    "rotate_and_mask",
    "warp_similarity",
]
