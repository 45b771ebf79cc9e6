"""Skeleton-based sign language recognition: Python bindings for the core operations."""

from ._core import (
    SamslrError,
    evaluate,
    fuse_fixed,
    generate_synthetic,
    normalized_adjacency,
    prepare_streams,
    reduced_adjacency,
    reduced_keypoint_indices,
    sensitivity_sweep,
    smooth_labels,
    smoothed_cross_entropy,
)

__all__ = [
    "SamslrError",
    "evaluate",
    "fuse_fixed",
    "generate_synthetic",
    "normalized_adjacency",
    "prepare_streams",
    "reduced_adjacency",
    "reduced_keypoint_indices",
    "sensitivity_sweep",
    "smooth_labels",
    "smoothed_cross_entropy",
]
