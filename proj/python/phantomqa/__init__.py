"""Phantom slice synthesis, preprocessing and QA metrics."""

from ._core import (
    class_names,
    desk_param_counts,
    downsample,
    generate_slices,
    metrics_from_confusion,
    published_param_counts,
    stack_axial,
    window_hu,
)

__all__ = [
    "class_names",
    "desk_param_counts",
    "downsample",
    "generate_slices",
    "metrics_from_confusion",
    "published_param_counts",
    "stack_axial",
    "window_hu",
]
