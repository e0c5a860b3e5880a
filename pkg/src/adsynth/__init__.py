"""Condition-aware synthesis, metrics and benchmarking for elderly skeleton motion."""

__version__ = "0.1.0"

from .metrics import MetricProfile, compare_report, metric_profile
from .skeleton import (
    ActionLabel,
    Condition,
    JointId,
    ParseError,
    SkeletonClip,
    SkeletonError,
    SubjectMetadata,
    ValidationError,
    load_clip,
    parse_capture_skeleton,
    save_clip,
)
from .synthesizer import ConditionProfile, GenerationRequest, default_profile, fit_profile, generate_clip

__all__ = [
    "ActionLabel",
    "Condition",
    "ConditionProfile",
    "GenerationRequest",
    "JointId",
    "MetricProfile",
    "ParseError",
    "SkeletonClip",
    "SkeletonError",
    "SubjectMetadata",
    "ValidationError",
    "compare_report",
    "default_profile",
    "fit_profile",
    "generate_clip",
    "load_clip",
    "metric_profile",
    "parse_capture_skeleton",
    "save_clip",
]
