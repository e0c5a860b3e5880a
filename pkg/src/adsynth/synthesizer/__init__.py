from .kinematics import GenerationRequest, generate_clip, transition_window
from .profiles import BOUNDS, PARAMETERS, ConditionProfile, default_profile
from .fitting import (
    ACTION_PARAMETERS,
    MetricLoss,
    ProfileFitter,
    curriculum_fit,
    fit_profile,
    mean_profile,
    metric_loss,
    nelder_mead,
    reconstruction_loss,
    stage3_loss,
)
