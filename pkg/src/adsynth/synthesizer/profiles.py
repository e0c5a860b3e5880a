"""Condition profiles: kinematic generator parameters per cognitive condition."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from functools import lru_cache
from importlib import resources

import numpy as np

from ..skeleton import Condition, ValidationError

__all__ = [
    "ConditionProfile",
    "PARAMETERS",
    "BOUNDS",
    "DEFAULT_ALPHA",
    "DEFAULT_CURRICULUM",
    "default_profile",
    "load_config",
]


@lru_cache(maxsize=None)
def load_config():
    text = resources.files("adsynth").joinpath("data/profiles.json").read_text(encoding="utf-8")
    return json.loads(text)


_CFG = load_config()
PARAMETERS = tuple(_CFG["parameters"])
BOUNDS = {k: tuple(v) for k, v in _CFG["bounds"].items()}
DEFAULT_ALPHA = float(_CFG["alpha"])
DEFAULT_CURRICULUM = tuple(_CFG["curriculum"])
INTEGER_PARAMETERS = ("standup_oscillation_count",)


@dataclass(frozen=True)
class ConditionProfile:
    condition: Condition
    gait_cadence_hz: float
    stride_length_m: float
    walk_speed_mps: float
    stoop_angle_deg: float
    standup_oscillation_count: int
    standup_oscillation_amp_m: float
    arm_swing_amp_deg: float
    turn_rate_dps: float
    speed_jitter: float

    def __post_init__(self):
        try:
            object.__setattr__(self, "condition", Condition(self.condition))
        except ValueError:
            raise ValidationError(f"unknown condition {self.condition!r}") from None
        for name in PARAMETERS:
            value = getattr(self, name)
            if name in INTEGER_PARAMETERS:
                if isinstance(value, float) and not value.is_integer():
                    raise ValidationError(f"{name} must be an integer, got {value}")
                value = int(value)
            else:
                value = float(value)
            lo, hi = BOUNDS[name]
            if not np.isfinite(value) or not lo <= value <= hi:
                raise ValidationError(f"{name}={value} outside bounds [{lo}, {hi}]")
            object.__setattr__(self, name, value)

    def to_vector(self, names=PARAMETERS):
        return np.array([getattr(self, n) for n in names], dtype=float)

    def with_vector(self, vector, names=PARAMETERS):
        values = {}
        for name, v in zip(names, vector):
            lo, hi = BOUNDS[name]
            v = min(max(float(v), lo), hi)
            values[name] = int(round(v)) if name in INTEGER_PARAMETERS else v
        return replace(self, **values)

    def to_dict(self):
        out = asdict(self)
        out["condition"] = self.condition.value
        return out

    @classmethod
    def from_dict(cls, doc):
        names = {f.name for f in fields(cls)}
        missing = names - set(doc)
        if missing:
            raise ValidationError(f"profile missing fields: {sorted(missing)}")
        return cls(**{k: doc[k] for k in names})


def _row(condition):
    row = dict(_CFG["defaults"][condition.value])
    row.pop("moca_score")
    return row


def default_profile(condition, moca_score=None):
    """Default profile for a condition, optionally adjusted by MoCA score.

    Without a score the condition's row of the shipped table is returned.
    With a score, parameters are linearly interpolated between the table
    rows anchored at each condition's reference MoCA (AD 9, MCI 21, NC 27),
    clamped at the end rows. Integer parameters are rounded.
    """
    try:
        condition = Condition(condition)
    except ValueError:
        raise ValidationError(f"unknown condition {condition!r}") from None
    if moca_score is None:
        return ConditionProfile(condition=condition, **_row(condition))
    if isinstance(moca_score, bool) or int(moca_score) != moca_score or not 0 <= moca_score <= 30:
        raise ValidationError(f"moca_score must be an integer in [0, 30], got {moca_score!r}")

    anchors = sorted(
        (_CFG["defaults"][c.value]["moca_score"], _row(c)) for c in Condition
    )
    xs = [a for a, _ in anchors]
    values = {}
    for name in PARAMETERS:
        ys = [row[name] for _, row in anchors]
        v = float(np.interp(moca_score, xs, ys))
        values[name] = int(round(v)) if name in INTEGER_PARAMETERS else v
    return ConditionProfile(condition=condition, **values)
