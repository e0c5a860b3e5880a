"""Skeleton data model, capture-file parsing and the native clip format.

Coordinates are camera-relative meters with ``y`` pointing up and ``z``
along the optical axis. Every clip uses the 25-joint capture topology
listed in :class:`JointId`.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

__all__ = [
    "JointId",
    "Condition",
    "ActionLabel",
    "SubjectMetadata",
    "SkeletonClip",
    "SkeletonError",
    "ValidationError",
    "ParseError",
    "JOINT_NAMES",
    "N_JOINTS",
    "BONES",
    "KEY_JOINTS",
    "REPORT_JOINTS",
    "parse_capture_skeleton",
    "load_clip",
    "save_clip",
    "dumps_clip",
    "loads_clip",
    "key_joint_positions",
    "yaw_matrix",
]

FORMAT_TAG = "adsynth-clip/1"
DEFAULT_FPS = 30.0


class JointId(enum.IntEnum):
    SPINE_BASE = 0
    SPINE_MID = 1
    NECK = 2
    HEAD = 3
    SHOULDER_LEFT = 4
    ELBOW_LEFT = 5
    WRIST_LEFT = 6
    HAND_LEFT = 7
    SHOULDER_RIGHT = 8
    ELBOW_RIGHT = 9
    WRIST_RIGHT = 10
    HAND_RIGHT = 11
    HIP_LEFT = 12
    KNEE_LEFT = 13
    ANKLE_LEFT = 14
    FOOT_LEFT = 15
    HIP_RIGHT = 16
    KNEE_RIGHT = 17
    ANKLE_RIGHT = 18
    FOOT_RIGHT = 19
    SPINE_SHOULDER = 20
    HAND_TIP_LEFT = 21
    THUMB_LEFT = 22
    HAND_TIP_RIGHT = 23
    THUMB_RIGHT = 24


N_JOINTS = len(JointId)
JOINT_NAMES = tuple(j.name.lower() for j in JointId)

J = JointId

# 24-edge tree over the 25 joints (parent, child).
BONES = (
    (J.SPINE_BASE, J.SPINE_MID),
    (J.SPINE_MID, J.SPINE_SHOULDER),
    (J.SPINE_SHOULDER, J.NECK),
    (J.NECK, J.HEAD),
    (J.SPINE_SHOULDER, J.SHOULDER_LEFT),
    (J.SHOULDER_LEFT, J.ELBOW_LEFT),
    (J.ELBOW_LEFT, J.WRIST_LEFT),
    (J.WRIST_LEFT, J.HAND_LEFT),
    (J.HAND_LEFT, J.HAND_TIP_LEFT),
    (J.HAND_LEFT, J.THUMB_LEFT),
    (J.SPINE_SHOULDER, J.SHOULDER_RIGHT),
    (J.SHOULDER_RIGHT, J.ELBOW_RIGHT),
    (J.ELBOW_RIGHT, J.WRIST_RIGHT),
    (J.WRIST_RIGHT, J.HAND_RIGHT),
    (J.HAND_RIGHT, J.HAND_TIP_RIGHT),
    (J.HAND_RIGHT, J.THUMB_RIGHT),
    (J.SPINE_BASE, J.HIP_LEFT),
    (J.HIP_LEFT, J.KNEE_LEFT),
    (J.KNEE_LEFT, J.ANKLE_LEFT),
    (J.ANKLE_LEFT, J.FOOT_LEFT),
    (J.SPINE_BASE, J.HIP_RIGHT),
    (J.HIP_RIGHT, J.KNEE_RIGHT),
    (J.KNEE_RIGHT, J.ANKLE_RIGHT),
    (J.ANKLE_RIGHT, J.FOOT_RIGHT),
)

# The 12 metric-bearing joints; "back" is the spine midpoint.
KEY_JOINTS = {
    "left_hip": J.HIP_LEFT,
    "right_hip": J.HIP_RIGHT,
    "left_knee": J.KNEE_LEFT,
    "right_knee": J.KNEE_RIGHT,
    "left_ankle": J.ANKLE_LEFT,
    "right_ankle": J.ANKLE_RIGHT,
    "left_elbow": J.ELBOW_LEFT,
    "right_elbow": J.ELBOW_RIGHT,
    "left_shoulder": J.SHOULDER_LEFT,
    "right_shoulder": J.SHOULDER_RIGHT,
    "neck": J.NECK,
    "back": J.SPINE_MID,
}

# Key joints plus the wrists, which only appear in comparison reports.
REPORT_JOINTS = {**KEY_JOINTS, "left_wrist": J.WRIST_LEFT, "right_wrist": J.WRIST_RIGHT}


class Condition(str, enum.Enum):
    AD = "AD"
    MCI = "MCI"
    NC = "NC"


class ActionLabel(str, enum.Enum):
    SITTING = "sitting"
    STANDING = "standing"
    WALKING = "walking"
    TURNING = "turning"
    LYING = "lying"
    SIT_TO_STAND = "sit_to_stand"
    STAND_TO_SIT = "stand_to_sit"


class SkeletonError(ValueError):
    """Base class for data-model errors."""


class ValidationError(SkeletonError):
    pass


class ParseError(SkeletonError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _parse_enum(enum_cls, value, what):
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise ValidationError(f"unknown {what} {value!r}; expected one of {allowed}") from None


@dataclass(frozen=True)
class SubjectMetadata:
    condition: Condition = Condition.NC
    moca_score: int | None = None
    zbi_score: int | None = None
    subject_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "condition", _parse_enum(Condition, self.condition, "condition"))
        for name, hi in (("moca_score", 30), ("zbi_score", 88)):
            value = getattr(self, name)
            if value is None:
                continue
            if isinstance(value, bool) or int(value) != value:
                raise ValidationError(f"{name} must be an integer, got {value!r}")
            if not 0 <= value <= hi:
                raise ValidationError(f"{name} must be in [0, {hi}], got {value}")
            object.__setattr__(self, name, int(value))
        object.__setattr__(self, "subject_id", str(self.subject_id))

    def to_dict(self):
        out = {"condition": self.condition.value, "subject_id": self.subject_id}
        if self.moca_score is not None:
            out["moca_score"] = self.moca_score
        if self.zbi_score is not None:
            out["zbi_score"] = self.zbi_score
        return out


@dataclass(frozen=True, eq=False)
class SkeletonClip:
    """A timed sequence of 25-joint poses for one subject and one action.

    ``positions`` has shape ``(n_frames, 25, 3)`` and is stored read-only.
    ``provenance`` is a free-form tag (e.g. ``"train"``, ``"augmented"``)
    used by the benchmark to keep test data out of augmentation paths.
    """

    positions: np.ndarray
    fps: float = DEFAULT_FPS
    metadata: SubjectMetadata = field(default_factory=SubjectMetadata)
    action: ActionLabel = ActionLabel.STANDING
    viewpoint_deg: float = 0.0
    provenance: str = ""

    def __post_init__(self):
        try:
            pos = np.array(self.positions, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"positions are not numeric: {exc}") from None
        if pos.ndim != 3 or pos.shape[1:] != (N_JOINTS, 3):
            raise ValidationError(
                f"positions must have shape (n_frames, {N_JOINTS}, 3), got {pos.shape}"
            )
        if pos.shape[0] == 0:
            raise ValidationError("clip has no frames")
        if not np.all(np.isfinite(pos)):
            raise ValidationError("positions contain NaN or Inf")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

        fps = float(self.fps)
        if not (math.isfinite(fps) and fps > 0):
            raise ValidationError(f"fps must be positive, got {self.fps!r}")
        object.__setattr__(self, "fps", fps)

        vp = float(self.viewpoint_deg)
        if not (math.isfinite(vp) and 0.0 <= vp < 360.0):
            raise ValidationError(f"viewpoint_deg must be in [0, 360), got {self.viewpoint_deg!r}")
        object.__setattr__(self, "viewpoint_deg", vp)

        if not isinstance(self.metadata, SubjectMetadata):
            raise ValidationError("metadata must be a SubjectMetadata")
        object.__setattr__(self, "action", _parse_enum(ActionLabel, self.action, "action"))

    @property
    def n_frames(self):
        return self.positions.shape[0]

    @property
    def duration_s(self):
        return self.n_frames / self.fps

    def __eq__(self, other):
        if not isinstance(other, SkeletonClip):
            return NotImplemented
        return (
            self.fps == other.fps
            and self.metadata == other.metadata
            and self.action == other.action
            and self.viewpoint_deg == other.viewpoint_deg
            and self.provenance == other.provenance
            and np.array_equal(self.positions, other.positions)
        )

    __hash__ = None

    def with_positions(self, positions, **changes):
        return replace(self, positions=positions, **changes)

    def replace(self, **changes):
        return replace(self, **changes)

    def rotated_yaw(self, degrees, pivot=None):
        """Rotate every frame about the vertical axis through ``pivot``.

        The default pivot is the mean spine-base position of the clip.
        """
        if pivot is None:
            pivot = self.positions[:, J.SPINE_BASE].mean(axis=0)
        pivot = np.asarray(pivot, dtype=float)
        rot = yaw_matrix(degrees)
        pos = (self.positions - pivot) @ rot.T + pivot
        return self.with_positions(pos)

    def translated(self, offset):
        return self.with_positions(self.positions + np.asarray(offset, dtype=float))


def yaw_matrix(degrees):
    """Rotation matrix about the +y (vertical) axis."""
    t = math.radians(degrees)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def key_joint_positions(clip):
    """Per-frame positions of the 12 key joints followed by both wrists.

    Returns ``(names, positions)`` where ``positions`` has shape
    ``(n_frames, 14, 3)`` and follows the order of :data:`REPORT_JOINTS`.
    """
    names = tuple(REPORT_JOINTS)
    idx = [int(REPORT_JOINTS[n]) for n in names]
    return names, clip.positions[:, idx, :]


# --------------------------------------------------------------------------
# capture format


class _Lines:
    def __init__(self, text):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, what):
        while self.pos < len(self.lines):
            line = self.lines[self.pos]
            self.pos += 1
            if line.strip():
                return self.pos, line.split()
        raise ParseError(f"unexpected end of input while reading {what}", self.pos + 1)

    def next_int(self, what, lo=0, hi=None):
        lineno, tokens = self.next(what)
        if len(tokens) != 1:
            raise ParseError(f"expected a single integer for {what}, got {len(tokens)} fields", lineno)
        try:
            value = int(tokens[0])
        except ValueError:
            raise ParseError(f"non-numeric {what}: {tokens[0]!r}", lineno) from None
        if value < lo or (hi is not None and value > hi):
            raise ParseError(f"{what} out of range: {value}", lineno)
        return value


def parse_capture_skeleton(text, fps=DEFAULT_FPS, action=ActionLabel.STANDING, metadata=None):
    """Parse the 25-joint capture text layout into one clip per body index.

    Layout: a frame-count line; per frame a body-count line; per body an
    info line, a joint-count line and one 12-float line per joint whose
    first three values are the 3D position in meters.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8: {exc}") from None
    metadata = metadata or SubjectMetadata()
    lines = _Lines(text)
    n_frames = lines.next_int("frame count")
    bodies = {}
    for _ in range(n_frames):
        n_bodies = lines.next_int("body count", hi=64)
        for b in range(n_bodies):
            lines.next("body info")
            lineno_count = lines.pos + 1
            n_joints = lines.next_int("joint count")
            if n_joints != N_JOINTS:
                raise ParseError(f"expected {N_JOINTS} joints, got {n_joints}", lineno_count)
            pose = np.empty((N_JOINTS, 3))
            for j in range(N_JOINTS):
                lineno, tokens = lines.next("joint line")
                if len(tokens) != 12:
                    raise ParseError(f"joint line must have 12 fields, got {len(tokens)}", lineno)
                try:
                    xyz = [float(t) for t in tokens[:3]]
                    for t in tokens[3:]:
                        float(t)
                except ValueError:
                    raise ParseError("non-numeric joint field", lineno) from None
                if not all(math.isfinite(v) for v in xyz):
                    raise ParseError("non-finite joint coordinate", lineno)
                pose[j] = xyz
            bodies.setdefault(b, []).append(pose)
    return [
        SkeletonClip(np.stack(frames), fps=fps, metadata=metadata, action=action)
        for _, frames in sorted(bodies.items())
    ]


# --------------------------------------------------------------------------
# native clip format


def _num(x):
    return repr(float(x))


def dumps_clip(clip):
    """Serialize a clip to the native text document (JSON, one frame per line)."""
    header = {
        "format": FORMAT_TAG,
        "fps": clip.fps,
        "action": clip.action.value,
        "viewpoint_deg": clip.viewpoint_deg,
        "metadata": clip.metadata.to_dict(),
        "provenance": clip.provenance,
        "joint_names": list(JOINT_NAMES),
    }
    parts = ["{"]
    for key, value in header.items():
        parts.append(f"  {json.dumps(key)}: {json.dumps(value)},")
    frames = []
    for frame in clip.positions:
        joints = ",".join("[" + ",".join(_num(v) for v in xyz) + "]" for xyz in frame)
        frames.append(f"    [{joints}]")
    parts.append('  "frames": [')
    parts.append(",\n".join(frames))
    parts.append("  ]")
    parts.append("}")
    return "\n".join(parts) + "\n"


def _require(doc, key):
    if key not in doc:
        raise ValidationError(f"missing required field {key!r}")
    return doc[key]


def loads_clip(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid clip document: {exc.msg}", exc.lineno) from None
    if not isinstance(doc, dict):
        raise ValidationError("clip document must be an object")
    names = _require(doc, "joint_names")
    if list(names) != list(JOINT_NAMES):
        raise ValidationError("joint_names do not match the 25-joint capture topology")
    meta = _require(doc, "metadata")
    if not isinstance(meta, dict):
        raise ValidationError("metadata must be an object")
    metadata = SubjectMetadata(
        condition=_require(meta, "condition"),
        moca_score=meta.get("moca_score"),
        zbi_score=meta.get("zbi_score"),
        subject_id=_require(meta, "subject_id"),
    )
    frames = _require(doc, "frames")
    if not isinstance(frames, list) or any(not isinstance(f, list) or len(f) != N_JOINTS for f in frames):
        raise ValidationError(f"every frame must list {N_JOINTS} joints")
    if any(not isinstance(p, list) or len(p) != 3 for f in frames for p in f):
        raise ValidationError("every joint must be an [x, y, z] triple")
    try:
        positions = np.array(frames, dtype=float).reshape(len(frames), N_JOINTS, 3)
    except (TypeError, ValueError):
        raise ValidationError("joint coordinates must be numbers") from None
    return SkeletonClip(
        positions,
        fps=_require(doc, "fps"),
        metadata=metadata,
        action=_require(doc, "action"),
        viewpoint_deg=_require(doc, "viewpoint_deg"),
        provenance=doc.get("provenance", ""),
    )


def save_clip(clip, path):
    Path(path).write_text(dumps_clip(clip), encoding="utf-8")


def load_clip(path):
    return loads_clip(Path(path).read_text(encoding="utf-8"))
