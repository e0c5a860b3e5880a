"""Parametric kinematic templates that turn a profile into a skeleton clip.

Each action is a closed-form trajectory in a subject frame (x to the
subject's left, y up, z forward). The subject frame is then yawed by the
viewpoint and placed in front of a camera mounted 1 m above the floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..skeleton import ActionLabel, JointId, SkeletonClip, SubjectMetadata, ValidationError, yaw_matrix
from .profiles import ConditionProfile

__all__ = [
    "GenerationRequest",
    "generate_clip",
    "transition_window",
    "CAMERA_HEIGHT_M",
    "SUBJECT_DEPTH_M",
    "SUPPORTED_ACTIONS",
]

J = JointId

CAMERA_HEIGHT_M = 1.0
SUBJECT_DEPTH_M = 3.0

# segment lengths for a 1.65 m subject (body_scale = 1)
THIGH = 0.42
SHANK = 0.41
ANKLE_H = 0.08
HIP_HALF_WIDTH = 0.09
HIP_DROP = 0.03
TRUNK = 0.50
SPINE_MID_AT = 0.45
SPINE_SHOULDER_AT = 0.82
HEAD = 0.16
SHOULDER_HALF_WIDTH = 0.17
UPPER_ARM = 0.28
FOREARM = 0.25
HAND = 0.08
SEAT_H = 0.47
SEAT_BACK = 0.42
BED_H = 0.45

# trunk pitch held while rising; the settle phase moves it to the stoop angle
RISE_PITCH_OFFSET = 10.0
MIN_DIP = 0.02

SUPPORTED_ACTIONS = tuple(ActionLabel)


@dataclass(frozen=True)
class GenerationRequest:
    action: ActionLabel
    profile: ConditionProfile
    duration_s: float = 3.0
    fps: float = 30.0
    viewpoint_deg: float = 0.0
    seed: int = 0
    body_scale: float = 1.0
    moca_score: int | None = None
    subject_id: str = ""

    def __post_init__(self):
        try:
            object.__setattr__(self, "action", ActionLabel(self.action))
        except ValueError:
            raise ValidationError(f"unsupported action {self.action!r}") from None
        if not isinstance(self.profile, ConditionProfile):
            raise ValidationError("profile must be a ConditionProfile")
        if not (math.isfinite(self.duration_s) and self.duration_s > 0):
            raise ValidationError(f"duration_s must be > 0, got {self.duration_s}")
        if not (math.isfinite(self.fps) and self.fps > 0):
            raise ValidationError(f"fps must be > 0, got {self.fps}")
        if not (math.isfinite(self.viewpoint_deg) and 0.0 <= self.viewpoint_deg < 360.0):
            raise ValidationError(f"viewpoint_deg must be in [0, 360), got {self.viewpoint_deg}")
        if not 0.7 <= self.body_scale <= 1.3:
            raise ValidationError(f"body_scale must be in [0.7, 1.3], got {self.body_scale}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if round(self.duration_s * self.fps) < 2:
            raise ValidationError("request yields fewer than 2 frames")


# --------------------------------------------------------------------------
# helpers


def _ease(s):
    """Cosine ease from 0 to 1 on s in [0, 1]; zero velocity at both ends."""
    s = np.clip(s, 0.0, 1.0)
    return 0.5 - 0.5 * np.cos(np.pi * s)


def _sagittal(angle):
    # unit vector pointing down, swung forward by `angle` radians
    angle = np.asarray(angle, dtype=float)
    return np.stack([np.zeros_like(angle), -np.cos(angle), np.sin(angle)], axis=-1)


class _Noise:
    """Seeded smooth noise: a few random low-frequency sinusoids."""

    def __init__(self, rng, n=3, fmin=0.15, fmax=0.8):
        self.freq = rng.uniform(fmin, fmax, n)
        self.phase = rng.uniform(0.0, 2 * np.pi, n)
        w = rng.uniform(0.5, 1.0, n)
        self.weight = w / w.sum()

    def value(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return np.sum(self.weight * np.sin(2 * np.pi * self.freq * t + self.phase), axis=-1)

    def integral(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        w = 2 * np.pi * self.freq
        return np.sum(self.weight * (np.cos(self.phase) - np.cos(w * t + self.phase)) / w, axis=-1)


def _warped_time(t, jitter, noise):
    # monotone time warp; jitter <= 0.5 keeps the local rate within [0.5, 1.5]
    return t + jitter * noise.integral(t)


class _Body:
    """Per-frame body state in the subject frame; assembled into 25 joints."""

    def __init__(self, n, s, stoop_deg):
        self.n = n
        self.s = s
        self.pelvis = np.zeros((n, 3))
        self.heading = np.zeros(n)  # yaw of the body, degrees
        self.pitch = np.zeros(n)  # trunk pitch, degrees
        self.head_pitch = np.zeros(n)
        self.hip = np.zeros((n, 2))  # left, right thigh angle from vertical (rad)
        self.knee = np.zeros((n, 2))  # knee flexion (rad)
        self.shoulder = np.zeros((n, 2))  # arm swing from vertical (rad)
        self.elbow = np.full((n, 2), math.radians(15.0))
        self.kyphosis = (0.01 + 0.001 * stoop_deg) * s
        self.lay = np.zeros(n)  # whole-body backward tilt, degrees

    def joints(self):
        n, s = self.n, self.s
        rel = np.zeros((n, 25, 3))
        p = np.radians(self.pitch)
        chord = np.stack([np.zeros(n), np.cos(p), np.sin(p)], axis=-1)
        back_normal = np.stack([np.zeros(n), np.sin(p), -np.cos(p)], axis=-1)
        rel[:, J.SPINE_MID] = SPINE_MID_AT * TRUNK * s * chord + self.kyphosis * back_normal
        rel[:, J.SPINE_SHOULDER] = SPINE_SHOULDER_AT * TRUNK * s * chord
        rel[:, J.NECK] = TRUNK * s * chord
        hp = np.radians(self.head_pitch)
        rel[:, J.HEAD] = rel[:, J.NECK] + HEAD * s * np.stack([np.zeros(n), np.cos(hp), np.sin(hp)], axis=-1)

        side = {0: 1.0, 1: -1.0}  # left is +x
        legs = ((J.HIP_LEFT, J.KNEE_LEFT, J.ANKLE_LEFT, J.FOOT_LEFT), (J.HIP_RIGHT, J.KNEE_RIGHT, J.ANKLE_RIGHT, J.FOOT_RIGHT))
        for k, (hip, knee, ankle, foot) in enumerate(legs):
            rel[:, hip] = [side[k] * HIP_HALF_WIDTH * s, -HIP_DROP * s, 0.0]
            thigh = _sagittal(self.hip[:, k])
            shank_angle = self.hip[:, k] - self.knee[:, k]
            shank = _sagittal(shank_angle)
            rel[:, knee] = rel[:, hip] + THIGH * s * thigh
            rel[:, ankle] = rel[:, knee] + SHANK * s * shank
            # foot points forward, perpendicular to the shank
            fwd = np.stack([np.zeros(n), np.sin(shank_angle), np.cos(shank_angle)], axis=-1)
            rel[:, foot] = rel[:, ankle] + 0.13 * s * fwd + 0.04 * s * shank

        arms = (
            (J.SHOULDER_LEFT, J.ELBOW_LEFT, J.WRIST_LEFT, J.HAND_LEFT, J.HAND_TIP_LEFT, J.THUMB_LEFT),
            (J.SHOULDER_RIGHT, J.ELBOW_RIGHT, J.WRIST_RIGHT, J.HAND_RIGHT, J.HAND_TIP_RIGHT, J.THUMB_RIGHT),
        )
        abd = math.radians(8.0)
        for k, (sh, el, wr, ha, tip, th) in enumerate(arms):
            sx = side[k]
            rel[:, sh] = rel[:, J.SPINE_SHOULDER] + [sx * SHOULDER_HALF_WIDTH * s, -0.02 * s, 0.0]
            up = _sagittal(self.shoulder[:, k])
            up = np.stack([np.full(n, sx * math.sin(abd)), up[:, 1] * math.cos(abd), up[:, 2] * math.cos(abd)], axis=-1)
            fore = _sagittal(self.shoulder[:, k] + self.elbow[:, k])
            rel[:, el] = rel[:, sh] + UPPER_ARM * s * up
            rel[:, wr] = rel[:, el] + FOREARM * s * fore
            rel[:, ha] = rel[:, wr] + HAND * s * fore
            rel[:, tip] = rel[:, ha] + 0.07 * s * fore
            rel[:, th] = rel[:, wr] + 0.05 * s * fore + [-sx * 0.03 * s, 0.0, 0.0]

        if np.any(self.lay):
            lay = np.radians(self.lay)
            c, sn = np.cos(lay), np.sin(lay)
            y, z = rel[..., 1].copy(), rel[..., 2].copy()
            rel[..., 1] = c[:, None] * y - sn[:, None] * z
            rel[..., 2] = sn[:, None] * y + c[:, None] * z

        h = np.radians(self.heading)
        ch, sh_ = np.cos(h)[:, None], np.sin(h)[:, None]
        x, z = rel[..., 0].copy(), rel[..., 2].copy()
        rel[..., 0] = ch * x + sh_ * z
        rel[..., 2] = -sh_ * x + ch * z
        return rel + self.pelvis[:, None, :]


def _leg_height(hip, knee, s):
    return THIGH * s * np.cos(hip) + SHANK * s * np.cos(hip - knee)


def _standing_pelvis_y(body, s):
    body.pelvis[:, 1] = ANKLE_H * s + HIP_DROP * s + np.max(_leg_height(body.hip, body.knee, s), axis=1)


def _two_link(hip_pos, ankle_pos, s):
    """Sagittal two-link IK on (y, z) points: (thigh angle, knee flexion)."""
    dz = ankle_pos[:, 1] - hip_pos[:, 1]
    dy = ankle_pos[:, 0] - hip_pos[:, 0]
    d = np.hypot(dy, dz)
    a, b = THIGH * s, SHANK * s
    d = np.clip(d, abs(a - b) + 1e-6, a + b - 1e-6)
    beta = np.arctan2(dz, -dy)
    gamma = np.arccos(np.clip((a * a + d * d - b * b) / (2 * a * d), -1.0, 1.0))
    delta = np.arccos(np.clip((b * b + d * d - a * a) / (2 * b * d), -1.0, 1.0))
    thigh = beta + gamma
    shank = beta - delta
    return thigh, thigh - shank


def _hold_sway(body, tau, noise, jitter, amp_scale=1.0):
    amp = (0.3 + 10.0 * jitter) * amp_scale
    body.pitch = body.pitch + amp * noise.value(tau)
    body.pelvis[:, 0] += 0.004 * body.s * amp * np.sin(2 * np.pi * 0.3 * tau)
    body.shoulder = body.shoulder + math.radians(amp) * noise.value(tau + 7.0)[:, None] * np.array([1.0, -1.0])


# --------------------------------------------------------------------------
# action templates


def _walking(body, t, prof, rng, duration):
    noise = _Noise(rng)
    tau = _warped_time(t, prof.speed_jitter, noise)
    s = body.s
    leg = (THIGH + SHANK) * s
    phase = 2 * np.pi * prof.gait_cadence_hz * tau + rng.uniform(0, 2 * np.pi)
    amp = math.asin(min(0.95, prof.stride_length_m / (4 * leg)))
    body.hip[:, 0] = amp * np.sin(phase)
    body.hip[:, 1] = amp * np.sin(phase + np.pi)
    k_amp = math.radians(20.0 + 35.0 * min(prof.stride_length_m / 1.2, 1.5))
    body.knee[:, 0] = math.radians(5.0) + k_amp * _ease((1 + np.cos(phase - 0.6)) / 2) ** 2
    body.knee[:, 1] = math.radians(5.0) + k_amp * _ease((1 + np.cos(phase + np.pi - 0.6)) / 2) ** 2
    arm = math.radians(prof.arm_swing_amp_deg)
    body.shoulder[:, 0] = arm * np.sin(phase + np.pi)
    body.shoulder[:, 1] = arm * np.sin(phase)
    body.elbow += np.radians(10.0) * (1 + np.sin(np.stack([phase + np.pi, phase], axis=1))) / 2
    body.pitch[:] = prof.stoop_angle_deg + 1.5 * np.sin(2 * phase)
    body.head_pitch = 0.5 * body.pitch
    total = prof.walk_speed_mps * _warped_time(duration, prof.speed_jitter, noise)
    body.pelvis[:, 2] = prof.walk_speed_mps * tau - total / 2
    body.pelvis[:, 0] = 0.015 * s * np.sin(phase)
    _standing_pelvis_y(body, s)


def _turning(body, t, prof, rng, duration):
    noise = _Noise(rng)
    tau = _warped_time(t, prof.speed_jitter, noise)
    body.heading = prof.turn_rate_dps * tau
    phase = 2 * np.pi * 1.2 * tau + rng.uniform(0, 2 * np.pi)
    lift = math.radians(10.0)
    body.hip[:, 0] = lift * np.clip(np.sin(phase), 0, None)
    body.hip[:, 1] = lift * np.clip(np.sin(phase + np.pi), 0, None)
    body.knee = 2.0 * body.hip + math.radians(4.0)
    body.pitch[:] = prof.stoop_angle_deg
    body.head_pitch = 0.5 * body.pitch
    arm = math.radians(0.3 * prof.arm_swing_amp_deg)
    body.shoulder[:, 0] = arm * np.sin(phase)
    body.shoulder[:, 1] = -arm * np.sin(phase)
    _standing_pelvis_y(body, body.s)


def _standing(body, t, prof, rng, duration):
    noise = _Noise(rng, fmin=0.1, fmax=0.5)
    tau = _warped_time(t, prof.speed_jitter, noise)
    body.hip[:] = math.radians(2.0)
    body.knee[:] = math.radians(4.0 + 0.3 * prof.stoop_angle_deg)
    body.pitch[:] = prof.stoop_angle_deg
    body.shoulder[:] = math.radians(4.0)
    _hold_sway(body, tau, noise, prof.speed_jitter)
    body.head_pitch = 0.5 * body.pitch
    _standing_pelvis_y(body, body.s)


def _seated(body, s):
    body.pelvis[:, 1] = SEAT_H * s
    body.pelvis[:, 2] = -SEAT_BACK * s
    hip_yz = np.stack([body.pelvis[:, 1] - HIP_DROP * s, body.pelvis[:, 2]], axis=1)
    thigh, knee = _two_link(hip_yz, np.broadcast_to([ANKLE_H * s, 0.0], hip_yz.shape), s)
    body.hip[:] = thigh[:, None]
    body.knee[:] = knee[:, None]


def _sitting(body, t, prof, rng, duration):
    noise = _Noise(rng, fmin=0.1, fmax=0.5)
    tau = _warped_time(t, prof.speed_jitter, noise)
    _seated(body, body.s)
    body.pitch[:] = prof.stoop_angle_deg + RISE_PITCH_OFFSET
    body.shoulder[:] = math.radians(25.0)
    body.elbow[:] = math.radians(60.0)
    _hold_sway(body, tau, noise, prof.speed_jitter)
    body.head_pitch = 0.3 * body.pitch


def _lying(body, t, prof, rng, duration):
    noise = _Noise(rng, fmin=0.1, fmax=0.4)
    tau = _warped_time(t, prof.speed_jitter, noise)
    body.hip[:] = math.radians(3.0)
    body.knee[:] = math.radians(8.0)
    body.pitch[:] = 0.2 * prof.stoop_angle_deg
    body.shoulder[:] = math.radians(10.0)
    _hold_sway(body, tau, noise, prof.speed_jitter, amp_scale=0.5)
    body.head_pitch = body.pitch + 15.0
    body.lay[:] = -90.0
    body.pelvis[:, 1] = BED_H * body.s + 0.1 * body.s


def _waypoints(k_rise, dip):
    # 0 -> P1 -> V1 -> ... -> Pm -> Vm -> 1 with m = k_rise / 2 dips
    m = k_rise // 2
    pts = [0.0]
    for k in range(1, m + 1):
        peak = k / (m + 1) + dip / 2
        pts += [peak, peak - dip]
    pts.append(1.0)
    return np.array(pts)


def transition_window(request):
    """(start_s, end_s) of the sit-to-stand transition inside a generated clip."""
    d = request.duration_s
    if request.action == ActionLabel.STAND_TO_SIT:
        n = max(2, int(round(d * request.fps)))
        end = (n - 1) / request.fps
        return end - 0.75 * d, end - 0.25 * d
    return 0.25 * d, 0.75 * d


def _sit_to_stand(body, t, prof, rng, duration):
    s = body.s
    noise = _Noise(rng, fmin=0.1, fmax=0.5)
    tau = _warped_time(t, prof.speed_jitter, noise)
    t0, t1 = 0.25 * duration, 0.75 * duration
    # monotone warp of the transition clock that keeps its end points fixed
    c = 0.9 * prof.speed_jitter * noise.value(0.0)
    u = np.clip((t - t0) / (t1 - t0), 0.0, 1.0)
    u = u + c * np.sin(2 * np.pi * u) / (2 * np.pi)
    rise_u = np.clip(u / 0.75, 0.0, 1.0)
    settle_u = np.clip((u - 0.75) / 0.25, 0.0, 1.0)

    k = prof.standup_oscillation_count
    k_rise = k if k % 2 == 0 else k - 1
    stand_y = ANKLE_H * s + HIP_DROP * s + 0.98 * (THIGH + SHANK) * s
    seat_y = SEAT_H * s
    dip = max(prof.standup_oscillation_amp_m / (stand_y - seat_y), MIN_DIP) if k_rise else 0.0
    dip = min(dip, 0.9 / (k_rise // 2 + 1))
    pts = _waypoints(k_rise, dip)
    n_seg = len(pts) - 1
    seg = np.minimum((rise_u * n_seg).astype(int), n_seg - 1)
    local = rise_u * n_seg - seg
    q = pts[seg] + (pts[seg + 1] - pts[seg]) * _ease(local)

    start = np.array([-SEAT_BACK * s, seat_y])
    end = np.array([-0.02 * s, stand_y])
    zy = start + q[:, None] * (end - start)
    body.pelvis[:, 2] = zy[:, 0]
    body.pelvis[:, 1] = zy[:, 1]
    hip_yz = np.stack([zy[:, 1] - HIP_DROP * s, zy[:, 0]], axis=1)
    thigh, knee = _two_link(hip_yz, np.broadcast_to([ANKLE_H * s, 0.0], hip_yz.shape), s)
    body.hip[:] = thigh[:, None]
    body.knee[:] = knee[:, None]

    stoop = prof.stoop_angle_deg
    rise_pitch = max(0.0, stoop - RISE_PITCH_OFFSET) if k % 2 else stoop + RISE_PITCH_OFFSET
    body.pitch = rise_pitch + (stoop - rise_pitch) * _ease(settle_u)
    body.shoulder[:] = math.radians(20.0) * (1 - q)[:, None] + math.radians(4.0)
    body.elbow[:] = math.radians(50.0) * (1 - q)[:, None] + math.radians(15.0)

    # postural sway only outside the transition, faded in/out at its edges
    env = np.zeros_like(t)
    pre = t < t0
    post = t > t1
    env[pre] = np.sin(np.pi * t[pre] / (2 * t0)) ** 2 if t0 > 0 else 0.0
    env[post] = np.sin(np.pi * (t[post] - t1) / (2 * (duration - t1))) ** 2
    amp = 0.3 + 10.0 * prof.speed_jitter
    body.pitch = body.pitch + env * amp * noise.value(tau) * 0.3
    body.head_pitch = 0.5 * body.pitch


_TEMPLATES = {
    ActionLabel.WALKING: _walking,
    ActionLabel.TURNING: _turning,
    ActionLabel.STANDING: _standing,
    ActionLabel.SITTING: _sitting,
    ActionLabel.LYING: _lying,
    ActionLabel.SIT_TO_STAND: _sit_to_stand,
    ActionLabel.STAND_TO_SIT: _sit_to_stand,
}


def generate_clip(request):
    """Render a request into a clip; identical requests give identical clips."""
    prof = request.profile
    n = max(2, int(round(request.duration_s * request.fps)))
    t = np.arange(n) / request.fps
    rng = np.random.default_rng(int(request.seed))
    body = _Body(n, request.body_scale, prof.stoop_angle_deg)
    _TEMPLATES[request.action](body, t, prof, rng, request.duration_s)
    if request.action == ActionLabel.STAND_TO_SIT:
        # same template played backwards
        rel = body.joints()[::-1]
    else:
        rel = body.joints()

    view = yaw_matrix(180.0 + request.viewpoint_deg)
    placement = np.array([0.0, -CAMERA_HEIGHT_M, SUBJECT_DEPTH_M])
    positions = rel @ view.T + placement
    metadata = SubjectMetadata(
        condition=prof.condition,
        moca_score=request.moca_score,
        subject_id=request.subject_id,
    )
    return SkeletonClip(
        positions,
        fps=request.fps,
        metadata=metadata,
        action=request.action,
        viewpoint_deg=request.viewpoint_deg,
        provenance="synthetic",
    )
