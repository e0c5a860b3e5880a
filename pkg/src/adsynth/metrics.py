"""Motion metrics: joint angles and speeds, ROM, DTW alignment and comparison reports."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .skeleton import KEY_JOINTS, REPORT_JOINTS, JointId, SkeletonError
from .stats import StatisticsError, pearson_correlation, welch_t_test

__all__ = [
    "MetricsError",
    "DegenerateGeometryError",
    "InsufficientFramesError",
    "ReportError",
    "FeatureSeries",
    "MetricProfile",
    "ComparisonReport",
    "ANGLE_FEATURES",
    "SPEED_FEATURES",
    "FEATURES",
    "ANGLE_JOINTS",
    "joint_angle",
    "angle_series",
    "speed_series",
    "feature_series",
    "range_of_motion",
    "dtw_align",
    "warped_pair",
    "pearson_correlation",
    "welch_t_test",
    "metric_profile",
    "compare_report",
    "histogram",
    "trunk_pitch_series",
    "vertical_velocity_reversals",
    "resample",
    "correlation_matrix",
]

EPS = 1e-9
DEFAULT_BINS = 30
CURVE_LENGTH = 100

J = JointId


class MetricsError(SkeletonError):
    pass


class DegenerateGeometryError(MetricsError):
    def __init__(self, message, frame=None):
        self.frame = frame
        if frame is not None:
            message = f"frame {frame}: {message}"
        super().__init__(message)


class InsufficientFramesError(MetricsError):
    pass


class ReportError(MetricsError):
    def __init__(self, message, feature=None):
        self.feature = feature
        if feature is not None:
            message = f"{feature}: {message}"
        super().__init__(message)


# feature -> (endpoint a, vertex b, endpoint c)
ANGLE_FEATURES = {
    "left_hip_angle": (J.SHOULDER_LEFT, J.HIP_LEFT, J.KNEE_LEFT),
    "right_hip_angle": (J.SHOULDER_RIGHT, J.HIP_RIGHT, J.KNEE_RIGHT),
    "left_knee_angle": (J.HIP_LEFT, J.KNEE_LEFT, J.ANKLE_LEFT),
    "right_knee_angle": (J.HIP_RIGHT, J.KNEE_RIGHT, J.ANKLE_RIGHT),
    "left_shoulder_angle": (J.NECK, J.SHOULDER_LEFT, J.ELBOW_LEFT),
    "right_shoulder_angle": (J.NECK, J.SHOULDER_RIGHT, J.ELBOW_RIGHT),
    "neck_angle": (J.HEAD, J.NECK, J.SPINE_MID),
    "back_angle": (J.NECK, J.SPINE_MID, J.SPINE_BASE),
}

# Table-1 speed rows, in table order.
SPEED_FEATURES = {
    "neck_speed": J.NECK,
    "left_ankle_speed": J.ANKLE_LEFT,
    "right_ankle_speed": J.ANKLE_RIGHT,
    "left_wrist_speed": J.WRIST_LEFT,
    "right_wrist_speed": J.WRIST_RIGHT,
    "left_knee_speed": J.KNEE_LEFT,
    "right_knee_speed": J.KNEE_RIGHT,
    "left_hip_speed": J.HIP_LEFT,
    "right_hip_speed": J.HIP_RIGHT,
}

FEATURES = tuple(ANGLE_FEATURES) + tuple(SPEED_FEATURES)

# key joint -> angle feature whose vertex it is
ANGLE_JOINTS = {
    name: feat
    for name, joint in KEY_JOINTS.items()
    for feat, (_, vertex, _) in ANGLE_FEATURES.items()
    if vertex == joint
}


@dataclass(frozen=True)
class FeatureSeries:
    name: str
    values: np.ndarray
    units: str
    fps: float

    def __len__(self):
        return len(self.values)


def joint_angle(a, b, c):
    """Angle in degrees at vertex ``b`` between ``a - b`` and ``c - b``."""
    u = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    v = np.asarray(c, dtype=float) - np.asarray(b, dtype=float)
    if np.linalg.norm(u) <= EPS or np.linalg.norm(v) <= EPS:
        raise DegenerateGeometryError("segment shorter than 1e-9 m")
    return math.degrees(math.atan2(np.linalg.norm(np.cross(u, v)), float(u @ v)))


def _angles(a, b, c):
    # rowwise version of joint_angle over (n, 3) arrays
    u = a - b
    v = c - b
    nu = np.linalg.norm(u, axis=1)
    nv = np.linalg.norm(v, axis=1)
    bad = np.flatnonzero((nu <= EPS) | (nv <= EPS))
    if bad.size:
        raise DegenerateGeometryError("segment shorter than 1e-9 m", frame=int(bad[0]))
    cross = np.linalg.norm(np.cross(u, v), axis=1)
    dot = np.einsum("ij,ij->i", u, v)
    return np.degrees(np.arctan2(cross, dot))


def angle_series(clip, feature):
    try:
        a, b, c = ANGLE_FEATURES[feature]
    except KeyError:
        raise MetricsError(f"unknown angle feature {feature!r}") from None
    p = clip.positions
    values = _angles(p[:, a], p[:, b], p[:, c])
    return FeatureSeries(feature, values, "deg", clip.fps)


def _joint_index(joint):
    if isinstance(joint, str):
        key = joint.removesuffix("_speed")
        if key in REPORT_JOINTS:
            return REPORT_JOINTS[key]
        try:
            return J[key.upper()]
        except KeyError:
            raise MetricsError(f"unknown joint {joint!r}") from None
    return J(joint)


def speed_series(clip, joint):
    """Frame-to-frame joint speed in m/s; one value per consecutive frame pair."""
    if clip.n_frames < 2:
        raise InsufficientFramesError("speed needs at least 2 frames")
    idx = _joint_index(joint)
    steps = np.diff(clip.positions[:, idx], axis=0)
    name = f"{J(idx).name.lower()}_speed"
    for feat, j in SPEED_FEATURES.items():
        if j == idx:
            name = feat
    return FeatureSeries(name, np.linalg.norm(steps, axis=1) * clip.fps, "m/s", clip.fps)


def feature_series(clip, feature):
    if feature in ANGLE_FEATURES:
        return angle_series(clip, feature)
    if feature in SPEED_FEATURES:
        return speed_series(clip, SPEED_FEATURES[feature])
    raise MetricsError(f"unknown feature {feature!r}")


def _values(series):
    return np.asarray(getattr(series, "values", series), dtype=float)


def range_of_motion(series):
    v = _values(series)
    if v.size == 0:
        raise MetricsError("range of motion of an empty series")
    return float(v.max() - v.min())


def trunk_pitch_series(clip):
    """Forward trunk inclination in degrees: spine-base->neck chord vs. vertical."""
    chord = clip.positions[:, J.NECK] - clip.positions[:, J.SPINE_BASE]
    up = np.broadcast_to([0.0, 1.0, 0.0], chord.shape)
    return _angles(chord, np.zeros_like(chord), up)


def vertical_velocity_reversals(clip, joint=J.NECK, start_s=0.0, end_s=None):
    """Count sign changes of a joint's vertical velocity inside a time window.

    Frames with ``start_s <= t <= end_s`` (``t = index / fps``) are used;
    zero-velocity steps are skipped rather than counted as a sign.
    """
    t = np.arange(clip.n_frames) / clip.fps
    end_s = t[-1] if end_s is None else end_s
    sel = (t >= start_s - 1e-12) & (t <= end_s + 1e-12)
    y = clip.positions[sel, _joint_index(joint), 1]
    signs = np.sign(np.diff(y))
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


# --------------------------------------------------------------------------
# DTW


def dtw_align(a, b):
    """Classic DTW with absolute-difference cost and steps (1,0), (0,1), (1,1).

    Returns ``(distance, path)`` where ``path`` is a list of index pairs from
    ``(0, 0)`` to ``(len(a) - 1, len(b) - 1)``.
    """
    a = _values(a).ravel()
    b = _values(b).ravel()
    n, m = a.size, b.size
    if n == 0 or m == 0:
        raise MetricsError("DTW of an empty series")
    cost = np.abs(a[:, None] - b[None, :])
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        row = cost[i - 1]
        prev = acc[i - 1]
        cur = acc[i]
        for j in range(1, m + 1):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = row[j - 1] + best

    path = [(n - 1, m - 1)]
    i, j = n, m
    while (i, j) != (1, 1):
        # tie order: diagonal, then advance in a, then advance in b
        options = ((acc[i - 1, j - 1], i - 1, j - 1), (acc[i - 1, j], i - 1, j), (acc[i, j - 1], i, j - 1))
        _, i, j = min(options, key=lambda o: o[0])
        path.append((i - 1, j - 1))
    path.reverse()
    return float(acc[n, m]), path


def warped_pair(a, b, path):
    a = _values(a).ravel()
    b = _values(b).ravel()
    idx = np.asarray(path, dtype=int).reshape(-1, 2)
    if idx.size == 0:
        raise MetricsError("empty warping path")
    if idx[:, 0].min() < 0 or idx[:, 0].max() >= a.size or idx[:, 1].min() < 0 or idx[:, 1].max() >= b.size:
        raise MetricsError("warping path index out of range")
    return a[idx[:, 0]], b[idx[:, 1]]


def resample(values, length=CURVE_LENGTH):
    """Linear resampling onto ``length`` points over normalized time."""
    v = _values(values).ravel()
    if v.size == 1:
        return np.full(length, v[0])
    return np.interp(np.linspace(0.0, 1.0, length), np.linspace(0.0, 1.0, v.size), v)


# --------------------------------------------------------------------------
# profiles and reports


@dataclass(frozen=True)
class MetricProfile:
    """Per-key-joint summary vectors.

    Angle-bearing joints carry ``(mean_speed, mean_angle, angle_rom)``;
    ankles and elbows carry ``(mean_speed, speed_rom)``.
    """

    joints: tuple
    vectors: tuple

    @property
    def n_joints(self):
        return len(self.joints)

    @property
    def layout(self):
        return tuple((j, len(v)) for j, v in zip(self.joints, self.vectors))

    def as_array(self):
        return np.concatenate(self.vectors)

    def __getitem__(self, joint):
        return self.vectors[self.joints.index(joint)]

    def __eq__(self, other):
        if not isinstance(other, MetricProfile):
            return NotImplemented
        return self.layout == other.layout and np.array_equal(self.as_array(), other.as_array())

    __hash__ = None


def metric_profile(clip):
    if clip.n_frames < 2:
        raise InsufficientFramesError("metric profile needs at least 2 frames")
    joints = []
    vectors = []
    for name, joint in KEY_JOINTS.items():
        speed = speed_series(clip, joint).values
        if name in ANGLE_JOINTS:
            angle = angle_series(clip, ANGLE_JOINTS[name]).values
            vec = np.array([speed.mean(), angle.mean(), range_of_motion(angle)])
        else:
            vec = np.array([speed.mean(), range_of_motion(speed)])
        vec.setflags(write=False)
        joints.append(name)
        vectors.append(vec)
    return MetricProfile(tuple(joints), tuple(vectors))


@dataclass(frozen=True)
class ReportRow:
    feature: str
    mean_ratio: float
    rom_ratio: float
    correlation: float
    p_value: float


@dataclass
class ComparisonReport:
    rows: dict
    action: str = ""
    # plot sources: feature -> arrays
    real_curves: dict = field(default_factory=dict, repr=False)
    synthetic_curves: dict = field(default_factory=dict, repr=False)
    warped: dict = field(default_factory=dict, repr=False)
    pools: dict = field(default_factory=dict, repr=False)

    def __getitem__(self, feature):
        return self.rows[feature]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "mean_ratio", "rom_ratio", "correlation", "p_value"])
        for r in self.rows.values():
            w.writerow([r.feature, repr(r.mean_ratio), repr(r.rom_ratio), repr(r.correlation), repr(r.p_value)])
        return buf.getvalue()


def _ratio(num, den, feature, what):
    if den == 0.0:
        raise ReportError(f"zero denominator in {what}", feature)
    return num / den


def _safe_correlation(x, y, feature):
    try:
        return pearson_correlation(x, y)
    except StatisticsError:
        if np.array_equal(x, y):
            return 1.0
        raise ReportError("correlation undefined for constant curves", feature) from None


def _safe_welch(x, y, feature):
    try:
        return welch_t_test(x, y)[1]
    except StatisticsError:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.size >= 2 and y.size >= 2:
            # both samples constant: identical means carry no evidence of a difference
            return 1.0 if x.mean() == y.mean() else 0.0
        raise ReportError("t-test needs at least 2 values per group", feature) from None


def compare_report(real, synthetic, features=FEATURES, curve_length=CURVE_LENGTH):
    """Table-1 style comparison of two clip sets of the same action.

    Mean ratio pools every frame value; ROM ratio averages per-clip ROM;
    correlation is Pearson on the DTW-warped mean curves; the p-value is a
    Welch test on per-clip means (pooled frame values if a set has a single
    clip).
    """
    real = list(real)
    synthetic = list(synthetic)
    if not real or not synthetic:
        raise ReportError("both clip sets must be non-empty")
    actions = {c.action for c in real + synthetic}
    if len(actions) != 1:
        raise ReportError(f"clip sets mix actions: {sorted(a.value for a in actions)}")

    report = ComparisonReport(rows={}, action=next(iter(actions)).value)
    for feat in features:
        rs = [feature_series(c, feat).values for c in real]
        ss = [feature_series(c, feat).values for c in synthetic]
        r_pool = np.concatenate(rs)
        s_pool = np.concatenate(ss)
        mean_ratio = _ratio(s_pool.mean(), r_pool.mean(), feat, "mean ratio")
        r_rom = np.mean([range_of_motion(v) for v in rs])
        s_rom = np.mean([range_of_motion(v) for v in ss])
        rom_ratio = _ratio(s_rom, r_rom, feat, "ROM ratio")

        r_curve = np.mean([resample(v, curve_length) for v in rs], axis=0)
        s_curve = np.mean([resample(v, curve_length) for v in ss], axis=0)
        _, path = dtw_align(r_curve, s_curve)
        wr, ws = warped_pair(r_curve, s_curve, path)
        corr = _safe_correlation(wr, ws, feat)

        if len(rs) >= 2 and len(ss) >= 2:
            p = _safe_welch([v.mean() for v in ss], [v.mean() for v in rs], feat)
        else:
            p = _safe_welch(s_pool, r_pool, feat)

        report.rows[feat] = ReportRow(feat, float(mean_ratio), float(rom_ratio), float(corr), float(p))
        report.real_curves[feat] = r_curve
        report.synthetic_curves[feat] = s_curve
        report.warped[feat] = (wr, ws)
        report.pools[feat] = (r_pool, s_pool)
    return report


def correlation_matrix(report):
    """Pearson matrix over every real (``_R``) and synthetic (``_S``) mean curve.

    Returns ``(labels, matrix)``; constant curves get zero off-diagonal entries.
    """
    labels = []
    curves = []
    for feat in report.rows:
        labels += [f"{feat}_R", f"{feat}_S"]
        curves += [report.real_curves[feat], report.synthetic_curves[feat]]
    X = np.vstack(curves)
    X = X - X.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(X, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    Xn = X / safe[:, None]
    mat = np.clip(Xn @ Xn.T, -1.0, 1.0)
    mat = (mat + mat.T) / 2
    np.fill_diagonal(mat, 1.0)
    return labels, mat


def histogram(pool, bins=DEFAULT_BINS):
    """Equal-width histogram over ``[min, max]`` as ``(left_edge, count)`` pairs."""
    v = _values(pool).ravel()
    if v.size == 0:
        raise MetricsError("histogram of an empty pool")
    if bins < 1:
        raise MetricsError("bins must be >= 1")
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        counts = np.zeros(bins, dtype=int)
        counts[0] = v.size
        return [(lo, int(c)) for c in counts]
    width = (hi - lo) / bins
    idx = np.minimum(((v - lo) / (hi - lo) * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return [(lo + k * width, int(c)) for k, c in enumerate(counts)]

