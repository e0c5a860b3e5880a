"""Metric-driven profile fitting: losses, box-constrained Nelder-Mead, curriculum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ..metrics import MetricProfile, metric_profile
from ..skeleton import ActionLabel, ValidationError
from .kinematics import GenerationRequest, generate_clip
from .profiles import BOUNDS, DEFAULT_ALPHA, DEFAULT_CURRICULUM, ConditionProfile, default_profile

__all__ = [
    "MetricLoss",
    "metric_loss",
    "stage3_loss",
    "reconstruction_loss",
    "mean_profile",
    "nelder_mead",
    "fit_profile",
    "curriculum_fit",
    "ProfileFitter",
    "ACTION_PARAMETERS",
]

# parameters each template actually reads; the rest are held fixed while fitting
ACTION_PARAMETERS = {
    ActionLabel.WALKING: (
        "gait_cadence_hz",
        "stride_length_m",
        "walk_speed_mps",
        "stoop_angle_deg",
        "arm_swing_amp_deg",
        "speed_jitter",
    ),
    ActionLabel.TURNING: ("turn_rate_dps", "stoop_angle_deg", "arm_swing_amp_deg", "speed_jitter"),
    ActionLabel.STANDING: ("stoop_angle_deg", "speed_jitter"),
    ActionLabel.SITTING: ("stoop_angle_deg", "speed_jitter"),
    ActionLabel.LYING: ("stoop_angle_deg", "speed_jitter"),
    ActionLabel.SIT_TO_STAND: ("stoop_angle_deg", "standup_oscillation_amp_m", "speed_jitter"),
    ActionLabel.STAND_TO_SIT: ("stoop_angle_deg", "standup_oscillation_amp_m", "speed_jitter"),
}


@dataclass(frozen=True)
class MetricLoss:
    value: float
    per_joint_terms: tuple


def metric_loss(real, synthetic):
    """Mean over key joints of the squared distance between metric vectors."""
    if not isinstance(real, MetricProfile) or not isinstance(synthetic, MetricProfile):
        raise ValidationError("metric_loss expects two MetricProfile values")
    if real.layout != synthetic.layout:
        raise ValidationError("metric profiles have different joint layouts")
    terms = tuple(float(np.sum((a - b) ** 2)) for a, b in zip(real.vectors, synthetic.vectors))
    return MetricLoss(sum(terms) / len(terms), terms)


def stage3_loss(gen_loss, metric, alpha=DEFAULT_ALPHA):
    value = metric.value if isinstance(metric, MetricLoss) else float(metric)
    if gen_loss < 0 or value < 0 or alpha < 0:
        raise ValidationError("stage-3 loss inputs must be non-negative")
    return gen_loss + alpha * value


def reconstruction_loss(reference, clip):
    """Mean squared joint-position error; the shorter clip sets the length."""
    n = min(reference.n_frames, clip.n_frames)
    diff = reference.positions[:n] - clip.positions[:n]
    return float(np.mean(np.sum(diff**2, axis=-1)))


def mean_profile(profiles):
    profiles = list(profiles)
    if not profiles:
        raise ValidationError("no profiles to average")
    layout = profiles[0].layout
    if any(p.layout != layout for p in profiles):
        raise ValidationError("metric profiles have different joint layouts")
    vectors = tuple(np.mean([p.vectors[i] for p in profiles], axis=0) for i in range(len(layout)))
    return MetricProfile(profiles[0].joints, vectors)


class _Budget(Exception):
    pass


def nelder_mead(fun, x0, budget, step=0.1, tol=0.0, xtol=1e-7, stall=None):
    """Minimize ``fun`` over the unit box with a clamped Nelder-Mead simplex.

    Coefficients: reflection 1, expansion 2, contraction 0.5, shrink 0.5.
    The simplex restarts around the incumbent when it collapses below
    ``xtol`` or when ``stall`` evaluations pass without improvement (default
    ``30 * (n + 1)``); clamping can flatten a simplex against a face of the
    box, and a fresh simplex is the cheap way out. Restarts alternate between
    ``3 * step`` and ``step``. An evaluation counts as progress when it beats
    the incumbent by more than 1e-4 relative. Returns ``(x_best, f_best,
    trace)`` where ``trace`` holds the best-so-far value after every
    evaluation.
    """
    x0 = np.clip(np.asarray(x0, dtype=float), 0.0, 1.0)
    n = x0.size
    trace = []
    best = [x0.copy(), np.inf]
    stall = stall or 30 * (n + 1)
    last_gain = [0]

    def f(x):
        if len(trace) >= budget:
            raise _Budget
        x = np.clip(x, 0.0, 1.0)
        v = float(fun(x))
        if v < best[1]:
            if v < best[1] - 1e-4 * abs(best[1]):
                last_gain[0] = len(trace)
            best[0], best[1] = x.copy(), v
        trace.append(best[1])
        if best[1] <= tol:
            raise _Budget
        return v

    def simplex_around(x, h=step):
        pts = [x.copy()]
        for i in range(n):
            y = x.copy()
            y[i] = y[i] + h if y[i] + h <= 1.0 else y[i] - h
            pts.append(y)
        return pts

    try:
        pts = simplex_around(x0)
        vals = [f(p) for p in pts]
        restarts = 0
        while True:
            order = np.argsort(vals, kind="stable")
            pts = [pts[i] for i in order]
            vals = [vals[i] for i in order]
            collapsed = max(np.max(np.abs(p - pts[0])) for p in pts[1:]) < xtol
            if collapsed or len(trace) - last_gain[0] >= stall:
                restarts += 1
                last_gain[0] = len(trace)
                pts = simplex_around(pts[0], step * (3.0 if restarts % 2 else 1.0))
                vals = [vals[0]] + [f(p) for p in pts[1:]]
                continue
            c = np.mean(pts[:-1], axis=0)
            xr = np.clip(c + (c - pts[-1]), 0.0, 1.0)
            fr = f(xr)
            if fr < vals[0]:
                xe = np.clip(c + 2.0 * (c - pts[-1]), 0.0, 1.0)
                fe = f(xe)
                pts[-1], vals[-1] = (xe, fe) if fe < fr else (xr, fr)
            elif fr < vals[-2]:
                pts[-1], vals[-1] = xr, fr
            else:
                if fr < vals[-1]:
                    xc = c + 0.5 * (xr - c)
                    fc = f(xc)
                    accept = fc <= fr
                else:
                    xc = c + 0.5 * (pts[-1] - c)
                    fc = f(xc)
                    accept = fc < vals[-1]
                if accept:
                    pts[-1], vals[-1] = xc, fc
                else:
                    for i in range(1, n + 1):
                        pts[i] = pts[0] + 0.5 * (pts[i] - pts[0])
                        vals[i] = f(pts[i])
    except _Budget:
        pass
    return best[0], best[1], trace


def _to_unit(profile, names):
    lo = np.array([BOUNDS[n][0] for n in names])
    hi = np.array([BOUNDS[n][1] for n in names])
    return (profile.to_vector(names) - lo) / (hi - lo), lo, hi


def fit_profile(
    target,
    action,
    init,
    budget=2000,
    *,
    alpha=DEFAULT_ALPHA,
    reference=None,
    duration_s=3.0,
    fps=30.0,
    seed=0,
    parameters=None,
    step=0.1,
    tol=0.0,
):
    """Fit profile parameters so generated clips reproduce ``target`` metrics.

    The objective is ``stage3_loss(L_gen, L_metric, alpha)`` where ``L_gen``
    is the reconstruction error against ``reference`` (0 without one).
    Only the parameters the action's template reads are searched.

    Returns ``(profile, trace)``; ``trace[k]`` is the best objective after
    ``k + 1`` evaluations.
    """
    action = ActionLabel(action)
    if budget < 1:
        raise ValidationError("budget must be >= 1")
    if not isinstance(init, ConditionProfile):
        raise ValidationError("init must be a ConditionProfile")
    names = tuple(parameters or ACTION_PARAMETERS[action])
    unknown = set(names) - set(BOUNDS)
    if unknown:
        raise ValidationError(f"unknown parameters {sorted(unknown)}")
    x0, lo, hi = _to_unit(init, names)

    def objective(x):
        prof = init.with_vector(lo + x * (hi - lo), names)
        clip = generate_clip(GenerationRequest(action, prof, duration_s=duration_s, fps=fps, seed=seed))
        gen = reconstruction_loss(reference, clip) if reference is not None else 0.0
        return stage3_loss(gen, metric_loss(target, metric_profile(clip)), alpha)

    x, _, trace = nelder_mead(objective, x0, budget, step=step, tol=tol)
    return init.with_vector(lo + x * (hi - lo), names), trace


def curriculum_fit(targets, order=DEFAULT_CURRICULUM, init=None, budget=500, **kwargs):
    """Fit actions from simple to complex, warm-starting each from the last.

    Returns ``{action: (profile, trace)}`` in curriculum order.
    """
    targets = {ActionLabel(k): v for k, v in targets.items()}
    order = [ActionLabel(a) for a in order]
    missing = [a.value for a in order if a not in targets]
    if missing:
        raise ValidationError(f"no target for curriculum actions: {missing}")
    current = init if init is not None else default_profile("NC")
    fitted = {}
    for action in order:
        current, trace = fit_profile(targets[action], action, current, budget, **kwargs)
        fitted[action] = (current, trace)
    return fitted


class ProfileFitter(BaseEstimator):
    """Estimator wrapper around :func:`fit_profile`.

    ``fit`` takes a list of reference clips of one action; their averaged
    metric profile becomes the target.

    Parameters
    ----------
    action : str
        Action whose template is fitted.
    condition : str, default="NC"
        Condition of the starting profile when ``init`` is None.
    init : ConditionProfile or None
        Explicit starting profile.
    budget : int, default=2000
        Maximum number of objective evaluations.
    alpha : float, default=0.5
        Weight of the metric term in the stage-3 objective.
    duration_s, fps, seed
        Generation settings used inside the objective.
    """

    def __init__(self, action="walking", condition="NC", init=None, budget=2000, alpha=DEFAULT_ALPHA,
                 duration_s=3.0, fps=30.0, seed=0):
        self.action = action
        self.condition = condition
        self.init = init
        self.budget = budget
        self.alpha = alpha
        self.duration_s = duration_s
        self.fps = fps
        self.seed = seed

    def fit(self, X, y=None):
        clips = list(X)
        if not clips:
            raise ValidationError("no clips to fit")
        self.target_ = mean_profile(metric_profile(c) for c in clips)
        init = self.init if self.init is not None else default_profile(self.condition)
        self.profile_, self.loss_trace_ = fit_profile(
            self.target_, self.action, init, self.budget, alpha=self.alpha,
            duration_s=self.duration_s, fps=self.fps, seed=self.seed,
        )
        self.best_loss_ = self.loss_trace_[-1]
        return self

    def sample(self, n=1, seed=0, viewpoint_deg=0.0):
        """Generate ``n`` clips from the fitted profile."""
        if not hasattr(self, "profile_"):
            raise ValidationError("ProfileFitter is not fitted yet")
        return [
            generate_clip(GenerationRequest(self.action, self.profile_, duration_s=self.duration_s,
                                            fps=self.fps, viewpoint_deg=viewpoint_deg, seed=seed + i))
            for i in range(n)
        ]
