import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adsynth.metrics import (
    ANGLE_FEATURES,
    SPEED_FEATURES,
    MetricProfile,
    feature_series,
    metric_profile,
    trunk_pitch_series,
    vertical_velocity_reversals,
)
from adsynth.skeleton import ActionLabel, BONES, Condition, ValidationError
from adsynth.synthesizer import (
    BOUNDS,
    PARAMETERS,
    ConditionProfile,
    GenerationRequest,
    ProfileFitter,
    curriculum_fit,
    default_profile,
    fit_profile,
    generate_clip,
    mean_profile,
    metric_loss,
    nelder_mead,
    reconstruction_loss,
    stage3_loss,
    transition_window,
)
from adsynth.synthesizer.profiles import DEFAULT_ALPHA, DEFAULT_CURRICULUM, load_config


def _signature(condition, seed=0, viewpoint=0.0):
    req = GenerationRequest("sit_to_stand", default_profile(condition), seed=seed, viewpoint_deg=viewpoint)
    clip = generate_clip(req)
    start, end = transition_window(req)
    return vertical_velocity_reversals(clip, start_s=start, end_s=end), trunk_pitch_series(clip)[-1]


# profiles


def test_default_rows():
    nc, ad = default_profile("NC"), default_profile("AD")
    assert nc.standup_oscillation_count == 0 and nc.stoop_angle_deg == 5
    assert ad.standup_oscillation_count == 3 and ad.stoop_angle_deg == 25
    assert default_profile("AD", 9) == ad


def test_alpha_and_curriculum_config():
    assert DEFAULT_ALPHA == 0.5 and load_config()["alpha"] == 0.5
    assert DEFAULT_CURRICULUM == ("sitting", "standing", "walking", "turning", "sit_to_stand")


@pytest.mark.parametrize("cond", ["AD", "MCI", "NC"])
def test_moca_monotonicity(cond):
    speeds = [default_profile(cond, m).walk_speed_mps for m in range(31)]
    stoops = [default_profile(cond, m).stoop_angle_deg for m in range(31)]
    assert all(b >= a for a, b in zip(speeds, speeds[1:]))
    assert all(b <= a for a, b in zip(stoops, stoops[1:]))
    assert default_profile(cond, 30).walk_speed_mps > default_profile(cond, 10).walk_speed_mps


@pytest.mark.parametrize("moca", [31, -1, 2.5, True])
def test_moca_validation(moca):
    with pytest.raises(ValidationError):
        default_profile("AD", moca)


def test_profile_bounds_and_round_trip():
    prof = default_profile("MCI")
    assert ConditionProfile.from_dict(prof.to_dict()) == prof
    with pytest.raises(ValidationError):
        ConditionProfile(**{**prof.to_dict(), "stoop_angle_deg": 90.0})
    with pytest.raises(ValidationError):
        ConditionProfile(**{**prof.to_dict(), "standup_oscillation_count": 1.5})
    clamped = prof.with_vector([1e9] * len(PARAMETERS))
    for name in PARAMETERS:
        assert getattr(clamped, name) == BOUNDS[name][1]


# generation


@pytest.mark.parametrize(
    "kwargs",
    [dict(duration_s=0), dict(fps=-1), dict(viewpoint_deg=360), dict(body_scale=2.0), dict(seed=-1),
     dict(action="flying"), dict(duration_s=0.01)],
)
def test_request_validation(kwargs):
    base = dict(action="walking", profile=default_profile("NC"))
    with pytest.raises(ValidationError):
        GenerationRequest(**{**base, **kwargs})


def test_generation_is_deterministic():
    req = GenerationRequest("walking", default_profile("AD"), seed=42, viewpoint_deg=120.0)
    a, b = generate_clip(req), generate_clip(req)
    assert a == b
    assert np.array_equal(a.positions, b.positions)
    other = generate_clip(GenerationRequest("walking", default_profile("AD"), seed=43, viewpoint_deg=120.0))
    assert not np.array_equal(a.positions, other.positions)


def test_generated_metadata():
    req = GenerationRequest("turning", default_profile("MCI", 20), seed=1, viewpoint_deg=45.0, moca_score=20,
                            subject_id="s7", duration_s=2.0, fps=20.0)
    clip = generate_clip(req)
    assert clip.metadata.condition is Condition.MCI and clip.metadata.moca_score == 20
    assert clip.metadata.subject_id == "s7" and clip.viewpoint_deg == 45.0
    assert clip.n_frames == 40 and clip.fps == 20.0 and clip.provenance == "synthetic"


@pytest.mark.parametrize("action", [a.value for a in ActionLabel])
@pytest.mark.parametrize("cond", ["AD", "MCI", "NC"])
def test_all_actions_are_valid_for_metrics(action, cond):
    clip = generate_clip(GenerationRequest(action, default_profile(cond), seed=3, viewpoint_deg=200.0))
    for feat in list(ANGLE_FEATURES) + list(SPEED_FEATURES):
        assert np.all(np.isfinite(feature_series(clip, feat).values))
    for i, j in BONES:
        assert np.all(np.linalg.norm(clip.positions[:, i] - clip.positions[:, j], axis=-1) > 1e-3)


def test_sit_to_stand_signatures():
    assert _signature("AD") == (3, pytest.approx(25.0, abs=1.0))
    count, pitch = _signature("NC")
    assert count == 0 and pitch <= 6.0
    count, pitch = _signature("MCI")
    assert count == 1 and pitch == pytest.approx(12.0, abs=1.0)


@pytest.mark.parametrize("seed", range(5))
def test_sit_to_stand_signatures_hold_across_seeds(seed):
    ad = _signature("AD", seed, viewpoint=72.0 * seed)
    nc = _signature("NC", seed, viewpoint=72.0 * seed)
    assert ad[0] >= 2 and ad[1] >= 15
    assert nc[0] == 0 and nc[1] <= 6


def test_stand_to_sit_reverses_sit_to_stand():
    up = generate_clip(GenerationRequest("sit_to_stand", default_profile("AD"), seed=5))
    down = generate_clip(GenerationRequest("stand_to_sit", default_profile("AD"), seed=5))
    np.testing.assert_array_equal(down.positions, up.positions[::-1])


def test_walking_parameters_show_in_metrics():
    slow = generate_clip(GenerationRequest("walking", default_profile("AD"), seed=1))
    fast = generate_clip(GenerationRequest("walking", default_profile("NC"), seed=1))
    assert feature_series(fast, "left_ankle_speed").values.mean() > feature_series(slow, "left_ankle_speed").values.mean()


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([a.value for a in ActionLabel]), st.floats(0, 359.9), st.floats(0, 359.9))
def test_viewpoint_leaves_features_unchanged(action, v1, v2):
    prof = default_profile("MCI")
    a = generate_clip(GenerationRequest(action, prof, seed=9, viewpoint_deg=v1))
    b = generate_clip(GenerationRequest(action, prof, seed=9, viewpoint_deg=v2))
    for feat in list(ANGLE_FEATURES) + list(SPEED_FEATURES):
        np.testing.assert_allclose(feature_series(a, feat).values, feature_series(b, feat).values, atol=1e-9)


# losses


def _profile(vectors):
    return MetricProfile(tuple(f"j{i}" for i in range(len(vectors))), tuple(np.array(v, float) for v in vectors))


def test_metric_loss_examples():
    a = _profile([[0, 0, 0], [0, 0]])
    b = _profile([[1, 0, 0], [0, 2]])
    loss = metric_loss(a, b)
    assert loss.value == 2.5 and loss.per_joint_terms == (1.0, 4.0)
    assert metric_loss(a, a).value == 0
    with pytest.raises(ValidationError):
        metric_loss(a, _profile([[0, 0], [0, 0]]))
    with pytest.raises(ValidationError):
        metric_loss(a, "not a profile")


def test_metric_loss_oracle_and_symmetry(rng, clip_set):
    p = [metric_profile(c) for c in clip_set[:4]]
    for x, y in zip(p, p[1:]):
        oracle = np.mean([np.sum((u - v) ** 2) for u, v in zip(x.vectors, y.vectors)])
        assert metric_loss(x, y).value == pytest.approx(oracle, rel=1e-12)
        assert metric_loss(x, y).value == metric_loss(y, x).value > 0


def test_stage3_loss():
    assert stage3_loss(0.4, 0.2, 0.5) == pytest.approx(0.5)
    assert stage3_loss(0.4, 0.2, 0.0) == 0.4
    assert stage3_loss(0.4, 0.2) == pytest.approx(0.5)
    for args in [(-0.1, 0.2), (0.1, -0.2), (0.1, 0.2, -1.0)]:
        with pytest.raises(ValidationError):
            stage3_loss(*args)


def test_reconstruction_loss(walking_clip):
    assert reconstruction_loss(walking_clip, walking_clip) == 0
    shifted = walking_clip.translated([0.1, 0, 0])
    assert reconstruction_loss(walking_clip, shifted) == pytest.approx(0.01)


def test_mean_profile(clip_set):
    p = [metric_profile(c) for c in clip_set[:3]]
    m = mean_profile(p)
    np.testing.assert_allclose(m.as_array(), np.mean([x.as_array() for x in p], axis=0))
    with pytest.raises(ValidationError):
        mean_profile([])


# optimizer and fitting


def test_nelder_mead_quadratic():
    target = np.array([0.3, 0.7, 0.55])
    x, f, trace = nelder_mead(lambda v: float(np.sum((v - target) ** 2)), [0.9, 0.1, 0.2], budget=600)
    np.testing.assert_allclose(x, target, atol=1e-4)
    assert len(trace) <= 600 and f == trace[-1]
    assert all(b <= a for a, b in zip(trace, trace[1:]))


def test_nelder_mead_respects_box():
    seen = []

    def f(v):
        seen.append(v.copy())
        return float(np.sum((v - 2.0) ** 2))  # optimum outside the box

    x, _, _ = nelder_mead(f, [0.5, 0.5], budget=200)
    assert all(np.all((0 <= v) & (v <= 1)) for v in seen)
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-3)


def test_fit_budget_one_returns_init():
    target = metric_profile(generate_clip(GenerationRequest("walking", default_profile("AD"))))
    init = default_profile("NC")
    prof, trace = fit_profile(target, "walking", init, budget=1)
    assert prof == init and len(trace) == 1
    clip = generate_clip(GenerationRequest("walking", init))
    assert trace[0] == pytest.approx(0.5 * metric_loss(target, metric_profile(clip)).value)


def test_fit_errors():
    target = metric_profile(generate_clip(GenerationRequest("walking", default_profile("AD"))))
    with pytest.raises(ValidationError):
        fit_profile(target, "walking", default_profile("NC"), budget=0)
    with pytest.raises(ValidationError):
        fit_profile(target, "walking", "NC")
    with pytest.raises(ValidationError):
        fit_profile(target, "walking", default_profile("NC"), parameters=("wingspan",))


@pytest.mark.parametrize("action", ["turning", "sitting"])
def test_self_recovery_small(action):
    truth = default_profile("AD")
    target = metric_profile(generate_clip(GenerationRequest(action, truth)))
    init = truth.with_vector(truth.to_vector() * 0.85)
    prof, trace = fit_profile(target, action, init, budget=400)
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    assert trace[-1] < 1e-2 * DEFAULT_ALPHA
    for name in PARAMETERS:
        lo, hi = BOUNDS[name]
        assert lo <= getattr(prof, name) <= hi


def test_curriculum_single_action_equals_fit_profile():
    target = metric_profile(generate_clip(GenerationRequest("standing", default_profile("MCI"))))
    init = default_profile("NC")
    fitted = curriculum_fit({"standing": target}, order=["standing"], init=init, budget=60)
    direct = fit_profile(target, "standing", init, budget=60)
    assert fitted[ActionLabel.STANDING][0] == direct[0]
    assert fitted[ActionLabel.STANDING][1] == direct[1]


def test_curriculum_missing_target():
    with pytest.raises(ValidationError):
        curriculum_fit({"sitting": None}, order=["sitting", "walking"])


def test_curriculum_warm_start_report():
    """Evaluations to reach a fixed loss, warm versus cold start (reported, not enforced)."""
    truth = default_profile("AD")
    targets = {a: metric_profile(generate_clip(GenerationRequest(a, truth))) for a in ("standing", "turning")}
    fitted = curriculum_fit(targets, order=["standing", "turning"], init=default_profile("NC"), budget=300)
    warm = fitted[ActionLabel.TURNING][1]
    _, cold = fit_profile(targets["turning"], "turning", default_profile("NC"), budget=300)
    level = max(warm[-1], cold[-1])

    def first_at(trace):
        return next(i + 1 for i, v in enumerate(trace) if v <= level)

    print(f"evaluations to loss {level:.3g}: warm {first_at(warm)}, cold {first_at(cold)}")
    assert first_at(warm) <= len(warm) and first_at(cold) <= len(cold)


def test_profile_fitter_estimator():
    truth = default_profile("MCI")
    clips = [generate_clip(GenerationRequest("standing", truth, seed=s)) for s in range(2)]
    est = ProfileFitter(action="standing", condition="NC", budget=80).fit(clips)
    assert est.best_loss_ == est.loss_trace_[-1]
    assert est.get_params()["budget"] == 80
    samples = est.sample(2, seed=4, viewpoint_deg=90.0)
    assert len(samples) == 2 and all(c.action is ActionLabel.STANDING for c in samples)
    with pytest.raises(ValidationError):
        ProfileFitter().sample()
