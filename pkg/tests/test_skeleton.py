import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from adsynth.skeleton import (
    BONES,
    KEY_JOINTS,
    REPORT_JOINTS,
    ActionLabel,
    Condition,
    JointId,
    ParseError,
    SkeletonClip,
    SubjectMetadata,
    ValidationError,
    dumps_clip,
    key_joint_positions,
    load_clip,
    loads_clip,
    parse_capture_skeleton,
    save_clip,
    yaw_matrix,
)
from helpers import capture_text, random_clip, reference_capture_parser


def test_joint_ids_are_25_stable_codes():
    assert len(JointId) == 25
    assert [int(j) for j in JointId] == list(range(25))
    assert JointId.SPINE_BASE == 0 and JointId.THUMB_RIGHT == 24


def test_bones_form_a_tree_over_all_joints():
    assert len(BONES) == 24
    touched = {int(j) for bone in BONES for j in bone}
    assert touched == set(range(25))


def test_key_joint_mapping():
    assert len(KEY_JOINTS) == 12
    assert KEY_JOINTS["back"] == JointId.SPINE_MID
    assert KEY_JOINTS["neck"] == JointId.NECK
    assert len(set(REPORT_JOINTS.values())) == len(REPORT_JOINTS) == 14


def test_key_joint_positions_single_displaced_hip():
    pos = np.zeros((1, 25, 3))
    pos[0, JointId.HIP_LEFT] = (0.1, 0.2, 0.3)
    names, kp = key_joint_positions(SkeletonClip(pos))
    moved = [n for n, p in zip(names, kp[0]) if np.any(p != 0)]
    assert moved == ["left_hip"]


def test_key_joint_positions_hand_read_values():
    pos = np.arange(75, dtype=float).reshape(1, 25, 3)
    names, kp = key_joint_positions(SkeletonClip(pos))
    table = dict(zip(names, kp[0]))
    np.testing.assert_array_equal(table["back"], [3, 4, 5])  # spine-mid is joint 1
    np.testing.assert_array_equal(table["neck"], [6, 7, 8])
    np.testing.assert_array_equal(table["right_knee"], [51, 52, 53])  # joint 17
    np.testing.assert_array_equal(table["left_wrist"], [18, 19, 20])  # joint 6


@pytest.mark.parametrize("field,value", [("moca_score", 31), ("moca_score", -1), ("zbi_score", 89), ("moca_score", 2.5)])
def test_metadata_ranges(field, value):
    with pytest.raises(ValidationError):
        SubjectMetadata(Condition.AD, **{field: value})


def test_metadata_unknown_condition():
    with pytest.raises(ValidationError):
        SubjectMetadata("XYZ")


def test_clip_validation():
    with pytest.raises(ValidationError):
        SkeletonClip(np.zeros((0, 25, 3)))
    with pytest.raises(ValidationError):
        SkeletonClip(np.zeros((3, 24, 3)))
    with pytest.raises(ValidationError):
        SkeletonClip(np.full((2, 25, 3), np.nan))
    with pytest.raises(ValidationError):
        SkeletonClip(np.zeros((2, 25, 3)), fps=0)
    with pytest.raises(ValidationError):
        SkeletonClip(np.zeros((2, 25, 3)), viewpoint_deg=360.0)
    with pytest.raises(ValidationError):
        SkeletonClip(np.zeros((2, 25, 3)), action="jumping")


def test_clip_positions_are_read_only():
    clip = SkeletonClip(np.zeros((2, 25, 3)))
    with pytest.raises(ValueError):
        clip.positions[0, 0, 0] = 1.0


def test_yaw_matrix_is_a_rotation():
    R = yaw_matrix(37.0)
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-15)
    assert np.isclose(np.linalg.det(R), 1.0)
    np.testing.assert_allclose(R @ [0, 1, 0], [0, 1, 0])


def test_rotated_yaw_keeps_pivot(rng):
    clip = random_clip(rng, 5)
    pivot = clip.positions[:, 0].mean(axis=0)
    rot = clip.rotated_yaw(90.0)
    np.testing.assert_allclose(rot.positions[:, 0].mean(axis=0), pivot, atol=1e-12)
    np.testing.assert_allclose(rot.positions[..., 1], clip.positions[..., 1])


# capture format


def test_parse_origin_fixture():
    (clip,) = parse_capture_skeleton(capture_text([[np.zeros((25, 3))]]))
    assert clip.n_frames == 1 and clip.fps == 30.0
    assert np.all(clip.positions == 0)


def test_parse_moving_joint():
    a, b = np.zeros((25, 3)), np.zeros((25, 3))
    b[0] = (0.1, 0, 0)
    (clip,) = parse_capture_skeleton(capture_text([[a], [b]]))
    assert np.linalg.norm(clip.positions[1, 0] - clip.positions[0, 0]) == pytest.approx(0.1)


def test_parse_two_bodies_matches_reference_parser(rng):
    frames = [[rng.normal(size=(25, 3)), rng.normal(size=(25, 3))] for _ in range(4)]
    text = capture_text(frames)
    clips = parse_capture_skeleton(text)
    ref = reference_capture_parser(text)
    assert len(clips) == 2
    for clip, expected in zip(clips, ref):
        np.testing.assert_array_equal(clip.positions, expected)


def test_parse_bodies_come_and_go(rng):
    frames = [[rng.normal(size=(25, 3))], [rng.normal(size=(25, 3)), rng.normal(size=(25, 3))], []]
    clips = parse_capture_skeleton(capture_text(frames))
    assert [c.n_frames for c in clips] == [2, 1]


def test_parse_accepts_bytes_and_metadata():
    meta = SubjectMetadata("AD", moca_score=9, subject_id="s1")
    (clip,) = parse_capture_skeleton(capture_text([[np.zeros((25, 3))]]).encode(), action="walking", metadata=meta)
    assert clip.metadata == meta and clip.action is ActionLabel.WALKING


@pytest.mark.parametrize(
    "mutate,line",
    [
        (lambda ls: ls.__setitem__(3, "24"), 4),  # joint count
        (lambda ls: ls.__setitem__(5, "0 0 x 1 1 1 1 1 1 1 1 1"), 6),  # non-numeric
        (lambda ls: ls.__setitem__(6, "0 0 0"), 7),  # short joint line
        (lambda ls: ls.__setitem__(0, "abc"), 1),
    ],
)
def test_parse_errors_name_line(mutate, line):
    lines = capture_text([[np.zeros((25, 3))]]).splitlines()
    mutate(lines)
    with pytest.raises(ParseError) as exc:
        parse_capture_skeleton("\n".join(lines))
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_parse_truncated_input():
    text = capture_text([[np.zeros((25, 3))]])
    with pytest.raises(ParseError):
        parse_capture_skeleton(text[: len(text) // 2])


def test_parse_rejects_non_finite():
    lines = capture_text([[np.zeros((25, 3))]]).splitlines()
    lines[4] = "nan 0 0 1 1 1 1 1 1 1 1 1"
    with pytest.raises(ParseError):
        parse_capture_skeleton("\n".join(lines))


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=400))
def test_parse_never_crashes_on_bytes(data):
    try:
        clips = parse_capture_skeleton(data)
    except ParseError:
        return
    assert all(isinstance(c, SkeletonClip) for c in clips)


# native format


def test_round_trip_file(tmp_path, walking_clip):
    path = tmp_path / "clip.json"
    save_clip(walking_clip, path)
    loaded = load_clip(path)
    assert loaded == walking_clip
    save_clip(loaded, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == path.read_bytes()


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 4), st.just(25), st.just(3)),
           elements=st.floats(-1e6, 1e6, allow_nan=False)),
    st.sampled_from(list(ActionLabel)),
    st.sampled_from(list(Condition)),
    st.one_of(st.none(), st.integers(0, 30)),
)
def test_round_trip_property(pos, action, cond, moca):
    clip = SkeletonClip(pos, fps=25.0, metadata=SubjectMetadata(cond, moca_score=moca, subject_id="p"),
                        action=action, viewpoint_deg=12.5, provenance="train")
    assert loads_clip(dumps_clip(clip)) == clip


def test_native_format_layout(walking_clip):
    text = dumps_clip(walking_clip)
    lines = text.splitlines()
    assert lines[0] == "{" and lines[-1] == "}"
    frame_lines = [ln for ln in lines if ln.startswith("    [[")]
    assert len(frame_lines) == walking_clip.n_frames


@pytest.mark.parametrize(
    "edit",
    [
        lambda d: d.pop("fps"),
        lambda d: d.__setitem__("frames", [[[0, 0, 0]] * 24]),
        lambda d: d.__setitem__("frames", []),
        lambda d: d["metadata"].__setitem__("moca_score", 31),
        lambda d: d.__setitem__("joint_names", ["a"] * 25),
        lambda d: d.__setitem__("frames", [[["x", 0, 0]] * 25]),
        lambda d: d.__setitem__("action", "flying"),
    ],
)
def test_load_errors(edit):
    import json

    clip = SkeletonClip(np.zeros((2, 25, 3)))
    doc = json.loads(dumps_clip(clip))
    edit(doc)
    with pytest.raises(ValidationError):
        loads_clip(json.dumps(doc))


def test_load_invalid_json():
    with pytest.raises(ParseError):
        loads_clip("{not json")
