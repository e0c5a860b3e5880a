"""Shared fixtures and oracles for the test suite."""

import itertools

import numpy as np

from adsynth.learn import extract_features
from adsynth.skeleton import SkeletonClip
from adsynth.synthesizer import GenerationRequest, default_profile, generate_clip


def capture_text(bodies_per_frame):
    """Capture-format text from ``[[pose (25, 3), ...] per frame]``."""
    lines = [str(len(bodies_per_frame))]
    for bodies in bodies_per_frame:
        lines.append(str(len(bodies)))
        for k, pose in enumerate(bodies):
            lines.append(f"7220000{k} 0 1 1 1 1 0 0.01 -0.2 2")
            lines.append("25")
            for x, y, z in pose:
                lines.append(f"{float(x)!r} {float(y)!r} {float(z)!r} 0.1 0.2 240.5 200.5 1000 800 0 0 2")
    return "\n".join(lines) + "\n"


def reference_capture_parser(text):
    """Independent line-walking parser used as an oracle (positions only)."""
    tokens = [line.split() for line in text.splitlines() if line.strip()]
    pos = 0
    n_frames = int(tokens[pos][0])
    pos += 1
    per_body = {}
    for _ in range(n_frames):
        n_bodies = int(tokens[pos][0])
        pos += 1
        for b in range(n_bodies):
            pos += 1  # info
            n_joints = int(tokens[pos][0])
            pos += 1
            pose = [[float(v) for v in tokens[pos + j][:3]] for j in range(n_joints)]
            pos += n_joints
            per_body.setdefault(b, []).append(pose)
    return [np.array(v) for _, v in sorted(per_body.items())]


def brute_force_dtw(a, b):
    """Minimum path cost over every monotone path from (0, 0) to (n-1, m-1)."""
    n, m = len(a), len(b)
    best = np.inf
    steps = ((1, 0), (0, 1), (1, 1))

    def walk(i, j, cost):
        nonlocal best
        cost += abs(a[i] - b[j])
        if cost > best:
            return
        if (i, j) == (n - 1, m - 1):
            best = min(best, cost)
            return
        for di, dj in steps:
            if i + di < n and j + dj < m:
                walk(i + di, j + dj, cost)

    walk(0, 0, 0.0)
    return best


def all_monotone_paths(n, m):
    """Every monotone path of the unit step set, as tuples of index pairs."""
    out = []

    def walk(path):
        i, j = path[-1]
        if (i, j) == (n - 1, m - 1):
            out.append(tuple(path))
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            if i + di < n and j + dj < m:
                walk(path + [(i + di, j + dj)])

    walk([(0, 0)])
    return out


def random_clip(rng, n_frames=None, action="walking"):
    n = int(n_frames or rng.integers(2, 12))
    base = rng.normal(0.0, 0.4, (1, 25, 3))
    pos = base + np.cumsum(rng.normal(0.0, 0.02, (n, 25, 3)), axis=0)
    return SkeletonClip(pos, fps=float(rng.choice([15.0, 30.0])), action=action,
                        viewpoint_deg=float(rng.uniform(0, 360)))


def numeric_grad(f, params, key, eps=1e-6):
    g = np.zeros_like(params[key])
    for idx in itertools.product(*map(range, params[key].shape)):
        old = params[key][idx]
        params[key][idx] = old + eps
        hi = f()
        params[key][idx] = old - eps
        lo = f()
        params[key][idx] = old
        g[idx] = (hi - lo) / (2 * eps)
    return g


def rel_error(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))))


DOMAIN_ACTIONS = ("walking", "sitting", "standing", "turning")


def domain_clips(condition, n, seed):
    """Clips of one condition cycling through four actions, random MoCA within the condition."""
    rng = np.random.default_rng(seed)
    moca = (24, 31) if condition == "NC" else (5, 14)
    clips = []
    for i in range(n):
        req = GenerationRequest(DOMAIN_ACTIONS[i % 4], default_profile(condition, int(rng.integers(*moca))),
                                seed=seed * 1000 + i, viewpoint_deg=float(rng.uniform(0, 360)),
                                body_scale=float(rng.uniform(0.9, 1.1)))
        clips.append(generate_clip(req))
    return clips


def separable_domain_fixture(n_train=80, n_test=40):
    """NC (general) versus AD (specific) clips: trivially separable domains, shared action labels."""
    gen_tr, ad_tr = domain_clips("NC", n_train, 1), domain_clips("AD", n_train, 2)
    gen_te, ad_te = domain_clips("NC", n_test, 3), domain_clips("AD", n_test, 4)
    test = gen_te + ad_te
    X_test = np.vstack([extract_features(c) for c in test])
    y_test = np.array([c.action.value for c in test])
    d_test = np.array([0] * n_test + [1] * n_test)
    return gen_tr, ad_tr, X_test, y_test, d_test
