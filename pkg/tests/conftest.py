import numpy as np
import pytest

from adsynth.synthesizer import GenerationRequest, default_profile, generate_clip


@pytest.fixture(scope="session")
def walking_clip():
    return generate_clip(GenerationRequest("walking", default_profile("MCI"), seed=11, viewpoint_deg=30.0))


@pytest.fixture(scope="session")
def clip_set():
    """A few clips per action and condition, shared by property tests."""
    out = []
    for k, action in enumerate(("walking", "sitting", "standing", "turning", "lying", "sit_to_stand")):
        for j, cond in enumerate(("AD", "MCI", "NC")):
            out.append(generate_clip(GenerationRequest(action, default_profile(cond), seed=100 + 3 * k + j,
                                                       viewpoint_deg=float(40 * (k + j) % 360))))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
