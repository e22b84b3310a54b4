import numpy as np
import pytest

from fobj import encoder, synth
from fobj.state import make_oracle_center_provider, preprocess_scene


@pytest.fixture(scope="session")
def small_scene():
    """A compact deterministic scene with semantic features."""
    spec = synth.SceneSpec(room=(4.0, 4.0, 1.8), n_objects=(3, 3), seed=11,
                           density=350.0)
    scene = synth.gen_scene(spec)
    return synth.attach_semantic_features(scene, synth.FeatureSpec(), seed=5)


@pytest.fixture(scope="session")
def small_state(small_scene):
    rng = np.random.default_rng(21)
    enc = encoder.init_point_encoder(6 + small_scene.feat_dim, rng)
    return preprocess_scene(small_scene, enc,
                            make_oracle_center_provider(small_scene))
