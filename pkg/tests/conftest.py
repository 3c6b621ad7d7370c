import numpy as np
import pytest

from irispad import (
    CapturePair,
    CorpusConfig,
    SceneKind,
    SceneParams,
    default_lights,
    make_corpus,
    make_scene,
    render,
)


@pytest.fixture(scope="session")
def lights():
    return default_lights()


@pytest.fixture(scope="session")
def default_corpus(tmp_path_factory):
    """The default flat+bumpy corpus, rendered once per session."""
    out = tmp_path_factory.mktemp("corpus_default")
    return make_corpus(CorpusConfig(), out)


@pytest.fixture(scope="session")
def mixed_corpus(tmp_path_factory):
    """Corpus with all three scene kinds and both lens patterns."""
    out = tmp_path_factory.mktemp("corpus_mixed")
    return make_corpus(CorpusConfig(n_flat=10, n_bumpy=5, n_opaque=5, seed=42), out)


def scene_pair(scene, lights, noise_sd=0.0, seed=0) -> CapturePair:
    """Render a scene under both lights and wrap it as a capture pair."""
    left = render(scene, lights.directions[0], noise_sd, seed + 1)
    right = render(scene, lights.directions[1], noise_sd, seed + 2)
    return CapturePair(
        left=left,
        right=right,
        mask_left=scene.mask,
        mask_right=scene.mask,
        lights=lights,
    )


@pytest.fixture
def flat_pair(lights):
    return scene_pair(make_scene(SceneKind.FLAT, 48, 48, seed=3), lights)


@pytest.fixture
def bumpy_pair(lights):
    scene = make_scene(SceneKind.BUMPY, 48, 48, SceneParams(amplitude=0.3), seed=5)
    return scene_pair(scene, lights)


def random_unit_rows(rng, n):
    vecs = rng.normal(size=(n, 3))
    return vecs / np.linalg.norm(vecs, axis=1, keepdims=True)
