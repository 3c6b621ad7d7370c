import numpy as np
import pytest

from irispad import (
    CorpusConfig,
    DataError,
    Mask,
    PadClass,
    Scene,
    SceneKind,
    SceneParams,
    estimate_normals,
    load_capture_pair,
    make_corpus,
    make_scene,
    normal_variance_score,
    read_normal_map,
    render,
    split_by_pattern,
)
from irispad.synthetic import SEPARATION_AMPLITUDE_FLOOR


def flat_scene(albedo=0.8, size=8):
    normals = np.zeros((size, size, 3))
    normals[:, :, 2] = 1.0
    return Scene(
        kind=SceneKind.FLAT,
        normals=normals,
        albedo=np.full((size, size), albedo),
        mask=Mask(np.ones((size, size), bool)),
        params=SceneParams(),
    )


# ---------------------------------------------------------------------------
# Scene generation


def test_flat_scene_has_frontal_normals():
    scene = make_scene(SceneKind.FLAT, 32, 32, seed=0)
    assert np.all(scene.normals[:, :, 2] == 1.0)
    assert np.all(scene.normals[:, :, :2] == 0.0)
    assert np.unique(scene.albedo).size == 1


def test_bumpy_zero_amplitude_equals_flat():
    flat = make_scene(SceneKind.FLAT, 24, 24, seed=7)
    degenerate = make_scene(SceneKind.BUMPY, 24, 24, SceneParams(amplitude=0.0), seed=7)
    assert np.array_equal(flat.normals, degenerate.normals)
    assert np.array_equal(flat.albedo, degenerate.albedo)


def test_bumpy_mean_slope_matches_amplitude_by_finite_differences():
    params = SceneParams(amplitude=0.4)
    scene = make_scene(SceneKind.BUMPY, 96, 96, params, seed=11)
    field = scene.height_field
    gy, gx = np.gradient(field)
    mean_slope = float(np.hypot(gx, gy).mean())
    assert abs(mean_slope - 0.4) / 0.4 < 0.2


def test_ridges_only_normals_stay_in_light_plane():
    params = SceneParams(amplitude=0.3, ridges_only=True)
    scene = make_scene(SceneKind.BUMPY, 32, 32, params, seed=3)
    assert np.all(scene.normals[:, :, 1] == 0.0)
    assert np.any(scene.normals[:, :, 0] != 0.0)


def test_make_scene_deterministic():
    a = make_scene(SceneKind.OPAQUE_PRINT, 48, 48, seed=21)
    b = make_scene(SceneKind.OPAQUE_PRINT, 48, 48, seed=21)
    assert np.array_equal(a.normals, b.normals)
    assert np.array_equal(a.albedo, b.albedo)


def test_opaque_print_paints_bright_dots():
    scene = make_scene(SceneKind.OPAQUE_PRINT, 64, 64, SceneParams(coverage=0.25), seed=5)
    painted = scene.albedo == 0.95
    fraction = painted.mean()
    assert 0.2 <= fraction <= 0.45  # reaches target coverage, overshoot bounded
    assert np.all(scene.normals[:, :, 2] > 0.9)  # near-flat relief


def test_scene_params_validation():
    with pytest.raises(DataError):
        SceneParams(amplitude=-0.1)
    with pytest.raises(DataError):
        SceneParams(coverage=1.0)
    with pytest.raises(DataError):
        make_scene(SceneKind.FLAT, 0, 10)


# ---------------------------------------------------------------------------
# Rendering


def test_render_flat_frontal_is_constant():
    image = render(flat_scene(albedo=0.8), np.array([0.0, 0.0, 1.0]))
    assert np.all(image.intensities == 0.8)


def test_render_grazing_light_is_black():
    image = render(flat_scene(), np.array([1.0, 0.0, 0.0]))
    assert np.all(image.intensities == 0.0)


def test_render_matches_per_pixel_oracle():
    rng = np.random.default_rng(9)
    scene = make_scene(SceneKind.BUMPY, 16, 16, SceneParams(amplitude=0.5), seed=2)
    light = rng.normal(size=3)
    light /= np.linalg.norm(light)
    light[2] = abs(light[2])
    light /= np.linalg.norm(light)
    image = render(scene, light)
    for y in range(16):
        for x in range(16):
            expected = scene.albedo[y, x] * max(0.0, float(scene.normals[y, x] @ light))
            expected = min(1.0, max(0.0, expected))
            assert abs(image.intensities[y, x] - expected) < 1e-12


def test_render_noise_is_seeded_and_clipped():
    scene = flat_scene(albedo=1.0)
    noisy_a = render(scene, np.array([0.0, 0.0, 1.0]), noise_sd=0.5, seed=4)
    noisy_b = render(scene, np.array([0.0, 0.0, 1.0]), noise_sd=0.5, seed=4)
    assert np.array_equal(noisy_a.intensities, noisy_b.intensities)
    assert noisy_a.intensities.max() <= 1.0 and noisy_a.intensities.min() >= 0.0
    with pytest.raises(DataError):
        render(scene, np.array([0.0, 0.0, 2.0]))


def test_flat_renders_are_identical_under_both_lights(lights):
    scene = make_scene(SceneKind.FLAT, 32, 32, seed=13)
    left = render(scene, lights.directions[0])
    right = render(scene, lights.directions[1])
    assert np.array_equal(left.intensities, right.intensities)


def test_bumpy_renders_differ_between_lights(lights):
    scene = make_scene(SceneKind.BUMPY, 32, 32, SceneParams(amplitude=0.2), seed=13)
    left = render(scene, lights.directions[0])
    right = render(scene, lights.directions[1])
    assert not np.array_equal(left.intensities, right.intensities)


# ---------------------------------------------------------------------------
# Corpus


def test_corpus_counts_and_files(tmp_path):
    manifest = make_corpus(CorpusConfig(n_flat=10, n_bumpy=10, seed=2), tmp_path)
    assert len(manifest) == 20
    images = list(tmp_path.glob("*_L.pgm")) + list(tmp_path.glob("*_R.pgm"))
    masks = list(tmp_path.glob("*_m[LR].pgm"))
    assert len(images) == 40
    assert len(masks) == 40
    truths = list(tmp_path.glob("*_normals.txt"))
    assert len(truths) == 20


def test_corpus_regeneration_is_byte_identical(tmp_path):
    config = CorpusConfig(n_flat=3, n_bumpy=3, n_opaque=2, seed=9)
    make_corpus(config, tmp_path / "a")
    make_corpus(config, tmp_path / "b")
    files_a = sorted(p.name for p in (tmp_path / "a").iterdir())
    files_b = sorted(p.name for p in (tmp_path / "b").iterdir())
    assert files_a == files_b
    for name in files_a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_corpus_scores_separate_flat_from_bumpy(default_corpus, lights):
    flat_scores, bumpy_scores = [], []
    for entry in default_corpus.entries:
        pair = load_capture_pair(default_corpus, entry, lights)
        q = normal_variance_score(estimate_normals(pair))
        if entry.label.kind is PadClass.BONA_FIDE:
            flat_scores.append(q)
        else:
            bumpy_scores.append(q)
    assert max(flat_scores) < min(bumpy_scores)
    assert CorpusConfig().amplitude >= SEPARATION_AMPLITUDE_FLOOR


def test_corpus_separation_holds_at_documented_floor(tmp_path, lights):
    config = CorpusConfig(
        n_flat=4, n_bumpy=4, amplitude=SEPARATION_AMPLITUDE_FLOOR, seed=13
    )
    manifest = make_corpus(config, tmp_path)
    flat_scores, bumpy_scores = [], []
    for entry in manifest.entries:
        pair = load_capture_pair(manifest, entry, lights)
        q = normal_variance_score(estimate_normals(pair))
        if entry.label.kind is PadClass.BONA_FIDE:
            flat_scores.append(q)
        else:
            bumpy_scores.append(q)
    assert max(flat_scores) < min(bumpy_scores)


def test_corpus_opaque_scores_below_bumpy(mixed_corpus, lights):
    scores = {"bumpy": [], "opaque": []}
    for entry in mixed_corpus.entries:
        kind = entry.left.split("_")[1]
        if kind in scores:
            pair = load_capture_pair(mixed_corpus, entry, lights)
            scores[kind].append(normal_variance_score(estimate_normals(pair)))
    assert np.mean(scores["opaque"]) < np.mean(scores["bumpy"])
    assert all(q > 0 for q in scores["opaque"])


def test_corpus_tags_support_pattern_protocol(mixed_corpus):
    regular, irregular = split_by_pattern(mixed_corpus)
    for side in (regular, irregular):
        kinds = {e.label.kind for e in side.entries}
        assert kinds == {PadClass.BONA_FIDE, PadClass.ATTACK}
    assert all(
        e.label.pattern.value == "regular"
        for e in regular.entries
        if e.label.kind is PadClass.ATTACK
    )


def test_corpus_ground_truth_maps_match_scenes(default_corpus):
    entry = default_corpus.entries[0]
    truth_path = default_corpus.root / entry.left.replace("_L.pgm", "_normals.txt")
    truth = read_normal_map(truth_path)
    assert truth.width == 64 and truth.height == 64
    assert truth.valid_count > 0


def test_corpus_masks_are_annuli(default_corpus):
    from irispad import read_pgm_mask

    entry = default_corpus.entries[0]
    mask = read_pgm_mask(default_corpus.root / entry.mask_left)
    assert not mask.bits[32, 32]  # pupil hole
    assert mask.bits[32, 32 + 20]  # iris ring
    assert not mask.bits[0, 0]  # outside iris
