import math

import numpy as np
import pytest

from irispad import (
    DataError,
    Ensemble2D,
    EnsembleMember,
    FeatureVector,
    Label,
    LinearModel,
    LossKind,
    NumericsError,
    PadClass,
    classify_2d,
    load_ensemble,
    load_linear_model,
    pair_score_2d,
    predict_score,
    save_ensemble,
    save_linear_model,
    train_linear,
)


def fv(values, name="b"):
    values = np.atleast_1d(np.asarray(values, dtype=float))
    return FeatureVector(values=values, layout=((name, len(values)),))


def attack(i=0):
    return Label(kind=PadClass.ATTACK, subject_id=f"a{i}")


def bona(i=0):
    return Label(kind=PadClass.BONA_FIDE, subject_id=f"b{i}")


def member(weights, bias=0.0, name="b"):
    model = LinearModel(
        weights=np.asarray(weights, dtype=float), bias=bias, loss_kind=LossKind.LOGISTIC
    )
    return EnsembleMember(model=model, bank_name=name)


# ---------------------------------------------------------------------------
# Training


def test_train_separable_two_points():
    model = train_linear([fv([0.0]), fv([1.0])], [bona(), attack()])
    assert predict_score(model, fv([1.0])) > 0.0 > predict_score(model, fv([0.0]))
    assert model.weights[0] > 0.0


def test_train_uninformative_data_stays_near_zero():
    features = [fv([0.5]) for _ in range(4)]
    labels = [bona(0), attack(0), bona(1), attack(1)]
    model = train_linear(features, labels)
    assert abs(model.weights[0]) < 1e-6 and abs(model.bias) < 1e-6
    scores = [predict_score(model, f) for f in features]
    correct = sum((s > 0.0) == (lab.kind is PadClass.ATTACK) for s, lab in zip(scores, labels))
    assert correct == 2  # 50% on coin-flip data


def separable_blobs(rng, n_per_class=10, margin=1.5):
    bona_points = rng.normal(0.0, 0.4, (n_per_class, 2))
    attack_points = rng.normal(0.0, 0.4, (n_per_class, 2)) + margin * np.array([2.0, 2.0])
    return bona_points, attack_points


def line_separates(bona_points, attack_points):
    """Brute force over candidate separating lines on an angle/offset grid."""
    points = np.vstack([bona_points, attack_points])
    labels = np.array([-1.0] * len(bona_points) + [1.0] * len(attack_points))
    for theta in np.linspace(0.0, math.pi, 360, endpoint=False):
        direction = np.array([math.cos(theta), math.sin(theta)])
        projection = points @ direction
        order = np.sort(projection)
        for offset in (order[:-1] + order[1:]) / 2.0:
            side = np.where(projection > offset, 1.0, -1.0)
            if np.all(side == labels) or np.all(side == -labels):
                return True
    return False


def test_train_twenty_sample_separable_set():
    rng = np.random.default_rng(6)
    bona_points, attack_points = separable_blobs(rng)
    assert line_separates(bona_points, attack_points)  # oracle: data is separable
    features = [fv(p) for p in bona_points] + [fv(p) for p in attack_points]
    labels = [bona(i) for i in range(10)] + [attack(i) for i in range(10)]
    model = train_linear(features, labels, epochs=1000)
    scores = [predict_score(model, f) for f in features]
    correct = sum(
        (s > 0.0) == (lab.kind is PadClass.ATTACK) for s, lab in zip(scores, labels)
    )
    assert correct == 20


def test_train_hinge_loss_also_separates():
    rng = np.random.default_rng(10)
    bona_points, attack_points = separable_blobs(rng)
    features = [fv(p) for p in bona_points] + [fv(p) for p in attack_points]
    labels = [bona(i) for i in range(10)] + [attack(i) for i in range(10)]
    model = train_linear(features, labels, loss_kind=LossKind.HINGE, epochs=1000)
    assert all(
        (predict_score(model, f) > 0.0) == (lab.kind is PadClass.ATTACK)
        for f, lab in zip(features, labels)
    )


def test_train_validation_errors():
    with pytest.raises(DataError):
        train_linear([fv([1.0])], [attack()])  # single class
    with pytest.raises(DataError):
        train_linear([fv([1.0]), fv([1.0, 2.0])], [attack(), bona()])  # dims
    with pytest.raises(DataError):
        train_linear([], [])


def test_train_divergence_reports_epoch():
    features = [fv([1000.0]), fv([-1000.0])]
    with pytest.raises(NumericsError, match="epoch"):
        train_linear(
            features,
            [attack(), bona()],
            loss_kind=LossKind.HINGE,
            learning_rate=1e30,
            epochs=50,
        )


def test_logistic_objective_is_init_independent():
    rng = np.random.default_rng(14)
    features = [fv(p) for p in rng.normal(0, 1, (12, 3))]
    labels = [attack(i) if i % 2 else bona(i) for i in range(12)]
    kwargs = dict(l2_penalty=1e-2, epochs=20_000, learning_rate=0.5)
    from_zero = train_linear(features, labels, **kwargs)
    from_random = train_linear(features, labels, seed=99, init_scale=0.5, **kwargs)
    probes = [fv(p) for p in rng.normal(0, 1, (5, 3))]
    for probe in probes:
        assert abs(predict_score(from_zero, probe) - predict_score(from_random, probe)) < 1e-6


# ---------------------------------------------------------------------------
# Prediction


def test_predict_constant_and_projection_models():
    constant = LinearModel(weights=np.zeros(3), bias=0.3, loss_kind=LossKind.HINGE)
    assert predict_score(constant, fv([9.0, 9.0, 9.0])) == 0.3
    projection = LinearModel(weights=np.array([1.0, 0.0]), bias=0.0, loss_kind=LossKind.HINGE)
    assert predict_score(projection, fv([0.7, 5.0])) == 0.7


def test_predict_matches_fsum_oracle():
    rng = np.random.default_rng(8)
    for _ in range(20):
        dim = int(rng.integers(1, 40))
        weights = rng.normal(size=dim)
        values = rng.normal(size=dim)
        bias = float(rng.normal())
        model = LinearModel(weights=weights, bias=bias, loss_kind=LossKind.LOGISTIC)
        oracle = math.fsum(w * v for w, v in zip(weights, values)) + bias
        assert abs(predict_score(model, fv(values)) - oracle) < 1e-12


def test_predict_dimension_mismatch():
    model = LinearModel(weights=np.zeros(2), bias=0.0, loss_kind=LossKind.HINGE)
    with pytest.raises(DataError):
        predict_score(model, fv([1.0]))


# ---------------------------------------------------------------------------
# Ensemble and pair scores


def two_bank_features(left_vals, right_vals):
    left = FeatureVector(
        values=np.asarray(left_vals, dtype=float), layout=(("b1", 2), ("b2", 2))
    )
    right = FeatureVector(
        values=np.asarray(right_vals, dtype=float), layout=(("b1", 2), ("b2", 2))
    )
    return left, right


def test_pair_score_identical_sides_equals_image_score():
    ensemble = Ensemble2D(
        members=(member([1.0, 2.0], 0.5, "b1"), member([0.0, -1.0], 0.0, "b2")),
        decision_threshold=0.0,
    )
    left, right = two_bank_features([0.1, 0.2, 0.3, 0.4], [0.1, 0.2, 0.3, 0.4])
    score = pair_score_2d(ensemble, (left, right))
    member_scores = [
        predict_score(ensemble.members[0].model, fv([0.1, 0.2], "b1")),
        predict_score(ensemble.members[1].model, fv([0.3, 0.4], "b2")),
    ]
    assert score == sum(member_scores) / 2


def test_pair_score_symmetry_is_exact():
    rng = np.random.default_rng(12)
    ensemble = Ensemble2D(
        members=(
            member(rng.normal(size=2), float(rng.normal()), "b1"),
            member(rng.normal(size=2), float(rng.normal()), "b2"),
        ),
        decision_threshold=0.0,
    )
    for _ in range(25):
        left, right = two_bank_features(rng.normal(size=4), rng.normal(size=4))
        assert pair_score_2d(ensemble, (left, right)) == pair_score_2d(
            ensemble, (right, left)
        )


def test_pair_score_three_member_hand_average():
    members = (
        member([1.0], 0.0, "b1"),
        member([2.0], 1.0, "b2"),
        member([-1.0], 0.5, "b3"),
    )
    ensemble = Ensemble2D(members=members, decision_threshold=0.0)
    left = FeatureVector(values=np.array([1.0, 2.0, 3.0]), layout=(("b1", 1), ("b2", 1), ("b3", 1)))
    right = FeatureVector(values=np.array([3.0, 0.0, 1.0]), layout=(("b1", 1), ("b2", 1), ("b3", 1)))
    # member means: b1 (1+3)/2=2; b2 (5+1)/2=3; b3 (-2.5+(-0.5))/2=-1.5
    assert pair_score_2d(ensemble, (left, right)) == pytest.approx((2 + 3 - 1.5) / 3)


def test_duplicating_members_preserves_score():
    single = Ensemble2D(members=(member([1.5], 0.25, "b1"),), decision_threshold=0.0)
    doubled = Ensemble2D(members=single.members * 2, decision_threshold=0.0)
    left = fv([0.6], "b1")
    right = fv([0.9], "b1")
    assert pair_score_2d(single, (left, right)) == pair_score_2d(doubled, (left, right))

    two = Ensemble2D(
        members=(member([1.0], 0.0, "b1"), member([2.0], 0.1, "b2")),
        decision_threshold=0.0,
    )
    four = Ensemble2D(members=two.members * 2, decision_threshold=0.0)
    layout = (("b1", 1), ("b2", 1))
    pair = (
        FeatureVector(values=np.array([0.2, 0.4]), layout=layout),
        FeatureVector(values=np.array([0.5, 0.5]), layout=layout),
    )
    assert pair_score_2d(two, pair) == pytest.approx(pair_score_2d(four, pair), abs=1e-12)


def test_classify_2d_boundary_matches_3d_convention():
    ensemble = Ensemble2D(members=(member([1.0]),), decision_threshold=0.4)
    assert classify_2d(0.4, ensemble).kind is PadClass.BONA_FIDE
    assert classify_2d(0.4 + 1e-12, ensemble).kind is PadClass.ATTACK
    rng = np.random.default_rng(15)
    for score in rng.normal(size=30):
        expected = PadClass.ATTACK if score > 0.4 else PadClass.BONA_FIDE
        assert classify_2d(float(score), ensemble).kind is expected


def test_ensemble_needs_members():
    with pytest.raises(DataError):
        Ensemble2D(members=(), decision_threshold=0.0)


# ---------------------------------------------------------------------------
# File formats


def test_model_file_round_trip(tmp_path):
    model = LinearModel(
        weights=np.array([0.1, -2.5, 3.25]),
        bias=-0.125,
        loss_kind=LossKind.HINGE,
        l2_penalty=1e-3,
    )
    path = tmp_path / "model.txt"
    save_linear_model(model, path)
    loaded = load_linear_model(path)
    assert np.array_equal(loaded.weights, model.weights)
    assert loaded.bias == model.bias
    assert loaded.loss_kind is model.loss_kind
    assert loaded.l2_penalty == model.l2_penalty
    first_line = path.read_text().splitlines()[0]
    assert first_line == "3 hinge 0.001"


def test_ensemble_round_trip(tmp_path):
    ensemble = Ensemble2D(
        members=(member([1.0, -1.0], 0.5, "b1"), member([2.0, 0.0], -0.5, "b2")),
        decision_threshold=0.75,
    )
    index = save_ensemble(ensemble, tmp_path / "ens")
    loaded = load_ensemble(index)
    assert loaded.decision_threshold == 0.75
    assert [m.bank_name for m in loaded.members] == ["b1", "b2"]
    assert np.array_equal(loaded.members[0].model.weights, np.array([1.0, -1.0]))


def test_model_file_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2 hinge 0.0\n0.0\n1.0 2.0 3.0\n")
    with pytest.raises(DataError, match="dim"):
        load_linear_model(path)
    with pytest.raises(DataError):
        load_ensemble(tmp_path / "missing.txt")
