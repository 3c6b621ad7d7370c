"""Texture decision stage: regularized linear classifiers trained by
deterministic full-batch gradient descent, one per filter-bank scale, fused by
mean score over members and over the two images of a capture pair.

Attack is encoded +1 and bona fide -1; a model's raw affine score ``w.x + b``
is higher for more attack-like inputs. Weight initialization defaults to the
zero vector, so training is reproducible regardless of seed unless a nonzero
``init_scale`` is requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .bsif import FeatureVector, FilterBank, slice_bank
from .core import Decision, DecisionSource, Label, PadClass, format_float
from .errors import DataError, NumericsError
from .thresholding import minimum_error_threshold

DEFAULT_EPOCHS = 500
DEFAULT_LEARNING_RATE = 0.1
DEFAULT_L2_PENALTY = 1e-3


class LossKind(Enum):
    HINGE = "hinge"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class LinearModel:
    """Affine scorer with the loss and penalty it was trained under."""

    weights: np.ndarray
    bias: float
    loss_kind: LossKind
    l2_penalty: float = 0.0
    trained_on: str = ""

    def __post_init__(self) -> None:
        arr = np.array(self.weights, dtype=np.float64)
        if arr.ndim != 1:
            raise DataError("model weights must form a 1-D vector")
        if not np.isfinite(arr).all() or not math.isfinite(self.bias):
            raise DataError("model parameters must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "weights", arr)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self) -> int:
        return int(self.weights.size)


def _objective(
    x: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, loss_kind: LossKind, l2: float
) -> float:
    # overflow to inf is fine here; the caller treats non-finite loss as divergence
    with np.errstate(over="ignore", invalid="ignore"):
        scores = x @ w + b
        if loss_kind is LossKind.LOGISTIC:
            data_term = float(np.logaddexp(0.0, -y * scores).mean())
        else:
            data_term = float(np.maximum(0.0, 1.0 - y * scores).mean())
        return data_term + 0.5 * l2 * float(w @ w)


def train_linear(
    features: Sequence[FeatureVector],
    labels: Sequence[Label],
    loss_kind: LossKind = LossKind.LOGISTIC,
    l2_penalty: float = DEFAULT_L2_PENALTY,
    epochs: int = DEFAULT_EPOCHS,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    seed: int = 0,
    init_scale: float = 0.0,
    trained_on: str = "",
) -> LinearModel:
    """Full-batch gradient descent on the regularized empirical loss.

    The l2 penalty (0.5 * l2 * ||w||^2, bias excluded) keeps the logistic
    objective strictly convex. Divergence (non-finite loss) is reported with
    the offending epoch index.
    """
    if len(features) != len(labels) or not features:
        raise DataError("training needs matching, nonempty features and labels")
    if l2_penalty < 0.0:
        raise DataError("l2 penalty must be nonnegative")
    dims = {len(f) for f in features}
    if len(dims) != 1:
        raise DataError(f"inconsistent feature dimensions: {sorted(dims)}")
    x = np.stack([f.values for f in features])
    y = np.where([lab.kind is PadClass.ATTACK for lab in labels], 1.0, -1.0)
    if np.all(y > 0) or np.all(y < 0):
        raise DataError("training needs at least one example of each class")

    n, dim = x.shape
    if init_scale > 0.0:
        w = np.random.default_rng(seed).normal(0.0, init_scale, dim)
    else:
        w = np.zeros(dim)
    b = 0.0
    for epoch in range(epochs):
        scores = x @ w + b
        if loss_kind is LossKind.LOGISTIC:
            coeff = -y * expit(-y * scores)
        else:
            coeff = np.where(1.0 - y * scores > 0.0, -y, 0.0)
        grad_w = x.T @ coeff / n + l2_penalty * w
        grad_b = float(coeff.mean())
        w = w - learning_rate * grad_w
        b = b - learning_rate * grad_b
        loss = _objective(x, y, w, b, loss_kind, l2_penalty)
        if not math.isfinite(loss):
            raise NumericsError(
                f"training loss diverged at epoch {epoch} (learning rate too high?)"
            )
    return LinearModel(
        weights=w,
        bias=b,
        loss_kind=loss_kind,
        l2_penalty=float(l2_penalty),
        trained_on=trained_on,
    )


def predict_score(model: LinearModel, features: FeatureVector) -> float:
    """Raw affine score w.x + b; higher = more attack-like."""
    if len(features) != model.dim:
        raise DataError(
            f"feature dimension {len(features)} does not match model dimension {model.dim}"
        )
    return float(model.weights @ features.values + model.bias)


@dataclass(frozen=True)
class EnsembleMember:
    model: LinearModel
    bank_name: str


@dataclass(frozen=True)
class Ensemble2D:
    """Mean-aggregated member scores with a fitted decision threshold."""

    members: tuple[EnsembleMember, ...]
    decision_threshold: float

    def __post_init__(self) -> None:
        members = tuple(self.members)
        if not members:
            raise DataError("an ensemble needs at least one member")
        if not math.isfinite(self.decision_threshold):
            raise DataError("ensemble decision threshold must be finite")
        object.__setattr__(self, "members", members)


def pair_score_2d(
    ensemble: Ensemble2D, pair_features: tuple[FeatureVector, FeatureVector]
) -> float:
    """Sample-level texture score: mean over members of the mean over the two
    images; exactly symmetric in (left, right)."""
    left, right = pair_features
    member_scores = []
    for member in ensemble.members:
        score_left = predict_score(member.model, slice_bank(left, member.bank_name))
        score_right = predict_score(member.model, slice_bank(right, member.bank_name))
        member_scores.append((score_left + score_right) / 2.0)
    return float(sum(member_scores) / len(member_scores))


def classify_2d(score: float, ensemble: Ensemble2D) -> Decision:
    """Attack iff score strictly exceeds the ensemble threshold (same boundary
    convention as the 3-D classifier)."""
    kind = PadClass.ATTACK if score > ensemble.decision_threshold else PadClass.BONA_FIDE
    return Decision(kind=kind, score=float(score), source=DecisionSource.PAD_2D)


def train_ensemble(
    pair_features: Sequence[tuple[FeatureVector, FeatureVector]],
    labels: Sequence[Label],
    banks: Sequence[FilterBank],
    loss_kind: LossKind = LossKind.LOGISTIC,
    l2_penalty: float = DEFAULT_L2_PENALTY,
    epochs: int = DEFAULT_EPOCHS,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    seed: int = 0,
    init_scale: float = 0.0,
    trained_on: str = "",
) -> Ensemble2D:
    """Train one member per bank on single-image histograms, then fit the
    pair-level decision threshold on the training pair scores."""
    if len(pair_features) != len(labels) or not pair_features:
        raise DataError("ensemble training needs matching, nonempty pairs and labels")
    if not banks:
        raise DataError("ensemble training needs at least one filter bank")
    members = []
    for bank in banks:
        image_features: list[FeatureVector] = []
        image_labels: list[Label] = []
        for (left, right), label in zip(pair_features, labels):
            image_features.append(slice_bank(left, bank.name))
            image_labels.append(label)
            image_features.append(slice_bank(right, bank.name))
            image_labels.append(label)
        model = train_linear(
            image_features,
            image_labels,
            loss_kind=loss_kind,
            l2_penalty=l2_penalty,
            epochs=epochs,
            learning_rate=learning_rate,
            seed=seed,
            init_scale=init_scale,
            trained_on=f"{trained_on}[{bank.name}]" if trained_on else bank.name,
        )
        members.append(EnsembleMember(model=model, bank_name=bank.name))
    unthresholded = Ensemble2D(members=tuple(members), decision_threshold=0.0)
    scores = np.array([pair_score_2d(unthresholded, pf) for pf in pair_features])
    attacks = np.array([lab.kind is PadClass.ATTACK for lab in labels], dtype=bool)
    threshold = minimum_error_threshold(scores, attacks)
    return Ensemble2D(members=tuple(members), decision_threshold=threshold)


# ---------------------------------------------------------------------------
# File formats


def save_linear_model(model: LinearModel, path) -> None:
    """Model file: line 1 'dim loss l2', line 2 bias, line 3 weights."""
    lines = [
        f"{model.dim} {model.loss_kind.value} {format_float(model.l2_penalty)}",
        format_float(model.bias),
        " ".join(format_float(w) for w in model.weights),
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_linear_model(path) -> LinearModel:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"model file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) < 3:
        raise DataError(f"{path}: model file needs 3 lines")
    header = lines[0].split()
    if len(header) != 3:
        raise DataError(f"{path}: header must be 'dim loss l2'")
    try:
        dim = int(header[0])
        loss_kind = LossKind(header[1])
        l2 = float(header[2])
        bias = float(lines[1])
        weights = np.array([float(f) for f in lines[2].split()], dtype=np.float64)
    except ValueError:
        raise DataError(f"{path}: malformed model file") from None
    if weights.size != dim:
        raise DataError(f"{path}: header declares dim {dim}, found {weights.size} weights")
    return LinearModel(
        weights=weights,
        bias=bias,
        loss_kind=loss_kind,
        l2_penalty=l2,
        trained_on=path.stem,
    )


def save_ensemble(ensemble: Ensemble2D, directory) -> Path:
    """Write member model files plus an index: threshold line, then one
    'member <bank_name> <model_file>' line per member. Returns the index path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [f"threshold {format_float(ensemble.decision_threshold)}"]
    for member in ensemble.members:
        filename = f"member-{member.bank_name}.txt"
        save_linear_model(member.model, directory / filename)
        lines.append(f"member {member.bank_name} {filename}")
    index = directory / "ensemble.txt"
    index.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return index


def load_ensemble(path) -> Ensemble2D:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"ensemble file not found: {path}")
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines or not lines[0].startswith("threshold "):
        raise DataError(f"{path}: first line must be 'threshold <value>'")
    try:
        threshold = float(lines[0].split()[1])
    except (IndexError, ValueError):
        raise DataError(f"{path}: malformed threshold line") from None
    members = []
    for line in lines[1:]:
        fields = line.split()
        if len(fields) != 3 or fields[0] != "member":
            raise DataError(f"{path}: expected 'member <bank_name> <model_file>', got '{line}'")
        model = load_linear_model(path.parent / fields[2])
        members.append(EnsembleMember(model=model, bank_name=fields[1]))
    if not members:
        raise DataError(f"{path}: ensemble lists no members")
    return Ensemble2D(members=tuple(members), decision_threshold=threshold)
