"""Shared decision-threshold search used by both scoring modalities."""

from __future__ import annotations

import numpy as np


def minimum_error_threshold(scores, attack_flags) -> float:
    """Threshold minimizing misclassifications under (score > t => attack).

    Candidate thresholds are the midpoints of adjacent distinct scores plus
    the extremes (one value below the minimum, and the maximum itself, which
    realize the all-attack and all-bona-fide outcomes). Ties are broken by the
    smallest |APCER - BPCER|, then by the smallest threshold. Callers must
    supply scores from both classes.
    """
    scores = np.asarray(scores, dtype=np.float64)
    attacks = np.asarray(attack_flags, dtype=bool)
    n_attack = int(attacks.sum())
    n_bona = int((~attacks).sum())
    distinct = np.unique(scores)
    candidates = np.concatenate(
        [
            [distinct[0] - 1.0],
            (distinct[:-1] + distinct[1:]) / 2.0,
            [distinct[-1]],
        ]
    )
    predicted_attack = scores[np.newaxis, :] > candidates[:, np.newaxis]
    attack_errors = (~predicted_attack & attacks).sum(axis=1)
    bona_errors = (predicted_attack & ~attacks).sum(axis=1)
    errors = attack_errors + bona_errors
    gap = np.abs(attack_errors / n_attack - bona_errors / n_bona)
    best = np.lexsort((candidates, gap, errors))[0]
    return float(candidates[best])
