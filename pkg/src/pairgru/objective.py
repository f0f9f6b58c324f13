"""Similarity scores, uniform negative sampling, and the contrastive hinge loss.

For an anchor embedding p1, its paraphrase p2 and k contrast embeddings c_i,
the per-example loss is

    sum_i max(0, margin - p1.p2 + p1.c_i)

using raw dot products. Training always scores with dot products (that is
what the loss differentiates); ranking-time similarity is a separate choice,
cosine by default.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVectorError

__all__ = [
    "TrainingExample",
    "LossBreakdown",
    "dot_similarity",
    "cosine_similarity",
    "sample_contrasts",
    "contrastive_loss",
    "contrastive_loss_backward",
    "batch_loss",
]

MIN_NORM = 1e-12


@dataclass
class TrainingExample:
    """A paraphrase pair plus its sampled contrast phrases, as token lists."""

    p1_tokens: list
    p2_tokens: list
    contrasts: list  # list of token lists

    def __post_init__(self):
        if len(self.contrasts) < 1:
            raise ValueError("a training example needs at least one contrast phrase")
        p1 = tuple(self.p1_tokens)
        p2 = tuple(self.p2_tokens)
        seen = set()
        for c in self.contrasts:
            key = tuple(c)
            if key == p1 or key == p2:
                raise ValueError(f"contrast {' '.join(key)!r} collides with the pair itself")
            if key in seen:
                raise ValueError(f"duplicate contrast {' '.join(key)!r} within one example")
            seen.add(key)


@dataclass
class LossBreakdown:
    total: float
    per_contrast: list
    violations: int


def _check_dims(a, b):
    if a.shape != b.shape:
        raise ValueError(f"vector dims differ: {a.shape} vs {b.shape}")


def dot_similarity(a, b):
    _check_dims(a, b)
    return float(np.dot(a, b))


def cosine_similarity(a, b):
    _check_dims(a, b)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na <= MIN_NORM or nb <= MIN_NORM:
        raise DegenerateVectorError(f"cosine undefined for near-zero norms ({na:.3e}, {nb:.3e})")
    return float(np.dot(a, b)) / (na * nb)


def sample_contrasts(pool, k, exclude, rng):
    """Draw k distinct phrases uniformly from `pool`, skipping `exclude`.

    `pool` must be an indexable sequence of distinct phrases covering the
    training split; `exclude` is the pair (p1, p2) of the current example
    (any iterable of phrases works). Sampling is without replacement and
    deterministic for a fixed rng.
    """
    excluded = set(exclude)
    if len(pool) < k + len(excluded):
        raise ValueError(f"pool of {len(pool)} phrases cannot supply {k} contrasts "
                         f"with {len(excluded)} exclusions")
    seen = set(excluded)
    chosen = []
    n = len(pool)
    while len(chosen) < k:
        cand = pool[int(rng.integers(n))]
        if cand in seen:
            continue
        seen.add(cand)
        chosen.append(cand)
    return chosen


def contrastive_loss(p1, p2, contrasts, margin=1.0):
    """Hinge loss of one example; every term max(0, margin - p1.p2 + p1.c_i)."""
    if margin <= 0:
        raise ValueError(f"margin must be > 0, got {margin}")
    _check_dims(p1, p2)
    paraphrase_score = float(np.dot(p1, p2))
    per_contrast = []
    for c in contrasts:
        _check_dims(p1, c)
        per_contrast.append(max(0.0, margin - paraphrase_score + float(np.dot(p1, c))))
    violations = sum(1 for term in per_contrast if term > 0.0)
    return LossBreakdown(total=float(sum(per_contrast)), per_contrast=per_contrast,
                         violations=violations)


def contrastive_loss_backward(p1, p2, contrasts, margin=1.0):
    """Gradients of contrastive_loss w.r.t. (p1, p2, each contrast).

    Only contrasts with a strictly positive hinge term contribute; the
    subgradient exactly at the kink is taken as 0.
    """
    breakdown = contrastive_loss(p1, p2, contrasts, margin)
    grad_p1 = np.zeros_like(p1)
    grad_p2 = np.zeros_like(p2)
    grad_contrasts = [np.zeros_like(c) for c in contrasts]
    for i, term in enumerate(breakdown.per_contrast):
        if term > 0.0:
            grad_p1 += contrasts[i] - p2
            grad_p2 -= p1
            grad_contrasts[i] = p1.copy()
    return grad_p1, grad_p2, grad_contrasts


def batch_loss(breakdowns):
    """Mean of per-example totals."""
    breakdowns = list(breakdowns)
    if not breakdowns:
        raise ValueError("cannot average an empty batch")
    return float(sum(b.total for b in breakdowns)) / len(breakdowns)
