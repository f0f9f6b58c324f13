"""Task evaluators over any phrase encoder: ranking, binary similarity, bigram choice.

Encoders wrap a phrase -> vector map with per-instance caching; evaluators are
read-only and deterministic (seeded contrast draws, lowest-index tie-breaks).
Ranking-time similarity is cosine by default with a dot-product switch;
training-time scoring is always dot and lives in `objective`.

Out-of-vocabulary handling is policy "skip" (drop the example, count it) or
"drop" (delete OOV words from the phrase and score what remains; an example
is still skipped when a whole phrase vanishes).
"""

from dataclasses import dataclass, replace

import numpy as np

from .data import build_turney10, distinct_phrases, subsample_training
from .encoders import avg_encode, gru_encode, sum_encode
from .errors import ConfigError, DegenerateVectorError, EvaluationError, \
    OutOfVocabularyError
from .numeric import child_seed, seeded_rng, stable_hash64
from .objective import MIN_NORM, cosine_similarity, dot_similarity, sample_contrasts

__all__ = [
    "GruPhraseEncoder",
    "AverageEncoder",
    "SumEncoder",
    "RandomEncoder",
    "RankingResult",
    "SemEvalResult",
    "TurneyResult",
    "SweepCell",
    "ranking_accuracy",
    "tune_threshold",
    "semeval_evaluate",
    "turney5_evaluate",
    "turney10_evaluate",
    "sweep",
    "encoder_from_checkpoint",
    "semeval_training_pairs",
    "turney_training_pairs",
    "PUBLISHED_REFERENCE",
]

# Accuracies reported for the original full-scale runs (PPDB-S supervision,
# 200-d vectors, licensed task sets). Desk-scale fixtures cannot approach
# them; the CLI prints these beside measured numbers for context.
PUBLISHED_REFERENCE = {
    ("ranking", "avg"): 0.88,
    ("semeval", "gru"): 0.7344,
    ("turney5", "gru"): 0.4888,
    ("turney10", "gru"): 0.3923,
}

# kept-pair count of the full-scale reference corpus after filtering
REFERENCE_KEPT_PAIRS = 406_170


class PhraseEncoder:
    """Base: string phrase -> 1-D float vector, cached per instance."""

    name = "base"

    def __init__(self):
        self._cache = {}

    def encode(self, phrase, drop_oov=False):
        key = (phrase, drop_oov)
        vec = self._cache.get(key)
        if vec is None:
            vec = self._encode(phrase, drop_oov)
            self._cache[key] = vec
        return vec

    def _encode(self, phrase, drop_oov):
        raise NotImplementedError


class _TableEncoder(PhraseEncoder):
    def __init__(self, table):
        super().__init__()
        self.table = table

    def _tokens(self, phrase, drop_oov):
        words = self.table.tokenize(phrase)
        if not words:
            raise ValueError(f"phrase {phrase!r} has no tokens")
        missing = [w for w in words if w not in self.table.vectors]
        if missing and not drop_oov:
            raise OutOfVocabularyError(missing)
        if missing:
            words = [w for w in words if w in self.table.vectors]
            if not words:
                raise OutOfVocabularyError(missing)
        return words

    def _vectors(self, phrase, drop_oov):
        return [self.table.vectors[w] for w in self._tokens(phrase, drop_oov)]


class GruPhraseEncoder(_TableEncoder):
    """Recurrent composition with trained weights; evaluation mode only."""

    name = "gru"
    training = False  # dropout must never run here

    def __init__(self, params, table):
        super().__init__(table)
        self.params = params

    def _encode(self, phrase, drop_oov):
        assert not self.training
        emb, _ = gru_encode(self.params, self._vectors(phrase, drop_oov))
        return emb.vector


class AverageEncoder(_TableEncoder):
    name = "avg"

    def _encode(self, phrase, drop_oov):
        return avg_encode(self._vectors(phrase, drop_oov)).vector


class SumEncoder(_TableEncoder):
    name = "sum"

    def _encode(self, phrase, drop_oov):
        return sum_encode(self._vectors(phrase, drop_oov)).vector


class RandomEncoder(PhraseEncoder):
    """Seeded random unit vector per distinct phrase: the chance-level probe.

    The vector depends only on (seed, phrase text), so repeated calls and
    separate processes agree. No vocabulary, so nothing is ever OOV.
    """

    name = "random"

    def __init__(self, dim, seed):
        super().__init__()
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self.seed = seed

    def _encode(self, phrase, drop_oov):
        rng = seeded_rng(self.seed, stable_hash64(phrase))
        while True:
            v = rng.standard_normal(self.dim)
            norm = float(np.linalg.norm(v))
            if norm > 1e-9:
                return v / norm


def encoder_from_checkpoint(ckpt, table):
    """GRU encoder for a trained checkpoint over a base embedding table.

    Applies the checkpoint's fine-tuned word vectors when present, widens
    weights to f64, and rejects dimension mismatches up front.
    """
    if table.dim != ckpt.config.embed_dim:
        raise ConfigError(f"checkpoint expects {ckpt.config.embed_dim}-dim embeddings "
                          f"but the table provides {table.dim}-dim vectors")
    if ckpt.embedding_delta:
        table = table.copy()
        for word, vec in ckpt.embedding_delta.items():
            table.vectors[word] = np.asarray(vec, dtype=np.float64)
    params = ckpt.params if ckpt.params.W.dtype == np.float64 \
        else ckpt.params.astype(np.float64)
    return GruPhraseEncoder(params, table)


@dataclass
class RankingResult:
    accuracy: float
    n_examples: int
    k: int
    seed: int
    oov_skipped: int
    correct: int


@dataclass
class SemEvalResult:
    accuracy: float
    threshold: float
    n_examples: int
    oov_skipped: int
    train_accuracy: float
    train_n: int
    train_oov_skipped: int


@dataclass
class TurneyResult:
    accuracy: float
    n_examples: int
    oov_skipped: int
    correct: int


@dataclass
class SweepCell:
    fraction: float
    k: int
    seed: int
    accuracy: float
    n_examples: int
    oov_skipped: int
    best_epoch: int


def _check_policy(oov_policy):
    if oov_policy not in ("skip", "drop"):
        raise ValueError(f"oov_policy must be skip or drop, got {oov_policy!r}")
    return oov_policy == "drop"


def _candidate_similarities(anchor, candidates, similarity):
    """Similarity of `anchor` against each candidate vector, as one array."""
    matrix = np.stack(candidates)
    dots = matrix @ anchor
    if similarity == "dot":
        return dots
    if similarity != "cosine":
        raise ValueError(f"similarity must be cosine or dot, got {similarity!r}")
    anchor_norm = float(np.linalg.norm(anchor))
    cand_norms = np.linalg.norm(matrix, axis=1)
    if anchor_norm <= MIN_NORM or np.any(cand_norms <= MIN_NORM):
        raise DegenerateVectorError("cosine undefined for a zero-norm embedding")
    return dots / (anchor_norm * cand_norms)


def _pair_similarity(a, b, similarity):
    if similarity == "dot":
        return dot_similarity(a, b)
    if similarity != "cosine":
        raise ValueError(f"similarity must be cosine or dot, got {similarity!r}")
    return cosine_similarity(a, b)


def ranking_accuracy(encoder, test_pairs, pool, k, seed, similarity="cosine",
                     oov_policy="skip"):
    """Choose-1-of-(k+1) paraphrase ranking.

    Each test pair contributes one trial: the anchor p1 must rank its true
    paraphrase p2 above k contrasts drawn from `pool` (seeded per example
    index, excluding the pair itself). Ties go to the lowest candidate
    index, and p2 is candidate 0, so exact ties count as correct.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(pool) < k + 2:
        raise ValueError(f"pool of {len(pool)} phrases cannot supply k={k} contrasts")
    drop = _check_policy(oov_policy)
    correct = 0
    skipped = 0
    for index, (p1, p2) in enumerate(test_pairs):
        contrasts = sample_contrasts(pool, k, (p1, p2), seeded_rng(seed, index))
        try:
            anchor = encoder.encode(p1, drop_oov=drop)
            candidates = [encoder.encode(p, drop_oov=drop) for p in [p2, *contrasts]]
        except OutOfVocabularyError:
            skipped += 1
            continue
        sims = _candidate_similarities(anchor, candidates, similarity)
        if int(np.argmax(sims)) == 0:
            correct += 1
    scored = len(test_pairs) - skipped
    if scored == 0:
        raise EvaluationError("every ranking example was skipped as out-of-vocabulary")
    return RankingResult(accuracy=correct / scored, n_examples=len(test_pairs),
                         k=k, seed=seed, oov_skipped=skipped, correct=correct)


def tune_threshold(sims, labels):
    """Best sim-threshold on a labeled training set; predicts positive at sim >= t.

    Candidate thresholds are the midpoints of consecutive distinct sorted
    similarities, plus the two all-one-class extremes. Ties in training
    accuracy resolve to the lowest threshold. O(n log n).
    """
    sims = np.asarray(sims, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if sims.shape != labels.shape or sims.ndim != 1 or sims.size == 0:
        raise ValueError("need matching nonempty 1-D sims and labels")
    order = np.argsort(sims, kind="stable")
    s = sims[order]
    y = labels[order]
    n = s.size
    # cut i predicts positive for sims s[i:], negative below
    neg_before = np.concatenate(([0], np.cumsum(~y)))
    pos_at_or_after = int(y.sum()) - np.concatenate(([0], np.cumsum(y)))
    best_acc = -1.0
    best_threshold = None
    for cut in range(n + 1):
        if cut == 0:
            threshold = float(s[0])
        elif cut == n:
            threshold = float(s[-1]) + 1.0
        elif s[cut - 1] < s[cut]:
            threshold = float(s[cut - 1] + s[cut]) / 2.0
        else:
            continue  # equal neighbors: this cut is not reachable by any threshold
        acc = float(neg_before[cut] + pos_at_or_after[cut]) / n
        if acc > best_acc:
            best_acc = acc
            best_threshold = threshold
    return best_threshold, best_acc


def semeval_evaluate(encoder, train_examples, eval_examples, similarity="cosine",
                     oov_policy="skip"):
    """Binary phrase-pair classification with a train-set-tuned threshold."""
    if not train_examples or not eval_examples:
        raise ValueError("need nonempty train and eval example lists")
    drop = _check_policy(oov_policy)

    def similarities(examples):
        sims, labels, skipped = [], [], 0
        for ex in examples:
            try:
                a = encoder.encode(ex.phrase_a, drop_oov=drop)
                b = encoder.encode(ex.phrase_b, drop_oov=drop)
            except OutOfVocabularyError:
                skipped += 1
                continue
            sims.append(_pair_similarity(a, b, similarity))
            labels.append(ex.label)
        return sims, labels, skipped

    train_sims, train_labels, train_skipped = similarities(train_examples)
    if not train_sims:
        raise EvaluationError("every threshold-tuning example was skipped as out-of-vocabulary")
    threshold, train_acc = tune_threshold(train_sims, train_labels)

    eval_sims, eval_labels, eval_skipped = similarities(eval_examples)
    if not eval_sims:
        raise EvaluationError("every evaluation example was skipped as out-of-vocabulary")
    correct = sum(1 for sim, label in zip(eval_sims, eval_labels)
                  if (sim >= threshold) == label)
    return SemEvalResult(accuracy=correct / len(eval_sims), threshold=threshold,
                         n_examples=len(eval_examples), oov_skipped=eval_skipped,
                         train_accuracy=train_acc, train_n=len(train_examples),
                         train_oov_skipped=train_skipped)


def turney5_evaluate(encoder, examples, similarity="cosine", oov_policy="skip"):
    """Pick the candidate word most similar to the bigram; 5 choices."""
    if not examples:
        raise ValueError("need at least one example")
    drop = _check_policy(oov_policy)
    correct = 0
    skipped = 0
    for ex in examples:
        try:
            anchor = encoder.encode(ex.bigram, drop_oov=drop)
            candidates = [encoder.encode(c, drop_oov=drop) for c in ex.candidates]
        except OutOfVocabularyError:
            skipped += 1
            continue
        sims = _candidate_similarities(anchor, candidates, similarity)
        if int(np.argmax(sims)) == ex.answer_index:
            correct += 1
    scored = len(examples) - skipped
    if scored == 0:
        raise EvaluationError("every bigram example was skipped as out-of-vocabulary")
    return TurneyResult(accuracy=correct / scored, n_examples=len(examples),
                        oov_skipped=skipped, correct=correct)


def turney10_evaluate(encoder, examples, similarity="cosine", oov_policy="skip"):
    """Joint choice over {original, reversed} bigram x 5 candidates (10 items).

    Only (original bigram, answer word) counts as correct. Ties resolve to
    the earliest item in enumeration order: original orientation first,
    candidates in file order.
    """
    if not examples:
        raise ValueError("need at least one example")
    drop = _check_policy(oov_policy)
    correct = 0
    skipped = 0
    for ex in examples:
        items = build_turney10(ex)
        try:
            # items come as original x 5 candidates then reversed x 5
            anchors = [encoder.encode(items[0].phrase, drop_oov=drop),
                       encoder.encode(items[5].phrase, drop_oov=drop)]
            candidates = [encoder.encode(c, drop_oov=drop) for c in ex.candidates]
        except OutOfVocabularyError:
            skipped += 1
            continue
        sims = np.concatenate([_candidate_similarities(a, candidates, similarity)
                               for a in anchors])
        if items[int(np.argmax(sims))].is_correct:
            correct += 1
    scored = len(examples) - skipped
    if scored == 0:
        raise EvaluationError("every bigram example was skipped as out-of-vocabulary")
    return TurneyResult(accuracy=correct / scored, n_examples=len(examples),
                        oov_skipped=skipped, correct=correct)


def sweep(train_pairs, dev_pairs, table, config, fractions, k_values, run_seed,
          eval_k=99):
    """Train one model per (training fraction, k) cell; score dev ranking at eval_k.

    Cell seeds derive from (run_seed, fraction, k) so cells are independent
    and reproducible; eval_k caps automatically to what the dev pool allows.
    """
    from .training import train  # deferred: training imports this module

    if not fractions or not k_values:
        raise ValueError("need at least one fraction and one k value")
    dev_pool = distinct_phrases(train_pairs, dev_pairs)
    k_eff = min(eval_k, len(dev_pool) - 2)
    if k_eff < 1:
        raise ValueError(f"dev pool of {len(dev_pool)} phrases is too small to rank against")
    cells = []
    for fraction in fractions:
        fraction_key = int(round(fraction * 1_000_000))
        for k in k_values:
            cell_seed = child_seed(run_seed, fraction_key, k)
            subset = subsample_training(train_pairs, fraction, child_seed(cell_seed, 0))
            cfg = replace(config, k_contrasts=k, seed=child_seed(cell_seed, 1))
            ckpt, _ = train(cfg, subset, dev_pairs, table)
            encoder = encoder_from_checkpoint(ckpt, table)
            result = ranking_accuracy(encoder, dev_pairs, dev_pool, k_eff,
                                      child_seed(cell_seed, 2),
                                      similarity=cfg.eval_similarity)
            cells.append(SweepCell(fraction=fraction, k=k, seed=cell_seed,
                                   accuracy=result.accuracy,
                                   n_examples=result.n_examples,
                                   oov_skipped=result.oov_skipped,
                                   best_epoch=ckpt.epoch))
    return cells


def semeval_training_pairs(examples, table):
    """Positive, fully in-vocabulary pairs, normalized: supervision for task-specific training."""
    pairs = []
    for ex in examples:
        if not ex.label:
            continue
        a, b = table.normalize(ex.phrase_a), table.normalize(ex.phrase_b)
        if table.phrase_in_vocab(a) and table.phrase_in_vocab(b):
            pairs.append((a, b))
    return pairs


def turney_training_pairs(examples, table):
    """(bigram, answer word) pairs plus a contrast provider for task-specific training.

    The provider serves each pair its own in-vocabulary wrong candidates
    first (file order) and fills up to k with uniform pool samples.
    """
    pairs = []
    wrongs_by_pair = {}
    for ex in examples:
        bigram = table.normalize(ex.bigram)
        answer = table.normalize(ex.candidates[ex.answer_index])
        if not (table.phrase_in_vocab(bigram) and table.phrase_in_vocab(answer)):
            continue
        pair = (bigram, answer)
        pairs.append(pair)
        wrongs = []
        for i, cand in enumerate(ex.candidates):
            if i == ex.answer_index:
                continue
            w = table.normalize(cand)
            if w not in (bigram, answer) and w not in wrongs and table.phrase_in_vocab(w):
                wrongs.append(w)
        wrongs_by_pair.setdefault(pair, wrongs)
    pool = distinct_phrases(pairs)

    def provider(p1, p2, k, rng):
        wrongs = wrongs_by_pair.get((p1, p2), [])[:k]
        if len(wrongs) < k:
            fill = sample_contrasts(pool, k - len(wrongs), (p1, p2, *wrongs), rng)
            return wrongs + fill
        return wrongs

    return pairs, provider
