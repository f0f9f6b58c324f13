"""Shared fixtures: synthetic corpora sized for fast, deterministic runs.

The synonym corpus builds words in duos with correlated vectors and pairs
each two-word phrase with its duo-swapped twin, so a consistent mapping
exists for the encoder to learn. Low vector noise makes the 40-pair corpus
trivially overfittable; higher noise on the 460-pair corpus leaves headroom
for a data-scaling trend.
"""

import time

import numpy as np
import pytest

from pairgru.data import EmbeddingTable
from pairgru.numeric import seeded_rng
from pairgru.training import TrainConfig, train


def synonym_corpus(n_pairs, vocab_size, dim=8, seed=12345, noise=0.05):
    """(EmbeddingTable, pair list) with duo-swap paraphrases.

    Words 2i and 2i+1 form a duo whose vectors differ by `noise`-scaled
    normal jitter. Every pair uses a distinct unordered duo combination, so
    no two pairs compete over near-identical phrases.
    """
    rng = seeded_rng(seed)
    words = [f"w{i:02d}" for i in range(vocab_size)]
    vectors = {}
    for i in range(0, vocab_size, 2):
        base = rng.standard_normal(dim)
        vectors[words[i]] = base
        vectors[words[i + 1]] = base + noise * rng.standard_normal(dim)
    table = EmbeddingTable(dim=dim, vectors=vectors)
    n_duos = vocab_size // 2
    if n_pairs > n_duos * (n_duos - 1) // 2:
        raise ValueError("not enough duo combinations for that many pairs")
    used, pairs = set(), []
    while len(pairs) < n_pairs:
        d1, d2 = (int(v) for v in rng.choice(n_duos, size=2, replace=False))
        if frozenset((d1, d2)) in used:
            continue
        used.add(frozenset((d1, d2)))
        m1, m2 = int(rng.integers(2)), int(rng.integers(2))
        p1 = f"{words[2*d1+m1]} {words[2*d2+m2]}"
        p2 = f"{words[2*d1+1-m1]} {words[2*d2+1-m2]}"
        pairs.append((p1, p2))
    return table, pairs


@pytest.fixture(scope="session")
def overfit_corpus():
    """50-word vocab, 8-dim vectors, 40 pairs: the memorization target."""
    return synonym_corpus(40, vocab_size=50, dim=8, seed=12345, noise=0.05)


@pytest.fixture(scope="session")
def overfit_config():
    return TrainConfig(hidden_dim=16, embed_dim=8, lr=1.0, batch_size=128,
                       max_epochs=200, dropout_rate=0.0, k_contrasts=9, seed=9,
                       early_stop_patience=200, deterministic=True)


@pytest.fixture(scope="session")
def trained_fixture(overfit_corpus, overfit_config):
    """One full 200-epoch training run, shared across tests.

    Patience equals max_epochs so early stopping never fires: dev accuracy
    saturates long before the loss bottoms out, and the run must cover all
    200 epochs for the loss-trend and final-loss checks.
    """
    table, pairs = overfit_corpus
    started = time.perf_counter()
    ckpt, logs = train(overfit_config, pairs, pairs, table)
    elapsed = time.perf_counter() - started
    return {"checkpoint": ckpt, "logs": logs, "table": table, "pairs": pairs,
            "seconds": elapsed}


@pytest.fixture(scope="session")
def scaling_corpus():
    """80-word vocab, 460 pairs at noise 0.5: train on 400, hold out 60.

    The higher noise keeps dev ranking off the ceiling, so accuracy reacts
    to how much of the training data a sweep cell sees.
    """
    table, pairs = synonym_corpus(460, vocab_size=80, dim=8, seed=777, noise=0.5)
    return table, pairs[:400], pairs[400:]


def random_phrases(rng, words, n_words):
    picks = rng.choice(len(words), size=n_words, replace=False)
    return " ".join(words[int(i)] for i in picks)


@pytest.fixture(scope="session")
def chance_ranking_pairs():
    """2000 random two-word pairs for the chance-level ranking probe."""
    rng = seeded_rng(24680)
    words = [f"r{i:03d}" for i in range(300)]
    pairs = []
    seen = set()
    while len(pairs) < 2000:
        p1 = random_phrases(rng, words, 2)
        p2 = random_phrases(rng, words, 2)
        if p1 == p2 or (p1, p2) in seen:
            continue
        seen.add((p1, p2))
        pairs.append((p1, p2))
    return pairs


@pytest.fixture(scope="session")
def chance_turney_examples():
    """2000 bigram-choice examples with candidates disjoint from the bigram."""
    from pairgru.data import TurneyExample

    rng = seeded_rng(13579)
    words = [f"r{i:03d}" for i in range(300)]
    examples = []
    for _ in range(2000):
        picks = [int(i) for i in rng.choice(len(words), size=7, replace=False)]
        bigram = f"{words[picks[0]]} {words[picks[1]]}"
        candidates = [words[i] for i in picks[2:]]
        examples.append(TurneyExample(bigram=bigram, candidates=candidates,
                                      answer_index=int(rng.integers(5))))
    return examples


@pytest.fixture()
def tiny_table():
    """Deterministic 6-word, 3-dim table for small unit tests."""
    rng = seeded_rng(42)
    words = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"]
    vectors = {w: rng.standard_normal(3) for w in words}
    return EmbeddingTable(dim=3, vectors=vectors)
