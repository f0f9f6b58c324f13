"""Scikit-learn style wrappers: fit on paraphrase pairs, transform phrases.

PairedGruEmbedder trains the recurrent encoder on (phrase, paraphrase)
pairs; transform then maps phrase strings to hidden-state vectors.
WordAverageEmbedder / WordSumEmbedder are the stateless order-blind
baselines with the same transform surface.

All constructors only store their arguments (sklearn contract); real work
and validation happen in fit.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .evaluation import AverageEncoder, SumEncoder, encoder_from_checkpoint
from .numeric import seeded_rng
from .training import TrainConfig, train
from .validation import check_phrase_pairs, check_phrases

__all__ = ["PairedGruEmbedder", "WordAverageEmbedder", "WordSumEmbedder"]

_SPLIT_STREAM = 1000


def _require_table(embeddings):
    if embeddings is None:
        raise ValueError("an EmbeddingTable is required: pass embeddings= at construction")
    return embeddings


def _transform_phrases(encoder, X, oov):
    if oov not in ("raise", "drop"):
        raise ValueError(f"oov must be 'raise' or 'drop', got {oov!r}")
    phrases = check_phrases(X)
    rows = [encoder.encode(p, drop_oov=oov == "drop") for p in phrases]
    return np.stack(rows)


class PairedGruEmbedder(TransformerMixin, BaseEstimator):
    """Phrase embedder trained on paraphrase pairs with a contrastive objective.

    Parameters mirror the training recipe; hidden_dim=None matches the word
    embedding width. fit(X) expects (phrase, paraphrase) string pairs and
    holds out `dev_fraction` of them for early stopping; transform(X) maps
    phrase strings to a (n_phrases, hidden_dim) array.
    """

    def __init__(self, embeddings=None, hidden_dim=None, lr=0.3, batch_size=128,
                 max_epochs=150, dropout_rate=0.5, clip_norm=5.0, k_contrasts=9,
                 margin=1.0, seed=0, early_stop_patience=10, eval_similarity="cosine",
                 freeze_embeddings=True, use_bias=False, mirror_pairs=False,
                 precision="f64", dev_k=99, deterministic=False, dev_fraction=0.1,
                 oov="raise"):
        self.embeddings = embeddings
        self.hidden_dim = hidden_dim
        self.lr = lr
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.dropout_rate = dropout_rate
        self.clip_norm = clip_norm
        self.k_contrasts = k_contrasts
        self.margin = margin
        self.seed = seed
        self.early_stop_patience = early_stop_patience
        self.eval_similarity = eval_similarity
        self.freeze_embeddings = freeze_embeddings
        self.use_bias = use_bias
        self.mirror_pairs = mirror_pairs
        self.precision = precision
        self.dev_k = dev_k
        self.deterministic = deterministic
        self.dev_fraction = dev_fraction
        self.oov = oov

    def fit(self, X, y=None):
        table = _require_table(self.embeddings)
        if not 0.0 < self.dev_fraction < 1.0:
            raise ValueError(f"dev_fraction must be in (0, 1), got {self.dev_fraction}")
        pairs = [(table.normalize(a), table.normalize(b))
                 for a, b in check_phrase_pairs(X)]
        if len(pairs) < 2:
            raise ValueError("need at least 2 pairs to split off a dev set")

        order = seeded_rng(self.seed, _SPLIT_STREAM).permutation(len(pairs))
        n_dev = max(1, int(self.dev_fraction * len(pairs)))
        shuffled = [pairs[int(i)] for i in order]
        dev_pairs = shuffled[:n_dev]
        train_pairs = shuffled[n_dev:]

        config = TrainConfig(
            hidden_dim=self.hidden_dim if self.hidden_dim is not None else table.dim,
            embed_dim=table.dim, lr=self.lr, batch_size=self.batch_size,
            max_epochs=self.max_epochs, dropout_rate=self.dropout_rate,
            clip_norm=self.clip_norm, k_contrasts=self.k_contrasts,
            margin=self.margin, seed=self.seed,
            early_stop_patience=self.early_stop_patience,
            eval_similarity=self.eval_similarity,
            freeze_embeddings=self.freeze_embeddings, use_bias=self.use_bias,
            mirror_pairs=self.mirror_pairs, precision=self.precision,
            dev_k=self.dev_k, deterministic=self.deterministic)
        self.checkpoint_, self.epoch_logs_ = train(config, train_pairs, dev_pairs, table)
        self.encoder_ = encoder_from_checkpoint(self.checkpoint_, table)
        self.best_score_ = self.checkpoint_.best_dev_metric
        self.n_iter_ = len(self.epoch_logs_)
        self.n_features_out_ = self.checkpoint_.params.hidden_dim
        return self

    def transform(self, X):
        check_is_fitted(self, "encoder_")
        return _transform_phrases(self.encoder_, X, self.oov)

    def fit_transform(self, X, y=None, **fit_params):
        raise TypeError("fit consumes (phrase, paraphrase) pairs while transform "
                        "consumes phrase strings; call fit and transform separately")


class _BaselineEmbedder(TransformerMixin, BaseEstimator):
    _encoder_cls = None

    def __init__(self, embeddings=None, oov="raise"):
        self.embeddings = embeddings
        self.oov = oov

    def fit(self, X=None, y=None):
        table = _require_table(self.embeddings)
        self.encoder_ = self._encoder_cls(table)
        self.n_features_out_ = table.dim
        return self

    def transform(self, X):
        check_is_fitted(self, "encoder_")
        return _transform_phrases(self.encoder_, X, self.oov)


class WordAverageEmbedder(_BaselineEmbedder):
    """Order-blind baseline: a phrase is the average of its word vectors."""

    _encoder_cls = AverageEncoder


class WordSumEmbedder(_BaselineEmbedder):
    """Order-blind baseline: a phrase is the sum of its word vectors."""

    _encoder_cls = SumEncoder
