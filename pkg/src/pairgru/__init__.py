"""pairgru: phrase embeddings learned from paraphrase pairs.

A recurrent (gated) encoder is trained so that a phrase and its paraphrase
land close together while sampled contrast phrases are pushed at least a
margin away; order-blind sum/average composers serve as baselines. The
package covers the whole pipeline: pair filtering, training with early
stopping, checkpointing, and ranking/similarity/bigram-choice evaluation,
plus scikit-learn style estimator wrappers and a CLI (`pairgru`).
"""

__version__ = "0.1.0"

from .data import EmbeddingTable, FilterReport, SplitSpec, filter_pairs, \
    load_embeddings, load_semeval, load_turney, read_ppdb_pairs, split_dataset
from .encoders import GruParams, avg_encode, gru_backward, gru_encode, sum_encode
from .errors import ConfigError, DegenerateVectorError, EvaluationError, \
    FormatError, NumericError, OutOfVocabularyError
from .estimators import PairedGruEmbedder, WordAverageEmbedder, WordSumEmbedder
from .evaluation import AverageEncoder, GruPhraseEncoder, RandomEncoder, \
    SumEncoder, encoder_from_checkpoint, ranking_accuracy, semeval_evaluate, \
    sweep, turney5_evaluate, turney10_evaluate
from .objective import contrastive_loss, contrastive_loss_backward, \
    cosine_similarity, dot_similarity, sample_contrasts
from .training import Checkpoint, EpochLog, TrainConfig, load_checkpoint, \
    save_checkpoint, train, train_step

__all__ = [
    "__version__",
    "EmbeddingTable", "FilterReport", "SplitSpec", "filter_pairs",
    "load_embeddings", "load_semeval", "load_turney", "read_ppdb_pairs",
    "split_dataset",
    "GruParams", "gru_encode", "gru_backward", "sum_encode", "avg_encode",
    "ConfigError", "DegenerateVectorError", "EvaluationError", "FormatError",
    "NumericError", "OutOfVocabularyError",
    "PairedGruEmbedder", "WordAverageEmbedder", "WordSumEmbedder",
    "GruPhraseEncoder", "AverageEncoder", "SumEncoder", "RandomEncoder",
    "encoder_from_checkpoint", "ranking_accuracy", "semeval_evaluate",
    "turney5_evaluate", "turney10_evaluate", "sweep",
    "contrastive_loss", "contrastive_loss_backward", "cosine_similarity",
    "dot_similarity", "sample_contrasts",
    "TrainConfig", "Checkpoint", "EpochLog", "train", "train_step",
    "save_checkpoint", "load_checkpoint",
]
