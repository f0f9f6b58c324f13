"""Minibatch SGD over paraphrase pairs with the shared-weight GRU encoder.

Every epoch: deterministic shuffle, fresh contrast samples per example,
forward through one shared parameter object, contrastive hinge loss,
exact backprop, global-norm clipping, one plain SGD update per minibatch.
After each epoch the dev ranking accuracy decides early stopping; the
checkpoint returned is the best-dev one, not the last.

Checkpoints are a small binary format (magic "PGRU", little-endian, f64
arrays) that round-trips bit-exactly; see save_checkpoint.
"""

import os
import struct
import time
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from . import evaluation
from .data import distinct_phrases
from .encoders import BIAS_NAMES, PARAM_NAMES, GruParams, gru_backward, gru_encode
from .errors import ConfigError, FormatError, NumericError, OutOfVocabularyError
from .numeric import child_seed, clip_by_global_norm, ensure_finite, seeded_rng, sgd_step
from .objective import TrainingExample, batch_loss, contrastive_loss, \
    contrastive_loss_backward, sample_contrasts

__all__ = [
    "TrainConfig",
    "EpochLog",
    "Checkpoint",
    "train",
    "train_step",
    "save_checkpoint",
    "load_checkpoint",
    "write_metrics_tsv",
]

CHECKPOINT_MAGIC = b"PGRU"
CHECKPOINT_VERSION = 1

# rng stream tags, so every random purpose draws from its own generator
INIT_STREAM = 0
SHUFFLE_STREAM = 1
SAMPLE_STREAM = 2
DROPOUT_STREAM = 3
DEV_EVAL_STREAM = 4


@dataclass
class TrainConfig:
    """Hyperparameters and run controls. Defaults are the full-data recipe."""

    hidden_dim: int = 200
    embed_dim: int = 200
    lr: float = 0.3
    batch_size: int = 128
    max_epochs: int = 150
    dropout_rate: float = 0.5
    clip_norm: float = 5.0
    k_contrasts: int = 9
    margin: float = 1.0
    seed: int = 0
    early_stop_patience: int = 10
    eval_similarity: str = "cosine"
    freeze_embeddings: bool = True
    use_bias: bool = False
    mirror_pairs: bool = False
    precision: str = "f64"
    dev_k: int = 99
    deterministic: bool = False

    def __post_init__(self):
        # lr = 0 is allowed on purpose: it makes fixed-point tests exact
        if self.lr < 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.k_contrasts < 1:
            raise ConfigError(f"k_contrasts must be >= 1, got {self.k_contrasts}")
        if self.early_stop_patience < 1:
            raise ConfigError(f"early_stop_patience must be >= 1, got {self.early_stop_patience}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.clip_norm <= 0:
            raise ConfigError(f"clip_norm must be > 0, got {self.clip_norm}")
        if self.margin <= 0:
            raise ConfigError(f"margin must be > 0, got {self.margin}")
        if self.hidden_dim < 1 or self.embed_dim < 1:
            raise ConfigError(f"dims must be >= 1, got hidden={self.hidden_dim} embed={self.embed_dim}")
        if self.dev_k < 1:
            raise ConfigError(f"dev_k must be >= 1, got {self.dev_k}")
        if self.eval_similarity not in ("cosine", "dot"):
            raise ConfigError(f"eval_similarity must be cosine or dot, got {self.eval_similarity!r}")
        if self.precision not in ("f64", "f32"):
            raise ConfigError(f"precision must be f64 or f32, got {self.precision!r}")

    @property
    def dtype(self):
        return np.float32 if self.precision == "f32" else np.float64

    def as_key_values(self):
        """Canonical string form of every field, in declaration order."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                out[f.name] = "true" if v else "false"
            elif isinstance(v, float):
                out[f.name] = repr(v)
            else:
                out[f.name] = str(v)
        return out

    @classmethod
    def from_key_values(cls, mapping):
        """Build a config from string key=value pairs over the defaults.

        Unknown keys are an error so config-file typos never pass silently.
        """
        by_name = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            if key not in by_name:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _parse_config_value(by_name[key], raw)
        return cls(**kwargs)


def _parse_config_value(field, raw):
    raw = raw.strip()
    if field.type == "bool" or isinstance(field.default, bool):
        if raw not in ("true", "false"):
            raise ConfigError(f"{field.name} must be true or false, got {raw!r}")
        return raw == "true"
    try:
        if isinstance(field.default, int):
            return int(raw)
        if isinstance(field.default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {field.name}: {raw!r}") from None
    return raw


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    dev_accuracy: float
    seconds: float
    clip_rate: float


@dataclass
class Checkpoint:
    """Everything needed to evaluate or resume: weights plus their recipe."""

    version: int
    config: TrainConfig
    params: GruParams
    embedding_delta: Optional[dict]  # word -> tuned vector, None when frozen
    best_dev_metric: float
    epoch: int
    run_seed: int


def _token_vectors(table, tokens):
    missing = [w for w in tokens if w not in table.vectors]
    if missing:
        raise OutOfVocabularyError(missing)
    return [table.vectors[w] for w in tokens]


def train_step(params, batch, table, config, rng):
    """One forward/backward/update over a minibatch of TrainingExample.

    Returns (loss, updated params, clip_scale) where loss is the batch mean
    computed BEFORE the update. `rng` drives the dropout masks. When
    config.freeze_embeddings is false, word-vector updates are applied to
    `table` in place and clipped jointly with the cell gradients.
    """
    if not batch:
        raise ValueError("empty minibatch")
    dropout = config.dropout_rate
    shared_ids = set()

    def encode(tokens):
        shared_ids.add(id(params))
        vecs = _token_vectors(table, tokens)
        emb, caches = gru_encode(params, vecs,
                                 dropout_rng=rng if dropout > 0.0 else None,
                                 dropout_rate=dropout)
        # a NaN score would hide inside max(0, .) as a zero loss term, so
        # poisoned inputs or weights must be caught here
        ensure_finite("phrase embedding", emb.vector)
        return emb, caches

    grads = params.zero_grads()
    emb_grads = {}
    breakdowns = []
    for example in batch:
        p1_emb, p1_caches = encode(example.p1_tokens)
        p2_emb, p2_caches = encode(example.p2_tokens)
        contrast_runs = [encode(c) for c in example.contrasts]
        contrast_vecs = [emb.vector for emb, _ in contrast_runs]

        breakdown = contrastive_loss(p1_emb.vector, p2_emb.vector, contrast_vecs,
                                     margin=config.margin)
        breakdowns.append(breakdown)
        if breakdown.violations == 0:
            continue

        g_p1, g_p2, g_contrasts = contrastive_loss_backward(
            p1_emb.vector, p2_emb.vector, contrast_vecs, margin=config.margin)
        invocations = [(example.p1_tokens, p1_caches, g_p1),
                       (example.p2_tokens, p2_caches, g_p2)]
        for i, (_, caches) in enumerate(contrast_runs):
            if breakdown.per_contrast[i] > 0.0:
                invocations.append((example.contrasts[i], caches, g_contrasts[i]))
        for tokens, caches, grad_emb in invocations:
            step_grads, input_grads = gru_backward(params, caches, grad_emb)
            for name, g in step_grads.items():
                grads[name] += g
            if not config.freeze_embeddings:
                for word, g_x in zip(tokens, input_grads):
                    if word in emb_grads:
                        emb_grads[word] = emb_grads[word] + g_x
                    else:
                        emb_grads[word] = g_x.copy()

    # weight sharing is structural: one parameter object saw every invocation
    assert shared_ids == {id(params)}

    loss = batch_loss(breakdowns)
    if not np.isfinite(loss):
        raise NumericError(f"non-finite batch loss {loss}")

    scale = 1.0 / len(batch)
    joint = {name: g * scale for name, g in grads.items()}
    for word, g in emb_grads.items():
        joint[f"emb:{word}"] = g * scale
    clipped, clip_scale = clip_by_global_norm(joint, config.clip_norm)

    cell_grads = {name: clipped[name] for name in grads}
    new_arrays = sgd_step(params.named_arrays(), cell_grads, config.lr)
    updated = params.with_arrays(new_arrays)
    if not config.freeze_embeddings:
        for word in emb_grads:
            table.vectors[word] = table.vectors[word] - config.lr * clipped[f"emb:{word}"]
    return loss, updated, clip_scale


def _working_table(table, config):
    if config.precision == "f32":
        vecs = {w: v.astype(np.float32) for w, v in table.vectors.items()}
        return type(table)(dim=table.dim, vectors=vecs, lowercase=table.lowercase,
                           duplicates_skipped=table.duplicates_skipped)
    if config.freeze_embeddings:
        return table
    return table.copy()


def train(config, train_pairs, dev_pairs, table, contrast_provider=None):
    """Full training run. Returns (best Checkpoint, list of EpochLog).

    `contrast_provider(p1, p2, k, rng) -> phrase list` overrides the default
    uniform sampling from the training phrase pool; evaluation-side task
    adapters use it to inject wrong-answer candidates.
    """
    if not train_pairs:
        raise ValueError("empty training set")
    if not dev_pairs:
        raise ValueError("empty dev set")
    if table.dim != config.embed_dim:
        raise ConfigError(f"embedding table dim {table.dim} != config embed_dim {config.embed_dim}")

    work_table = _working_table(table, config)
    tokenize = work_table.tokenize
    anchors = [(p1, p2) for p1, p2 in train_pairs]
    if config.mirror_pairs:
        anchors += [(p2, p1) for p1, p2 in train_pairs]

    pool = distinct_phrases(train_pairs)
    if contrast_provider is None:
        def contrast_provider(p1, p2, k, rng):
            return sample_contrasts(pool, k, (p1, p2), rng)

    dev_pool = distinct_phrases(train_pairs, dev_pairs)
    dev_k = min(config.dev_k, len(dev_pool) - 2)
    if dev_k < 1:
        raise ValueError(f"dev pool of {len(dev_pool)} phrases is too small to rank against")
    dev_seed = child_seed(config.seed, DEV_EVAL_STREAM)

    params = GruParams.init(config.hidden_dim, config.embed_dim,
                            seeded_rng(config.seed, INIT_STREAM),
                            use_bias=config.use_bias, dtype=config.dtype)

    n = len(anchors)
    logs = []
    best_metric = -np.inf
    best_epoch = -1
    best_params = None
    best_delta = None
    tuned_words = set()

    for epoch in range(config.max_epochs):
        started = time.perf_counter()
        order = seeded_rng(config.seed, SHUFFLE_STREAM, epoch).permutation(n)
        step_losses = []
        clipped_steps = 0
        for batch_index, start in enumerate(range(0, n, config.batch_size)):
            batch = []
            for idx in order[start:start + config.batch_size]:
                idx = int(idx)
                p1, p2 = anchors[idx]
                sample_rng = seeded_rng(config.seed, SAMPLE_STREAM, epoch, idx)
                contrasts = contrast_provider(p1, p2, config.k_contrasts, sample_rng)
                if len(contrasts) != config.k_contrasts:
                    raise ValueError(f"contrast provider returned {len(contrasts)} phrases, "
                                     f"expected {config.k_contrasts}")
                batch.append(TrainingExample(tokenize(p1), tokenize(p2),
                                             [tokenize(c) for c in contrasts]))
            dropout_rng = seeded_rng(config.seed, DROPOUT_STREAM, epoch, batch_index)
            try:
                loss, params, clip_scale = train_step(params, batch, work_table, config,
                                                      dropout_rng)
            except NumericError as err:
                raise NumericError(f"training aborted at epoch {epoch}, "
                                   f"batch {batch_index}: {err}") from err
            step_losses.append(loss)
            if clip_scale < 1.0:
                clipped_steps += 1
            if not config.freeze_embeddings:
                tuned_words.update(w for ex in batch
                                   for seq in [ex.p1_tokens, ex.p2_tokens, *ex.contrasts]
                                   for w in seq)

        encoder = evaluation.GruPhraseEncoder(params, work_table)
        dev_result = evaluation.ranking_accuracy(encoder, dev_pairs, dev_pool, dev_k,
                                                 dev_seed, similarity=config.eval_similarity)
        seconds = 0.0 if config.deterministic else time.perf_counter() - started
        n_steps = len(step_losses)
        logs.append(EpochLog(epoch=epoch,
                             train_loss=float(np.mean(step_losses)),
                             dev_accuracy=dev_result.accuracy,
                             seconds=seconds,
                             clip_rate=clipped_steps / n_steps))

        if dev_result.accuracy > best_metric:
            best_metric = dev_result.accuracy
            best_epoch = epoch
            best_params = params.copy()
            if tuned_words:
                best_delta = {w: work_table.vectors[w].copy() for w in sorted(tuned_words)}
        if epoch - best_epoch >= config.early_stop_patience:
            break

    ckpt = Checkpoint(version=CHECKPOINT_VERSION, config=config, params=best_params,
                      embedding_delta=best_delta, best_dev_metric=float(best_metric),
                      epoch=best_epoch, run_seed=config.seed)
    return ckpt, logs


def write_metrics_tsv(logs, path):
    """One row per epoch: epoch, train_loss, dev_acc, seconds, clip_rate."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for log in logs:
            fh.write(f"{log.epoch}\t{log.train_loss!r}\t{log.dev_accuracy!r}"
                     f"\t{log.seconds:.3f}\t{log.clip_rate!r}\n")


def _pack_u32(value):
    return struct.pack("<I", value)


def _pack_array(name, array):
    arr = np.asarray(array, dtype=np.float64)
    if arr.ndim == 1:
        rows, cols = arr.shape[0], 1
    elif arr.ndim == 2:
        rows, cols = arr.shape
    else:
        raise ValueError(f"array {name} has unsupported rank {arr.ndim}")
    name_bytes = name.encode("utf-8")
    data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return b"".join([_pack_u32(len(name_bytes)), name_bytes,
                     _pack_u32(rows), _pack_u32(cols), data])


def save_checkpoint(ckpt, path):
    """Serialize to the binary format; identical checkpoints yield identical bytes."""
    kv = ckpt.config.as_key_values()
    kv["best_dev_metric"] = repr(float(ckpt.best_dev_metric))
    kv["epoch"] = str(ckpt.epoch)
    kv["run_seed"] = str(ckpt.run_seed)
    config_block = "".join(f"{k}={v}\n" for k, v in kv.items()).encode("utf-8")

    chunks = [CHECKPOINT_MAGIC, _pack_u32(ckpt.version),
              _pack_u32(len(config_block)), config_block]
    named = ckpt.params.named_arrays()
    chunks.append(_pack_u32(len(named)))
    for name, arr in named.items():
        chunks.append(_pack_array(name, arr))
    if ckpt.embedding_delta is None:
        chunks.append(b"\x00")
    else:
        chunks.append(b"\x01")
        chunks.append(_pack_u32(len(ckpt.embedding_delta)))
        for word in sorted(ckpt.embedding_delta):
            word_bytes = word.encode("utf-8")
            vec = np.ascontiguousarray(ckpt.embedding_delta[word], dtype="<f8")
            chunks.append(_pack_u32(len(word_bytes)))
            chunks.append(word_bytes)
            chunks.append(_pack_u32(vec.shape[0]))
            chunks.append(vec.tobytes())

    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(chunks))
    os.replace(tmp, path)


class _Cursor:
    def __init__(self, data, path):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.path}: truncated checkpoint")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def u8(self):
        return self.take(1)[0]

    def done(self):
        return self.pos == len(self.data)


def load_checkpoint(path):
    """Parse a checkpoint file; arrays come back as float64 (exact widening)."""
    with open(path, "rb") as fh:
        cur = _Cursor(fh.read(), path)
    if cur.take(4) != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic, not a checkpoint file")
    version = cur.u32()
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")

    kv = {}
    for line in cur.take(cur.u32()).decode("utf-8").splitlines():
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"{path}: malformed config line {line!r}")
        kv[key] = value
    try:
        best_dev_metric = float(kv.pop("best_dev_metric"))
        epoch = int(kv.pop("epoch"))
        run_seed = int(kv.pop("run_seed"))
    except KeyError as exc:
        raise FormatError(f"{path}: missing checkpoint field {exc}") from None
    try:
        config = TrainConfig.from_key_values(kv)
    except ConfigError as exc:
        raise FormatError(f"{path}: {exc}") from None

    arrays = {}
    for _ in range(cur.u32()):
        name = cur.take(cur.u32()).decode("utf-8")
        rows, cols = cur.u32(), cur.u32()
        data = cur.take(rows * cols * 8)
        arr = np.frombuffer(data, dtype="<f8").copy()
        if name in BIAS_NAMES:
            if cols != 1:
                raise FormatError(f"{path}: bias {name} must have cols=1, got {cols}")
            arrays[name] = arr
        else:
            arrays[name] = arr.reshape(rows, cols)
    expected = set(PARAM_NAMES) | (set(BIAS_NAMES) if config.use_bias else set())
    if set(arrays) != expected:
        raise FormatError(f"{path}: parameter arrays {sorted(arrays)} do not match "
                          f"expected {sorted(expected)}")
    params = GruParams(**arrays)
    if params.hidden_dim != config.hidden_dim or params.input_dim != config.embed_dim:
        raise FormatError(f"{path}: array shapes disagree with config dims "
                          f"({params.hidden_dim}x{params.input_dim} vs "
                          f"{config.hidden_dim}x{config.embed_dim})")

    delta_flag = cur.u8()
    if delta_flag not in (0, 1):
        raise FormatError(f"{path}: bad embedding-delta flag {delta_flag}")
    delta = None
    if delta_flag == 1:
        delta = {}
        for _ in range(cur.u32()):
            word = cur.take(cur.u32()).decode("utf-8")
            dim = cur.u32()
            delta[word] = np.frombuffer(cur.take(dim * 8), dtype="<f8").copy()
    if not cur.done():
        raise FormatError(f"{path}: trailing bytes after checkpoint payload")
    return Checkpoint(version=version, config=config, params=params,
                      embedding_delta=delta, best_dev_metric=best_dev_metric,
                      epoch=epoch, run_seed=run_seed)
