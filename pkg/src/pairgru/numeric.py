"""Seeded RNG, parameter init, dropout, clipping and the SGD update.

Matrices are 2-D float ndarrays (row-major), vectors 1-D. Everything here is
deterministic for a fixed seed: random draws always come from a generator the
caller passes in, never from a hidden global.
"""

import hashlib

import numpy as np

from .errors import NumericError

__all__ = [
    "seeded_rng",
    "child_seed",
    "stable_hash64",
    "glorot_init",
    "clip_by_global_norm",
    "dropout_mask",
    "sgd_step",
    "ensure_finite",
]


def seeded_rng(seed, *stream):
    """PCG64 generator for (seed, stream...).

    The same (seed, stream) always yields the same draw sequence. Distinct
    stream paths give statistically independent generators, which is how
    parallel-safe per-example streams are derived: never share one generator
    across units of work, split the seed instead.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(stream))))


def child_seed(seed, *stream):
    """Collapse (seed, stream...) to a single 64-bit integer seed."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(stream))
    return int(ss.generate_state(1, np.uint64)[0])


def stable_hash64(text):
    """64-bit content hash of a string or bytes, stable across runs and platforms."""
    data = text.encode("utf-8") if isinstance(text, str) else bytes(text)
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def glorot_init(rows, cols, rng, dtype=np.float64):
    """Uniform init on [-s, s] with s = sqrt(6 / (rows + cols))."""
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix dimensions must be >= 1, got {rows}x{cols}")
    scale = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-scale, scale, size=(rows, cols)).astype(dtype, copy=False)


def ensure_finite(name, array):
    """Raise NumericError if any entry of `array` is NaN or Inf."""
    if not np.all(np.isfinite(array)):
        raise NumericError(f"non-finite values in {name}")


def clip_by_global_norm(grads, max_norm):
    """Rescale a gradient set so its joint Euclidean norm is at most max_norm.

    `grads` is a dict name -> ndarray. Returns (clipped dict, applied scale);
    the dict is the input object untouched when no clipping occurs, otherwise
    a new dict of scaled copies. The output is always a nonnegative scalar
    multiple of the input, so gradient direction is preserved.
    """
    if max_norm <= 0:
        raise ValueError(f"max_norm must be > 0, got {max_norm}")
    total = 0.0
    for name, g in grads.items():
        ensure_finite(f"gradient {name}", g)
        total += float(np.sum(np.square(g, dtype=np.float64)))
    norm = np.sqrt(total)
    if norm <= max_norm:
        return grads, 1.0
    scale = max_norm / norm
    return {name: g * scale for name, g in grads.items()}, scale


def dropout_mask(dim, rate, rng):
    """Inverted-dropout mask: entries are 0 with probability `rate`, else 1/(1-rate).

    Surviving entries carry the 1/(1-rate) rescaling so inference needs no
    mode-dependent correction; the mask has expectation 1 per entry.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return np.ones(dim)
    keep = rng.random(dim) >= rate
    return keep / (1.0 - rate)


def sgd_step(params, grads, lr):
    """One plain SGD update: p <- p - lr * g for every named parameter.

    `params` and `grads` are dicts keyed identically with matching shapes.
    Returns a new dict; inputs are not mutated.
    """
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    if set(params) != set(grads):
        raise ValueError(f"parameter/gradient key mismatch: {sorted(params)} vs {sorted(grads)}")
    out = {}
    for name, p in params.items():
        g = grads[name]
        if p.shape != g.shape:
            raise ValueError(f"shape mismatch for {name}: {p.shape} vs {g.shape}")
        out[name] = p - lr * g
    return out
