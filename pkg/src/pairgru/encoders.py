"""GRU cell and sequence encoder, with exact backprop through time.

The cell follows the bias-free gated-recurrent formulation

    z_t = sigmoid(W_z x_t + U_z h_{t-1})
    r_t = sigmoid(W_r x_t + U_r h_{t-1})
    g_t = tanh(W x_t + U (r_t * h_{t-1}))          # candidate activation
    h_t = (1 - z_t) * h_{t-1} + z_t * g_t

with h_0 = 0. A phrase embedding is the final hidden state h_T. Optional bias
vectors (b, b_z, b_r) can be switched on; the default matches the equations
above. Dropout, when active, masks the input x_t once per step before all
three W* products; the recurrent path is never dropped.

SUM and AVG baseline composers live here too: element-wise sum / average of
the token vectors, which are order-blind by construction.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .numeric import dropout_mask, glorot_init

__all__ = [
    "GruParams",
    "GruStepCache",
    "PhraseEmbedding",
    "gru_cell_forward",
    "gru_encode",
    "gru_backward",
    "sum_encode",
    "avg_encode",
]

# init/update/clip order for the six (or nine) named parameter arrays
PARAM_NAMES = ("W", "U", "W_z", "U_z", "W_r", "U_r")
BIAS_NAMES = ("b", "b_z", "b_r")


@dataclass
class GruParams:
    """The trainable arrays of one GRU cell.

    W* are hidden_dim x input_dim, U* are hidden_dim x hidden_dim. Bias
    vectors are None unless the cell was built with use_bias=True.
    """

    W: np.ndarray
    U: np.ndarray
    W_z: np.ndarray
    U_z: np.ndarray
    W_r: np.ndarray
    U_r: np.ndarray
    b: Optional[np.ndarray] = None
    b_z: Optional[np.ndarray] = None
    b_r: Optional[np.ndarray] = None

    @property
    def hidden_dim(self):
        return self.W.shape[0]

    @property
    def input_dim(self):
        return self.W.shape[1]

    @property
    def use_bias(self):
        return self.b is not None

    @classmethod
    def init(cls, hidden_dim, input_dim, rng, use_bias=False, dtype=np.float64):
        """Glorot-uniform init of all matrices, in PARAM_NAMES order; biases start at 0."""
        shapes = {
            "W": (hidden_dim, input_dim),
            "U": (hidden_dim, hidden_dim),
            "W_z": (hidden_dim, input_dim),
            "U_z": (hidden_dim, hidden_dim),
            "W_r": (hidden_dim, input_dim),
            "U_r": (hidden_dim, hidden_dim),
        }
        arrays = {name: glorot_init(*shapes[name], rng, dtype=dtype) for name in PARAM_NAMES}
        if use_bias:
            for name in BIAS_NAMES:
                arrays[name] = np.zeros(hidden_dim, dtype=dtype)
        return cls(**arrays)

    def named_arrays(self):
        """dict name -> array, in a fixed order (matrices then biases)."""
        out = {name: getattr(self, name) for name in PARAM_NAMES}
        if self.use_bias:
            for name in BIAS_NAMES:
                out[name] = getattr(self, name)
        return out

    def zero_grads(self):
        return {name: np.zeros_like(a) for name, a in self.named_arrays().items()}

    def with_arrays(self, named):
        """New GruParams built from a name -> array dict (same key set as named_arrays)."""
        kwargs = dict(named)
        return GruParams(**kwargs)

    def copy(self):
        return self.with_arrays({n: a.copy() for n, a in self.named_arrays().items()})

    def astype(self, dtype):
        return self.with_arrays({n: a.astype(dtype) for n, a in self.named_arrays().items()})


@dataclass
class GruStepCache:
    """Everything one forward step must remember for exact backprop."""

    x: np.ndarray
    mask: Optional[np.ndarray]
    h_prev: np.ndarray
    z: np.ndarray
    r: np.ndarray
    h_tilde: np.ndarray
    h: np.ndarray


@dataclass
class PhraseEmbedding:
    vector: np.ndarray
    token_count: int


def gru_cell_forward(params, x_t, h_prev, mask=None):
    """One GRU step. Returns (h_t, cache).

    `mask`, when given, is an inverted-dropout mask applied to x_t before the
    three input transforms.
    """
    if x_t.shape != (params.input_dim,):
        raise ValueError(f"input has shape {x_t.shape}, expected ({params.input_dim},)")
    if h_prev.shape != (params.hidden_dim,):
        raise ValueError(f"hidden state has shape {h_prev.shape}, expected ({params.hidden_dim},)")
    x_in = x_t if mask is None else x_t * mask
    a_z = params.W_z @ x_in + params.U_z @ h_prev
    a_r = params.W_r @ x_in + params.U_r @ h_prev
    if params.use_bias:
        a_z = a_z + params.b_z
        a_r = a_r + params.b_r
    z = expit(a_z)
    r = expit(a_r)
    a_g = params.W @ x_in + params.U @ (r * h_prev)
    if params.use_bias:
        a_g = a_g + params.b
    h_tilde = np.tanh(a_g)
    h = (1.0 - z) * h_prev + z * h_tilde
    return h, GruStepCache(x=x_t, mask=mask, h_prev=h_prev, z=z, r=r, h_tilde=h_tilde, h=h)


def gru_encode(params, tokens, dropout_rng=None, dropout_rate=0.0, dropout_masks=None):
    """Fold the cell left-to-right over a token-vector sequence, from h_0 = 0.

    Returns (PhraseEmbedding, caches). Per-step dropout masks are drawn from
    `dropout_rng` when it is supplied with a positive rate (training mode);
    `dropout_masks` pins explicit masks instead (used by the gradient checks).
    """
    tokens = list(tokens)
    if not tokens:
        raise ValueError("cannot encode an empty token sequence")
    if dropout_masks is None and dropout_rng is not None and dropout_rate > 0.0:
        dropout_masks = [dropout_mask(params.input_dim, dropout_rate, dropout_rng) for _ in tokens]
    h = np.zeros(params.hidden_dim, dtype=params.W.dtype)
    caches = []
    for t, x_t in enumerate(tokens):
        m = dropout_masks[t] if dropout_masks is not None else None
        h, cache = gru_cell_forward(params, x_t, h, mask=m)
        caches.append(cache)
    return PhraseEmbedding(vector=h, token_count=len(tokens)), caches


def gru_backward(params, caches, grad_last):
    """Exact reverse-mode gradients of the encoding the caches describe.

    `grad_last` is dL/dh_T. Returns (param_grads, input_grads) where
    param_grads mirrors params.named_arrays() and input_grads[t] is dL/dx_t
    (through the dropout mask recorded at step t, if any).
    """
    if not caches:
        raise ValueError("no step caches to backpropagate through")
    if grad_last.shape != (params.hidden_dim,):
        raise ValueError(f"grad has shape {grad_last.shape}, expected ({params.hidden_dim},)")
    grads = params.zero_grads()
    input_grads = [None] * len(caches)
    dh = np.asarray(grad_last, dtype=params.W.dtype)
    for t in range(len(caches) - 1, -1, -1):
        c = caches[t]
        x_in = c.x if c.mask is None else c.x * c.mask

        # h = (1-z) * h_prev + z * g
        dg = dh * c.z
        dz = dh * (c.h_tilde - c.h_prev)
        dh_prev = dh * (1.0 - c.z)

        # g = tanh(W x + U (r * h_prev))
        da_g = dg * (1.0 - c.h_tilde * c.h_tilde)
        grads["W"] += np.outer(da_g, x_in)
        grads["U"] += np.outer(da_g, c.r * c.h_prev)
        dx_in = params.W.T @ da_g
        ds = params.U.T @ da_g
        dr = ds * c.h_prev
        dh_prev += ds * c.r

        # z = sigmoid(W_z x + U_z h_prev)
        da_z = dz * c.z * (1.0 - c.z)
        grads["W_z"] += np.outer(da_z, x_in)
        grads["U_z"] += np.outer(da_z, c.h_prev)
        dx_in += params.W_z.T @ da_z
        dh_prev += params.U_z.T @ da_z

        # r = sigmoid(W_r x + U_r h_prev)
        da_r = dr * c.r * (1.0 - c.r)
        grads["W_r"] += np.outer(da_r, x_in)
        grads["U_r"] += np.outer(da_r, c.h_prev)
        dx_in += params.W_r.T @ da_r
        dh_prev += params.U_r.T @ da_r

        if params.use_bias:
            grads["b"] += da_g
            grads["b_z"] += da_z
            grads["b_r"] += da_r

        input_grads[t] = dx_in if c.mask is None else dx_in * c.mask
        dh = dh_prev
    return grads, input_grads


def _stack_tokens(tokens):
    tokens = list(tokens)
    if not tokens:
        raise ValueError("cannot compose an empty token sequence")
    dim = tokens[0].shape
    for v in tokens[1:]:
        if v.shape != dim:
            raise ValueError(f"token dims differ: {v.shape} vs {dim}")
    return tokens


def sum_encode(tokens):
    """Element-wise sum of the token vectors (order-blind baseline)."""
    tokens = _stack_tokens(tokens)
    total = tokens[0].copy()
    for v in tokens[1:]:
        total += v
    return PhraseEmbedding(vector=total, token_count=len(tokens))


def avg_encode(tokens):
    """Element-wise average of the token vectors (order-blind baseline)."""
    emb = sum_encode(tokens)
    return PhraseEmbedding(vector=emb.vector / emb.token_count, token_count=emb.token_count)
