"""Finite-difference verification of every analytic gradient path.

Three suites: the recurrent encoder alone, the hinge loss alone, and the
end-to-end composition (two phrases plus contrasts through shared weights
into the loss). Central differences with f64; hinge checks are constructed
away from the kinks so the loss is locally linear and the comparison is
meaningful at tight tolerance.

Relative error uses a floor in the denominator, |a - n| / max(|a|, |n|,
floor), so near-zero gradients do not divide noise by noise.
"""

from dataclasses import dataclass

import numpy as np

from .encoders import GruParams, gru_backward, gru_encode
from .numeric import seeded_rng
from .objective import contrastive_loss, contrastive_loss_backward

__all__ = [
    "CheckResult",
    "relative_error",
    "finite_difference",
    "analytic_end_to_end",
    "check_encoder_gradients",
    "check_loss_gradients",
    "check_end_to_end",
    "run_all_checks",
]

ENCODER_THRESHOLD = 1e-4
LOSS_THRESHOLD = 1e-6
END_TO_END_THRESHOLD = 1e-4

# suite tags for independent rng streams
_ENCODER_STREAM = 0
_LOSS_STREAM = 1
_END_TO_END_STREAM = 2


@dataclass
class CheckResult:
    component: str
    max_rel_error: float
    worst_coordinate: str
    threshold: float
    passed: bool

    def report_line(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{self.component}: max rel error {self.max_rel_error:.3e} "
                f"at {self.worst_coordinate} (threshold {self.threshold:.0e}): {verdict}")


def relative_error(analytic, numeric, floor):
    denom = max(abs(analytic), abs(numeric), floor)
    return abs(analytic - numeric) / denom


def finite_difference(f, array, eps):
    """Central-difference gradient of scalar f() w.r.t. `array`, probed in place."""
    grad = np.zeros_like(array)
    it = np.nditer(array, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        saved = array[idx]
        array[idx] = saved + eps
        f_plus = f()
        array[idx] = saved - eps
        f_minus = f()
        array[idx] = saved
        grad[idx] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def _coordinate_label(name, idx, context):
    pos = ",".join(str(i) for i in idx)
    return f"{name}[{pos}] ({context})"


def _compare(analytic_arrays, f, probe_arrays, eps, floor, context, worst):
    """FD-check each named array; update and return the running worst record."""
    for name, probe in probe_arrays.items():
        numeric = finite_difference(f, probe, eps)
        analytic = analytic_arrays[name]
        it = np.nditer(numeric, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            err = relative_error(float(analytic[idx]), float(numeric[idx]), floor)
            if err > worst[0]:
                worst = (err, _coordinate_label(name, idx, context))
    return worst


def _corrupt(grads):
    """Deliberately wrong gradients, for proving the harness catches failures."""
    name = next(iter(grads))
    flat_index = (0,) * grads[name].ndim
    grads[name][flat_index] += 1e-2 * (1.0 + abs(float(grads[name][flat_index])))
    return grads


def check_encoder_gradients(seed=0, instances=20, max_dim=8, max_len=6,
                            eps=1e-5, floor=1e-5, corrupt=False):
    """Backprop-through-time vs finite differences on random small cells.

    Instances alternate between the bias-free and biased cell. The scalar
    probed is a random projection of the final hidden state, so every
    parameter (and every input vector) receives a nonzero-path check.
    """
    rng = seeded_rng(seed, _ENCODER_STREAM)
    worst = (0.0, "none")
    for instance in range(instances):
        hidden = int(rng.integers(2, max_dim + 1))
        input_dim = int(rng.integers(2, max_dim + 1))
        length = int(rng.integers(1, max_len + 1))
        use_bias = instance % 2 == 1
        params = GruParams.init(hidden, input_dim, rng, use_bias=use_bias)
        tokens = [rng.standard_normal(input_dim) for _ in range(length)]
        direction = rng.standard_normal(hidden)

        def f():
            emb, _ = gru_encode(params, tokens)
            return float(direction @ emb.vector)

        _, caches = gru_encode(params, tokens)
        grads, input_grads = gru_backward(params, caches, direction)
        if corrupt:
            grads = _corrupt(grads)

        context = f"instance {instance}"
        worst = _compare(grads, f, params.named_arrays(), eps, floor, context, worst)
        token_analytic = {f"x{t}": g for t, g in enumerate(input_grads)}
        token_probe = {f"x{t}": v for t, v in enumerate(tokens)}
        worst = _compare(token_analytic, f, token_probe, eps, floor, context, worst)
    return CheckResult("encoder", worst[0], worst[1], ENCODER_THRESHOLD,
                       worst[0] < ENCODER_THRESHOLD)


def _kink_safe_margin(p1, p2, contrasts, rng, clearance=1e-2):
    """A margin keeping every hinge term at least `clearance` from zero.

    The hinge terms are margin + b_i with fixed offsets b_i, so sliding the
    margin moves all terms together; at most len(b_i) pockets are unsafe and
    a nearby safe value always exists.
    """
    offsets = [float(np.dot(p1, c)) - float(np.dot(p1, p2)) for c in contrasts]
    for bump in range(200):
        margin = 1.0 + bump * 2.1 * clearance + float(rng.uniform(0, clearance / 2))
        if all(abs(margin + b) >= clearance for b in offsets):
            return margin
    raise AssertionError("could not find a kink-free margin")


def check_loss_gradients(seed=0, instances=20, eps=1e-6, floor=1e-6, corrupt=False):
    """Hinge-loss gradients vs finite differences, away from the kinks."""
    rng = seeded_rng(seed, _LOSS_STREAM)
    worst = (0.0, "none")
    for instance in range(instances):
        dim = int(rng.integers(2, 9))
        k = int(rng.integers(1, 6))
        p1 = rng.standard_normal(dim)
        p2 = rng.standard_normal(dim)
        contrasts = [rng.standard_normal(dim) for _ in range(k)]
        margin = _kink_safe_margin(p1, p2, contrasts, rng)

        def f():
            return contrastive_loss(p1, p2, contrasts, margin).total

        g1, g2, gcs = contrastive_loss_backward(p1, p2, contrasts, margin)
        analytic = {"p1": g1, "p2": g2}
        analytic.update({f"c{i}": g for i, g in enumerate(gcs)})
        if corrupt:
            analytic = _corrupt(analytic)
        probes = {"p1": p1, "p2": p2}
        probes.update({f"c{i}": c for i, c in enumerate(contrasts)})
        worst = _compare(analytic, f, probes, eps, floor, f"instance {instance}", worst)
    return CheckResult("loss", worst[0], worst[1], LOSS_THRESHOLD,
                       worst[0] < LOSS_THRESHOLD)


def analytic_end_to_end(params, p1_vecs, p2_vecs, contrast_vec_lists, margin=1.0):
    """Loss and exact gradients of one full example through shared weights.

    Returns (loss_total, param_grads, input_grads) with input_grads listing
    per-token gradients for p1, p2, then each contrast phrase.
    """
    emb1, caches1 = gru_encode(params, p1_vecs)
    emb2, caches2 = gru_encode(params, p2_vecs)
    contrast_runs = [gru_encode(params, vecs) for vecs in contrast_vec_lists]
    contrast_vecs = [emb.vector for emb, _ in contrast_runs]
    breakdown = contrastive_loss(emb1.vector, emb2.vector, contrast_vecs, margin)
    g1, g2, gcs = contrastive_loss_backward(emb1.vector, emb2.vector, contrast_vecs,
                                            margin)
    grads = params.zero_grads()
    input_grads = []
    runs = [(caches1, g1), (caches2, g2)] + \
        [(caches, gc) for (_, caches), gc in zip(contrast_runs, gcs)]
    for caches, grad_emb in runs:
        step_grads, token_grads = gru_backward(params, caches, grad_emb)
        for name, g in step_grads.items():
            grads[name] += g
        input_grads.append(token_grads)
    return breakdown.total, grads, input_grads


def check_end_to_end(seed=0, dim=4, eps=1e-5, floor=1e-5, corrupt=False):
    """Encoder + loss composition vs finite differences on a small model."""
    rng = seeded_rng(seed, _END_TO_END_STREAM)
    params = GruParams.init(dim, dim, rng)
    p1_vecs = [rng.standard_normal(dim) for _ in range(2)]
    p2_vecs = [rng.standard_normal(dim) for _ in range(2)]
    contrast_vecs = [[rng.standard_normal(dim) for _ in range(2)]]

    def embeddings():
        e1, _ = gru_encode(params, p1_vecs)
        e2, _ = gru_encode(params, p2_vecs)
        ec, _ = gru_encode(params, contrast_vecs[0])
        return e1.vector, e2.vector, ec.vector

    v1, v2, vc = embeddings()
    margin = _kink_safe_margin(v1, v2, [vc], rng)

    def f():
        e1, e2, ec = embeddings()
        return contrastive_loss(e1, e2, [ec], margin).total

    _, grads, input_grads = analytic_end_to_end(params, p1_vecs, p2_vecs,
                                                contrast_vecs, margin)
    if corrupt:
        grads = _corrupt(grads)
    worst = (0.0, "none")
    worst = _compare(grads, f, params.named_arrays(), eps, floor, "shared weights", worst)
    phrase_names = ["p1", "p2", "c0"]
    for phrase_idx, vec_list in enumerate([p1_vecs, p2_vecs, contrast_vecs[0]]):
        analytic = {f"{phrase_names[phrase_idx]}.x{t}": g
                    for t, g in enumerate(input_grads[phrase_idx])}
        probes = {f"{phrase_names[phrase_idx]}.x{t}": v
                  for t, v in enumerate(vec_list)}
        worst = _compare(analytic, f, probes, eps, floor, "token inputs", worst)
    return CheckResult("end_to_end", worst[0], worst[1], END_TO_END_THRESHOLD,
                       worst[0] < END_TO_END_THRESHOLD)


def run_all_checks(seed=0, max_dim=8, max_len=6, corrupt=False):
    """The three suites in order; the CLI prints one report line per result."""
    return [
        check_encoder_gradients(seed=seed, max_dim=max_dim, max_len=max_len,
                                corrupt=corrupt),
        check_loss_gradients(seed=seed, corrupt=corrupt),
        check_end_to_end(seed=seed, corrupt=corrupt),
    ]
