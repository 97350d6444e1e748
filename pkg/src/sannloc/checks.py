"""Finite-difference verification of every differentiable layer and of the three training losses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import ops
from .nn.gradcheck import finite_diff_check
from .nn.params import ParamStore

LAYER_TOL = 1e-5
LOSS_TOL = 1e-4


@dataclass
class GradcheckResult:
    name: str
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_error <= self.tolerance)

    def to_obj(self) -> dict:
        return {"name": self.name, "max_rel_error": self.max_rel_error, "tolerance": self.tolerance, "passed": self.passed}


def _scalarize(rng, shape):
    """Random projection weights turning a tensor output into a scalar test function."""
    return rng.normal(size=shape)


def check_dense(rng) -> float:
    x, W, b = rng.normal(size=(4, 5)), rng.normal(size=(5, 3)), rng.normal(size=3)
    r = _scalarize(rng, (4, 3))
    dx, dW, db = ops.dense_backward(r, x, W)
    f = lambda: float((ops.dense(x, W, b) * r).sum())
    return finite_diff_check(f, {"x": x, "W": W, "b": b}, {"x": dx, "W": dW, "b": db})


def check_embedding(rng) -> float:
    E = rng.normal(size=(6, 4))
    ids = np.array([0, 2, 2, 5])
    r = _scalarize(rng, (4, 4))
    f = lambda: float((ops.embedding_lookup(ids, E) * r).sum())
    return finite_diff_check(f, {"E": E}, {"E": ops.embedding_backward(r, ids, 6)})


def check_masked_mean_pool(rng) -> float:
    x = rng.normal(size=(3, 5, 4))
    lengths = np.array([1, 3, 5])
    r = _scalarize(rng, (3, 4))
    f = lambda: float((ops.masked_mean_pool(x, lengths) * r).sum())
    return finite_diff_check(f, {"x": x}, {"x": ops.masked_mean_pool_backward(r, lengths, 5)})


def _check_attention(rng, pool, backward) -> float:
    sv, av = rng.normal(size=(5, 4)) * 0.7, rng.normal(size=4)
    rc, ra = _scalarize(rng, 4), _scalarize(rng, 5)

    def f():
        c, a = pool(sv, av)
        return float(c @ rc + a @ ra)

    _, a = pool(sv, av)
    dsv, dav = backward(rc, ra, sv, av, a)
    return finite_diff_check(f, {"sv": sv, "av": av}, {"sv": dsv, "av": dav})


def check_sigmoid_attention(rng) -> float:
    return _check_attention(rng, ops.sigmoid_attention_pool, ops.sigmoid_attention_pool_backward)


def check_softmax_attention(rng) -> float:
    return _check_attention(rng, ops.softmax_attention_pool, ops.softmax_attention_pool_backward)


def check_entropy(rng) -> float:
    a = rng.uniform(0.05, 0.95, size=6)
    f = lambda: float(ops.entropy_regularizer(a, 0.7, 1e-8))
    return finite_diff_check(f, {"a": a}, {"a": ops.entropy_regularizer_grad(a, 0.7, 1e-8)})


def check_bce(rng) -> float:
    p = np.array([0.3, 0.8, 0.55])
    y = np.array([1.0, 0.0, 1.0])
    f = lambda: float(ops.bce_loss(p, y).sum())
    return finite_diff_check(f, {"p": p}, {"p": ops.bce_grad(p, y)})


def check_lstm(rng) -> float:
    """Three-step BPTT through the concatenated-weight LSTM."""
    T, B, d_in, d_h = 3, 2, 3, 4
    xs = rng.normal(size=(T, B, d_in))
    W = rng.normal(size=(d_in + d_h, 4 * d_h)) * 0.5
    b = rng.normal(size=4 * d_h) * 0.1
    r = _scalarize(rng, (T, B, d_h))
    f = lambda: float((ops.lstm_forward(xs, W, b)[0] * r).sum())
    hs, caches = ops.lstm_forward(xs, W, b)
    dxs, dW, db = ops.lstm_backward(r, caches, W)
    return finite_diff_check(f, {"xs": xs, "W": W, "b": b}, {"xs": dxs, "W": dW, "b": db})


def check_lstm_projected(rng) -> float:
    T, B, d_h = 3, 2, 4
    zx = rng.normal(size=(T, B, 4 * d_h))
    U = rng.normal(size=(d_h, 4 * d_h)) * 0.5
    b = rng.normal(size=4 * d_h) * 0.1
    r = _scalarize(rng, (T, B, d_h))
    f = lambda: float((ops.lstm_forward_projected(zx, U, b)[0] * r).sum())
    _, caches = ops.lstm_forward_projected(zx, U, b)
    dzx, dU, db = ops.lstm_backward_projected(r, caches, U)
    return finite_diff_check(f, {"zx": zx, "U": U, "b": b}, {"zx": dzx, "U": dU, "b": db})


def _grads_of(store: ParamStore, fill) -> dict[str, np.ndarray]:
    store.zero_grad()
    fill()
    return {k: store.grads[k].copy() for k in store}


def check_sann_loss(rng, entropy_lambda: float = 0.05) -> float:
    """Combined BCE + entropy loss of the subtree-attention model on a two-program batch.

    The regularizer weight is raised above its training default so its gradient is
    visible next to the BCE term.
    """
    from .lang import parse
    from .sann import SannConfig, backward_batch, batch_from_programs, batch_loss, forward_batch, init_params
    from .subtrees import build_vocab, encode_program

    sources = [
        "int f(int a) { if (a < 0) { return -a; } return a; }",
        "boolean g(int x, int y) { return x > 3 && y <= x; }",
    ]
    asts = [parse(s) for s in sources]
    vocab = build_vocab(asts, 1)
    config = SannConfig(embed_dim=4, entropy_lambda=entropy_lambda, seed=int(rng.integers(1 << 31)))
    eps = [encode_program(t, vocab, label, 16, 8) for t, label in zip(asts, (1, 0))]
    params = init_params(vocab, config, rng)
    # Move the attention logits off zero so the entropy term has a non-trivial gradient.
    params["av"][...] = rng.normal(size=params["av"].shape)
    params["b_td"][...] = rng.normal(size=params["b_td"].shape) * 0.3
    batch = batch_from_programs(eps, vocab.n_nodes)
    f = lambda: float(batch_loss(forward_batch(params, batch, config), batch, config).mean())
    grads = _grads_of(params, lambda: backward_batch(params, batch, forward_batch(params, batch, config), config))
    return finite_diff_check(f, params.params, grads, max_coords=40, seed=1)


def check_dkt_loss(rng) -> float:
    from .forge.students import Event, StudentTrace
    from .student.dkt import DktConfig, _backward, _forward, _make_batch, dkt_loss_from_forward, init_dkt

    M, d = 3, 2
    traces = [
        StudentTrace("a", [Event(1, 0, "p1"), Event(1, 1, "p2"), Event(2, 0, "p3")], []),
        StudentTrace("b", [Event(3, 1, "p4"), Event(2, 1, "p5")], []),
    ]
    code = {f"p{i}": rng.normal(size=d) for i in range(1, 6)}
    params = init_dkt(M, d, DktConfig(hidden=4, seed=int(rng.integers(1 << 31))))
    batch = _make_batch(traces, M, code, d)
    f = lambda: dkt_loss_from_forward(_forward(params, batch, None), batch)
    grads = _grads_of(params, lambda: _backward(params, batch, _forward(params, batch, None)))
    return finite_diff_check(f, params.params, grads)


def check_grade_loss(rng) -> float:
    from .student.grades import GradeConfig, grade_backward, grade_forward, init_grade, mse

    X = rng.normal(size=(2, 3, 5))
    y = np.array([0.2, 0.9])
    params = init_grade(5, GradeConfig(hidden=4, dense=3, seed=int(rng.integers(1 << 31))))
    f = lambda: mse(grade_forward(params, X)["out"], y)
    grads = _grads_of(params, lambda: grade_backward(params, grade_forward(params, X), y))
    return finite_diff_check(f, params.params, grads)


LAYER_CHECKS = {
    "dense": check_dense,
    "embedding_lookup": check_embedding,
    "masked_mean_pool": check_masked_mean_pool,
    "sigmoid_attention_pool": check_sigmoid_attention,
    "softmax_attention_pool": check_softmax_attention,
    "entropy_regularizer": check_entropy,
    "bce_loss": check_bce,
    "lstm": check_lstm,
    "lstm_projected": check_lstm_projected,
}

LOSS_CHECKS = {
    "sann_combined_loss": check_sann_loss,
    "dkt_loss": check_dkt_loss,
    "grade_mse": check_grade_loss,
}


def run_gradchecks(seed: int = 0) -> list[GradcheckResult]:
    results = []
    for i, (name, fn) in enumerate(list(LAYER_CHECKS.items()) + list(LOSS_CHECKS.items())):
        rng = np.random.default_rng([seed, i])
        tol = LAYER_TOL if name in LAYER_CHECKS else LOSS_TOL
        results.append(GradcheckResult(name, fn(rng), tol))
    return results
