"""Differentiable operations as explicit forward/backward pairs over float64 numpy arrays.

Each `op` returns its output; the matching `op_backward` takes the upstream gradient plus
whatever forward values it needs and returns gradients for every input. Nothing here keeps
a tape: callers (the models) wire the chain rule by hand.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

DEBUG = bool(os.environ.get("SANNLOC_DEBUG"))
BCE_CLAMP = 1e-7


class ShapeMismatch(ValueError):
    pass


class IndexOutOfRange(IndexError):
    pass


class ZeroLength(ValueError):
    pass


class NonFiniteValue(FloatingPointError):
    pass


def check_finite(name: str, *arrays) -> None:
    if not DEBUG:
        return
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue(f"non-finite values in {name}")


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# dense -----------------------------------------------------------------------

def dense(x, W, b):
    if x.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ShapeMismatch(f"dense: x{x.shape} W{W.shape} b{b.shape}")
    return x @ W + b


def dense_backward(dy, x, W):
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    dW = x2.T @ dy2
    db = dy2.sum(axis=0)
    dx = dy @ W.T
    return dx, dW, db


# embeddings ------------------------------------------------------------------

def _check_ids(ids, n_rows: int) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= n_rows):
        raise IndexOutOfRange(f"embedding id outside [0, {n_rows})")
    return ids


def embedding_lookup(ids, E):
    return E[_check_ids(ids, E.shape[0])]


def embedding_backward(dy, ids, n_rows: int):
    ids = _check_ids(ids, n_rows)
    dE = np.zeros((n_rows, dy.shape[-1]))
    np.add.at(dE, ids.reshape(-1), dy.reshape(-1, dy.shape[-1]))
    return dE


def masked_mean_pool(x, lengths):
    """x[n, L, d] -> [n, d]: mean of the first lengths[i] rows of each item."""
    n, L, _ = x.shape
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.shape != (n,):
        raise ShapeMismatch("one length per row required")
    if np.any(lengths < 1) or np.any(lengths > L):
        raise ZeroLength("lengths must lie in [1, L]")
    mask = (np.arange(L)[None, :] < lengths[:, None]).astype(np.float64)
    return (x * mask[:, :, None]).sum(axis=1) / lengths[:, None]


def masked_mean_pool_backward(dy, lengths, L: int):
    lengths = np.asarray(lengths, dtype=np.int64)
    mask = (np.arange(L)[None, :] < lengths[:, None]).astype(np.float64)
    return (mask / lengths[:, None])[:, :, None] * dy[:, None, :]


def bag_matrix(seqs, n_rows: int, pad: int = 0) -> sp.csr_matrix:
    """Sparse averaging matrix so that `bag_matrix(seqs) @ E` equals masked mean pooling
    of embedding_lookup(seqs, E). Rows made only of `pad` ids (padding items) stay zero."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for seq in seqs:
        real = [i for i in seq if i != pad]
        if real:
            w = 1.0 / len(real)
            indices.extend(real)
            data.extend([w] * len(real))
        indptr.append(len(indices))
    if indices and (min(indices) < 0 or max(indices) >= n_rows):
        raise IndexOutOfRange(f"node id outside [0, {n_rows})")
    return sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(seqs), n_rows),
    )


# attention -------------------------------------------------------------------

def _valid(mask, shape):
    return np.ones(shape) if mask is None else np.asarray(mask, dtype=np.float64)


def sigmoid_attention_pool(sv, av, mask=None):
    """Independent sigmoid weights a_i = sigmoid(sv_i . av); c = (1/n) sum_i a_i sv_i.

    sv has shape [..., n, d]; `mask` ([..., n], 1 for real subtrees) excludes padding
    from both the weights and the count n.
    """
    if sv.shape[-1] != av.shape[0]:
        raise ShapeMismatch(f"attention: sv{sv.shape} av{av.shape}")
    m = _valid(mask, sv.shape[:-1])
    a = sigmoid(sv @ av) * m
    n = m.sum(axis=-1, keepdims=True)
    c = (a[..., None] * sv).sum(axis=-2) / n
    return c, a


def sigmoid_attention_pool_backward(dc, da, sv, av, a, mask=None):
    """Gradients of (c, a) w.r.t. (sv, av). `da` may be None when only c is used."""
    m = _valid(mask, sv.shape[:-1])
    n = m.sum(axis=-1, keepdims=True)
    dcn = dc / n
    da_total = (sv * dcn[..., None, :]).sum(axis=-1)
    if da is not None:
        da_total = da_total + da
    dz = da_total * a * (1.0 - a) * m
    dsv = a[..., None] * dcn[..., None, :] + dz[..., None] * av
    dav = (dz[..., None] * sv).reshape(-1, sv.shape[-1]).sum(axis=0)
    return dsv, dav


def softmax_attention_pool(sv, av, mask=None):
    """Normalized ablation: a = softmax_i(sv_i . av) over real subtrees; c = sum_i a_i sv_i."""
    if sv.shape[-1] != av.shape[0]:
        raise ShapeMismatch(f"attention: sv{sv.shape} av{av.shape}")
    m = _valid(mask, sv.shape[:-1])
    z = np.where(m > 0, sv @ av, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z) * m
    a = e / e.sum(axis=-1, keepdims=True)
    c = (a[..., None] * sv).sum(axis=-2)
    return c, a


def softmax_attention_pool_backward(dc, da, sv, av, a, mask=None):
    m = _valid(mask, sv.shape[:-1])
    da_total = (sv * dc[..., None, :]).sum(axis=-1)
    if da is not None:
        da_total = da_total + da
    dz = a * (da_total - (a * da_total).sum(axis=-1, keepdims=True)) * m
    dsv = a[..., None] * dc[..., None, :] + dz[..., None] * av
    dav = (dz[..., None] * sv).reshape(-1, sv.shape[-1]).sum(axis=0)
    return dsv, dav


def entropy_regularizer(a, lam: float, eps: float):
    """-lam * sum_i a_i log(a_i + eps) over the last axis. Terms with a_i = 0 are exactly 0."""
    a = np.asarray(a, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(a > 0, a * np.log(a + eps), 0.0)
    return -lam * terms.sum(axis=-1)


def entropy_regularizer_grad(a, lam: float, eps: float):
    a = np.asarray(a, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return -lam * (np.log(a + eps) + a / (a + eps))


# losses ------------------------------------------------------------------------

def bce_loss(p, y):
    p = np.clip(np.asarray(p, dtype=np.float64), BCE_CLAMP, 1.0 - BCE_CLAMP)
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


def bce_grad(p, y):
    """d bce / d p, zero where the clamp is active."""
    p = np.asarray(p, dtype=np.float64)
    pc = np.clip(p, BCE_CLAMP, 1.0 - BCE_CLAMP)
    g = -(y / pc) + (1.0 - y) / (1.0 - pc)
    return np.where((p > BCE_CLAMP) & (p < 1.0 - BCE_CLAMP), g, 0.0)


def bce_logit_grad(p, y):
    """d bce(sigmoid(z)) / d z for p = sigmoid(z). Equal to bce_grad(p, y) * p (1 - p)
    inside the clamp; kept as p - y outside it so saturated mistakes still get a signal."""
    return np.asarray(p, dtype=np.float64) - y


# LSTM ------------------------------------------------------------------------------

def lstm_step(x, h, c, W, b):
    """One LSTM step. W is [d_in + d_h, 4 d_h] with gate blocks ordered (i, f, g, o).

    Works on a single vector or a batch (leading axis). Returns (h', c', cache).
    """
    d_h = h.shape[-1]
    if W.shape != (x.shape[-1] + d_h, 4 * d_h) or b.shape != (4 * d_h,) or c.shape != h.shape:
        raise ShapeMismatch(f"lstm: x{x.shape} h{h.shape} c{c.shape} W{W.shape} b{b.shape}")
    xh = np.concatenate([x, h], axis=-1)
    z = xh @ W + b
    i = sigmoid(z[..., :d_h])
    f = sigmoid(z[..., d_h:2 * d_h])
    g = np.tanh(z[..., 2 * d_h:3 * d_h])
    o = sigmoid(z[..., 3 * d_h:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (xh, c, i, f, g, o, tc)


def lstm_step_backward(dh, dc, cache, W):
    """Returns (dx, dh_prev, dc_prev, dW, db) for one step."""
    xh, c_prev, i, f, g, o, tc = cache
    d_h = dh.shape[-1]
    do = dh * tc
    dc = dc + dh * o * (1.0 - tc * tc)
    df = dc * c_prev
    di = dc * g
    dg = dc * i
    dc_prev = dc * f
    dz = np.concatenate(
        [di * i * (1 - i), df * f * (1 - f), dg * (1 - g * g), do * o * (1 - o)], axis=-1
    )
    xh2 = xh.reshape(-1, xh.shape[-1])
    dz2 = dz.reshape(-1, dz.shape[-1])
    dW = xh2.T @ dz2
    db = dz2.sum(axis=0)
    dxh = dz @ W.T
    d_in = xh.shape[-1] - d_h
    return dxh[..., :d_in], dxh[..., d_in:], dc_prev, dW, db


def lstm_forward(xs, W, b, h0=None, c0=None):
    """Run an LSTM over xs[T, B, d_in]; returns hs[T, B, d_h] and per-step caches."""
    T, B, _ = xs.shape
    d_h = b.shape[0] // 4
    h = np.zeros((B, d_h)) if h0 is None else h0
    c = np.zeros((B, d_h)) if c0 is None else c0
    hs = np.empty((T, B, d_h))
    caches = []
    for t in range(T):
        h, c, cache = lstm_step(xs[t], h, c, W, b)
        hs[t] = h
        caches.append(cache)
    return hs, caches


def lstm_backward(dhs, caches, W):
    """Backprop through time. dhs[T, B, d_h] holds dLoss/dh_t from the layers above."""
    T, B, d_h = dhs.shape
    d_in = W.shape[0] - d_h
    dxs = np.empty((T, B, d_in))
    dW = np.zeros_like(W)
    db = np.zeros(W.shape[1])
    dh_next = np.zeros((B, d_h))
    dc_next = np.zeros((B, d_h))
    for t in range(T - 1, -1, -1):
        dx, dh_next, dc_next, dW_t, db_t = lstm_step_backward(dhs[t] + dh_next, dc_next, caches[t], W)
        dxs[t] = dx
        dW += dW_t
        db += db_t
    return dxs, dW, db


def dropout_mask(rng: np.random.Generator, shape, rate: float):
    if rate <= 0.0:
        return np.ones(shape)
    keep = 1.0 - rate
    return (rng.random(shape) < keep) / keep


def lstm_forward_projected(zx, U, b, h0=None, c0=None):
    """LSTM whose input contribution zx[T, B, 4 d_h] = x_t @ W_x is computed by the caller.

    Keeping the input projection outside lets callers split it over several input blocks
    (an all-zero block then contributes an exact 0.0 to every gate).
    """
    T, B, four_h = zx.shape
    d_h = U.shape[0]
    if U.shape != (d_h, 4 * d_h) or four_h != 4 * d_h or b.shape != (4 * d_h,):
        raise ShapeMismatch(f"lstm: zx{zx.shape} U{U.shape} b{b.shape}")
    h = np.zeros((B, d_h)) if h0 is None else h0
    c = np.zeros((B, d_h)) if c0 is None else c0
    hs = np.empty((T, B, d_h))
    caches = []
    for t in range(T):
        z = zx[t] + h @ U + b
        i = sigmoid(z[:, :d_h])
        f = sigmoid(z[:, d_h:2 * d_h])
        g = np.tanh(z[:, 2 * d_h:3 * d_h])
        o = sigmoid(z[:, 3 * d_h:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        caches.append((h, c, i, f, g, o, tc))
        h = o * tc
        c = c_new
        hs[t] = h
    return hs, caches


def lstm_backward_projected(dhs, caches, U):
    """Backprop through time for lstm_forward_projected; returns (dzx, dU, db)."""
    T, B, d_h = dhs.shape
    dzx = np.empty((T, B, 4 * d_h))
    dU = np.zeros_like(U)
    dh_next = np.zeros((B, d_h))
    dc_next = np.zeros((B, d_h))
    for t in range(T - 1, -1, -1):
        h_prev, c_prev, i, f, g, o, tc = caches[t]
        dh = dhs[t] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = np.concatenate(
            [dc * g * i * (1 - i), dc * c_prev * f * (1 - f), dc * i * (1 - g * g), do * o * (1 - o)], axis=1
        )
        dzx[t] = dz
        dU += h_prev.T @ dz
        dh_next = dz @ U.T
        dc_next = dc * f
    return dzx, dU, dzx.sum(axis=(0, 1))
