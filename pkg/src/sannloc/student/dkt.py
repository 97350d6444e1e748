"""Deep knowledge tracing, optionally with frozen code vectors appended to each step."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..nn import (
    IndexOutOfRange,
    ParamStore,
    adamax_step,
    bce_loss,
    dropout_mask,
    glorot_uniform,
    lstm_backward_projected,
    lstm_forward_projected,
    sigmoid,
)
from ..forge.students import Event, StudentTrace
from .metrics import auc


class TraceTooShort(ValueError):
    pass


class SingleStudentSplitViolation(ValueError):
    pass


@dataclass
class DktConfig:
    hidden: int = 200
    dropout: float = 0.2
    lr: float = 0.005
    epochs: int = 40
    early_stop_patience: int = 5
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.hidden < 1 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("hidden, batch_size and epochs must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "DktConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown DKT options: {sorted(extra)}")
        return cls(**d)


def encode_dkt_step(q: int, a: int, M: int) -> np.ndarray:
    """Binary vector of length 2M with 1-based position q + M(1 - a) set."""
    if not 1 <= q <= M:
        raise IndexOutOfRange(f"problem {q} outside 1..{M}")
    if a not in (0, 1):
        raise ValueError("a must be 0 or 1")
    x = np.zeros(2 * M)
    x[q + M * (1 - a) - 1] = 1.0
    return x


@dataclass
class DktModel:
    params: ParamStore
    M: int
    code_dim: int
    config: DktConfig
    history: list[dict] = field(default_factory=list)


def init_dkt(M: int, code_dim: int, config: DktConfig) -> ParamStore:
    """The one-hot block, recurrent weights and head come from one stream and the code block
    from another, so plain and code-augmented models start identically."""
    base_seed, code_seed = np.random.SeedSequence([config.seed, 17]).spawn(2)
    rng = np.random.default_rng(base_seed)
    H = config.hidden
    store = ParamStore()
    store.add("W_onehot", glorot_uniform(rng, 2 * M, 4 * H))
    store.add("U", glorot_uniform(rng, H, 4 * H))
    b = np.zeros(4 * H)
    b[H:2 * H] = 1.0
    store.add("b", b)
    store.add("W_out", glorot_uniform(rng, H, M))
    store.add("b_out", np.zeros(M))
    if code_dim:
        store.add("W_code", glorot_uniform(np.random.default_rng(code_seed), code_dim, 4 * H))
    return store


@dataclass
class _SeqBatch:
    onehot: np.ndarray  # [T, B, 2M]
    code: np.ndarray | None  # [T, B, d]
    next_q: np.ndarray  # [T, B] 0-based index of q_{t+1}
    next_a: np.ndarray  # [T, B]
    mask: np.ndarray  # [T, B] 1 where a next attempt exists


def _make_batch(traces: Sequence[StudentTrace], M: int, code: Mapping[str, np.ndarray] | None, code_dim: int) -> _SeqBatch:
    T = max(len(t.events) for t in traces)
    B = len(traces)
    onehot = np.zeros((T, B, 2 * M))
    cv = np.zeros((T, B, code_dim)) if code_dim else None
    next_q = np.zeros((T, B), dtype=np.int64)
    next_a = np.zeros((T, B))
    mask = np.zeros((T, B))
    for b, trace in enumerate(traces):
        ev = trace.events
        for t, e in enumerate(ev):
            onehot[t, b] = encode_dkt_step(e.q, e.a, M)
            if cv is not None and code is not None:
                cv[t, b] = code[e.program_id]
            if t + 1 < len(ev):
                next_q[t, b] = ev[t + 1].q - 1
                next_a[t, b] = ev[t + 1].a
                mask[t, b] = 1.0
    return _SeqBatch(onehot, cv, next_q, next_a, mask)


def _forward(params: ParamStore, batch: _SeqBatch, drop: tuple[np.ndarray, np.ndarray | None] | None):
    onehot = batch.onehot if drop is None else batch.onehot * drop[0]
    zx = onehot @ params["W_onehot"]
    code = batch.code
    if code is not None:
        if drop is not None:
            code = code * drop[1]
        zx = zx + code @ params["W_code"]
    hs, caches = lstm_forward_projected(zx, params["U"], params["b"])
    y = sigmoid(hs @ params["W_out"] + params["b_out"])
    return {"onehot": onehot, "code": code, "hs": hs, "caches": caches, "y": y}


def _gather(y: np.ndarray, next_q: np.ndarray) -> np.ndarray:
    return np.take_along_axis(y, next_q[..., None], axis=2)[..., 0]


def dkt_loss_from_forward(fw: dict, batch: _SeqBatch) -> float:
    """Summed BCE over valid steps divided by the number of sequences."""
    p = _gather(fw["y"], batch.next_q)
    per_step = bce_loss(p, batch.next_a) * batch.mask
    return float(per_step.sum() / batch.mask.shape[1])


def _backward(params: ParamStore, batch: _SeqBatch, fw: dict) -> None:
    T, B, M = fw["y"].shape
    p = _gather(fw["y"], batch.next_q)
    dlogit_sel = (p - batch.next_a) * batch.mask / B
    dlogit = np.zeros((T, B, M))
    np.put_along_axis(dlogit, batch.next_q[..., None], dlogit_sel[..., None], axis=2)
    hs = fw["hs"]
    H = hs.shape[2]
    params.accumulate("W_out", hs.reshape(-1, H).T @ dlogit.reshape(-1, M))
    params.accumulate("b_out", dlogit.sum(axis=(0, 1)))
    dhs = dlogit @ params["W_out"].T
    dzx, dU, db = lstm_backward_projected(dhs, fw["caches"], params["U"])
    params.accumulate("U", dU)
    params.accumulate("b", db)
    dz2 = dzx.reshape(-1, dzx.shape[2])
    params.accumulate("W_onehot", fw["onehot"].reshape(-1, 2 * M).T @ dz2)
    if fw["code"] is not None:
        params.accumulate("W_code", fw["code"].reshape(-1, fw["code"].shape[2]).T @ dz2)


def _check_traces(traces: Sequence[StudentTrace]) -> None:
    for t in traces:
        if len(t.events) < 2:
            raise TraceTooShort(f"trace {t.student_id} has fewer than two attempts")


def _check_disjoint(*groups: Sequence[StudentTrace]) -> None:
    seen: dict[str, int] = {}
    for gi, group in enumerate(groups):
        for t in group:
            if seen.get(t.student_id, gi) != gi:
                raise SingleStudentSplitViolation(f"student {t.student_id} appears in more than one split")
            seen[t.student_id] = gi


def _code_dim(code_vectors: Mapping[str, np.ndarray] | None) -> int:
    if not code_vectors:
        return 0
    return int(np.asarray(next(iter(code_vectors.values()))).shape[0])


def dkt_train(
    train_traces: Sequence[StudentTrace],
    val_traces: Sequence[StudentTrace],
    M: int,
    config: DktConfig,
    code_vectors: Mapping[str, np.ndarray] | None = None,
    log=None,
) -> DktModel:
    """Adamax training with input dropout; keeps the best validation-loss parameters."""
    _check_traces(train_traces)
    _check_traces(val_traces)
    _check_disjoint(train_traces, val_traces)
    code_dim = _code_dim(code_vectors)
    params = init_dkt(M, code_dim, config)
    shuffle_seed, drop_seed, drop_code_seed = np.random.SeedSequence([config.seed, 29]).spawn(3)
    shuffle_rng = np.random.default_rng(shuffle_seed)
    drop_rng = np.random.default_rng(drop_seed)
    drop_code_rng = np.random.default_rng(drop_code_seed)
    model = DktModel(params, M, code_dim, config)
    val_batch = _make_batch(val_traces, M, code_vectors, code_dim) if val_traces else None
    best = params.snapshot()
    best_loss = math.inf
    stale = 0
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(train_traces))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            group = [train_traces[i] for i in order[start:start + config.batch_size]]
            batch = _make_batch(group, M, code_vectors, code_dim)
            drop = (
                dropout_mask(drop_rng, batch.onehot.shape, config.dropout),
                dropout_mask(drop_code_rng, batch.code.shape, config.dropout) if batch.code is not None else None,
            )
            params.zero_grad()
            fw = _forward(params, batch, drop)
            total += dkt_loss_from_forward(fw, batch) * len(group)
            _backward(params, batch, fw)
            adamax_step(params, config.lr)
        val_loss = dkt_loss_from_forward(_forward(params, val_batch, None), val_batch) if val_batch else total
        model.history.append({"epoch": epoch, "train_loss": total / len(train_traces), "val_loss": val_loss})
        if log:
            log(f"dkt epoch {epoch}: train {total / len(train_traces):.4f} val {val_loss:.4f}")
        if val_loss < best_loss:
            best_loss, best, stale = val_loss, params.snapshot(), 0
        else:
            stale += 1
            if stale >= config.early_stop_patience:
                break
    params.load_snapshot(best)
    return model


def dkt_predict(
    model: DktModel, prefix: Sequence[Event], code_vectors: Mapping[str, np.ndarray] | None = None
) -> np.ndarray:
    """Per-problem success probabilities y (length M) after observing `prefix`."""
    if not prefix:
        raise TraceTooShort("empty prefix")
    batch = _make_batch([StudentTrace("prefix", list(prefix), [])], model.M, code_vectors, model.code_dim)
    return _forward(model.params, batch, None)["y"][-1, 0]


def dkt_scores(
    model: DktModel, traces: Sequence[StudentTrace], code_vectors: Mapping[str, np.ndarray] | None = None, chunk: int = 64
) -> list[tuple[str, int, int, float, int]]:
    """Rows (student_id, step, q_next, y_pred, a_true) for every next-attempt prediction."""
    rows = []
    for start in range(0, len(traces), chunk):
        group = list(traces[start:start + chunk])
        batch = _make_batch(group, model.M, code_vectors, model.code_dim)
        p = _gather(_forward(model.params, batch, None)["y"], batch.next_q)
        for b, trace in enumerate(group):
            for t in range(len(trace.events) - 1):
                rows.append((trace.student_id, t + 1, trace.events[t + 1].q, float(p[t, b]), trace.events[t + 1].a))
    return rows


def dkt_auc(model: DktModel, traces: Sequence[StudentTrace], code_vectors=None) -> float:
    return auc((r[3], r[4]) for r in dkt_scores(model, traces, code_vectors))


DKT_FORMAT = "sannloc-dkt"


def save_dkt(model: DktModel, path) -> None:
    obj = {
        "format": DKT_FORMAT,
        "version": 1,
        "M": model.M,
        "code_dim": model.code_dim,
        "config": asdict(model.config),
        "params": model.params.to_obj(),
    }
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_dkt(path) -> DktModel:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if obj["format"] != DKT_FORMAT or obj["version"] != 1:
            raise ValueError(f"unsupported DKT checkpoint {obj['format']!r} v{obj['version']!r}")
        return DktModel(ParamStore.from_obj(obj["params"]), obj["M"], obj["code_dim"], DktConfig.from_dict(obj["config"]))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValueError(f"{path}: corrupt DKT checkpoint ({exc})") from None
