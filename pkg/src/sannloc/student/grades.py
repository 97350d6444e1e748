"""Final-grade regression from per-problem submission histories."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..forge.students import StudentTrace
from ..nn import (
    ParamStore,
    ShapeMismatch,
    adamax_step,
    glorot_uniform,
    lstm_backward_projected,
    lstm_forward_projected,
)

SLOTS = 30
N_COUNT_FEATURES = 4


@dataclass
class GradeConfig:
    hidden: int = 512
    dense: int = 128
    lr: float = 0.001
    epochs: int = 100
    early_stop_patience: int = 10
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if min(self.hidden, self.dense, self.epochs, self.batch_size) < 1:
            raise ValueError("sizes and epochs must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "GradeConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown grade-model options: {sorted(extra)}")
        return cls(**d)


def assemble_grade_features(
    trace: StudentTrace,
    code_vectors: Mapping[str, np.ndarray],
    M: int,
    code_dim: int | None = None,
    slots: int = SLOTS,
) -> np.ndarray:
    """Rows [M, slots * d + 4]: each problem's last `slots` submission vectors, oldest first
    and zero-padded in front, followed by (n_correct, n_incorrect, n_total, problem_id / M)."""
    if code_dim is None:
        code_dim = int(np.asarray(next(iter(code_vectors.values()))).shape[0]) if code_vectors else 0
    rows = np.zeros((M, slots * code_dim + N_COUNT_FEATURES))
    per_problem: dict[int, list] = {q: [] for q in range(1, M + 1)}
    for e in trace.events:
        per_problem[e.q].append(e)
    for q, events in per_problem.items():
        row = rows[q - 1]
        kept = events[-slots:]
        offset = (slots - len(kept)) * code_dim
        for j, e in enumerate(kept):
            row[offset + j * code_dim: offset + (j + 1) * code_dim] = code_vectors[e.program_id]
        n_correct = sum(e.a for e in events)
        row[-4:] = (n_correct, len(events) - n_correct, len(events), q / M)
    return rows


@dataclass
class GradeModel:
    params: ParamStore
    config: GradeConfig
    n_features: int
    history: list[dict] = field(default_factory=list)


def init_grade(n_features: int, config: GradeConfig) -> ParamStore:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 53]))
    H, D = config.hidden, config.dense
    store = ParamStore()
    store.add("W_x", glorot_uniform(rng, n_features, 4 * H))
    store.add("U", glorot_uniform(rng, H, 4 * H))
    b = np.zeros(4 * H)
    b[H:2 * H] = 1.0
    store.add("b", b)
    store.add("W_d", glorot_uniform(rng, H, D))
    store.add("b_d", np.zeros(D))
    store.add("w_o", glorot_uniform(rng, D, 1))
    store.add("b_o", np.zeros(1))
    return store


def _check(features: np.ndarray, n_features: int | None = None) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 3:
        raise ShapeMismatch(f"features must be [students, problems, width], got {X.shape}")
    if n_features is not None and X.shape[2] != n_features:
        raise ShapeMismatch(f"feature width {X.shape[2]} != model width {n_features}")
    return X


def grade_forward(params: ParamStore, X: np.ndarray) -> dict:
    """Raw (unclamped) regression output for X[N, M, F]."""
    xs = np.transpose(X, (1, 0, 2))  # [M, N, F]
    zx = xs @ params["W_x"]
    hs, caches = lstm_forward_projected(zx, params["U"], params["b"])
    h = hs[-1]
    d = np.tanh(h @ params["W_d"] + params["b_d"])
    out = (d @ params["w_o"] + params["b_o"])[:, 0]
    return {"xs": xs, "hs": hs, "caches": caches, "d": d, "out": out}


def mse(out: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean((out - y) ** 2))


def grade_backward(params: ParamStore, fw: dict, y: np.ndarray) -> None:
    """Accumulate gradients of the batch-mean squared error."""
    n = y.shape[0]
    dout = 2.0 * (fw["out"] - y) / n  # [N]
    d = fw["d"]
    params.accumulate("w_o", d.T @ dout[:, None])
    params.accumulate("b_o", np.array([dout.sum()]))
    dd = dout[:, None] @ params["w_o"].T * (1.0 - d * d)
    h = fw["hs"][-1]
    params.accumulate("W_d", h.T @ dd)
    params.accumulate("b_d", dd.sum(axis=0))
    dhs = np.zeros_like(fw["hs"])
    dhs[-1] = dd @ params["W_d"].T
    dzx, dU, db = lstm_backward_projected(dhs, fw["caches"], params["U"])
    params.accumulate("U", dU)
    params.accumulate("b", db)
    xs = fw["xs"]
    params.accumulate("W_x", xs.reshape(-1, xs.shape[2]).T @ dzx.reshape(-1, dzx.shape[2]))


def grade_train(
    features: np.ndarray,
    grades: Sequence[float],
    config: GradeConfig,
    val: tuple[np.ndarray, Sequence[float]] | None = None,
    log=None,
) -> GradeModel:
    """Adamax on MSE; early stopping on validation MSE when a validation set is given."""
    X = _check(features)
    y = np.asarray(grades, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise ShapeMismatch("one grade per student required")
    if np.any((y < 0) | (y > 1)):
        raise ValueError("grades must lie in [0, 1]")
    params = init_grade(X.shape[2], config)
    model = GradeModel(params, config, X.shape[2])
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 59]))
    if val is not None:
        Xv, yv = _check(val[0], X.shape[2]), np.asarray(val[1], dtype=np.float64)
    best, best_loss, stale = params.snapshot(), math.inf, 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(X.shape[0])
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            params.zero_grad()
            fw = grade_forward(params, X[idx])
            total += mse(fw["out"], y[idx]) * len(idx)
            grade_backward(params, fw, y[idx])
            adamax_step(params, config.lr)
        train_loss = total / X.shape[0]
        monitor = mse(grade_forward(params, Xv)["out"], yv) if val is not None else train_loss
        model.history.append({"epoch": epoch, "train_mse": train_loss, "val_mse": monitor})
        if log:
            log(f"grade epoch {epoch}: train {train_loss:.5f} val {monitor:.5f}")
        if monitor < best_loss:
            best, best_loss, stale = params.snapshot(), monitor, 0
        else:
            stale += 1
            if stale >= config.early_stop_patience:
                break
    params.load_snapshot(best)
    return model


def clamp_grade(raw: np.ndarray) -> np.ndarray:
    return np.clip(raw, 0.0, 1.0)


def grade_predict(features: np.ndarray, model: GradeModel) -> np.ndarray:
    X = _check(features, model.n_features)
    return clamp_grade(grade_forward(model.params, X)["out"])


GRADE_FORMAT = "sannloc-grade"


def save_grade(model: GradeModel, path) -> None:
    obj = {
        "format": GRADE_FORMAT,
        "version": 1,
        "n_features": model.n_features,
        "config": asdict(model.config),
        "params": model.params.to_obj(),
    }
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_grade(path) -> GradeModel:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if obj["format"] != GRADE_FORMAT or obj["version"] != 1:
            raise ValueError(f"unsupported grade checkpoint {obj['format']!r} v{obj['version']!r}")
        return GradeModel(ParamStore.from_obj(obj["params"]), GradeConfig.from_dict(obj["config"]), obj["n_features"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValueError(f"{path}: corrupt grade checkpoint ({exc})") from None
