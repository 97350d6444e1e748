"""Subtree-attention network: two-way subtree embedding, time-distributed dense layer,
sigmoid attention pooling and a logistic correctness head, trained with BCE plus an
entropy penalty on the attention weights."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .lang import Span
from .nn import ops
from .nn.params import ParamStore, adamax_step, embedding_init, glorot_uniform
from .subtrees import PAD, EncodedProgram, Vocab

CHECKPOINT_FORMAT = "sannloc-checkpoint"
CHECKPOINT_VERSION = 1


class SingleClassDataset(ValueError):
    pass


class VersionMismatch(ValueError):
    pass


class CorruptCheckpoint(ValueError):
    pass


@dataclass
class SannConfig:
    embed_dim: int = 128
    max_subtrees: int = 128
    max_nodes: int = 64
    min_frequency: int = 2
    entropy_lambda: float = 3.5e-5
    epsilon: float = 1e-8
    lr: float = 0.001
    epochs: int = 100
    early_stop_patience: int = 20
    batch_size: int = 32
    seed: int = 0
    attention: str = "sigmoid"

    def __post_init__(self):
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        if self.entropy_lambda < 0:
            raise ValueError("entropy_lambda must be >= 0")
        if self.early_stop_patience > self.epochs:
            raise ValueError("early_stop_patience must not exceed epochs")
        if self.attention not in ("sigmoid", "softmax"):
            raise ValueError("attention must be 'sigmoid' or 'softmax'")

    @classmethod
    def from_dict(cls, d: dict) -> "SannConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown SANN config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SannOutput:
    prob_correct: float
    code_vector: np.ndarray
    attention: list[tuple[int, float, Span]]
    serializations: tuple[str, ...] = ()

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w, _ in self.attention])


@dataclass
class History:
    epochs: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    items_per_sec: float = 0.0
    backward_items: int = 0

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss,val_acc"]
        for e in self.epochs:
            lines.append(f"{e['epoch']},{e['train_loss']!r},{e['val_loss']!r},{e['val_acc']!r}")
        return "\n".join(lines) + "\n"


def init_params(vocab: Vocab, config: SannConfig, rng: np.random.Generator | None = None) -> ParamStore:
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    d = config.embed_dim
    store = ParamStore()
    store.add("E_subtree", embedding_init(rng, vocab.n_subtrees, d))
    store.add("E_node", embedding_init(rng, vocab.n_nodes, d))
    store.add("W_td", glorot_uniform(rng, 2 * d, d))
    store.add("b_td", np.zeros(d))
    store.add("av", glorot_uniform(rng, d, 1, shape=(d,)))
    store.add("w_out", glorot_uniform(rng, d, 1, shape=(d,)))
    store.add("b_out", np.zeros(1))
    return store


# batching ------------------------------------------------------------------------

@dataclass
class _Packed:
    sub_ids: np.ndarray
    bag_indices: np.ndarray
    bag_rowlen: np.ndarray


def _pack(ep: EncodedProgram) -> _Packed:
    if ep.n < 1:
        raise ValueError("encoded program has no subtrees")
    rowlen = []
    indices = []
    for seq in ep.node_id_seqs:
        real = [i for i in seq if i != PAD]
        if not real:
            raise ValueError("subtree with an all-PAD node sequence")
        rowlen.append(len(real))
        indices.extend(real)
    return _Packed(np.asarray(ep.subtree_ids, dtype=np.int64), np.asarray(indices, dtype=np.int64),
                   np.asarray(rowlen, dtype=np.int64))


@dataclass
class Batch:
    sub_ids: np.ndarray   # [B, N], PAD beyond each program's n
    mask: np.ndarray      # [B, N] float, 1 for real subtrees
    bag: sp.csr_matrix    # [B*N, V_nodes] node-mean pooling matrix
    labels: np.ndarray    # [B]


def make_batch(packed: Sequence[_Packed], labels: Sequence[int], n_nodes: int) -> Batch:
    B = len(packed)
    N = max(len(p.sub_ids) for p in packed)
    sub_ids = np.zeros((B, N), dtype=np.int64)
    mask = np.zeros((B, N))
    rowlens = np.zeros(B * N, dtype=np.int64)
    for b, p in enumerate(packed):
        n = len(p.sub_ids)
        sub_ids[b, :n] = p.sub_ids
        mask[b, :n] = 1.0
        rowlens[b * N:b * N + n] = p.bag_rowlen
    indices = np.concatenate([p.bag_indices for p in packed])
    if indices.size and indices.max() >= n_nodes:
        raise ops.IndexOutOfRange("node id outside vocabulary")
    weights = np.repeat(np.where(rowlens > 0, 1.0 / np.maximum(rowlens, 1), 0.0), rowlens)
    indptr = np.concatenate([[0], np.cumsum(rowlens)])
    bag = sp.csr_matrix((weights, indices, indptr), shape=(B * N, n_nodes))
    return Batch(sub_ids, mask, bag, np.asarray(labels, dtype=np.float64))


def batch_from_programs(programs: Sequence[EncodedProgram], n_nodes: int) -> Batch:
    return make_batch([_pack(p) for p in programs], [p.label for p in programs], n_nodes)


# forward / backward ----------------------------------------------------------------

def _attend(config: SannConfig):
    if config.attention == "softmax":
        return ops.softmax_attention_pool, ops.softmax_attention_pool_backward
    return ops.sigmoid_attention_pool, ops.sigmoid_attention_pool_backward


def forward_batch(params: ParamStore, batch: Batch, config: SannConfig) -> dict:
    E_s, E_n = params["E_subtree"], params["E_node"]
    if batch.sub_ids.size and batch.sub_ids.max() >= E_s.shape[0]:
        raise ops.IndexOutOfRange("subtree id outside vocabulary")
    B, N = batch.sub_ids.shape
    d = E_s.shape[1]
    es = ops.embedding_lookup(batch.sub_ids, E_s)
    en = (batch.bag @ E_n).reshape(B, N, d)
    u = np.concatenate([es, en], axis=-1)
    sv = np.tanh(ops.dense(u, params["W_td"], params["b_td"])) * batch.mask[..., None]
    pool, _ = _attend(config)
    c, a = pool(sv, params["av"], batch.mask)
    logit = c @ params["w_out"] + params["b_out"][0]
    p = ops.sigmoid(logit)
    ops.check_finite("sann forward", p, c, a)
    return {"u": u, "sv": sv, "c": c, "a": a, "p": p}


def batch_loss(fw: dict, batch: Batch, config: SannConfig) -> np.ndarray:
    """Per-program loss: bce(prob, label) + entropy penalty on that program's weights."""
    bce = ops.bce_loss(fw["p"], batch.labels)
    ent = ops.entropy_regularizer(fw["a"], config.entropy_lambda, config.epsilon)
    return bce + ent


def backward_batch(params: ParamStore, batch: Batch, fw: dict, config: SannConfig) -> None:
    """Accumulate d(mean per-program loss)/d(params) into params.grads."""
    B, N = batch.sub_ids.shape
    d = params["E_subtree"].shape[1]
    sv, a, c, p, u = fw["sv"], fw["a"], fw["c"], fw["p"], fw["u"]
    dlogit = ops.bce_logit_grad(p, batch.labels) / B
    params.accumulate("w_out", c.T @ dlogit)
    params.accumulate("b_out", np.array([dlogit.sum()]))
    dc = dlogit[:, None] * params["w_out"][None, :]
    da = None
    if config.entropy_lambda > 0:
        da = ops.entropy_regularizer_grad(a, config.entropy_lambda, config.epsilon) * batch.mask / B
    _, pool_backward = _attend(config)
    dsv, dav = pool_backward(dc, da, sv, params["av"], a, batch.mask)
    params.accumulate("av", dav)
    dh = dsv * (1.0 - sv * sv) * batch.mask[..., None]
    du, dW, db = ops.dense_backward(dh, u, params["W_td"])
    params.accumulate("W_td", dW)
    params.accumulate("b_td", db)
    params.accumulate("E_subtree", ops.embedding_backward(du[..., :d], batch.sub_ids, params["E_subtree"].shape[0]))
    params.accumulate("E_node", np.asarray(batch.bag.T @ du[..., d:].reshape(B * N, d)))


def forward(ep: EncodedProgram, params: ParamStore, config: SannConfig) -> SannOutput:
    batch = batch_from_programs([ep], params["E_node"].shape[0])
    return _outputs(forward_batch(params, batch, config), [ep])[0]


def _outputs(fw: dict, programs: Sequence[EncodedProgram]) -> list[SannOutput]:
    outs = []
    for b, ep in enumerate(programs):
        weights = fw["a"][b, :ep.n]
        attention = [(i, float(weights[i]), ep.spans[i]) for i in range(ep.n)]
        outs.append(SannOutput(float(fw["p"][b]), fw["c"][b].copy(), attention, ep.serializations))
    return outs


def loss(outputs: Sequence[SannOutput], labels: Sequence[int], config: SannConfig) -> float:
    if not outputs:
        raise ValueError("loss of an empty batch")
    total = 0.0
    for out, y in zip(outputs, labels):
        total += float(ops.bce_loss(out.prob_correct, y))
        total += float(ops.entropy_regularizer(out.weights, config.entropy_lambda, config.epsilon))
    return total / len(outputs)


def predict_batch(
    programs: Sequence[EncodedProgram], params: ParamStore, config: SannConfig, chunk: int = 256
) -> list[SannOutput]:
    outs: list[SannOutput] = []
    n_nodes = params["E_node"].shape[0]
    for start in range(0, len(programs), chunk):
        part = programs[start:start + chunk]
        batch = batch_from_programs(part, n_nodes)
        outs.extend(_outputs(forward_batch(params, batch, config), part))
    return outs


def code_vectors(programs: Sequence[EncodedProgram], params: ParamStore, config: SannConfig) -> np.ndarray:
    outs = predict_batch(programs, params, config)
    if not outs:
        return np.zeros((0, params["E_subtree"].shape[1]))
    return np.stack([o.code_vector for o in outs])


# training ---------------------------------------------------------------------------

def _evaluate(params, packed, labels, config, n_nodes, chunk=256) -> tuple[float, float]:
    total, correct = 0.0, 0
    for start in range(0, len(packed), chunk):
        batch = make_batch(packed[start:start + chunk], labels[start:start + chunk], n_nodes)
        fw = forward_batch(params, batch, config)
        total += float(batch_loss(fw, batch, config).sum())
        correct += int(((fw["p"] >= 0.5) == (batch.labels == 1)).sum())
    return total / len(packed), correct / len(packed)


def train(
    train_set: Sequence[EncodedProgram],
    val_set: Sequence[EncodedProgram],
    vocab: Vocab,
    config: SannConfig,
    on_backward: Callable[[list[EncodedProgram]], None] | None = None,
    log: Callable[[str], None] | None = None,
) -> tuple[ParamStore, History]:
    """Mini-batch Adamax; keeps the parameters with the best validation loss and stops after
    `early_stop_patience` epochs without improvement."""
    labels = [ep.label for ep in train_set]
    if len(set(labels)) < 2:
        raise SingleClassDataset("training data must contain both classes")
    if not val_set:
        raise ValueError("validation set is empty")
    seeds = np.random.SeedSequence(config.seed).spawn(2)
    params = init_params(vocab, config, np.random.default_rng(seeds[0]))
    shuffle_rng = np.random.default_rng(seeds[1])
    n_nodes = vocab.n_nodes
    packed = [_pack(ep) for ep in train_set]
    val_packed = [_pack(ep) for ep in val_set]
    val_labels = [ep.label for ep in val_set]

    history = History()
    best_loss = math.inf
    best = params.snapshot()
    stale = 0
    t0 = time.perf_counter()
    seen = 0
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(train_set))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = make_batch([packed[i] for i in idx], [labels[i] for i in idx], n_nodes)
            if on_backward is not None:
                on_backward([train_set[i] for i in idx])
            params.zero_grad()
            fw = forward_batch(params, batch, config)
            total += float(batch_loss(fw, batch, config).sum())
            backward_batch(params, batch, fw, config)
            adamax_step(params, config.lr)
            seen += len(idx)
        val_loss, val_acc = _evaluate(params, val_packed, val_labels, config, n_nodes)
        history.epochs.append(
            {"epoch": epoch, "train_loss": total / len(train_set), "val_loss": val_loss, "val_acc": val_acc}
        )
        if log:
            log(f"epoch {epoch}: train {total / len(train_set):.4f} val {val_loss:.4f} acc {val_acc:.3f}")
        if val_loss < best_loss:
            best_loss = val_loss
            best = params.snapshot()
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
        if stale >= config.early_stop_patience:
            break
    params.load_snapshot(best)
    elapsed = time.perf_counter() - t0
    history.items_per_sec = seen / elapsed if elapsed > 0 else 0.0
    history.backward_items = seen
    return params, history


# checkpoints ------------------------------------------------------------------------

def save_checkpoint(params: ParamStore, vocab: Vocab, config: SannConfig, path: str | Path) -> None:
    """Write `path` (model) and `vocab.json` beside it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    (path.parent / "vocab.json").write_text(vocab.to_json(), encoding="utf-8")
    obj = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "vocab_sha256": vocab.digest(),
        "vocab_sizes": [vocab.n_subtrees, vocab.n_nodes],
        "params": params.to_obj(),
    }
    path.write_text(json.dumps(obj), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[ParamStore, Vocab, SannConfig]:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
        fmt, version = obj["format"], obj["version"]
        raw_params, digest, config_obj = obj["params"], obj["vocab_sha256"], obj["config"]
    except (json.JSONDecodeError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise CorruptCheckpoint(f"{path}: {exc}") from None
    if fmt != CHECKPOINT_FORMAT or version != CHECKPOINT_VERSION:
        raise VersionMismatch(f"{path}: unsupported checkpoint {fmt!r} v{version!r}")
    vocab = Vocab.from_json((path.parent / "vocab.json").read_text(encoding="utf-8"))
    if vocab.digest() != digest:
        raise VersionMismatch("vocab.json does not match the checkpoint's vocabulary hash")
    try:
        params = ParamStore.from_obj(raw_params)
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptCheckpoint(f"{path}: {exc}") from None
    config = SannConfig.from_dict(config_obj)
    if params["E_subtree"].shape != (vocab.n_subtrees, config.embed_dim) or params["E_node"].shape != (
        vocab.n_nodes, config.embed_dim
    ):
        raise VersionMismatch("parameter shapes do not match the vocabulary")
    return params, vocab, config
