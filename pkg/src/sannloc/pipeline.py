"""Glue between the corpus, the subtree-attention model, the localizer and the student models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .forge import LabeledProgram
from .lang import parse
from .localize import LocalizationMetrics, LocalizationReport, evaluate, flag
from .nn import ParamStore
from .sann import History, SannConfig, code_vectors, predict_batch, train
from .subtrees import EncodedProgram, Vocab, build_vocab, encode_program


def by_split(programs: Sequence[LabeledProgram]) -> dict[str, list[LabeledProgram]]:
    out: dict[str, list[LabeledProgram]] = {"train": [], "val": [], "test": []}
    for p in programs:
        out.setdefault(p.split or "train", []).append(p)
    return out


def vocab_for(programs: Sequence[LabeledProgram], config: SannConfig) -> Vocab:
    return build_vocab([parse(p.source) for p in programs], config.min_frequency)


def encode_all(programs: Sequence[LabeledProgram], vocab: Vocab, config: SannConfig) -> list[EncodedProgram]:
    cache: dict[str, EncodedProgram] = {}
    out = []
    for p in programs:
        key = p.source
        enc = cache.get(key)
        if enc is None or enc.label != p.label:
            enc = encode_program(parse(p.source), vocab, p.label, config.max_subtrees, config.max_nodes)
            cache[key] = enc
        out.append(enc)
    return out


@dataclass
class TrainedSann:
    params: ParamStore
    vocab: Vocab
    config: SannConfig
    history: History


def train_sann(programs: Sequence[LabeledProgram], config: SannConfig, log=None, on_backward=None) -> TrainedSann:
    """Vocabulary from the training split only, then training with validation early stopping."""
    splits = by_split(programs)
    vocab = vocab_for(splits["train"], config)
    train_enc = encode_all(splits["train"], vocab, config)
    val_enc = encode_all(splits["val"], vocab, config)
    params, history = train(train_enc, val_enc, vocab, config, on_backward=on_backward, log=log)
    return TrainedSann(params, vocab, config, history)


def distinct_submissions(programs: Sequence[LabeledProgram]) -> list[LabeledProgram]:
    """Training and validation submissions with repeated sources dropped (first occurrence kept).

    Simulated students draw their code from per-problem pools, so thousands of submissions
    share a few hundred sources; test-split students are left out entirely.
    """
    seen: dict[str, LabeledProgram] = {}
    for p in programs:
        if p.split in ("train", "val") and p.source not in seen:
            seen[p.source] = p
    return list(seen.values())


def accuracy(model: TrainedSann, programs: Sequence[LabeledProgram]) -> float:
    enc = encode_all(programs, model.vocab, model.config)
    outs = predict_batch(enc, model.params, model.config)
    return float(np.mean([(o.prob_correct >= 0.5) == (p.label == 1) for o, p in zip(outs, programs)]))


def localize_programs(
    model: TrainedSann,
    programs: Sequence[LabeledProgram],
    threshold: float = 0.2,
    force: bool = False,
) -> list[tuple[LabeledProgram, LocalizationReport]]:
    """Reports for incorrect programs the model also predicts incorrect (or all, with force)."""
    enc = encode_all(programs, model.vocab, model.config)
    outs = predict_batch(enc, model.params, model.config)
    pairs = []
    for p, o in zip(programs, outs):
        if p.label != 0:
            continue
        if o.prob_correct >= 0.5 and not force:
            continue
        pairs.append((p, flag(o, threshold, p.id, force=force)))
    return pairs


def localization_metrics(pairs) -> LocalizationMetrics:
    return evaluate([r for _, r in pairs], [p.errors for p, _ in pairs])


def normalized_entropy(model: TrainedSann, programs: Sequence[LabeledProgram]) -> float:
    """Mean over programs of -sum a_hat log a_hat with a_hat = a / sum(a)."""
    enc = encode_all(programs, model.vocab, model.config)
    values = []
    for o in predict_batch(enc, model.params, model.config):
        a = o.weights
        a_hat = a / a.sum()
        nz = a_hat[a_hat > 0]
        values.append(float(-(nz * np.log(nz)).sum()))
    return float(np.mean(values))


def program_code_vectors(model: TrainedSann, programs: Sequence[LabeledProgram]) -> dict[str, np.ndarray]:
    enc = encode_all(programs, model.vocab, model.config)
    vecs = code_vectors(enc, model.params, model.config)
    return {p.id: vecs[i] for i, p in enumerate(programs)}
