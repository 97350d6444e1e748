"""Labeled program corpus: correct template instances, mutants, splits and JSONL I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..localize import Category, ErrorLabel
from .mutations import OPERATORS, OPERATORS_BY_NAME, Behaviour, MutationOperator, NoApplicableSite, mutate_source
from .templates import PROBLEMS, PROBLEMS_BY_ID, Problem, pick_names

SPLITS = ("train", "val", "test")


class ConfigError(ValueError):
    """Invalid configuration; `field` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class LabeledProgram:
    id: str
    source: str
    label: int
    errors: list[ErrorLabel]
    problem_id: str
    provenance: dict
    split: str | None = None
    student_id: str | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        if (self.label == 0) != bool(self.errors):
            raise ValueError("label 0 iff errors are present")

    def to_obj(self) -> dict:
        obj = {
            "id": self.id,
            "problem_id": self.problem_id,
            "source": self.source,
            "label": self.label,
            "errors": [e.to_obj() for e in self.errors],
            "split": self.split,
            "provenance": self.provenance,
        }
        if self.student_id is not None:
            obj["student_id"] = self.student_id
        return obj

    @classmethod
    def from_obj(cls, obj: dict) -> "LabeledProgram":
        return cls(
            id=obj["id"],
            source=obj["source"],
            label=int(obj["label"]),
            errors=[ErrorLabel.from_obj(e) for e in obj["errors"]],
            problem_id=obj["problem_id"],
            provenance=obj.get("provenance", {}),
            split=obj.get("split"),
            student_id=obj.get("student_id"),
        )


def write_jsonl(path: str | Path, objects: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for obj in objects:
            fh.write(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def save_programs(path: str | Path, programs: Iterable[LabeledProgram]) -> None:
    write_jsonl(path, (p.to_obj() for p in programs))


def load_programs(path: str | Path) -> list[LabeledProgram]:
    return [LabeledProgram.from_obj(o) for o in read_jsonl(path)]


# generation ----------------------------------------------------------------------------

def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def _problem_index(problem: Problem) -> int:
    return next(i for i, p in enumerate(PROBLEMS) if p.id == problem.id) if problem.id in PROBLEMS_BY_ID else 999


def instantiate(problem: Problem, rng: np.random.Generator) -> tuple[str, int]:
    variant = int(rng.integers(len(problem.variants)))
    names = pick_names(problem.roles, rng)
    return problem.render(variant, names, rng), variant


def generate_correct(template_set: Sequence[Problem], count: int, seed: int) -> list[LabeledProgram]:
    """`count` correct programs, cycling through the templates."""
    out = []
    for i in range(count):
        problem = template_set[i % len(template_set)]
        out.append(_correct_program(problem, seed, i))
    return out


def _correct_program(problem: Problem, seed: int, index: int, stream: int = 0) -> LabeledProgram:
    rng = _rng(seed, _problem_index(problem), index, stream)
    source, variant = instantiate(problem, rng)
    return LabeledProgram(
        id=f"{problem.id}-{index:05d}",
        source=source,
        label=1,
        errors=[],
        problem_id=problem.id,
        provenance={"template": problem.id, "variant": variant, "operators": [], "seed": [seed, index, stream]},
    )


_BEHAVIOUR_CACHE: dict[str, Behaviour] = {}


def behaviour_of(program: LabeledProgram) -> Behaviour:
    from ..lang import parse

    cached = _BEHAVIOUR_CACHE.get(program.source)
    if cached is None:
        problem = PROBLEMS_BY_ID[program.problem_id]
        cached = Behaviour(parse(program.source), problem.reference_inputs())
        if len(_BEHAVIOUR_CACHE) > 4096:
            _BEHAVIOUR_CACHE.clear()
        _BEHAVIOUR_CACHE[program.source] = cached
    return cached


def mutate(
    program: LabeledProgram,
    operators: Sequence[MutationOperator] = OPERATORS,
    k: int = 1,
    seed: int = 0,
    category_weights: dict[str, float] | None = None,
) -> LabeledProgram:
    """Inject k interpreter-validated logical errors at distinct sites."""
    if program.label != 1:
        raise ValueError("only correct programs can be mutated")
    rng = _rng(seed, k, *[ord(c) for c in program.id])
    source, labels, names = mutate_source(
        program.source, behaviour_of(program), k, rng, operators, category_weights
    )
    provenance = dict(program.provenance, operators=names, mutation_seed=seed)
    return LabeledProgram(
        id=program.id + "-m",
        source=source,
        label=0,
        errors=labels,
        problem_id=program.problem_id,
        provenance=provenance,
        split=program.split,
        student_id=program.student_id,
    )


def sample_k(rng: np.random.Generator, mean: float, k_max: int) -> int:
    """1 + Poisson(mean - 1), truncated at k_max."""
    while True:
        k = 1 + int(rng.poisson(mean - 1.0))
        if k <= k_max:
            return k


# corpus --------------------------------------------------------------------------------

@dataclass
class CorpusConfig:
    seed: int = 0
    problems: list[str] = field(default_factory=lambda: [p.id for p in PROBLEMS])
    correct_per_problem: int = 60
    incorrect_per_problem: int = 100
    counts: dict[str, dict[str, int]] = field(default_factory=dict)
    k_mean: float = 2.6
    k_max: int = 10
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    category_weights: dict[str, float] = field(default_factory=dict)
    operators: list[str] = field(default_factory=lambda: [op.name for op in OPERATORS])
    single_error_splits: list[str] = field(default_factory=list)
    max_retries: int = 30

    def __post_init__(self):
        self.split_ratios = tuple(float(r) for r in self.split_ratios)
        if len(self.split_ratios) != 3 or any(r < 0 for r in self.split_ratios):
            raise ConfigError("split_ratios", "need three non-negative ratios")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ConfigError("split_ratios", f"ratios sum to {sum(self.split_ratios)}, expected 1")
        unknown = [p for p in self.problems if p not in PROBLEMS_BY_ID]
        if unknown or not self.problems:
            raise ConfigError("problems", f"unknown or empty problem list {unknown}")
        if self.correct_per_problem < 0 or self.incorrect_per_problem < 0:
            raise ConfigError("correct_per_problem", "counts must be non-negative")
        if not 1.0 <= self.k_mean <= self.k_max:
            raise ConfigError("k_mean", "must lie in [1, k_max]")
        for name in self.operators:
            if name not in OPERATORS_BY_NAME:
                raise ConfigError("operators", f"unknown operator {name!r}")
        for key in self.category_weights:
            if key not in Category.__members__:
                raise ConfigError("category_weights", f"unknown category {key!r}")
        for s in self.single_error_splits:
            if s not in SPLITS:
                raise ConfigError("single_error_splits", f"unknown split {s!r}")

    @classmethod
    def from_dict(cls, obj: dict) -> "CorpusConfig":
        known = {f.name for f in fields(cls)}
        extra = set(obj) - known
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown corpus option")
        return cls(**obj)

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v) for f in fields(self)}

    def count(self, problem_id: str, kind: str) -> int:
        per = self.counts.get(problem_id, {})
        default = self.correct_per_problem if kind == "correct" else self.incorrect_per_problem
        return int(per.get(kind, default))


def split_sizes(n: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    n_val = min(n_val, n - n_train)
    return n_train, n_val, n - n_train - n_val


def stratified_split(strata: Sequence[str], ratios: Sequence[float], seed: int) -> list[str]:
    """Assign train/val/test with exact global totals and per-stratum proportions.

    Inside each stratum items get evenly spaced random keys in (0, 1); sorting all keys and
    cutting at the global totals gives each stratum its share up to rounding.
    """
    rng = _rng(seed, 7919)
    keys = np.empty(len(strata))
    by_stratum: dict[str, list[int]] = {}
    for i, s in enumerate(strata):
        by_stratum.setdefault(s, []).append(i)
    for s in sorted(by_stratum):
        idx = by_stratum[s]
        ranks = rng.permutation(len(idx))
        offset = rng.random()
        for j, r in zip(idx, ranks):
            keys[j] = (r + offset) / len(idx)
    order = np.lexsort((np.arange(len(strata)), keys))
    n_train, n_val, _ = split_sizes(len(strata), ratios)
    out = [""] * len(strata)
    for pos, i in enumerate(order):
        out[i] = "train" if pos < n_train else "val" if pos < n_train + n_val else "test"
    return out


def build_corpus(config: CorpusConfig, log=None) -> list[LabeledProgram]:
    """Correct and mutated programs with stratified 80:10:10 splits, deterministic per seed."""
    operators = [OPERATORS_BY_NAME[n] for n in config.operators]
    slots = []  # (problem, label, index)
    for problem_id in config.problems:
        problem = PROBLEMS_BY_ID[problem_id]
        slots += [(problem, 1, i) for i in range(config.count(problem_id, "correct"))]
        slots += [(problem, 0, i) for i in range(config.count(problem_id, "incorrect"))]
    splits = stratified_split([f"{p.id}/{lab}" for p, lab, _ in slots], config.split_ratios, config.seed)
    programs = []
    reduced = 0
    for (problem, label, index), split in zip(slots, splits):
        if label == 1:
            prog = _correct_program(problem, config.seed, index)
            prog.split = split
            programs.append(prog)
            continue
        k_rng = _rng(config.seed, _problem_index(problem), index, 1)
        k = 1 if split in config.single_error_splits else sample_k(k_rng, config.k_mean, config.k_max)
        mutant = None
        while mutant is None:
            for attempt in range(config.max_retries):
                base = _correct_program(problem, config.seed, index, stream=2 + attempt)
                try:
                    mutant = mutate(base, operators, k, seed=config.seed * 1000003 + attempt,
                                    category_weights=config.category_weights)
                    break
                except NoApplicableSite:
                    continue
            if mutant is None:
                if k == 1:
                    raise NoApplicableSite(f"no valid mutation for problem {problem.id}")
                k -= 1
                reduced += 1
        mutant.id = f"{problem.id}-m{index:05d}"
        mutant.split = split
        programs.append(mutant)
    if log is not None and reduced:
        log(f"{reduced} incorrect programs used fewer errors than sampled (too few valid sites)")
    return programs


def corpus_summary(programs: Sequence[LabeledProgram]) -> dict:
    summary: dict = {"total": len(programs), "splits": {}, "categories": {}, "operators": {}}
    for p in programs:
        s = summary["splits"].setdefault(p.split or "none", {"correct": 0, "incorrect": 0})
        s["correct" if p.label == 1 else "incorrect"] += 1
        for e in p.errors:
            summary["categories"][e.category.value] = summary["categories"].get(e.category.value, 0) + 1
        for name in p.provenance.get("operators", []):
            summary["operators"][name] = summary["operators"].get(name, 0) + 1
    incorrect = [p for p in programs if p.label == 0]
    summary["mean_errors_per_incorrect"] = (
        sum(len(p.errors) for p in incorrect) / len(incorrect) if incorrect else 0.0
    )
    summary["categories"] = dict(sorted(summary["categories"].items()))
    summary["operators"] = dict(sorted(summary["operators"].items()))
    return summary
