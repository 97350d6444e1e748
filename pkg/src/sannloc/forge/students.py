"""BKT-style student simulator producing attempt traces, submissions and final grades.

Each student holds a binary latent state per skill. An attempt succeeds with probability
`1 - slip` if the skill is known and `guess` otherwise; after every attempt an unknown skill
becomes known with probability `learn`. A student works through the problems in order and
retries a problem until it is solved or `max_attempts` is reached.

Failed attempts submit mutated code. A slip yields one careless error; an attempt without
mastery yields several errors (mean `k_mean`) drawn mostly from the category tied to the
problem's skill, so the code of a failure carries information about the hidden state.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, fields

import numpy as np

from ..localize import Category
from .corpus import ConfigError, LabeledProgram, _correct_program, mutate, sample_k, split_sizes
from .mutations import OPERATORS, OPERATORS_BY_NAME, NoApplicableSite
from .templates import PROBLEMS, PROBLEMS_BY_ID

DEFAULT_SKILLS = {
    "caughtSpeeding": "conditionals",
    "redTicket": "conditionals",
    "in1To10": "conditionals",
    "firstLast6": "conditionals",
    "sum13": "loops",
    "canBalance": "loops",
    "countEvens": "loops",
    "countCode": "strings",
    "countHi": "strings",
    "scorePercent": "arithmetic",
    "isPassing": "arithmetic",
    "sumDigits": "arithmetic",
    "midDistance": "arithmetic",
}

DEFAULT_SKILL_CATEGORY = {
    "conditionals": "Strategic",
    "loops": "Conceptual",
    "strings": "CompilableSyntactic",
    "arithmetic": "Conceptual",
}

CARELESS_OPERATORS = ("and_to_bitand", "or_to_bitor", "constant_off_by_one", "comparison_off_by_one")


@dataclass
class StudentConfig:
    seed: int = 0
    n_students: int = 800
    problems: list[str] = field(default_factory=lambda: [p.id for p in PROBLEMS])
    skill_map: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_SKILLS))
    p0: dict[str, float] | float = 0.35
    learn: dict[str, float] | float = 0.1
    guess: dict[str, float] | float = 0.1
    slip: dict[str, float] | float = 0.3
    max_attempts: int = 2
    skill_category: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_SKILL_CATEGORY))
    coupling: float = 6.0
    k_mean: float = 4.0
    k_max: int = 10
    grade_noise: float = 0.05
    grade_weights: dict[str, float] = field(default_factory=dict)
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    pool_size: int = 24

    def __post_init__(self):
        self.split_ratios = tuple(float(r) for r in self.split_ratios)
        if self.n_students < 1:
            raise ConfigError("n_students", "must be >= 1")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts", "must be >= 1")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9 or len(self.split_ratios) != 3:
            raise ConfigError("split_ratios", "three ratios summing to 1 required")
        for p in self.problems:
            if p not in PROBLEMS_BY_ID:
                raise ConfigError("problems", f"unknown problem {p!r}")
            if p not in self.skill_map:
                raise ConfigError("skill_map", f"problem {p!r} has no skill")
        for name in ("p0", "learn", "guess", "slip"):
            for skill in self.skills:
                v = self.param(name, skill)
                if not 0.0 <= v <= 1.0:
                    raise ConfigError(name, f"{v} outside [0, 1] for skill {skill}")
        for skill, cat in self.skill_category.items():
            if cat not in Category.__members__:
                raise ConfigError("skill_category", f"unknown category {cat!r}")
        if self.pool_size < 1:
            raise ConfigError("pool_size", "must be >= 1")
        if not 1.0 <= self.k_mean <= self.k_max:
            raise ConfigError("k_mean", "must lie in [1, k_max]")

    @property
    def skills(self) -> list[str]:
        return sorted({self.skill_map[p] for p in self.problems})

    def param(self, name: str, skill: str) -> float:
        v = getattr(self, name)
        return float(v[skill]) if isinstance(v, dict) else float(v)

    @classmethod
    def from_dict(cls, obj: dict) -> "StudentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(obj) - known
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown student-simulation option")
        return cls(**obj)

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v) for f in fields(self)}


@dataclass(frozen=True)
class Event:
    q: int  # 1-based problem index
    a: int
    program_id: str


@dataclass
class StudentTrace:
    student_id: str
    events: list[Event]
    skills: list[dict[str, int]]  # latent state before each event (hidden from models)
    split: str = "train"

    def to_obj(self) -> dict:
        return {
            "student_id": self.student_id,
            "split": self.split,
            "events": [{"q": e.q, "a": e.a, "program_id": e.program_id} for e in self.events],
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "StudentTrace":
        events = [Event(int(e["q"]), int(e["a"]), e["program_id"]) for e in obj["events"]]
        return cls(obj["student_id"], events, [], obj.get("split", "train"))


@dataclass(frozen=True)
class GradeRecord:
    student_id: str
    grade: float

    def __post_init__(self):
        if not 0.0 <= self.grade <= 1.0:
            raise ValueError("grade outside [0, 1]")


def grades_to_csv(grades: list[GradeRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["student_id", "grade"])
    for g in grades:
        w.writerow([g.student_id, repr(g.grade)])
    return buf.getvalue()


def grades_from_csv(text: str) -> list[GradeRecord]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [GradeRecord(r["student_id"], float(r["grade"])) for r in rows]


class _SubmissionPool:
    """Per-problem pools of correct code, careless mutants and non-mastery mutants.

    Mutation with interpreter validation is the expensive part of simulation, so each
    attempt draws its source from a pool built once per problem.
    """

    def __init__(self, config: StudentConfig):
        self.config = config
        self.correct: dict[str, list[LabeledProgram]] = {}
        self.careless: dict[str, list[LabeledProgram]] = {}
        self.unmastered: dict[str, list[LabeledProgram]] = {}
        careless_ops = [OPERATORS_BY_NAME[n] for n in CARELESS_OPERATORS]
        for pi, pid in enumerate(config.problems):
            problem = PROBLEMS_BY_ID[pid]
            base = [_correct_program(problem, config.seed, i, stream=11) for i in range(config.pool_size)]
            self.correct[pid] = base
            category = config.skill_category.get(config.skill_map[pid])
            weights = {c.value: 1.0 for c in Category}
            if category is not None:
                weights[category] = config.coupling
            self.careless[pid] = [m for i, b in enumerate(base) if (m := self._mutant(b, careless_ops, 1, i, None)) is not None]
            krng = np.random.default_rng([config.seed, pi, 31])
            unm = []
            for i, b in enumerate(base):
                k = sample_k(krng, config.k_mean, config.k_max)
                while k >= 1:
                    m = self._mutant(b, OPERATORS, k, 1000 + i, weights)
                    if m is not None:
                        unm.append(m)
                        break
                    k -= 1
            self.unmastered[pid] = unm
            if not self.careless[pid]:
                self.careless[pid] = self.unmastered[pid]

    def _mutant(self, base, ops, k, seed, weights):
        try:
            return mutate(base, ops, k, seed=self.config.seed * 7919 + seed, category_weights=weights)
        except NoApplicableSite:
            return None


def simulate_students(config: StudentConfig) -> tuple[list[StudentTrace], list[GradeRecord], list[LabeledProgram]]:
    """Simulate a cohort; returns traces, final grades and every submitted program."""
    pool = _SubmissionPool(config)
    skills = config.skills
    grade_w = np.array([float(config.grade_weights.get(s, 1.0)) for s in skills])
    n_train, n_val, _ = split_sizes(config.n_students, config.split_ratios)
    split_rng = np.random.default_rng([config.seed, 4242])
    order = split_rng.permutation(config.n_students)
    split_of = {}
    for pos, s in enumerate(order):
        split_of[int(s)] = "train" if pos < n_train else "val" if pos < n_train + n_val else "test"
    traces, grades, programs = [], [], []
    for s in range(config.n_students):
        rng = np.random.default_rng([config.seed, 101, s])
        sid = f"s{s:04d}"
        state = {sk: int(rng.random() < config.param("p0", sk)) for sk in skills}
        events, states = [], []
        for qi, pid in enumerate(config.problems, start=1):
            sk = config.skill_map[pid]
            for attempt in range(config.max_attempts):
                states.append(dict(state))
                known = state[sk]
                p_correct = (1.0 - config.param("slip", sk)) if known else config.param("guess", sk)
                correct = int(rng.random() < p_correct)
                if correct:
                    src = pool.correct[pid]
                elif known:
                    src = pool.careless[pid]
                else:
                    src = pool.unmastered[pid]
                template = src[int(rng.integers(len(src)))]
                prog_id = f"{sid}-{qi:02d}-{attempt}"
                programs.append(
                    LabeledProgram(
                        id=prog_id,
                        source=template.source,
                        label=correct,
                        errors=list(template.errors),
                        problem_id=pid,
                        provenance=dict(template.provenance, pool_item=template.id),
                        split=split_of[s],
                        student_id=sid,
                    )
                )
                events.append(Event(qi, correct, prog_id))
                if not known and rng.random() < config.param("learn", sk):
                    state[sk] = 1
                if correct:
                    break
        end = np.array([state[sk] for sk in skills], dtype=float)
        grade = float(np.clip(grade_w @ end / grade_w.sum() + rng.normal(0.0, config.grade_noise), 0.0, 1.0))
        traces.append(StudentTrace(sid, events, states, split_of[s]))
        grades.append(GradeRecord(sid, grade))
    return traces, grades, programs

