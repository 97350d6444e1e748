"""Synthetic CS1 data: template programs, injected logical errors and simulated students."""

from .corpus import (
    ConfigError,
    CorpusConfig,
    LabeledProgram,
    build_corpus,
    corpus_summary,
    generate_correct,
    load_programs,
    mutate,
    read_jsonl,
    save_programs,
    stratified_split,
    write_jsonl,
)
from .mutations import OPERATORS, OPERATORS_BY_NAME, MutationOperator, NoApplicableSite
from .templates import PROBLEMS, PROBLEMS_BY_ID, Problem
from .students import (
    Event,
    GradeRecord,
    StudentConfig,
    StudentTrace,
    grades_from_csv,
    grades_to_csv,
    simulate_students,
)
