"""Attention-threshold flagging of subtrees and span-based scoring against labeled errors."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .lang import Span
from .sann import SannOutput

DEFAULT_THRESHOLD = 0.2
MATCH_OVERLAP = 0.5


class Category(str, Enum):
    CompilableSyntactic = "CompilableSyntactic"
    Strategic = "Strategic"
    Conceptual = "Conceptual"


class NotIncorrectPrediction(ValueError):
    pass


class EmptyEvaluationSet(ValueError):
    pass


@dataclass(frozen=True)
class ErrorLabel:
    span: Span
    category: Category

    def to_obj(self) -> dict:
        return {"span": self.span.as_list(), "category": self.category.value}

    @classmethod
    def from_obj(cls, obj: dict) -> "ErrorLabel":
        return cls(Span(*obj["span"]), Category(obj["category"]))


@dataclass(frozen=True)
class Flag:
    span: Span
    weight: float
    subtree: str = ""


@dataclass
class FlagGroup:
    span: Span
    members: list[Flag]


@dataclass
class LocalizationReport:
    program_id: str
    prob_correct: float
    threshold: float
    flagged: list[Flag]
    groups: list[FlagGroup]

    def to_obj(self) -> dict:
        return {
            "program_id": self.program_id,
            "prob_correct": self.prob_correct,
            "threshold": self.threshold,
            "groups": [
                {
                    "span": g.span.as_list(),
                    "members": [
                        {"span": f.span.as_list(), "weight": f.weight, "subtree": f.subtree} for f in g.members
                    ],
                }
                for g in self.groups
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True)

    @classmethod
    def from_obj(cls, obj: dict) -> "LocalizationReport":
        groups = []
        flagged = []
        for g in obj["groups"]:
            members = [Flag(Span(*m["span"]), m["weight"], m.get("subtree", "")) for m in g["members"]]
            groups.append(FlagGroup(Span(*g["span"]), members))
            flagged.extend(members)
        flagged.sort(key=lambda f: (f.span.start_byte, -f.span.end_byte))
        return cls(obj["program_id"], obj["prob_correct"], obj["threshold"], flagged, groups)


def group_flags(flagged: Sequence[Flag]) -> list[FlagGroup]:
    """Group flags under their maximal flagged container span. AST spans are laminar
    (nested or disjoint), so each flag has exactly one maximal container."""
    order = sorted(flagged, key=lambda f: (f.span.start_byte, -f.span.end_byte))
    groups: list[FlagGroup] = []
    for f in order:
        if groups and groups[-1].span.contains(f.span):
            groups[-1].members.append(f)
        else:
            groups.append(FlagGroup(f.span, [f]))
    return groups


def flag(
    output: SannOutput,
    threshold: float = DEFAULT_THRESHOLD,
    program_id: str = "",
    force: bool = False,
) -> LocalizationReport:
    """Flag every subtree whose attention weight is >= threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    if output.prob_correct >= 0.5 and not force:
        raise NotIncorrectPrediction(
            f"program {program_id!r} is predicted correct (p={output.prob_correct:.3f}); nothing to localize"
        )
    keys = output.serializations
    flagged = [
        Flag(span, w, keys[i] if i < len(keys) else "")
        for i, w, span in output.attention
        if w >= threshold
    ]
    return LocalizationReport(program_id, output.prob_correct, threshold, flagged, group_flags(flagged))


def span_matches(flag_span: Span, label_span: Span) -> bool:
    """A flag matches a label if it contains it or covers >= 50% of the label's bytes."""
    return flag_span.contains(label_span) or flag_span.overlap(label_span) >= MATCH_OVERLAP * len(label_span)


def match(report: LocalizationReport, labels: Sequence[ErrorLabel]) -> list[list[bool]]:
    """Matrix m[j][i]: does flag i match label j."""
    return [[span_matches(f.span, lab.span) for f in report.flagged] for lab in labels]


@dataclass
class LocalizationMetrics:
    recall: float
    precision: float
    all_errors_recall: float
    per_category_recall: dict[str, float]
    n_labels: int = 0
    n_flags: int = 0
    n_false_flags: int = 0
    n_programs: int = 0
    per_category_counts: dict[str, int] = field(default_factory=dict)

    CSV_FIELDS = (
        "recall", "precision", "all_errors_recall",
        "recall_CompilableSyntactic", "recall_Strategic", "recall_Conceptual",
        "n_labels", "n_flags", "n_false_flags", "n_programs",
    )

    def to_row(self) -> dict:
        row = {
            "recall": self.recall,
            "precision": self.precision,
            "all_errors_recall": self.all_errors_recall,
            "n_labels": self.n_labels,
            "n_flags": self.n_flags,
            "n_false_flags": self.n_false_flags,
            "n_programs": self.n_programs,
        }
        for c in Category:
            # None when the category has no labels in the evaluated set
            row[f"recall_{c.value}"] = self.per_category_recall.get(c.value)
        return row

    def to_csv(self) -> str:
        row = self.to_row()
        return ",".join(self.CSV_FIELDS) + "\n" + ",".join("" if row[k] is None else repr(row[k]) for k in self.CSV_FIELDS) + "\n"


def evaluate(
    reports: Sequence[LocalizationReport], labels: Sequence[Sequence[ErrorLabel]]
) -> LocalizationMetrics:
    """Label recall, flag precision, all-errors recall and per-category recall."""
    if len(reports) != len(labels):
        raise ValueError("one label list per report required")
    if not reports:
        raise EmptyEvaluationSet("no reports to evaluate")
    matched_labels = total_labels = tp_flags = total_flags = 0
    complete = with_labels = 0
    cat_total: dict[str, int] = {}
    cat_hit: dict[str, int] = {}
    for report, labs in zip(reports, labels):
        m = match(report, labs)
        total_flags += len(report.flagged)
        tp_flags += sum(1 for i in range(len(report.flagged)) if any(row[i] for row in m))
        hits = [any(row) for row in m]
        matched_labels += sum(hits)
        total_labels += len(labs)
        if labs:
            with_labels += 1
            complete += all(hits)
        for lab, hit in zip(labs, hits):
            key = lab.category.value
            cat_total[key] = cat_total.get(key, 0) + 1
            cat_hit[key] = cat_hit.get(key, 0) + int(hit)
    if total_labels == 0:
        raise EmptyEvaluationSet("reports carry no labeled errors")
    return LocalizationMetrics(
        recall=matched_labels / total_labels,
        precision=tp_flags / total_flags if total_flags else 0.0,
        all_errors_recall=complete / with_labels,
        per_category_recall={k: cat_hit[k] / cat_total[k] for k in sorted(cat_total)},
        n_labels=total_labels,
        n_flags=total_flags,
        n_false_flags=total_flags - tp_flags,
        n_programs=len(reports),
        per_category_counts=dict(sorted(cat_total.items())),
    )
