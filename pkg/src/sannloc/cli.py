"""Command-line entry point: corpus generation, training, localization, student models and reports.

All paths live under --workdir. Every command writes a manifest.json next to its outputs
recording the effective configuration hash, seed, package version and input/output digests.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__

log = logging.getLogger("sannloc")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4

CORPUS = "corpus/corpus.jsonl"
CORPUS_SUMMARY = "corpus/summary.json"
STUDENT_TRACES = "students/traces.jsonl"
STUDENT_PROGRAMS = "students/programs.jsonl"
STUDENT_GRADES = "students/grades.csv"
STUDENT_SUMMARY = "students/summary.json"
SANN_CKPT = "sann/model.ckpt"
SANN_VOCAB = "sann/vocab.json"
SANN_HISTORY = "sann/history.csv"
SANN_METRICS = "sann/metrics.json"
STUDENT_SANN_CKPT = "sann-students/model.ckpt"
STUDENT_SANN_VOCAB = "sann-students/vocab.json"
STUDENT_SANN_HISTORY = "sann-students/history.csv"
STUDENT_SANN_METRICS = "sann-students/metrics.json"
LOC_REPORTS = "localize/reports.jsonl"
LOC_METRICS = "localize/metrics.json"
LOC_METRICS_CSV = "localize/metrics.csv"
DKT_METRICS = "dkt/metrics.json"
GRADE_METRICS = "grade/metrics.json"
EVAL_SUMMARY = "eval/summary.json"
EVAL_SUMMARY_CSV = "eval/summary.csv"
GRADCHECK_REPORT = "gradcheck/report.json"

# Which command produces each input, for dependency-missing messages.
PRODUCER = {
    CORPUS: "corpus",
    STUDENT_TRACES: "corpus",
    STUDENT_PROGRAMS: "corpus",
    STUDENT_GRADES: "corpus",
    SANN_CKPT: "train-sann",
    SANN_VOCAB: "train-sann",
    SANN_METRICS: "train-sann",
    STUDENT_SANN_CKPT: "train-sann",
    STUDENT_SANN_VOCAB: "train-sann",
    LOC_METRICS: "localize",
    DKT_METRICS: "train-dkt",
    GRADE_METRICS: "train-grade",
}

DEFAULT_CONFIG = {
    "seed": 0,
    "corpus": {},
    "students": {},
    "sann": {},
    "student_sann": {},
    "localize": {"threshold": 0.2, "force": False, "split": "test"},
    "dkt": {"n_seeds": 5},
    "grade": {"hidden": 64, "dense": 32},
}


class CliError(Exception):
    code = EXIT_INTERNAL


class ConfigProblem(CliError):
    code = EXIT_CONFIG


class DataProblem(CliError):
    code = EXIT_DATA


class MissingDependency(DataProblem):
    def __init__(self, rel: str):
        super().__init__(f"missing {rel}: run `sannloc {PRODUCER[rel]}` first")
        self.rel = rel


# configuration -------------------------------------------------------------------------

def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _apply_set(config: dict, assignment: str) -> None:
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise ConfigProblem(f"--set expects key.path=value, got {assignment!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = config
    parts = key.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigProblem(f"--set {key}: {p} is not a section")
    node[parts[-1]] = value


def load_config(path: str | None, seed: int | None, sets: list[str]) -> dict:
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigProblem(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigProblem(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigProblem("config file must hold a JSON object")
        unknown = sorted(set(user) - set(DEFAULT_CONFIG))
        if unknown:
            raise ConfigProblem(f"unknown config section {unknown[0]!r}")
        config = _merge(config, user)
    for s in sets:
        _apply_set(config, s)
    if seed is not None:
        config["seed"] = seed
    if not isinstance(config["seed"], int):
        raise ConfigProblem("seed: must be an integer")
    return config


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode("utf-8")).hexdigest()


def _section(config: dict, name: str) -> dict:
    """A module config section with the run seed filled in unless the section sets its own."""
    sec = config.get(name)
    if sec is None:
        return None
    if not isinstance(sec, dict):
        raise ConfigProblem(f"{name}: section must be an object")
    out = dict(sec)
    out.setdefault("seed", config["seed"])
    return out


def _build(kind, name: str, obj: dict):
    from .forge import ConfigError

    try:
        return kind.from_dict(obj)
    except ConfigError as exc:
        raise ConfigProblem(f"{name}.{exc.field}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigProblem(f"{name}: {exc}") from None


def corpus_config(config: dict):
    from .forge import CorpusConfig

    return _build(CorpusConfig, "corpus", _section(config, "corpus"))


def student_config(config: dict):
    from .forge import StudentConfig

    sec = _section(config, "students")
    return None if sec is None else _build(StudentConfig, "students", sec)


def sann_config(config: dict):
    from .sann import SannConfig

    return _build(SannConfig, "sann", _section(config, "sann"))


def student_sann_config(config: dict):
    from .sann import SannConfig

    # values given here override the corpus model's section
    sec = _section(config, "student_sann") or {}
    return _build(SannConfig, "student_sann", dict(_section(config, "sann"), **sec))


def dkt_configs(config: dict):
    from .student import DktConfig

    sec = _section(config, "dkt")
    n_seeds = sec.pop("n_seeds", 5)
    if not isinstance(n_seeds, int) or n_seeds < 1:
        raise ConfigProblem("dkt.n_seeds: must be a positive integer")
    base = sec.pop("seed")
    return [_build(DktConfig, "dkt", dict(sec, seed=base + i)) for i in range(n_seeds)]


def grade_config(config: dict):
    from .student import GradeConfig

    return _build(GradeConfig, "grade", _section(config, "grade"))


def localize_options(config: dict) -> tuple[float, bool, str]:
    sec = dict(config.get("localize") or {})
    threshold = sec.pop("threshold", 0.2)
    force = sec.pop("force", False)
    split = sec.pop("split", "test")
    sec.pop("seed", None)
    if sec:
        raise ConfigProblem(f"localize.{sorted(sec)[0]}: unknown option")
    if not isinstance(threshold, (int, float)) or not 0.0 < threshold < 1.0:
        raise ConfigProblem("localize.threshold: must lie in (0, 1)")
    if split not in ("train", "val", "test"):
        raise ConfigProblem("localize.split: must be train, val or test")
    return float(threshold), bool(force), split


# workspace -----------------------------------------------------------------------------

def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Workspace:
    def __init__(self, root: str | Path, command: str, config: dict):
        self.root = Path(root)
        self.command = command
        self.config = config
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []

    def path(self, rel: str) -> Path:
        return self.root / rel

    def need(self, rel: str) -> Path:
        p = self.path(rel)
        if not p.exists():
            raise MissingDependency(rel)
        self.inputs[rel] = sha256_file(p)
        return p

    def write_text(self, rel: str, text: str) -> None:
        p = self.path(rel)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
        self.outputs.append(rel)

    def write_json(self, rel: str, obj) -> None:
        self.write_text(rel, json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")

    def produced(self, rel: str) -> None:
        self.outputs.append(rel)

    def write_manifest(self, directory: str) -> None:
        chash = config_hash(self.config)
        manifest = {
            "command": self.command,
            "run_id": f"{self.command}-{chash[:12]}",
            "config_sha256": chash,
            "config": self.config,
            "seed": self.config["seed"],
            "version": __version__,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": {rel: sha256_file(self.path(rel)) for rel in sorted(set(self.outputs))},
        }
        self.write_json(f"{directory}/manifest.json", manifest)


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _load_corpus(ws: Workspace, rel: str):
    from .forge import load_programs

    try:
        return load_programs(ws.need(rel))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, MissingDependency):
            raise
        raise DataProblem(f"{rel}: malformed program record ({exc})") from None


def _load_sann(ws: Workspace, ckpt: str = SANN_CKPT, vocab_file: str = SANN_VOCAB):
    from .pipeline import TrainedSann
    from .sann import CorruptCheckpoint, History, VersionMismatch, load_checkpoint

    ws.need(vocab_file)
    try:
        params, vocab, cfg = load_checkpoint(ws.need(ckpt))
    except (CorruptCheckpoint, VersionMismatch) as exc:
        raise DataProblem(str(exc)) from None
    return TrainedSann(params, vocab, cfg, History())


def _load_students(ws: Workspace):
    from .forge import StudentTrace, grades_from_csv, read_jsonl

    traces = [StudentTrace.from_obj(o) for o in read_jsonl(ws.need(STUDENT_TRACES))]
    programs = _load_corpus(ws, STUDENT_PROGRAMS)
    grades = {g.student_id: g.grade for g in grades_from_csv(ws.need(STUDENT_GRADES).read_text(encoding="utf-8"))}
    return traces, programs, grades


# commands ------------------------------------------------------------------------------

def cmd_corpus(ws: Workspace) -> dict:
    from .forge import build_corpus, corpus_summary, grades_to_csv, save_programs, simulate_students, write_jsonl

    ccfg = corpus_config(ws.config)
    scfg = student_config(ws.config)
    t0 = time.perf_counter()
    programs = build_corpus(ccfg, log=log.info)
    ws.path("corpus").mkdir(parents=True, exist_ok=True)
    save_programs(ws.path(CORPUS), programs)
    ws.produced(CORPUS)
    summary = corpus_summary(programs)
    ws.write_json(CORPUS_SUMMARY, summary)
    log.info("corpus: %d programs in %.1fs", len(programs), time.perf_counter() - t0)
    result = {"corpus": summary}
    if scfg is not None:
        traces, grades, sprograms = simulate_students(scfg)
        ws.path("students").mkdir(parents=True, exist_ok=True)
        write_jsonl(ws.path(STUDENT_TRACES), [t.to_obj() for t in traces])
        ws.produced(STUDENT_TRACES)
        save_programs(ws.path(STUDENT_PROGRAMS), sprograms)
        ws.produced(STUDENT_PROGRAMS)
        ws.write_text(STUDENT_GRADES, grades_to_csv(grades))
        n_events = sum(len(t.events) for t in traces)
        ssum = {
            "students": len(traces),
            "attempts": n_events,
            "correct_rate": sum(e.a for t in traces for e in t.events) / max(1, n_events),
            "splits": {s: sum(t.split == s for t in traces) for s in ("train", "val", "test")},
            "mean_grade": sum(g.grade for g in grades) / len(grades),
            "parameters": scfg.to_dict(),
        }
        ws.write_json(STUDENT_SUMMARY, ssum)
        result["students"] = {k: v for k, v in ssum.items() if k != "parameters"}
    ws.write_manifest("corpus")
    return result


def _fit_sann(ws: Workspace, programs, cfg, ckpt: str, history: str, metrics_file: str) -> dict:
    from .pipeline import accuracy, by_split, train_sann
    from .sann import SingleClassDataset, save_checkpoint

    try:
        model = train_sann(programs, cfg, log=log.info)
    except SingleClassDataset as exc:
        raise DataProblem(str(exc)) from None
    save_checkpoint(model.params, model.vocab, cfg, ws.path(ckpt))
    ws.produced(ckpt)
    ws.produced(str(Path(ckpt).parent / "vocab.json"))
    ws.write_text(history, model.history.to_csv())
    splits = by_split(programs)
    metrics = {
        "epochs_run": len(model.history.epochs),
        "best_epoch": model.history.best_epoch,
        "val_accuracy": accuracy(model, splits["val"]),
        "test_accuracy": accuracy(model, splits["test"]) if splits["test"] else None,
        "n_train": len(splits["train"]),
        "n_val": len(splits["val"]),
        "n_test": len(splits["test"]),
        "vocab_subtrees": model.vocab.n_subtrees,
        "vocab_nodes": model.vocab.n_nodes,
    }
    ws.write_json(metrics_file, metrics)
    return metrics


def cmd_train_sann(ws: Workspace) -> dict:
    """The corpus model for localization and, when a cohort exists, a model of its submissions."""
    from .pipeline import distinct_submissions

    cfg = sann_config(ws.config)
    metrics = _fit_sann(ws, _load_corpus(ws, CORPUS), cfg, SANN_CKPT, SANN_HISTORY, SANN_METRICS)
    ws.write_manifest("sann")
    result = {"sann": metrics}
    if ws.config.get("students") is not None and ws.path(STUDENT_PROGRAMS).exists():
        student_ws = Workspace(ws.root, ws.command, ws.config)
        scfg = student_sann_config(ws.config)
        submissions = distinct_submissions(_load_corpus(student_ws, STUDENT_PROGRAMS))
        result["student_sann"] = _fit_sann(student_ws, submissions, scfg, STUDENT_SANN_CKPT,
                                           STUDENT_SANN_HISTORY, STUDENT_SANN_METRICS)
        student_ws.write_manifest("sann-students")
    return result


def cmd_localize(ws: Workspace) -> dict:
    from .localize import EmptyEvaluationSet, LocalizationMetrics
    from .pipeline import by_split, localization_metrics, localize_programs, normalized_entropy

    threshold, force, split = localize_options(ws.config)
    model = _load_sann(ws)
    programs = by_split(_load_corpus(ws, CORPUS))[split]
    pairs = localize_programs(model, programs, threshold, force)
    try:
        m = localization_metrics(pairs)
    except EmptyEvaluationSet as exc:
        raise DataProblem(f"nothing to localize in the {split} split: {exc}") from None
    ws.write_text(LOC_REPORTS, "".join(r.to_json() + "\n" for _, r in pairs))
    ws.write_text(LOC_METRICS_CSV, m.to_csv())
    metrics = dict(m.to_row(), per_category_counts=m.per_category_counts, threshold=threshold, split=split,
                   n_incorrect=sum(p.label == 0 for p in programs),
                   attention_entropy=normalized_entropy(model, programs))
    ws.write_json(LOC_METRICS, metrics)
    ws.write_manifest("localize")
    return metrics


def _student_vectors(ws: Workspace):
    from .pipeline import program_code_vectors

    traces, programs, grades = _load_students(ws)
    model = _load_sann(ws, STUDENT_SANN_CKPT, STUDENT_SANN_VOCAB)
    vectors = program_code_vectors(model, programs)
    known = {e.program_id for t in traces for e in t.events}
    missing = known - set(vectors)
    if missing:
        raise DataProblem(f"{STUDENT_PROGRAMS} lacks {len(missing)} submissions referenced by the traces")
    return traces, vectors, grades


def _problem_count(ws: Workspace, traces) -> int:
    scfg = student_config(ws.config)
    if scfg is not None:
        return len(scfg.problems)
    return max(e.q for t in traces for e in t.events)


def cmd_train_dkt(ws: Workspace) -> dict:
    from .student import SingleStudentSplitViolation, TraceTooShort, auc, dkt_scores, dkt_train, save_dkt

    configs = dkt_configs(ws.config)
    traces, vectors, _ = _student_vectors(ws)
    M = _problem_count(ws, traces)
    split = {s: [t for t in traces if t.split == s] for s in ("train", "val", "test")}
    if not split["train"] or not split["test"]:
        raise DataProblem("student traces need non-empty train and test splits")
    ws.path("dkt").mkdir(parents=True, exist_ok=True)
    per_seed = []
    for i, cfg in enumerate(configs):
        row = {"seed": cfg.seed}
        for name, cv in (("plain", None), ("sann", vectors)):
            try:
                model = dkt_train(split["train"], split["val"], M, cfg, code_vectors=cv, log=log.info)
            except (TraceTooShort, SingleStudentSplitViolation) as exc:
                raise DataProblem(str(exc)) from None
            rows = dkt_scores(model, split["test"], cv)
            row[f"auc_{name}"] = auc((r[3], r[4]) for r in rows)
            row[f"epochs_{name}"] = len(model.history)
            ws.write_text(f"dkt/predictions_{name}_seed{cfg.seed}.csv",
                          _csv_text(["student_id", "step", "q_next", "y_pred", "a_true"], rows))
            if i == 0:
                save_dkt(model, ws.path(f"dkt/{name}.ckpt"))
                ws.produced(f"dkt/{name}.ckpt")
        row["lift"] = row["auc_sann"] - row["auc_plain"]
        log.info("dkt seed %d: plain %.4f sann %.4f", cfg.seed, row["auc_plain"], row["auc_sann"])
        per_seed.append(row)
    n = len(per_seed)
    metrics = {
        "per_seed": per_seed,
        "mean_auc_plain": sum(r["auc_plain"] for r in per_seed) / n,
        "mean_auc_sann": sum(r["auc_sann"] for r in per_seed) / n,
        "mean_lift": sum(r["lift"] for r in per_seed) / n,
        "n_test_students": len(split["test"]),
    }
    ws.write_json(DKT_METRICS, metrics)
    ws.write_manifest("dkt")
    return metrics


def cmd_train_grade(ws: Workspace) -> dict:
    import numpy as np

    from .student import ZeroVarianceTruth, assemble_grade_features, grade_predict, grade_train, regression_metrics, save_grade

    cfg = grade_config(ws.config)
    traces, vectors, grades = _student_vectors(ws)
    M = _problem_count(ws, traces)
    d = len(next(iter(vectors.values())))

    def xy(s):
        ts = [t for t in traces if t.split == s]
        missing = [t.student_id for t in ts if t.student_id not in grades]
        if missing:
            raise DataProblem(f"no grade for student {missing[0]}")
        X = np.stack([assemble_grade_features(t, vectors, M, d) for t in ts]) if ts else np.zeros((0, M, 30 * d + 4))
        return ts, X, np.array([grades[t.student_id] for t in ts])

    _, Xtr, ytr = xy("train")
    _, Xva, yva = xy("val")
    tte, Xte, yte = xy("test")
    if len(ytr) == 0 or len(yte) < 2:
        raise DataProblem("grade regression needs training students and at least two test students")
    model = grade_train(Xtr, ytr, cfg, val=(Xva, yva) if len(yva) else None, log=log.info)
    pred = grade_predict(Xte, model)
    baseline = np.full_like(yte, ytr.mean())
    try:
        rmse, r2 = regression_metrics(pred, yte)
        base_rmse, base_r2 = regression_metrics(baseline, yte)
    except ZeroVarianceTruth as exc:
        raise DataProblem(f"test grades have zero variance (rmse {exc.rmse})") from None
    ws.path("grade").mkdir(parents=True, exist_ok=True)
    save_grade(model, ws.path("grade/model.ckpt"))
    ws.produced("grade/model.ckpt")
    ws.write_text("grade/predictions.csv", _csv_text(
        ["student_id", "grade_pred", "grade_true"],
        [(t.student_id, float(p), float(y)) for t, p, y in zip(tte, pred, yte)],
    ))
    metrics = {
        "rmse": rmse,
        "r2": r2,
        "baseline_rmse": base_rmse,
        "baseline_r2": base_r2,
        "epochs_run": len(model.history),
        "n_train": int(len(ytr)),
        "n_test": int(len(yte)),
    }
    ws.write_json(GRADE_METRICS, metrics)
    ws.write_manifest("grade")
    return metrics


EVAL_SOURCES = {
    "classification": SANN_METRICS,
    "student_classification": STUDENT_SANN_METRICS,
    "localization": LOC_METRICS,
    "knowledge_tracing": DKT_METRICS,
    "grade_regression": GRADE_METRICS,
}


def cmd_eval(ws: Workspace) -> dict:
    summary = {}
    for section, rel in EVAL_SOURCES.items():
        if ws.path(rel).exists():
            obj = json.loads(ws.need(rel).read_text(encoding="utf-8"))
            summary[section] = {k: v for k, v in obj.items() if isinstance(v, (int, float, str)) or v is None}
    if not summary:
        raise DataProblem("no metrics to aggregate: run `sannloc train-sann`, `sannloc localize`, "
                          "`sannloc train-dkt` or `sannloc train-grade` first")
    ws.write_json(EVAL_SUMMARY, summary)
    rows = [(s, k, v) for s, obj in summary.items() for k, v in obj.items()]
    ws.write_text(EVAL_SUMMARY_CSV, _csv_text(["section", "metric", "value"], rows))
    ws.write_manifest("eval")
    return summary


def cmd_gradcheck(ws: Workspace) -> dict:
    from .checks import run_gradchecks

    results = run_gradchecks(ws.config["seed"])
    report = {"checks": [r.to_obj() for r in results], "passed": all(r.passed for r in results)}
    ws.write_json(GRADCHECK_REPORT, report)
    ws.write_manifest("gradcheck")
    if not report["passed"]:
        failed = ", ".join(r.name for r in results if not r.passed)
        raise CliError(f"gradient check failed: {failed}")
    return report


COMMANDS = {
    "corpus": (cmd_corpus, "generate the labeled program corpus and the simulated student cohort"),
    "train-sann": (cmd_train_sann, "train the subtree-attention classifier on the corpus and on the cohort's submissions"),
    "localize": (cmd_localize, "flag high-attention subtrees and score them against labeled errors"),
    "train-dkt": (cmd_train_dkt, "train plain and code-vector knowledge tracing models"),
    "train-grade": (cmd_train_grade, "train the final-grade regressor"),
    "eval": (cmd_eval, "aggregate all metrics into one summary"),
    "gradcheck": (cmd_gradcheck, "finite-difference check of every layer and loss"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sannloc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"sannloc {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="override the run seed")
    common.add_argument("--workdir", default=".", help="root for all inputs and outputs (default: .)")
    common.add_argument("--threads", type=int, default=1, help="BLAS threads (default 1, deterministic)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config value, e.g. sann.epochs=5 (value parsed as JSON)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def _data_errors() -> tuple[type, ...]:
    from .forge import NoApplicableSite
    from .lang import LexError, ParseError, SchemaError
    from .localize import EmptyEvaluationSet

    return (OSError, json.JSONDecodeError, UnicodeDecodeError, LexError, ParseError, SchemaError,
            EmptyEvaluationSet, NoApplicableSite)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        if args.threads < 1:
            raise ConfigProblem("--threads must be >= 1")
        config = load_config(args.config, args.seed, args.set)
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=args.threads):
            fn = COMMANDS[args.command][0]
            result = fn(Workspace(args.workdir, args.command, config))
    except CliError as exc:
        print(f"sannloc {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:
        if isinstance(exc, _data_errors()):
            print(f"sannloc {args.command}: data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        import traceback

        traceback.print_exc()
        return EXIT_INTERNAL
    print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
