"""Benchmark runner, answer-letter extraction, judge scoring, dataset stats."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Optional

from .backends.client import BackendClient
from .errors import BackendError, EmptyBenchmark, JudgeParseError
from .generate import QAItem

logger = logging.getLogger(__name__)

LETTERS = "ABCD"
BENCHMARK_TEMPLATE = "benchmark_v1"
JUDGE_TEMPLATE = "judge_v1"

QUALITY_DIMENSIONS = (
    "fine_grained_action_accuracy",
    "motion_detail_and_specificity",
    "temporal_coherence",
    "question_relevance",
    "overall_qa_quality",
)

_DIMENSION_LABELS = {
    "fine_grained_action_accuracy": "Fine-grained Action Accuracy",
    "motion_detail_and_specificity": "Motion Detail and Specificity",
    "temporal_coherence": "Temporal Coherence",
    "question_relevance": "Question Relevance",
    "overall_qa_quality": "Overall QA Quality",
}


@lru_cache(maxsize=None)
def _template(name: str) -> str:
    return resources.files("motioncurate.prompts").joinpath(f"{name}.txt").read_text()


def render_benchmark_prompt(item: QAItem) -> str:
    template = _template(BENCHMARK_TEMPLATE)
    return (
        template.replace("{question}", item.question)
        .replace("{option_a}", item.options[0])
        .replace("{option_b}", item.options[1])
        .replace("{option_c}", item.options[2])
        .replace("{option_d}", item.options[3])
    )


@dataclass
class ItemResult:
    video_id: str
    reply: Optional[str]
    extracted: Optional[str]
    correct: bool


@dataclass
class BenchmarkRun:
    """Per-item outcomes plus accuracy as a percentage of all items.

    Unanswered and unextractable replies count as incorrect, never excluded.
    """

    name: str
    items: list[ItemResult] = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.items)

    @property
    def correct(self) -> int:
        return sum(1 for item in self.items if item.correct)

    @property
    def accuracy(self) -> float:
        return 100.0 * self.correct / self.total

    def to_payload(self) -> dict:
        return {
            "benchmark": self.name,
            "total": self.total,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "items": [
                {
                    "video_id": item.video_id,
                    "reply": item.reply,
                    "extracted": item.extracted,
                    "correct": item.correct,
                }
                for item in self.items
            ],
        }


_LEADING_LETTER = re.compile(r"^\s*\(?([A-D])\)?\s*(?:[.:,)]|$)", re.IGNORECASE)
_ANSWER_TAG = re.compile(r"\banswer(?:\s+is)?\s*[:\-]?\s*\(?([A-D])\)?\b", re.IGNORECASE)
_PARENS = re.compile(r"\(([A-D])\)", re.IGNORECASE)


def extract_answer_letter(reply: str, options: tuple[str, str, str, str]) -> Optional[str]:
    """First match wins: leading letter, then 'Answer: X', then '(X)', then a
    unique exact option-text match; None otherwise."""
    if not reply:
        return None
    match = _LEADING_LETTER.match(reply)
    if match:
        return match.group(1).upper()
    match = _ANSWER_TAG.search(reply)
    if match:
        return match.group(1).upper()
    match = _PARENS.search(reply)
    if match:
        return match.group(1).upper()
    normalized = " ".join(reply.lower().split())
    hits = []
    for i, option in enumerate(options):
        text = " ".join(option.lower().split())
        if text and text in normalized:
            hits.append(LETTERS[i])
    if len(hits) == 1:
        return hits[0]
    return None


def run_benchmark(items: list[QAItem], client: BackendClient, *, name: str = "benchmark") -> BenchmarkRun:
    """Ask the evaluated model every question; a failed call scores incorrect."""
    if not items:
        raise EmptyBenchmark("benchmark has no items")
    run = BenchmarkRun(name=name)
    for item in items:
        prompt = render_benchmark_prompt(item)
        try:
            reply = client.answer(prompt)
        except BackendError as exc:
            logger.warning("model failed on an item: %s", exc)
            run.items.append(ItemResult(item.video_id, None, None, False))
            continue
        letter = extract_answer_letter(reply, item.options)
        correct = letter is not None and LETTERS.index(letter) == item.answer_index
        run.items.append(ItemResult(item.video_id, reply, letter, correct))
    return run


@dataclass(frozen=True)
class QualityScore:
    """The five judged dimensions, each within [0, 10]."""

    fine_grained_action_accuracy: float
    motion_detail_and_specificity: float
    temporal_coherence: float
    question_relevance: float
    overall_qa_quality: float

    def __post_init__(self) -> None:
        for name in QUALITY_DIMENSIONS:
            value = getattr(self, name)
            if not (0.0 <= value <= 10.0):
                raise JudgeParseError(f"{name} score {value} outside [0, 10]")

    def to_payload(self) -> dict:
        return {name: getattr(self, name) for name in QUALITY_DIMENSIONS}


def _render_qa_set(items: list[QAItem]) -> str:
    lines = []
    for n, item in enumerate(items, start=1):
        lines.append(f"Q{n}: {item.question}")
        for letter, option in zip(LETTERS, item.options):
            marker = " (correct)" if LETTERS.index(letter) == item.answer_index else ""
            lines.append(f"{letter}: {option}{marker}")
        lines.append("")
    return "\n".join(lines).strip()


def build_judge_prompt(set_a: list[QAItem], set_b: list[QAItem]) -> str:
    template = _template(JUDGE_TEMPLATE)
    return template.replace("{set_a}", _render_qa_set(set_a)).replace(
        "{set_b}", _render_qa_set(set_b)
    )


def parse_judge_reply(text: str) -> tuple[QualityScore, QualityScore]:
    """Pull the five dimension scores per set out of the judge's reply."""
    sections = re.split(r"(?im)^\s*set\s+([AB])\s*:\s*$", text)
    blocks: dict[str, str] = {}
    for i in range(1, len(sections) - 1, 2):
        blocks[sections[i].upper()] = sections[i + 1]
    if set(blocks) != {"A", "B"}:
        raise JudgeParseError(f"expected Set A and Set B sections, found {sorted(blocks)}")
    return _parse_scores(blocks["A"]), _parse_scores(blocks["B"])


def _parse_scores(block: str) -> QualityScore:
    values = {}
    for name in QUALITY_DIMENSIONS:
        label = _DIMENSION_LABELS[name]
        match = re.search(
            rf"{re.escape(label)}\s*[:\-]\s*(-?\d+(?:\.\d+)?)", block, re.IGNORECASE
        )
        if not match:
            raise JudgeParseError(f"missing dimension {label!r}")
        values[name] = float(match.group(1))
    return QualityScore(**values)


def judge_qa_quality(
    set_a: list[QAItem],
    set_b: list[QAItem],
    client: BackendClient,
    *,
    runs: int = 3,
) -> tuple[QualityScore, QualityScore]:
    """Average the judge over several runs; unparseable runs are dropped with a warning."""
    prompt = build_judge_prompt(set_a, set_b)
    scored: list[tuple[QualityScore, QualityScore]] = []
    for run in range(runs):
        reply = client.judge(prompt)
        try:
            scored.append(parse_judge_reply(reply))
        except JudgeParseError as exc:
            logger.warning("judge run %d unparseable, excluded from average: %s", run + 1, exc)
    if not scored:
        raise JudgeParseError(f"all {runs} judge runs were unparseable")

    def average(index: int) -> QualityScore:
        return QualityScore(
            **{
                name: sum(getattr(pair[index], name) for pair in scored) / len(scored)
                for name in QUALITY_DIMENSIONS
            }
        )

    return average(0), average(1)


@dataclass
class DatasetStats:
    """The four headline averages plus the three distribution histograms."""

    total_questions: int
    total_videos: int
    average_video_duration: float
    average_questions_per_video: float
    questions_per_second: float
    average_question_length: float
    answer_position_histogram: list[int]
    question_length_histogram: dict[int, int]
    video_duration_histogram: dict[int, int]

    def to_payload(self) -> dict:
        return {
            "total_questions": self.total_questions,
            "total_videos": self.total_videos,
            "average_video_duration_seconds": self.average_video_duration,
            "average_questions_per_video": self.average_questions_per_video,
            "questions_per_second": self.questions_per_second,
            "average_question_length_chars": self.average_question_length,
            "answer_position_histogram": self.answer_position_histogram,
            "question_length_histogram": {
                str(k): v for k, v in sorted(self.question_length_histogram.items())
            },
            "video_duration_histogram": {
                str(k): v for k, v in sorted(self.video_duration_histogram.items())
            },
        }


LENGTH_BIN_CHARS = 10
DURATION_BIN_SECONDS = 1


def dataset_stats(items: list[QAItem], video_durations: dict[str, float]) -> DatasetStats:
    """Aggregate over every item and every known video; order-independent."""
    if not items:
        raise EmptyBenchmark("no QA items to aggregate")
    if not video_durations:
        raise EmptyBenchmark("no video durations to aggregate")
    positions = [0, 0, 0, 0]
    length_hist: dict[int, int] = {}
    duration_hist: dict[int, int] = {}
    total_length = 0
    for item in items:
        positions[item.answer_index] += 1
        length = len(item.question)
        total_length += length
        bin_start = (length // LENGTH_BIN_CHARS) * LENGTH_BIN_CHARS
        length_hist[bin_start] = length_hist.get(bin_start, 0) + 1
    for duration in video_durations.values():
        bin_start = int(duration // DURATION_BIN_SECONDS) * DURATION_BIN_SECONDS
        duration_hist[bin_start] = duration_hist.get(bin_start, 0) + 1
    total_duration = sum(video_durations.values())
    n_videos = len(video_durations)
    return DatasetStats(
        total_questions=len(items),
        total_videos=n_videos,
        average_video_duration=total_duration / n_videos,
        average_questions_per_video=len(items) / n_videos,
        questions_per_second=len(items) / total_duration,
        average_question_length=total_length / len(items),
        answer_position_histogram=positions,
        question_length_histogram=length_hist,
        video_duration_histogram=duration_hist,
    )


def load_qa_jsonl(path: Path) -> list[QAItem]:
    items = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            items.append(QAItem.from_json_line(line))
    return items


def load_benchmark_file(path: Path) -> list[QAItem]:
    """Adapter for external benchmark files: {question, options[4], answer_index}."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    items = []
    for n, entry in enumerate(raw):
        items.append(
            QAItem(
                video_id=entry.get("video_id", f"item_{n:05d}"),
                question=entry["question"],
                options=tuple(entry["options"]),
                answer_index=int(entry["answer_index"]),
                category=entry.get("category", "motion_recognition"),
                provenance=entry.get("provenance", str(path)),
            )
        )
    return items


def format_accuracy_table(runs: list[BenchmarkRun]) -> str:
    """Human-readable accuracy table, one row per model/benchmark pair."""
    width = max([len(run.name) for run in runs] + [len("Benchmark")])
    lines = [f"{'Benchmark':<{width}}  {'Accuracy (%)':>12}  {'Correct':>8}  {'Total':>6}"]
    lines.append("-" * len(lines[0]))
    for run in runs:
        lines.append(
            f"{run.name:<{width}}  {run.accuracy:>12.1f}  {run.correct:>8}  {run.total:>6}"
        )
    return "\n".join(lines)
