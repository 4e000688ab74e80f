"""Caption and QA generation: prompt assembly, output parsing, shuffling,
category tagging, and quality validation."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Optional

import numpy as np

from .backends.client import BackendClient
from .errors import BackendError, CaptionError, QaParseError

CAPTION_TEMPLATE = "caption_v1"
QA_TEMPLATE = "qa_v1"

CATEGORIES = (
    "motion_recognition",
    "action_order",
    "motion_related_object",
    "location_related_motion",
    "repetition_count",
)


@lru_cache(maxsize=None)
def load_prompt(name: str) -> str:
    return resources.files("motioncurate.prompts").joinpath(f"{name}.txt").read_text()


@lru_cache(maxsize=None)
def prompt_hash(name: str) -> str:
    return hashlib.sha256(load_prompt(name).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CaptionPrompt:
    """Assembled caption request plus the fingerprint of everything that shaped it."""

    prompt: str
    frames: list[dict]
    overlay: Optional[dict]
    thinning_stride: int
    fingerprint: str


@dataclass(frozen=True)
class CaptionRecord:
    video_id: str
    caption: str
    fingerprint: str
    model_tag: str

    def to_payload(self) -> dict:
        return {
            "video_id": self.video_id,
            "caption": self.caption,
            "fingerprint": self.fingerprint,
            "model_tag": self.model_tag,
        }


def _fingerprint(*parts: str) -> str:
    digest = hashlib.sha256()
    for part in parts:
        digest.update(part.encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()


def thin_document(document: dict, stride: int) -> dict:
    """Keep every stride-th frame entry of each per-frame list."""
    if stride <= 1:
        return document
    thinned = {}
    for key, entry in document.items():
        thinned[key] = {
            "bbox": entry["bbox"][::stride],
            "object_type": entry["object_type"],
            "interactions": entry["interactions"][::stride],
        }
    return thinned


def build_caption_prompt(
    document: dict,
    caption_frames: list[dict],
    overlay: Optional[dict],
    *,
    max_prompt_bytes: int = 262144,
) -> CaptionPrompt:
    """Substitute the motion JSON into the caption template.

    Oversize documents are thinned by frame stride (never truncated) until the
    prompt fits; the stride used is recorded.
    """
    from .annotate import serialize_motion_json

    template = load_prompt(CAPTION_TEMPLATE)
    frame_span = max(
        (len(entry["bbox"]) for entry in document.values()), default=0
    )
    stride = 1
    while True:
        motion_info = serialize_motion_json(thin_document(document, stride))
        prompt = template.replace("{motion_info}", motion_info)
        if len(prompt.encode("utf-8")) <= max_prompt_bytes or stride >= max(1, frame_span):
            break
        stride += 1
    fingerprint = _fingerprint(
        CAPTION_TEMPLATE,
        prompt_hash(CAPTION_TEMPLATE),
        motion_info,
        ",".join(str(f["frame_index"]) for f in caption_frames),
        json.dumps(overlay, sort_keys=True) if overlay is not None else "null",
        f"stride={stride}",
    )
    return CaptionPrompt(
        prompt=prompt,
        frames=caption_frames,
        overlay=overlay,
        thinning_stride=stride,
        fingerprint=fingerprint,
    )


def generate_caption(
    payload: CaptionPrompt,
    client: BackendClient,
    *,
    video_id: str,
    model_tag: str = "llm",
) -> CaptionRecord:
    """One caption call; the client retries transient failures with the same payload."""
    try:
        reply = client.llm(payload.prompt, payload.frames, payload.overlay)
    except BackendError as exc:
        raise CaptionError(f"caption generation failed for {video_id}: {exc}") from exc
    if not reply.strip():
        raise CaptionError(f"empty caption reply for {video_id}")
    return CaptionRecord(
        video_id=video_id, caption=reply, fingerprint=payload.fingerprint, model_tag=model_tag
    )


@dataclass(frozen=True)
class QaPrompt:
    prompt: str
    frames: list[dict]
    fingerprint: str


def build_qa_prompt(caption: str, caption_frames: list[dict]) -> QaPrompt:
    if not caption.strip():
        raise CaptionError("cannot build a QA prompt from an empty caption")
    template = load_prompt(QA_TEMPLATE)
    prompt = template.replace("{caption}", caption)
    fingerprint = _fingerprint(
        QA_TEMPLATE,
        prompt_hash(QA_TEMPLATE),
        caption,
        ",".join(str(f["frame_index"]) for f in caption_frames),
    )
    return QaPrompt(prompt=prompt, frames=caption_frames, fingerprint=fingerprint)


@dataclass(frozen=True)
class ParsedQA:
    """One parsed question with options in generation order (correct at index 0)."""

    question: str
    options: tuple[str, str, str, str]
    correct_index: int = 0


@dataclass
class QaParseResult:
    items: list[ParsedQA] = field(default_factory=list)
    dropped: int = 0


_QUESTION_LINE = re.compile(r"^\s*['\"]?Q(\d+)\s*[:.]\s*(.*)$")
_OPTION_LINE = re.compile(r"^\s*([A-D])\s*[:.]\s*(.*)$")


def parse_qa_output(raw: str) -> QaParseResult:
    """Parse the list-of-strings generation format into pre-shuffle items.

    Tolerates surrounding brackets and quotes, blank-line variation, and
    trailing commas. Items without exactly the four options A-D are dropped
    and counted; zero parseable items is an error.
    """
    text = raw.strip()
    if text.startswith("[") and text.endswith("]"):
        text = text[1:-1]

    blocks: list[list[str]] = []
    current: list[str] | None = None
    for line in text.splitlines():
        if _QUESTION_LINE.match(line):
            if current:
                blocks.append(current)
            current = [line]
        elif current is not None:
            current.append(line)
    if current:
        blocks.append(current)

    result = QaParseResult()
    for block in blocks:
        item = _parse_block(block)
        if item is None:
            result.dropped += 1
        else:
            result.items.append(item)
    if not result.items:
        raise QaParseError(f"no parseable questions in reply of {len(raw)} chars")
    return result


def _parse_block(lines: list[str]) -> Optional[ParsedQA]:
    match = _QUESTION_LINE.match(lines[0])
    question_parts = [match.group(2)]
    options: dict[str, str] = {}
    current_letter: str | None = None
    for line in lines[1:]:
        option = _OPTION_LINE.match(line)
        if option:
            current_letter = option.group(1)
            if current_letter in options:
                return None
            options[current_letter] = option.group(2)
        elif current_letter is not None:
            options[current_letter] += " " + line.strip()
        elif line.strip():
            question_parts.append(line.strip())

    question = _strip_item_noise(" ".join(p for p in question_parts if p).strip())
    cleaned = {letter: _strip_item_noise(value.strip()) for letter, value in options.items()}
    if sorted(cleaned) != ["A", "B", "C", "D"]:
        return None
    if not question or any(not cleaned[letter] for letter in "ABCD"):
        return None
    return ParsedQA(
        question=question,
        options=(cleaned["A"], cleaned["B"], cleaned["C"], cleaned["D"]),
        correct_index=0,
    )


def _strip_item_noise(text: str) -> str:
    # trailing list syntax: quote and/or comma left over from the string-list format
    return re.sub(r"\s*['\"]?,?\s*$", "", text).strip()


@dataclass(frozen=True)
class QAItem:
    """A post-shuffle four-option question as written to qa.jsonl."""

    video_id: str
    question: str
    options: tuple[str, str, str, str]
    answer_index: int
    category: str
    provenance: str

    def __post_init__(self) -> None:
        if len(self.options) != 4:
            raise ValueError("exactly four options required")
        if not (0 <= self.answer_index <= 3):
            raise ValueError(f"answer index {self.answer_index} outside 0..3")
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "video_id": self.video_id,
                "question": self.question,
                "options": list(self.options),
                "answer_index": self.answer_index,
                "category": self.category,
                "provenance": self.provenance,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json_line(cls, line: str) -> "QAItem":
        raw = json.loads(line)
        return cls(
            video_id=raw["video_id"],
            question=raw["question"],
            options=tuple(raw["options"]),
            answer_index=int(raw["answer_index"]),
            category=raw["category"],
            provenance=raw.get("provenance", ""),
        )


def shuffle_choices(item: ParsedQA, rng: np.random.Generator) -> ParsedQA:
    """Uniformly permute the options; correct_index follows the correct text."""
    permutation = rng.permutation(4)
    options = tuple(item.options[permutation[i]] for i in range(4))
    correct_index = int(np.nonzero(permutation == item.correct_index)[0][0])
    return ParsedQA(question=item.question, options=options, correct_index=correct_index)


_REPETITION = ("how many times", "how often", "what is the count")
_ORDER = (r"\bfirst\b", r"\bbefore\b", r"\bafter\b", r"\border\b")
_LOCATION = (r"\bwhere\b", "which part", "left side", "right side", "part of the scene")
_ACTOR = ("which object", "what object", "who performs", "who or what", "which person")


def categorize_qa(question: str, llm_client: Optional[BackendClient] = None) -> str:
    """Rule-first category recovery; the optional LLM only breaks no-rule cases."""
    q = question.lower()
    if any(re.search(k, q) for k in _REPETITION):
        return "repetition_count"
    if any(re.search(k, q) for k in _ORDER):
        return "action_order"
    if any(re.search(k, q) for k in _LOCATION):
        return "location_related_motion"
    if any(re.search(k, q) for k in _ACTOR):
        return "motion_related_object"
    if llm_client is not None:
        choice = _ask_llm_category(question, llm_client)
        if choice is not None:
            return choice
    return "motion_recognition"


def _ask_llm_category(question: str, client: BackendClient) -> Optional[str]:
    prompt = (
        "Classify this question into exactly one of: "
        + ", ".join(CATEGORIES)
        + f"\nQuestion: {question}\nReply with the category name only."
    )
    try:
        reply = client.llm(prompt, [], None).strip().lower()
    except BackendError:
        return None
    for category in CATEGORIES:
        if category in reply:
            return category
    return None


@dataclass
class QaValidationReport:
    accepted: list[QAItem] = field(default_factory=list)
    rejected: list[tuple[QAItem, str]] = field(default_factory=list)
    position_counts: list[int] = field(default_factory=lambda: [0, 0, 0, 0])
    category_counts: dict[str, int] = field(default_factory=dict)
    position_flags: list[str] = field(default_factory=list)

    def to_payload(self) -> dict:
        return {
            "accepted": len(self.accepted),
            "rejected": [{"question": item.question, "reason": reason} for item, reason in self.rejected],
            "position_counts": self.position_counts,
            "category_counts": dict(sorted(self.category_counts.items())),
            "position_flags": self.position_flags,
        }


def _loose(text: str) -> str:
    return " ".join(re.sub(r"[^\w\s]", "", text).lower().split())


def validate_qa(items: list[QAItem]) -> QaValidationReport:
    """Quality gate: drop degenerate items, report position/category balance.

    Positions deviating more than 10 points from the uniform 25% are flagged.
    """
    report = QaValidationReport()
    for item in items:
        reason = _reject_reason(item)
        if reason:
            report.rejected.append((item, reason))
            continue
        report.accepted.append(item)
        report.position_counts[item.answer_index] += 1
        report.category_counts[item.category] = report.category_counts.get(item.category, 0) + 1
    total = len(report.accepted)
    if total:
        for position, count in enumerate(report.position_counts):
            pct = 100.0 * count / total
            if abs(pct - 25.0) > 10.0:
                report.position_flags.append(
                    f"position {'ABCD'[position]} at {pct:.1f}% deviates from 25% by more than 10 points"
                )
    return report


def _reject_reason(item: QAItem) -> Optional[str]:
    normalized = [_loose(option) for option in item.options]
    if len(set(normalized)) != 4:
        return "duplicate options"
    if _loose(item.options[item.answer_index]) == _loose(item.question):
        return "answer repeats the question"
    return None
