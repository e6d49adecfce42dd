"""Multimodal dialogue records: ingestion, validation-set generation, splitting.

A dataset file is UTF-8 JSONL, one record per line:

    {"id": str, "task": "intent"|"image_scene",
     "turns": [{"speaker": "user"|"service_rep", "text": str}, ...],
     "ocr_text": str, "image_ref": str|null, "gold_label": str|null}

A taxonomy file is a single JSON object mapping ``"intent"`` and
``"image_scene"`` to arrays of label strings.
"""

from __future__ import annotations

import enum
import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .errors import DatasetError


class Task(str, enum.Enum):
    INTENT = "intent"
    IMAGE_SCENE = "image_scene"


class Speaker(str, enum.Enum):
    USER = "user"
    SERVICE_REP = "service_rep"


@dataclass(frozen=True)
class Turn:
    speaker: Speaker
    text: str


@dataclass(frozen=True)
class DialogueSample:
    """One multimodal record: speaker-tagged turns plus precomputed OCR text.

    OCR text arrives already extracted; an empty string is legal and simply
    means OCR produced nothing usable for that screenshot.
    """

    id: str
    task: Task
    turns: tuple[Turn, ...]
    ocr_text: str = ""
    image_ref: str | None = None
    gold_label: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("sample id must be a non-empty string")
        if self.task is Task.INTENT and not self.turns:
            raise ValueError(f"intent sample {self.id!r} must have at least one turn")
        if self.task is Task.IMAGE_SCENE and not self.ocr_text and not self.image_ref:
            raise ValueError(
                f"image_scene sample {self.id!r} needs non-empty ocr_text or image_ref"
            )


@dataclass(frozen=True)
class LabelTaxonomy:
    """Ordered label lists per task; the two tasks never share a label."""

    intent: tuple[str, ...]
    image_scene: tuple[str, ...]

    def __post_init__(self) -> None:
        for task, labels in (("intent", self.intent), ("image_scene", self.image_scene)):
            seen: set[str] = set()
            for label in labels:
                if label in seen:
                    raise DatasetError(f"duplicate label {label!r} in task {task!r}")
                seen.add(label)
        overlap = set(self.intent) & set(self.image_scene)
        if overlap:
            raise DatasetError(
                f"labels shared between tasks are not allowed: {sorted(overlap)!r}"
            )

    def labels_for(self, task: Task) -> tuple[str, ...]:
        return self.intent if task is Task.INTENT else self.image_scene

    def joint_labels(self) -> tuple[str, ...]:
        return self.intent + self.image_scene


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[DialogueSample, ...]
    validation: tuple[DialogueSample, ...]

    def __post_init__(self) -> None:
        shared = {s.id for s in self.train} & {s.id for s in self.validation}
        if shared:
            raise DatasetError(f"samples present in both split sides: {sorted(shared)!r}")


class Rephraser(Protocol):
    """Anything that can reword a piece of text, e.g. an agent handle."""

    def rephrase(self, text: str) -> str: ...


def load_taxonomy(path: str | Path) -> LabelTaxonomy:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise DatasetError("taxonomy file must contain a JSON object")
    labels: dict[str, tuple[str, ...]] = {}
    for task in ("intent", "image_scene"):
        entries = raw.get(task)
        if not isinstance(entries, list) or not all(isinstance(x, str) for x in entries):
            raise DatasetError(f"taxonomy field {task!r} must be an array of strings")
        labels[task] = tuple(entries)
    return LabelTaxonomy(intent=labels["intent"], image_scene=labels["image_scene"])


def save_taxonomy(taxonomy: LabelTaxonomy, path: str | Path) -> None:
    doc = {"intent": list(taxonomy.intent), "image_scene": list(taxonomy.image_scene)}
    Path(path).write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


_SAMPLE_FIELDS = {"id", "task", "turns", "ocr_text", "image_ref", "gold_label"}
_TURN_FIELDS = {"speaker", "text"}


def _parse_record(record: dict, line_no: int, taxonomy: LabelTaxonomy) -> DialogueSample:
    unknown = set(record) - _SAMPLE_FIELDS
    if unknown:
        raise DatasetError(f"line {line_no}: unknown field {sorted(unknown)[0]!r}")

    def fail(field: str, detail: str) -> DatasetError:
        return DatasetError(f"line {line_no}: field {field!r} {detail}")

    sample_id = record.get("id")
    if not isinstance(sample_id, str) or not sample_id:
        raise fail("id", "must be a non-empty string")
    task_raw = record.get("task")
    try:
        task = Task(task_raw)
    except ValueError:
        raise fail("task", f"has unknown value {task_raw!r}") from None

    turns_raw = record.get("turns")
    if not isinstance(turns_raw, list):
        raise fail("turns", "must be an array")
    turns = []
    for i, turn in enumerate(turns_raw):
        if not isinstance(turn, dict) or set(turn) != _TURN_FIELDS:
            raise fail("turns", f"entry {i} must be an object with speaker and text")
        try:
            speaker = Speaker(turn["speaker"])
        except ValueError:
            raise fail("turns", f"entry {i} has unknown speaker {turn['speaker']!r}") from None
        if not isinstance(turn["text"], str):
            raise fail("turns", f"entry {i} text must be a string")
        turns.append(Turn(speaker=speaker, text=turn["text"]))

    ocr_text = record.get("ocr_text", "")
    if not isinstance(ocr_text, str):
        raise fail("ocr_text", "must be a string")
    image_ref = record.get("image_ref")
    if image_ref is not None and not isinstance(image_ref, str):
        raise fail("image_ref", "must be a string or null")
    gold_label = record.get("gold_label")
    if gold_label is not None:
        if not isinstance(gold_label, str):
            raise fail("gold_label", "must be a string or null")
        if gold_label not in taxonomy.labels_for(task):
            raise DatasetError(
                f"line {line_no}: gold_label {gold_label!r} is not in the "
                f"{task.value} taxonomy"
            )

    try:
        return DialogueSample(
            id=sample_id,
            task=task,
            turns=tuple(turns),
            ocr_text=ocr_text,
            image_ref=image_ref,
            gold_label=gold_label,
        )
    except ValueError as exc:
        raise DatasetError(f"line {line_no}: {exc}") from None


def load_dataset(path: str | Path, taxonomy: LabelTaxonomy) -> list[DialogueSample]:
    """Read a JSONL dataset file, enforcing the record schema and invariants."""

    samples: list[DialogueSample] = []
    seen_ids: set[str] = set()
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {line_no}: invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise DatasetError(f"line {line_no}: record must be a JSON object")
            sample = _parse_record(record, line_no, taxonomy)
            if sample.id in seen_ids:
                raise DatasetError(f"line {line_no}: duplicate id {sample.id!r}")
            seen_ids.add(sample.id)
            samples.append(sample)
    return samples


def sample_to_record(sample: DialogueSample) -> dict:
    return {
        "id": sample.id,
        "task": sample.task.value,
        "turns": [{"speaker": t.speaker.value, "text": t.text} for t in sample.turns],
        "ocr_text": sample.ocr_text,
        "image_ref": sample.image_ref,
        "gold_label": sample.gold_label,
    }


def save_dataset(samples: Iterable[DialogueSample], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for sample in samples:
            handle.write(json.dumps(sample_to_record(sample), ensure_ascii=False) + "\n")


def derived_id(source_id: str, copy_index: int) -> str:
    return f"{source_id}::r{copy_index}"


def generate_validation(
    train: Sequence[DialogueSample],
    rephraser: Rephraser,
    per_sample: int = 1,
    *,
    retry_budget: int = 3,
    max_workers: int = 1,
) -> tuple[list[DialogueSample], int]:
    """Produce rephrased copies of the training samples for validation.

    Each copy keeps the source's task, gold label, OCR text and image ref;
    only the turn texts pass through the rephraser. A copy whose rephrase
    calls keep failing after ``retry_budget`` attempts is skipped. Returns
    the copies sorted by derived id together with the skip tally.
    """

    if per_sample < 1:
        raise ValueError("per_sample must be >= 1")
    for sample in train:
        if sample.gold_label is None:
            raise DatasetError(f"sample {sample.id!r} has no gold_label; cannot rephrase")

    def rephrase_with_retries(text: str) -> str:
        last: Exception | None = None
        for _ in range(retry_budget):
            try:
                return rephraser.rephrase(text)
            except Exception as exc:  # noqa: BLE001 - any rephraser failure is retryable
                last = exc
        raise last if last is not None else RuntimeError("rephraser produced no result")

    def make_copy(source: DialogueSample, copy_index: int) -> DialogueSample | None:
        try:
            turns = tuple(
                Turn(speaker=t.speaker, text=rephrase_with_retries(t.text))
                for t in source.turns
            )
        except Exception:  # noqa: BLE001 - budget exhausted, skip this copy
            return None
        return DialogueSample(
            id=derived_id(source.id, copy_index),
            task=source.task,
            turns=turns,
            ocr_text=source.ocr_text,
            image_ref=source.image_ref,
            gold_label=source.gold_label,
        )

    jobs = [(sample, i) for sample in train for i in range(per_sample)]
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            copies = list(pool.map(lambda job: make_copy(*job), jobs))
    else:
        copies = [make_copy(sample, i) for sample, i in jobs]

    generated = sorted((c for c in copies if c is not None), key=lambda s: s.id)
    skipped = sum(1 for c in copies if c is None)
    return generated, skipped


def stratified_split(
    samples: Sequence[DialogueSample],
    validation_fraction: float,
    seed: int,
) -> DatasetSplit:
    """Split per label so each label's validation share tracks the fraction.

    Fallback for corpora without a rephraser: every label contributes
    ``round(fraction * n)`` samples to validation, clamped so both sides
    stay non-empty. Deterministic for a fixed seed.
    """

    if not 0.0 < validation_fraction < 1.0:
        raise ValueError("validation_fraction must be in (0, 1)")
    groups: dict[tuple[str, str], list[DialogueSample]] = {}
    for sample in samples:
        if sample.gold_label is None:
            raise DatasetError(f"sample {sample.id!r} has no gold_label; cannot split")
        groups.setdefault((sample.task.value, sample.gold_label), []).append(sample)

    rng = random.Random(seed)
    validation_ids: set[str] = set()
    for key in sorted(groups):
        bucket = groups[key]
        if len(bucket) < 2:
            raise DatasetError(
                f"label {key[1]!r} has fewer than 2 samples; cannot stratify"
            )
        ids = [s.id for s in bucket]
        rng.shuffle(ids)
        n_val = int(round(validation_fraction * len(bucket)))
        n_val = min(max(n_val, 1), len(bucket) - 1)
        validation_ids.update(ids[:n_val])

    train = tuple(s for s in samples if s.id not in validation_ids)
    validation = tuple(s for s in samples if s.id in validation_ids)
    return DatasetSplit(train=train, validation=validation)
