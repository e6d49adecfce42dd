"""The predicate DSL: parsing, rendering, evaluation, and rule quality.

Grammar of the canonical text form (and the only accepted form):

    predicate := field SP op SP '"' value '"'
    field     := "user_text" | "service_text" | "ocr_text" | "any_text"
    op        := "contains" | "not_contains" | "starts_with" | "ends_with"
    value     := any characters; '"' and '\\' must be backslash-escaped

Matching is substring-style over NFKC-normalized, case-folded text; there
are deliberately no regular expressions, so two evaluations of the same
predicate can never disagree.
"""

from __future__ import annotations

import enum
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .dataset import DialogueSample, Speaker, Task
from .errors import PredicateSyntaxError

MAX_VALUE_LENGTH = 128
MAX_RULE_PREDICATES = 5


class PredicateField(str, enum.Enum):
    USER_TEXT = "user_text"
    SERVICE_TEXT = "service_text"
    OCR_TEXT = "ocr_text"
    ANY_TEXT = "any_text"


class PredicateOp(str, enum.Enum):
    CONTAINS = "contains"
    NOT_CONTAINS = "not_contains"
    STARTS_WITH = "starts_with"
    ENDS_WITH = "ends_with"


class RuleSource(str, enum.Enum):
    MCTS = "mcts"
    MANUAL = "manual"


@dataclass(frozen=True)
class Predicate:
    """One atomic, deterministically evaluable condition over a sample."""

    field: PredicateField
    op: PredicateOp
    value: str

    def __post_init__(self) -> None:
        if not self.value:
            raise ValueError("predicate value must be non-empty")
        if len(self.value) > MAX_VALUE_LENGTH:
            raise ValueError(
                f"predicate value exceeds {MAX_VALUE_LENGTH} characters"
            )


@dataclass(frozen=True)
class Rule:
    """A conjunction of 1..5 predicates implying a label."""

    id: str
    task: Task
    label: str
    predicates: frozenset[Predicate]
    reward: float
    confidence: float
    source: RuleSource

    def __post_init__(self) -> None:
        object.__setattr__(self, "predicates", frozenset(self.predicates))
        n = len(self.predicates)
        if not 1 <= n <= MAX_RULE_PREDICATES:
            raise ValueError(
                f"rule {self.id!r} has {n} predicates; must have 1..{MAX_RULE_PREDICATES}"
            )
        if not 0.0 <= self.reward <= 1.0:
            raise ValueError(f"rule {self.id!r} reward {self.reward} outside [0, 1]")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"rule {self.id!r} confidence {self.confidence} outside [0, 1]")

    def sorted_predicates(self) -> list[Predicate]:
        """Predicates in canonical text order, for stable serialization."""
        return sorted(self.predicates, key=render_predicate)


@dataclass(frozen=True)
class RuleQuality:
    """Ground-truth measurement of a rule over labeled samples."""

    coverage: int
    correct: int
    precision: float | None

    def __post_init__(self) -> None:
        if self.correct > self.coverage:
            raise ValueError("correct count cannot exceed coverage")

    @property
    def defined(self) -> bool:
        return self.precision is not None

    @classmethod
    def from_counts(cls, coverage: int, correct: int) -> "RuleQuality":
        precision = correct / coverage if coverage > 0 else None
        return cls(coverage=coverage, correct=correct, precision=precision)


# --- parsing and rendering -------------------------------------------------

_FIELDS = {f.value: f for f in PredicateField}
_OPS = {o.value: o for o in PredicateOp}


def render_predicate(p: Predicate) -> str:
    escaped = p.value.replace("\\", "\\\\").replace('"', '\\"')
    return f'{p.field.value} {p.op.value} "{escaped}"'


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


class _Scanner:
    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0

    def error(self, message: str, expected: str, at: int | None = None) -> PredicateSyntaxError:
        index = self.pos if at is None else at
        return PredicateSyntaxError(
            message, offset=_byte_offset(self.text, index), expected=expected
        )

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def read_word(self, expected: str) -> tuple[str, int]:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalpha() or self.text[self.pos] == "_"
        ):
            self.pos += 1
        if self.pos == start:
            raise self.error("expected an identifier", expected, at=start)
        return self.text[start : self.pos], start

    def read_quoted(self) -> str:
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != '"':
            raise self.error("expected opening quote", 'a double-quoted value')
        self.pos += 1
        out: list[str] = []
        while True:
            if self.pos >= len(self.text):
                raise self.error("unterminated value", 'closing quote `"`')
            ch = self.text[self.pos]
            if ch == '"':
                self.pos += 1
                return "".join(out)
            if ch == "\\":
                if self.pos + 1 >= len(self.text):
                    raise self.error("dangling backslash", r'`\"` or `\\`')
                esc = self.text[self.pos + 1]
                if esc not in ('"', "\\"):
                    raise self.error(
                        f"invalid escape sequence \\{esc}", r'`\"` or `\\`'
                    )
                out.append(esc)
                self.pos += 2
            else:
                out.append(ch)
                self.pos += 1

    def expect_end(self) -> None:
        self.skip_ws()
        if self.pos != len(self.text):
            raise self.error(
                f"unexpected trailing input {self.text[self.pos:]!r}", "end of input"
            )


def parse_predicate(text: str) -> Predicate:
    """Parse the canonical predicate text form; reject everything else."""

    scanner = _Scanner(text)
    field_word, field_at = scanner.read_word("a field name")
    if field_word not in _FIELDS:
        raise scanner.error(
            f"unknown field {field_word!r}",
            "one of " + ", ".join(sorted(_FIELDS)),
            at=field_at,
        )
    op_word, op_at = scanner.read_word("an operator")
    if op_word not in _OPS:
        raise scanner.error(
            f"unknown op {op_word!r}",
            "one of " + ", ".join(sorted(_OPS)),
            at=op_at,
        )
    value_at = scanner.pos
    value = scanner.read_quoted()
    scanner.expect_end()
    if not value:
        raise PredicateSyntaxError(
            "empty value", offset=_byte_offset(text, value_at), expected="a non-empty value"
        )
    if len(value) > MAX_VALUE_LENGTH:
        raise PredicateSyntaxError(
            f"value longer than {MAX_VALUE_LENGTH} characters",
            offset=_byte_offset(text, value_at),
            expected=f"at most {MAX_VALUE_LENGTH} characters",
        )
    return Predicate(field=_FIELDS[field_word], op=_OPS[op_word], value=value)


# --- evaluation -------------------------------------------------------------

@lru_cache(maxsize=None)
def normalize_text(text: str) -> str:
    """NFKC-normalize and case-fold, so width and case variants match."""
    return unicodedata.normalize("NFKC", text).casefold()


def _joined(sample: DialogueSample, speaker: Speaker) -> str:
    # Newline joints keep starts_with anchored to the opening of the first turn.
    return "\n".join(t.text for t in sample.turns if t.speaker is speaker)


def extract_field_text(sample: DialogueSample, field: PredicateField) -> str:
    if field is PredicateField.USER_TEXT:
        return _joined(sample, Speaker.USER)
    if field is PredicateField.SERVICE_TEXT:
        return _joined(sample, Speaker.SERVICE_REP)
    if field is PredicateField.OCR_TEXT:
        return sample.ocr_text
    user = _joined(sample, Speaker.USER)
    service = _joined(sample, Speaker.SERVICE_REP)
    return user + "\n" + service + "\n" + sample.ocr_text


@lru_cache(maxsize=None)
def _normalized_field_text(sample: DialogueSample, field: PredicateField) -> str:
    return normalize_text(extract_field_text(sample, field))


def eval_predicate(p: Predicate, sample: DialogueSample) -> bool:
    haystack = _normalized_field_text(sample, p.field)
    needle = normalize_text(p.value)
    if p.op is PredicateOp.CONTAINS:
        return needle in haystack
    if p.op is PredicateOp.NOT_CONTAINS:
        return needle not in haystack
    if p.op is PredicateOp.STARTS_WITH:
        return haystack.startswith(needle)
    return haystack.endswith(needle)


def eval_rule(rule: Rule, sample: DialogueSample) -> bool:
    """True iff every predicate holds. Callers filter on task beforehand."""
    return all(eval_predicate(p, sample) for p in rule.predicates)


def match_set(rule: Rule, samples: Iterable[DialogueSample]) -> list[DialogueSample]:
    return [s for s in samples if s.task is rule.task and eval_rule(rule, s)]


def measure_rule(rule: Rule, validation: Sequence[DialogueSample]) -> RuleQuality:
    """Coverage, correct count, and precision over same-task labeled samples."""

    coverage = 0
    correct = 0
    for sample in validation:
        if sample.task is not rule.task:
            continue
        if eval_rule(rule, sample):
            coverage += 1
            if sample.gold_label == rule.label:
                correct += 1
    return RuleQuality.from_counts(coverage, correct)
