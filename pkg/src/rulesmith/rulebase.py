"""Rule population management: filtering, dominance pruning, persistence.

The pipeline after a search harvest is: drop low-reward rules, drop rules
that a strictly smaller, strictly better rule of the same label makes
redundant, then re-measure everything on held-out validation data because
agent-reported rewards can hallucinate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .dataset import DialogueSample, Task
from .errors import RuleBaseError
from .predicate import (
    Predicate,
    Rule,
    RuleQuality,
    RuleSource,
    measure_rule,
    parse_predicate,
    render_predicate,
)

RULEBASE_VERSION = 1
DEFAULT_MIN_REWARD = 0.8
DEFAULT_MIN_PRECISION = 0.8
DEFAULT_MIN_SUPPORT = 2


@dataclass(frozen=True)
class RuleBaseMetadata:
    created_at: str
    dataset_digest: str = ""
    config_digest: str = ""


@dataclass(frozen=True)
class RuleBase:
    """An immutable, deduplicated, dominance-free collection of rules."""

    rules: tuple[Rule, ...]
    metadata: RuleBaseMetadata

    def __post_init__(self) -> None:
        object.__setattr__(self, "rules", tuple(self.rules))
        seen: set[str] = set()
        for rule in self.rules:
            if rule.id in seen:
                raise RuleBaseError(f"duplicate rule id {rule.id!r}")
            seen.add(rule.id)
        dominated = _dominated_indices(self.rules)
        if dominated:
            offender = self.rules[min(dominated)].id
            raise RuleBaseError(
                f"rule {offender!r} is dominated by a strictly smaller, "
                "higher-reward rule; prune with remove_dominated first"
            )

    @classmethod
    def build(
        cls, rules: Sequence[Rule], metadata: RuleBaseMetadata | None = None
    ) -> "RuleBase":
        """Construct a base from an arbitrary rule list, pruning as needed."""
        if metadata is None:
            metadata = RuleBaseMetadata(created_at="1970-01-01T00:00:00+00:00")
        return cls(rules=tuple(remove_dominated(rules)), metadata=metadata)


def filter_by_reward(
    rules: Sequence[Rule], min_reward: float = DEFAULT_MIN_REWARD
) -> list[Rule]:
    """Keep rules whose reward is at least the threshold; the boundary stays."""
    return [r for r in rules if r.reward >= min_reward]


def _dominates(a: Rule, b: Rule) -> bool:
    return (
        a.task is b.task
        and a.label == b.label
        and a.reward > b.reward
        and a.predicates < b.predicates
    )


def _dominated_indices(rules: Sequence[Rule]) -> set[int]:
    dominated: set[int] = set()
    for j, b in enumerate(rules):
        for a in rules:
            if a is not b and _dominates(a, b):
                dominated.add(j)
                break
    return dominated


def remove_dominated(rules: Sequence[Rule]) -> list[Rule]:
    """Drop rules whose predicate set strictly contains a better rule's.

    A rule B is removed when some rule A of the same task and label has a
    strict subset of B's predicates and a strictly higher reward. Exact
    duplicates (same task, label, predicate set) are collapsed to the
    best-rewarded one first. Because a dominator of a dominator also
    dominates, one sweep already reaches the fixed point.
    """

    collapsed: list[Rule] = []
    best_index: dict[tuple[Task, str, frozenset[Predicate]], int] = {}
    for rule in rules:
        key = (rule.task, rule.label, rule.predicates)
        if key in best_index:
            if rule.reward > collapsed[best_index[key]].reward:
                collapsed[best_index[key]] = rule
        else:
            best_index[key] = len(collapsed)
            collapsed.append(rule)

    dominated = _dominated_indices(collapsed)
    return [r for i, r in enumerate(collapsed) if i not in dominated]


@dataclass(frozen=True)
class OnlineValidation:
    """Outcome of re-measuring rules on held-out data.

    ``measured`` maps each input rule id to its quality, keeping the
    provenance of every kept rule's replaced reward.
    """

    kept: tuple[Rule, ...]
    dropped: tuple[tuple[Rule, RuleQuality], ...]
    measured: dict[str, RuleQuality]


def online_validate(
    rules: Sequence[Rule],
    validation: Sequence[DialogueSample],
    min_precision: float = DEFAULT_MIN_PRECISION,
    min_support: int = DEFAULT_MIN_SUPPORT,
) -> OnlineValidation:
    """Re-measure each rule; drop weakly supported or imprecise ones.

    Kept rules carry the measured precision as their reward from here on.
    """

    if not validation:
        raise RuleBaseError("cannot validate rules against an empty validation set")
    kept: list[Rule] = []
    dropped: list[tuple[Rule, RuleQuality]] = []
    measured: dict[str, RuleQuality] = {}
    for rule in rules:
        quality = measure_rule(rule, validation)
        measured[rule.id] = quality
        if quality.coverage < min_support or quality.precision is None:
            dropped.append((rule, quality))
        elif quality.precision < min_precision:
            dropped.append((rule, quality))
        else:
            kept.append(replace(rule, reward=quality.precision))
    return OnlineValidation(kept=tuple(kept), dropped=tuple(dropped), measured=measured)


# --- persistence --------------------------------------------------------------

def _rule_to_record(rule: Rule) -> dict:
    return {
        "id": rule.id,
        "task": rule.task.value,
        "label": rule.label,
        "predicates": [render_predicate(p) for p in rule.sorted_predicates()],
        "reward": rule.reward,
        "confidence": rule.confidence,
        "source": rule.source.value,
    }


def _rule_from_record(record: dict, index: int) -> Rule:
    def fail(field: str, detail: str) -> RuleBaseError:
        return RuleBaseError(f"rule entry {index}: field {field!r} {detail}")

    if not isinstance(record, dict):
        raise RuleBaseError(f"rule entry {index}: must be an object")
    rule_id = record.get("id")
    if not isinstance(rule_id, str) or not rule_id:
        raise fail("id", "must be a non-empty string")
    try:
        task = Task(record.get("task"))
    except ValueError:
        raise fail("task", f"has unknown value {record.get('task')!r}") from None
    label = record.get("label")
    if not isinstance(label, str) or not label:
        raise fail("label", "must be a non-empty string")
    raw_predicates = record.get("predicates")
    if not isinstance(raw_predicates, list) or not raw_predicates:
        raise fail("predicates", "must be a non-empty array")
    try:
        predicates = frozenset(parse_predicate(text) for text in raw_predicates)
    except Exception as exc:
        raise fail("predicates", f"contains an invalid predicate: {exc}") from None
    reward = record.get("reward")
    if not isinstance(reward, (int, float)) or isinstance(reward, bool):
        raise fail("reward", "must be a number")
    confidence = record.get("confidence")
    if not isinstance(confidence, (int, float)) or isinstance(confidence, bool):
        raise fail("confidence", "must be a number")
    try:
        source = RuleSource(record.get("source"))
    except ValueError:
        raise fail("source", f"has unknown value {record.get('source')!r}") from None
    try:
        return Rule(
            id=rule_id,
            task=task,
            label=label,
            predicates=predicates,
            reward=float(reward),
            confidence=float(confidence),
            source=source,
        )
    except ValueError as exc:
        raise RuleBaseError(f"rule entry {index}: {exc}") from None


def save_rulebase(rulebase: RuleBase, path: str | Path) -> None:
    doc = {
        "version": RULEBASE_VERSION,
        "metadata": {
            "created_at": rulebase.metadata.created_at,
            "dataset_digest": rulebase.metadata.dataset_digest,
            "config_digest": rulebase.metadata.config_digest,
        },
        "rules": [_rule_to_record(r) for r in rulebase.rules],
    }
    Path(path).write_text(
        json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def load_rulebase(path: str | Path) -> RuleBase:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise RuleBaseError(f"rule base file is not valid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise RuleBaseError("rule base file must contain a JSON object")
    version = doc.get("version")
    if version != RULEBASE_VERSION:
        raise RuleBaseError(
            f"unknown rule base version {version!r}; this build reads version "
            f"{RULEBASE_VERSION}"
        )
    metadata_raw = doc.get("metadata")
    if not isinstance(metadata_raw, dict):
        raise RuleBaseError("field 'metadata' must be an object")
    for key in ("created_at", "dataset_digest", "config_digest"):
        if not isinstance(metadata_raw.get(key), str):
            raise RuleBaseError(f"metadata field {key!r} must be a string")
    rules_raw = doc.get("rules")
    if not isinstance(rules_raw, list):
        raise RuleBaseError("field 'rules' must be an array")
    rules = tuple(_rule_from_record(r, i) for i, r in enumerate(rules_raw))
    metadata = RuleBaseMetadata(
        created_at=metadata_raw["created_at"],
        dataset_digest=metadata_raw["dataset_digest"],
        config_digest=metadata_raw["config_digest"],
    )
    return RuleBase(rules=rules, metadata=metadata)
