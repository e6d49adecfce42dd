"""Collaborative prediction: run rules and a classifier, then arbitrate.

Every sample goes to both the rule base and the pluggable classifier. A
fired rule overrides the classifier only when its reward clears the
override threshold; the classifier's own label is always kept on the
prediction for later analysis.
"""

from __future__ import annotations

import enum
import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .agents import Transport, extract_fenced_json, http_chat_transport
from .dataset import DialogueSample, LabelTaxonomy, sample_to_record
from .errors import AgentProtocolError, PredictorError, RulesmithError
from .predicate import Rule, eval_rule
from .rulebase import RuleBase

PREDICTOR_KEY_ENV = "RULESMITH_PREDICTOR_KEY"
DEFAULT_OVERRIDE_THRESHOLD = 0.8
DEFAULT_FAILURE_BUDGET = 3

# Emitted when the classifier failed and no rule fired; deliberately not a
# taxonomy label so downstream scoring treats it as a miss.
ABSTAIN_LABEL = "__abstain__"


class PredictionSource(str, enum.Enum):
    PREDICTOR = "predictor"
    RULE = "rule"


@dataclass(frozen=True)
class Prediction:
    sample_id: str
    label: str
    source: PredictionSource
    fired_rule_id: str | None
    predictor_label: str

    def __post_init__(self) -> None:
        if self.source is PredictionSource.RULE and not self.fired_rule_id:
            raise ValueError("rule-sourced prediction must carry fired_rule_id")


class Predictor(Protocol):
    """Anything that maps one sample to exactly one taxonomy label."""

    def predict(self, sample: DialogueSample) -> str: ...


class StubPredictor:
    """Seeded classifier stand-in with a configurable hit rate.

    Per-sample randomness is derived from (seed, sample id), so outputs do
    not depend on call order or batching.
    """

    def __init__(self, taxonomy: LabelTaxonomy, accuracy: float, seed: int = 0) -> None:
        if not 0.0 <= accuracy <= 1.0:
            raise ValueError("accuracy must be in [0, 1]")
        self.taxonomy = taxonomy
        self.accuracy = accuracy
        self.seed = seed

    def predict(self, sample: DialogueSample) -> str:
        labels = self.taxonomy.labels_for(sample.task)
        if not labels:
            raise PredictorError(f"no labels configured for task {sample.task.value}")
        digest = hashlib.sha256(f"{self.seed}|{sample.id}".encode("utf-8")).digest()
        rng = random.Random(int.from_bytes(digest[:8], "big"))
        if sample.gold_label is not None and rng.random() < self.accuracy:
            return sample.gold_label
        wrong = [l for l in labels if l != sample.gold_label] or list(labels)
        return wrong[rng.randrange(len(wrong))]


class RemotePredictor:
    """Classifier behind a chat-completions endpoint; replies {"label": ...}."""

    def __init__(
        self,
        endpoint: str,
        taxonomy: LabelTaxonomy,
        *,
        model: str = "default",
        timeout: float = 30.0,
        retries: int = 3,
        transport: Transport | None = None,
    ) -> None:
        self.taxonomy = taxonomy
        self.retries = retries
        self._transport = transport or http_chat_transport(
            endpoint, model=model, timeout=timeout, api_key_env=PREDICTOR_KEY_ENV
        )

    def predict(self, sample: DialogueSample) -> str:
        labels = self.taxonomy.labels_for(sample.task)
        record = sample_to_record(sample)
        record.pop("gold_label", None)
        messages = [
            {
                "role": "system",
                "content": (
                    "Classify the sample into exactly one of the allowed labels. "
                    'Reply with exactly one fenced JSON block: {"label": "..."}'
                ),
            },
            {
                "role": "user",
                "content": (
                    f"Allowed labels: {', '.join(labels)}\n"
                    f"Sample: {json.dumps(record, ensure_ascii=False)}"
                ),
            },
        ]
        last_error: Exception | None = None
        conversation = messages
        for _ in range(self.retries):
            try:
                content = self._transport(conversation)
                payload = extract_fenced_json(content)
                label = payload.get("label")
                if not isinstance(label, str) or not label:
                    raise AgentProtocolError('field "label" must be a non-empty string')
                if label not in labels:
                    raise AgentProtocolError(
                        f"label {label!r} is not in the {sample.task.value} taxonomy"
                    )
                return label
            except Exception as exc:  # noqa: BLE001 - retried, then surfaced
                last_error = exc
        raise PredictorError(
            f"predictor failed for sample {sample.id!r}: {last_error}"
        ) from last_error


def match_rules(rulebase: RuleBase, sample: DialogueSample) -> list[Rule]:
    """All same-task rules firing on the sample, strongest first.

    Ordering: reward descending, then predicate count descending (more
    specific first), then id ascending.
    """

    fired = [
        r for r in rulebase.rules if r.task is sample.task and eval_rule(r, sample)
    ]
    fired.sort(key=lambda r: (-r.reward, -len(r.predicates), r.id))
    return fired


def arbitrate(
    fired: Sequence[Rule],
    predictor_label: str,
    *,
    sample_id: str,
    override_threshold: float = DEFAULT_OVERRIDE_THRESHOLD,
) -> Prediction:
    """Let the best fired rule override the classifier if it is trusted enough."""

    if fired and fired[0].reward >= override_threshold:
        top = fired[0]
        return Prediction(
            sample_id=sample_id,
            label=top.label,
            source=PredictionSource.RULE,
            fired_rule_id=top.id,
            predictor_label=predictor_label,
        )
    return Prediction(
        sample_id=sample_id,
        label=predictor_label,
        source=PredictionSource.PREDICTOR,
        fired_rule_id=None,
        predictor_label=predictor_label,
    )


@dataclass
class BatchReport:
    total: int = 0
    from_rules: int = 0
    from_predictor: int = 0
    predictor_failures: int = 0
    rule_fallbacks: int = 0
    abstained: int = 0

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "from_rules": self.from_rules,
            "from_predictor": self.from_predictor,
            "predictor_failures": self.predictor_failures,
            "rule_fallbacks": self.rule_fallbacks,
            "abstained": self.abstained,
        }


@dataclass
class BatchResult:
    predictions: list[Prediction]
    report: BatchReport


def predict_batch(
    rulebase: RuleBase,
    predictor: Predictor,
    samples: Sequence[DialogueSample],
    *,
    override_threshold: float = DEFAULT_OVERRIDE_THRESHOLD,
    failure_budget: int = DEFAULT_FAILURE_BUDGET,
) -> BatchResult:
    """Predict every sample in input order.

    When the classifier errors on a sample, the best fired rule answers
    regardless of threshold; with no fired rule the prediction abstains.
    More than ``failure_budget`` classifier failures abort the batch.
    """

    predictions: list[Prediction] = []
    report = BatchReport()
    for sample in samples:
        report.total += 1
        fired = match_rules(rulebase, sample)
        try:
            predictor_label = predictor.predict(sample)
        except PredictorError as exc:
            report.predictor_failures += 1
            if report.predictor_failures > failure_budget:
                raise PredictorError(
                    f"predictor exceeded the failure budget of {failure_budget}: {exc}"
                ) from exc
            if fired:
                top = fired[0]
                report.rule_fallbacks += 1
                predictions.append(
                    Prediction(
                        sample_id=sample.id,
                        label=top.label,
                        source=PredictionSource.RULE,
                        fired_rule_id=top.id,
                        predictor_label=ABSTAIN_LABEL,
                    )
                )
            else:
                report.abstained += 1
                predictions.append(
                    Prediction(
                        sample_id=sample.id,
                        label=ABSTAIN_LABEL,
                        source=PredictionSource.PREDICTOR,
                        fired_rule_id=None,
                        predictor_label=ABSTAIN_LABEL,
                    )
                )
            continue
        prediction = arbitrate(
            fired,
            predictor_label,
            sample_id=sample.id,
            override_threshold=override_threshold,
        )
        if prediction.source is PredictionSource.RULE:
            report.from_rules += 1
        else:
            report.from_predictor += 1
        predictions.append(prediction)
    return BatchResult(predictions=predictions, report=report)


# --- prediction file IO --------------------------------------------------------

def prediction_to_record(prediction: Prediction) -> dict:
    return {
        "id": prediction.sample_id,
        "label": prediction.label,
        "source": prediction.source.value,
        "fired_rule_id": prediction.fired_rule_id,
        "predictor_label": prediction.predictor_label,
    }


def save_predictions(predictions: Iterable[Prediction], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for prediction in predictions:
            handle.write(json.dumps(prediction_to_record(prediction), ensure_ascii=False) + "\n")


def load_predictions(path: str | Path) -> list[Prediction]:
    predictions: list[Prediction] = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RulesmithError(
                    f"prediction file line {line_no}: invalid JSON ({exc.msg})"
                ) from None
            try:
                predictions.append(
                    Prediction(
                        sample_id=record["id"],
                        label=record["label"],
                        source=PredictionSource(record["source"]),
                        fired_rule_id=record.get("fired_rule_id"),
                        predictor_label=record["predictor_label"],
                    )
                )
            except (KeyError, ValueError) as exc:
                raise RulesmithError(
                    f"prediction file line {line_no}: malformed record ({exc})"
                ) from None
    return predictions
