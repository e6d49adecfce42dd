"""Class-weighted F1 scoring over one or both task families.

Three headline scores: the intent-task score, the image-scene score, and a
unified score computed over the union of both tasks with their joint
(disjoint) label space. Because labels never cross tasks, the unified
score equals the support-weighted mean of the per-task scores, and with
equal supports it is exactly their average. The plain average is also
reported for transparency on unbalanced sets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .dataset import DialogueSample, LabelTaxonomy, Task
from .errors import EvaluationError
from .inference import Prediction


@dataclass(frozen=True)
class ClassStats:
    label: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    """Headline scores plus the per-class breakdown behind them.

    ``dis``/``iss`` are None when the corpus has no samples of that task.
    """

    dis: float | None
    iss: float | None
    oss: float
    oss_mean: float
    per_class: tuple[ClassStats, ...]
    intent_count: int
    image_scene_count: int


def _class_stats(gold: Sequence[str], pred: Sequence[str], label: str) -> ClassStats:
    tp = sum(1 for g, p in zip(gold, pred) if g == label and p == label)
    fp = sum(1 for g, p in zip(gold, pred) if g != label and p == label)
    fn = sum(1 for g, p in zip(gold, pred) if g == label and p != label)
    support = tp + fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / support if support else 0.0
    # Equivalent to 2PR/(P+R) with the 0-when-degenerate convention.
    f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
    return ClassStats(label=label, precision=precision, recall=recall, f1=f1, support=support)


def weighted_f1(
    gold: Sequence[str], pred: Sequence[str], labels: Sequence[str] | set[str]
) -> float:
    """Support-weighted mean of per-class F1 scores.

    Classes with zero support contribute zero weight; a class whose
    precision and recall are both zero scores zero F1.
    """

    if len(gold) != len(pred):
        raise EvaluationError(
            f"gold and prediction lengths differ: {len(gold)} vs {len(pred)}"
        )
    if not gold:
        raise EvaluationError("cannot score an empty corpus")
    label_set = set(labels)
    for g in gold:
        if g not in label_set:
            raise EvaluationError(f"gold label {g!r} is not in the given label set")
    total = 0.0
    for label in sorted(label_set):
        stats = _class_stats(gold, pred, label)
        total += stats.support * stats.f1
    return total / len(gold)


def evaluate(
    predictions: Sequence[Prediction],
    samples: Sequence[DialogueSample],
    taxonomy: LabelTaxonomy,
) -> EvalReport:
    """Score predictions against gold labels, per task and unified."""

    if not samples:
        raise EvaluationError("cannot evaluate an empty gold dataset")
    by_id: Mapping[str, Prediction] = {p.sample_id: p for p in predictions}
    gold_by_task: dict[Task, list[str]] = {Task.INTENT: [], Task.IMAGE_SCENE: []}
    pred_by_task: dict[Task, list[str]] = {Task.INTENT: [], Task.IMAGE_SCENE: []}
    for sample in samples:
        if sample.gold_label is None:
            raise EvaluationError(f"gold sample {sample.id!r} has no gold_label")
        prediction = by_id.get(sample.id)
        if prediction is None:
            raise EvaluationError(f"no prediction for sample id {sample.id!r}")
        gold_by_task[sample.task].append(sample.gold_label)
        pred_by_task[sample.task].append(prediction.label)

    intent_count = len(gold_by_task[Task.INTENT])
    image_scene_count = len(gold_by_task[Task.IMAGE_SCENE])

    dis = (
        weighted_f1(gold_by_task[Task.INTENT], pred_by_task[Task.INTENT], taxonomy.intent)
        if intent_count
        else None
    )
    iss = (
        weighted_f1(
            gold_by_task[Task.IMAGE_SCENE], pred_by_task[Task.IMAGE_SCENE], taxonomy.image_scene
        )
        if image_scene_count
        else None
    )

    joint_gold = gold_by_task[Task.INTENT] + gold_by_task[Task.IMAGE_SCENE]
    joint_pred = pred_by_task[Task.INTENT] + pred_by_task[Task.IMAGE_SCENE]
    oss = weighted_f1(joint_gold, joint_pred, taxonomy.joint_labels())
    present = [score for score in (dis, iss) if score is not None]
    oss_mean = sum(present) / len(present)

    per_class = tuple(
        _class_stats(joint_gold, joint_pred, label) for label in taxonomy.joint_labels()
    )
    return EvalReport(
        dis=dis,
        iss=iss,
        oss=oss,
        oss_mean=oss_mean,
        per_class=per_class,
        intent_count=intent_count,
        image_scene_count=image_scene_count,
    )


# --- report file ---------------------------------------------------------------

def report_to_dict(report: EvalReport) -> dict:
    return {
        "dis": report.dis,
        "iss": report.iss,
        "oss": report.oss,
        "oss_mean": report.oss_mean,
        "counts": {
            "intent": report.intent_count,
            "image_scene": report.image_scene_count,
        },
        "per_class": [
            {
                "label": s.label,
                "precision": s.precision,
                "recall": s.recall,
                "f1": s.f1,
                "support": s.support,
            }
            for s in report.per_class
        ],
    }


def save_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


def load_report(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or "oss" not in doc:
        raise EvaluationError("report file does not look like an evaluation report")
    return doc


def format_report(report_dict: dict) -> str:
    """Human-readable rendering of a saved report."""

    def fmt(value: float | None) -> str:
        return "absent" if value is None else f"{value:.4f}"

    counts = report_dict.get("counts", {})
    lines = [
        f"intent score (weighted F1):      {fmt(report_dict.get('dis'))}"
        f"   [{counts.get('intent', 0)} samples]",
        f"image-scene score (weighted F1): {fmt(report_dict.get('iss'))}"
        f"   [{counts.get('image_scene', 0)} samples]",
        f"unified score (joint labels):    {fmt(report_dict.get('oss'))}",
        f"unified score (plain mean):      {fmt(report_dict.get('oss_mean'))}",
        "",
        f"{'label':<24} {'precision':>9} {'recall':>9} {'f1':>9} {'support':>8}",
    ]
    for row in report_dict.get("per_class", []):
        lines.append(
            f"{row['label']:<24} {row['precision']:>9.4f} {row['recall']:>9.4f} "
            f"{row['f1']:>9.4f} {row['support']:>8d}"
        )
    return "\n".join(lines)
