"""
Scoring predictions with class-weighted F1
==========================================

Three headline numbers: the intent-task score, the image-scene score, and
a unified score over both tasks with their joint label space. Labels never
cross tasks, so the unified score is the support-weighted mean of the two,
and the exact average whenever the tasks have equal sample counts.
"""

from rulesmith import (
    DialogueSample,
    LabelTaxonomy,
    Prediction,
    PredictionSource,
    Speaker,
    Task,
    Turn,
    evaluate,
    weighted_f1,
)
from rulesmith.harness import format_report, report_to_dict

# The metric itself, on a corpus small enough to check by hand.
gold = ["a", "a", "b"]
pred = ["a", "b", "b"]
print(f"weighted F1 of {gold} vs {pred}: {weighted_f1(gold, pred, {'a', 'b'}):.4f}")

taxonomy = LabelTaxonomy(intent=("refund", "shipping"), image_scene=("receipt", "tracking"))

samples = []
predictions = []


def add(sample_id, task, gold_label, predicted):
    if task is Task.INTENT:
        samples.append(DialogueSample(
            id=sample_id, task=task, turns=(Turn(Speaker.USER, "text"),),
            gold_label=gold_label,
        ))
    else:
        samples.append(DialogueSample(
            id=sample_id, task=task, turns=(), ocr_text="ocr", gold_label=gold_label,
        ))
    predictions.append(Prediction(
        sample_id, predicted, PredictionSource.PREDICTOR, None, predicted,
    ))


# Equal supports: 6 intent samples, 6 image-scene samples.
for i, (g, p) in enumerate([("refund", "refund"), ("refund", "refund"),
                            ("refund", "shipping"), ("shipping", "shipping"),
                            ("shipping", "shipping"), ("shipping", "refund")]):
    add(f"i{i}", Task.INTENT, g, p)
for i, (g, p) in enumerate([("receipt", "receipt"), ("receipt", "receipt"),
                            ("receipt", "receipt"), ("tracking", "tracking"),
                            ("tracking", "receipt"), ("tracking", "receipt")]):
    add(f"s{i}", Task.IMAGE_SCENE, g, p)

report = evaluate(predictions, samples, taxonomy)
print(f"\nintent score      = {report.dis:.4f}")
print(f"image-scene score = {report.iss:.4f}")
print(f"unified score     = {report.oss:.4f}")
print(f"plain mean        = {report.oss_mean:.4f}  "
      f"(equals the unified score here: equal supports)")

print("\nfull report:")
print(format_report(report_to_dict(report)))
