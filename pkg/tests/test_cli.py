"""End-to-end subcommand behavior through the CLI entry point."""

from __future__ import annotations

import json

import pytest

from rulesmith import (
    LabelTaxonomy,
    Prediction,
    PredictionSource,
    RuleBase,
    RuleBaseMetadata,
    load_dataset,
    load_rulebase,
    save_dataset,
    save_predictions,
    save_rulebase,
    save_taxonomy,
    stratified_split,
)
from rulesmith.cli import main
from _helpers import build_planted_corpus, contains, make_rule

LABELS = ["refund", "shipping"]


@pytest.fixture
def workspace(tmp_path):
    """Train/validation files plus a taxonomy for a small planted corpus."""
    corpus = build_planted_corpus(LABELS, per_label=20, seed=1)
    split = stratified_split(corpus, 0.4, seed=1)
    train = tmp_path / "train.jsonl"
    val = tmp_path / "val.jsonl"
    tax_path = tmp_path / "labels.json"
    save_dataset(split.train, train)
    save_dataset(split.validation, val)
    save_taxonomy(LabelTaxonomy(intent=tuple(LABELS), image_scene=()), tax_path)
    return tmp_path, train, val, tax_path


def test_unknown_subcommand_exits_2(capsys):
    assert main(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_flag_exits_2(workspace):
    tmp, train, val, tax = workspace
    assert main(["induce", "--train", str(train), "--bogus", "x"]) == 2


def test_missing_file_is_a_structured_error(tmp_path, capsys):
    tax = tmp_path / "labels.json"
    save_taxonomy(LabelTaxonomy(intent=("a",), image_scene=()), tax)
    status = main(
        ["rephrase", "--train", str(tmp_path / "nope.jsonl"), "--labels", str(tax),
         "--out", str(tmp_path / "out.jsonl")]
    )
    assert status == 1
    error = json.loads(capsys.readouterr().err.strip())
    assert "nope.jsonl" in error["message"]


def test_rephrase_with_mock_agent_echoes(workspace, capsys):
    tmp, train, val, tax = workspace
    out = tmp / "rephrased.jsonl"
    status = main(
        ["rephrase", "--train", str(train), "--labels", str(tax),
         "--agent", "mock", "--per-sample", "2", "--out", str(out)]
    )
    assert status == 0
    taxonomy = LabelTaxonomy(intent=tuple(LABELS), image_scene=())
    generated = load_dataset(out, taxonomy)
    originals = load_dataset(train, taxonomy)
    assert len(generated) == 2 * len(originals)
    assert all(s.id.endswith(("::r0", "::r1")) for s in generated)


def test_induce_with_fixed_seed_is_bit_reproducible(workspace):
    tmp, train, val, tax = workspace
    outs = []
    for run in range(2):
        out = tmp / f"rules{run}.json"
        status = main(
            ["induce", "--train", str(train), "--val", str(val), "--labels", str(tax),
             "--agent", "mock", "--iterations", "30", "--seed", "7", "--out", str(out)]
        )
        assert status == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    base = load_rulebase(tmp / "rules0.json")
    assert base.rules  # the mock really found something


def test_filter_keeps_the_boundary_reward(tmp_path, capsys):
    rules = [
        make_rule("below", "refund", [contains("alpha")], 0.79),
        make_rule("at", "shipping", [contains("beta")], 0.80),
    ]
    base = RuleBase(rules=tuple(rules), metadata=RuleBaseMetadata(created_at="x"))
    src = tmp_path / "rules.json"
    dst = tmp_path / "filtered.json"
    save_rulebase(base, src)
    status = main(["filter", "--rules", str(src), "--min-reward", "0.8", "--out", str(dst)])
    assert status == 0
    filtered = load_rulebase(dst)
    assert [r.id for r in filtered.rules] == ["at"]


def test_full_pipeline_and_eval_identity(workspace, capsys):
    tmp, train, val, tax = workspace
    rules_path = tmp / "rules.json"
    filtered_path = tmp / "filtered.json"
    preds_path = tmp / "preds.jsonl"
    report_path = tmp / "report.json"

    assert main(
        ["induce", "--train", str(train), "--val", str(val), "--labels", str(tax),
         "--agent", "mock", "--iterations", "40", "--seed", "3", "--noise", "0.0",
         "--out", str(rules_path)]
    ) == 0
    assert main(
        ["filter", "--rules", str(rules_path), "--min-reward", "0.8",
         "--val", str(val), "--labels", str(tax), "--out", str(filtered_path)]
    ) == 0
    assert main(
        ["predict", "--val", str(val), "--labels", str(tax),
         "--rules", str(filtered_path), "--predictor", "stub:0.6", "--seed", "3",
         "--out", str(preds_path)]
    ) == 0
    assert main(
        ["eval", "--pred", str(preds_path), "--val", str(val), "--labels", str(tax),
         "--report", str(report_path)]
    ) == 0

    report = json.loads(report_path.read_text())
    # Planted rules cover everything at precision 1.0, so the rules fix
    # whatever the weak stub got wrong.
    assert report["dis"] == 1.0
    assert report["oss"] == 1.0

    capsys.readouterr()
    assert main(["report", "--report", str(report_path)]) == 0
    printed = capsys.readouterr().out
    assert "intent score" in printed
    assert "1.0000" in printed


def test_eval_reports_the_equal_support_mean(tmp_path, capsys):
    # Balanced two-task fixture: equal supports, so the unified score must
    # equal the plain mean of the two per-task scores.
    taxonomy = LabelTaxonomy(intent=("ia", "ib"), image_scene=("sa", "sb"))
    tax_path = tmp_path / "labels.json"
    save_taxonomy(taxonomy, tax_path)

    from _helpers import intent_sample, scene_sample

    samples = []
    predictions = []
    intent_pairs = [("ia", "ia"), ("ia", "ib"), ("ib", "ib"), ("ib", "ib")]
    scene_pairs = [("sa", "sa"), ("sa", "sa"), ("sb", "sa"), ("sb", "sb")]
    for i, (g, p) in enumerate(intent_pairs):
        samples.append(intent_sample(f"i{i}", g, "t"))
        predictions.append(Prediction(f"i{i}", p, PredictionSource.PREDICTOR, None, p))
    for i, (g, p) in enumerate(scene_pairs):
        samples.append(scene_sample(f"s{i}", g, "o"))
        predictions.append(Prediction(f"s{i}", p, PredictionSource.PREDICTOR, None, p))

    gold_path = tmp_path / "gold.jsonl"
    preds_path = tmp_path / "preds.jsonl"
    report_path = tmp_path / "report.json"
    save_dataset(samples, gold_path)
    save_predictions(predictions, preds_path)

    status = main(
        ["eval", "--pred", str(preds_path), "--val", str(gold_path),
         "--labels", str(tax_path), "--report", str(report_path)]
    )
    assert status == 0
    report = json.loads(report_path.read_text())
    assert report["counts"]["intent"] == report["counts"]["image_scene"]
    assert abs(report["oss"] - (report["dis"] + report["iss"]) / 2) <= 1e-9


def test_predict_writes_run_report(workspace):
    tmp, train, val, tax = workspace
    empty = RuleBase(rules=(), metadata=RuleBaseMetadata(created_at="x"))
    rules_path = tmp / "empty.json"
    save_rulebase(empty, rules_path)
    preds_path = tmp / "preds.jsonl"
    run_report = tmp / "run.json"
    status = main(
        ["predict", "--val", str(val), "--labels", str(tax), "--rules", str(rules_path),
         "--predictor", "stub:1.0", "--seed", "0", "--out", str(preds_path),
         "--report", str(run_report)]
    )
    assert status == 0
    report = json.loads(run_report.read_text())
    assert report["from_rules"] == 0
    assert report["from_predictor"] == report["total"]

    taxonomy = LabelTaxonomy(intent=tuple(LABELS), image_scene=())
    gold = {s.id: s.gold_label for s in load_dataset(val, taxonomy)}
    from rulesmith import load_predictions

    for prediction in load_predictions(preds_path):
        assert prediction.label == gold[prediction.sample_id]  # stub:1.0 is perfect


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert "rulesmith" in capsys.readouterr().out
