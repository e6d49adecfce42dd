"""
The predicate DSL and conjunction rules
=======================================

Predicates are atomic text conditions with exactly four fields and four
operators; a rule is a conjunction of up to five of them implying a label.
Matching runs on NFKC-normalized, case-folded text, so full-width and
mixed-case variants all hit.
"""

from rulesmith import (
    DialogueSample,
    Rule,
    RuleSource,
    Speaker,
    Task,
    Turn,
    eval_predicate,
    eval_rule,
    measure_rule,
    parse_predicate,
    render_predicate,
)

# Parse the canonical text form; rendering gives it back verbatim.
predicate = parse_predicate('any_text contains "退货"')
print(f"parsed:   {predicate}")
print(f"rendered: {render_predicate(predicate)}")

sample = DialogueSample(
    id="demo",
    task=Task.INTENT,
    turns=(
        Turn(Speaker.USER, "你好，我想退货，可以吗"),
        Turn(Speaker.SERVICE_REP, "可以的，请提供订单号"),
    ),
    ocr_text="",
    gold_label="refund",
)
print(f"fires on the sample: {eval_predicate(predicate, sample)}")

# Normalization in action: full-width latin matches its ASCII value.
wide = DialogueSample(
    id="wide", task=Task.IMAGE_SCENE, turns=(), ocr_text="ＯＲＤＥＲ ＮＯ. １２３４",
)
print("full-width OCR matches 'order no':",
      eval_predicate(parse_predicate('ocr_text contains "order no"'), wide))

# A rule fires only when every predicate does.
rule = Rule(
    id="refund-asks",
    task=Task.INTENT,
    label="refund",
    predicates=frozenset({
        parse_predicate('user_text contains "退货"'),
        parse_predicate('user_text not_contains "发货"'),
    }),
    reward=0.9,
    confidence=0.8,
    source=RuleSource.MANUAL,
)
print(f"rule fires: {eval_rule(rule, sample)}")

# Rule quality: coverage, correct count, and precision over labeled samples.
corpus = [sample] + [
    DialogueSample(
        id=f"other-{i}",
        task=Task.INTENT,
        turns=(Turn(Speaker.USER, text),),
        gold_label=label,
    )
    for i, (text, label) in enumerate([
        ("我要退货，质量太差", "refund"),
        ("想退货换个颜色", "refund"),
        ("什么时候发货", "shipping"),
        ("帮我退货并查询发货时间", "shipping"),  # mentions 发货, so the rule stays silent
    ])
]
quality = measure_rule(rule, corpus)
print(f"quality: coverage={quality.coverage} correct={quality.correct} "
      f"precision={quality.precision}")
