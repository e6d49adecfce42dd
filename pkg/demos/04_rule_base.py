"""
From raw harvest to a trustworthy rule base
===========================================

Three pruning stages: drop rules the agent itself scored below 0.8, drop
rules made redundant by a strictly smaller and strictly better rule of the
same label, then re-measure everything on held-out data and keep only
well-supported, precise rules. The surviving base round-trips through a
versioned JSON document.
"""

from pathlib import Path
from tempfile import TemporaryDirectory

from rulesmith import (
    DialogueSample,
    Rule,
    RuleBase,
    RuleBaseMetadata,
    RuleSource,
    Speaker,
    Task,
    Turn,
    filter_by_reward,
    load_rulebase,
    online_validate,
    parse_predicate,
    remove_dominated,
    save_rulebase,
)


def rule(rule_id, label, predicate_texts, reward):
    return Rule(
        id=rule_id,
        task=Task.INTENT,
        label=label,
        predicates=frozenset(parse_predicate(t) for t in predicate_texts),
        reward=reward,
        confidence=0.9,
        source=RuleSource.MCTS,
    )


harvest = [
    rule("h1", "refund", ['any_text contains "退货"'], 0.97),
    rule("h2", "refund", ['any_text contains "退货"', 'any_text contains "订单"'], 0.90),
    rule("h3", "refund", ['any_text contains "不想要"'], 0.79),
    rule("h4", "shipping", ['any_text contains "发货"'], 0.92),
    rule("h5", "shipping", ['any_text contains "着急"'], 0.81),
]
print(f"harvested: {len(harvest)} rules")

kept = filter_by_reward(harvest, min_reward=0.8)
print(f"after reward filter (>= 0.8): {[r.id for r in kept]}")

kept = remove_dominated(kept)
print(f"after dominance pruning:      {[r.id for r in kept]}")
print("  h2 lost: h1 uses a strict subset of its predicates at higher reward")

validation = []
for i, (text, label) in enumerate([
    ("我要退货", "refund"), ("退货怎么操作", "refund"), ("这个退货太麻烦", "refund"),
    ("什么时候发货", "shipping"), ("还没发货吗", "shipping"), ("发货了吗很着急", "shipping"),
    ("着急用，帮帮忙", "refund"),  # "着急" fires h5 but the label disagrees
]):
    validation.append(
        DialogueSample(
            id=f"v{i}",
            task=Task.INTENT,
            turns=(Turn(Speaker.USER, text),),
            gold_label=label,
        )
    )

outcome = online_validate(kept, validation, min_precision=0.8, min_support=2)
print(f"after online validation:      {[r.id for r in outcome.kept]}")
for dropped, quality in outcome.dropped:
    print(f"  {dropped.id} dropped: coverage={quality.coverage} "
          f"precision={quality.precision}")
for survivor in outcome.kept:
    print(f"  {survivor.id} reward replaced by measured precision {survivor.reward:.2f}")

base = RuleBase.build(
    list(outcome.kept),
    RuleBaseMetadata(created_at="2025-11-04T00:00:00+00:00"),
)
with TemporaryDirectory() as tmp:
    path = Path(tmp) / "rules.json"
    save_rulebase(base, path)
    print(f"round-trip identical: {load_rulebase(path) == base}")
