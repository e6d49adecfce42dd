"""Command-line entry point wiring the pipeline stages together.

Subcommands: rephrase, induce, filter, predict, eval, report. Runs with a
mock agent and a stub predictor are bit-reproducible under a fixed
``--seed``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .agents import Agent, MockAgent, RemoteAgent
from .dataset import (
    DatasetSplit,
    Task,
    generate_validation,
    load_dataset,
    load_taxonomy,
    save_dataset,
)
from .errors import RulesmithError
from .harness import evaluate, format_report, load_report, report_to_dict, save_report
from .inference import (
    Predictor,
    RemotePredictor,
    StubPredictor,
    load_predictions,
    predict_batch,
    save_predictions,
)
from .mcts import SearchConfig, run_search
from .rulebase import (
    DEFAULT_MIN_PRECISION,
    DEFAULT_MIN_REWARD,
    DEFAULT_MIN_SUPPORT,
    RuleBase,
    RuleBaseMetadata,
    filter_by_reward,
    load_rulebase,
    online_validate,
    remove_dominated,
    save_rulebase,
)

EPOCH_ISO = "1970-01-01T00:00:00+00:00"


def _digest_file(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _digest_config(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode("utf-8")).hexdigest()


def _metadata(train_path: str, config: dict, seed: int | None) -> RuleBaseMetadata:
    # A fixed seed promises bit-identical output files, so the timestamp
    # must not come from the wall clock in that case.
    created = EPOCH_ISO if seed is not None else datetime.now(timezone.utc).isoformat()
    return RuleBaseMetadata(
        created_at=created,
        dataset_digest=_digest_file(train_path),
        config_digest=_digest_config(config),
    )


def _build_agent(spec: str, corpus, seed: int | None, noise: float) -> Agent:
    if spec == "mock":
        return MockAgent(corpus, seed=seed if seed is not None else 0, noise=noise)
    return RemoteAgent(spec)


def _build_predictor(spec: str, taxonomy, seed: int | None) -> Predictor:
    if spec.startswith("stub:"):
        accuracy = float(spec.split(":", 1)[1])
        return StubPredictor(taxonomy, accuracy, seed=seed if seed is not None else 0)
    return RemotePredictor(spec, taxonomy)


def _cmd_rephrase(args: argparse.Namespace) -> int:
    taxonomy = load_taxonomy(args.labels)
    train = load_dataset(args.train, taxonomy)
    agent = _build_agent(args.agent, train, args.seed, noise=0.0)
    generated, skipped = generate_validation(train, agent, per_sample=args.per_sample)
    save_dataset(generated, args.out)
    print(f"wrote {len(generated)} validation samples to {args.out} ({skipped} skipped)")
    return 0


def _cmd_induce(args: argparse.Namespace) -> int:
    taxonomy = load_taxonomy(args.labels)
    train = load_dataset(args.train, taxonomy)
    validation = load_dataset(args.val, taxonomy)
    split = DatasetSplit(train=tuple(train), validation=tuple(validation))
    agent = _build_agent(args.agent, train, args.seed, noise=args.noise)
    cfg = SearchConfig(
        max_iterations=args.iterations,
        proposals_per_expansion=args.proposals,
        seed=args.seed if args.seed is not None else 0,
    )

    harvested = []
    aborted: str | None = None
    val_tasks = {s.task for s in validation}
    train_labels = {(s.task, s.gold_label) for s in train if s.gold_label}
    for task in (Task.INTENT, Task.IMAGE_SCENE):
        if task not in val_tasks:
            continue
        for label in taxonomy.labels_for(task):
            if (task, label) not in train_labels:
                continue
            result = run_search(label, task, split, agent, cfg)
            harvested.extend(rule for rule, _ in result.rules)
            print(
                f"{task.value}/{label}: {len(result.rules)} rules "
                f"from {result.evaluations} evaluations"
            )
            if result.error:
                aborted = result.error
                break
        if aborted:
            break

    config_digest_input = {
        "iterations": args.iterations,
        "proposals": args.proposals,
        "seed": args.seed,
        "noise": args.noise,
        "agent": args.agent,
    }
    base = RuleBase.build(harvested, _metadata(args.train, config_digest_input, args.seed))
    save_rulebase(base, args.out)
    print(f"wrote {len(base.rules)} rules to {args.out}")
    if aborted:
        print(json.dumps({"error": "agent_unavailable", "message": aborted}), file=sys.stderr)
        return 1
    return 0


def _cmd_filter(args: argparse.Namespace) -> int:
    base = load_rulebase(args.rules)
    rules = filter_by_reward(list(base.rules), args.min_reward)
    rules = remove_dominated(rules)
    dropped_online = 0
    if args.val:
        if not args.labels:
            raise RulesmithError("--val requires --labels to load the validation set")
        taxonomy = load_taxonomy(args.labels)
        validation = load_dataset(args.val, taxonomy)
        outcome = online_validate(
            rules, validation, min_precision=args.min_precision, min_support=args.min_support
        )
        rules = list(outcome.kept)
        dropped_online = len(outcome.dropped)
    filtered = RuleBase.build(rules, base.metadata)
    save_rulebase(filtered, args.out)
    print(
        f"kept {len(filtered.rules)} of {len(base.rules)} rules"
        + (f" ({dropped_online} failed online validation)" if args.val else "")
    )
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    taxonomy = load_taxonomy(args.labels)
    samples = load_dataset(args.val, taxonomy)
    base = load_rulebase(args.rules)
    predictor = _build_predictor(args.predictor, taxonomy, args.seed)
    result = predict_batch(
        base, predictor, samples, override_threshold=args.override_threshold
    )
    save_predictions(result.predictions, args.out)
    print(f"wrote {len(result.predictions)} predictions to {args.out}")
    print(json.dumps(result.report.to_dict()))
    if args.report:
        Path(args.report).write_text(
            json.dumps(result.report.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    taxonomy = load_taxonomy(args.labels)
    samples = load_dataset(args.val, taxonomy)
    predictions = load_predictions(args.pred)
    report = evaluate(predictions, samples, taxonomy)
    if args.report:
        save_report(report, args.report)
    print(format_report(report_to_dict(report)))
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    print(format_report(load_report(args.report)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rulesmith",
        description="Rule induction and rule/classifier collaborative prediction.",
    )
    parser.add_argument("--version", action="version", version=f"rulesmith {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rephrase", help="generate validation samples by rephrasing")
    p.add_argument("--train", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--agent", default="mock", help="'mock' or an endpoint URL")
    p.add_argument("--per-sample", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_rephrase)

    p = sub.add_parser("induce", help="search for rules with MCTS")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--agent", default="mock", help="'mock' or an endpoint URL")
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--proposals", type=int, default=5)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_induce)

    p = sub.add_parser("filter", help="filter, deduplicate, and validate rules")
    p.add_argument("--rules", required=True)
    p.add_argument("--min-reward", type=float, default=DEFAULT_MIN_REWARD)
    p.add_argument("--val", default=None, help="optionally re-validate on this dataset")
    p.add_argument("--labels", default=None)
    p.add_argument("--min-precision", type=float, default=DEFAULT_MIN_PRECISION)
    p.add_argument("--min-support", type=int, default=DEFAULT_MIN_SUPPORT)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("predict", help="predict with rules correcting a classifier")
    p.add_argument("--val", required=True, help="samples to predict")
    p.add_argument("--labels", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--predictor", required=True, help="'stub:<accuracy>' or an endpoint URL")
    p.add_argument("--override-threshold", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None, help="optionally write the run report here")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval", help="score predictions against gold labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--val", required=True, help="gold dataset")
    p.add_argument("--labels", required=True)
    p.add_argument("--report", default=None, help="optionally write the report here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("report", help="pretty-print a saved evaluation report")
    p.add_argument("--report", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except RulesmithError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1
    except OSError as exc:
        print(json.dumps({"error": "OSError", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
