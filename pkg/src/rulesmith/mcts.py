"""Monte Carlo tree search over growing predicate sets.

Each tree node holds a partial rule (a set of predicates); the root holds
the empty set. One iteration selects a node by UCT, expands it with one
agent-proposed predicate, has the agent self-assess the resulting rule in
place of a random rollout, and backpropagates reward x confidence along
the path. Every evaluated node is harvested as a candidate rule; filtering
is the rule base's job, not the search's.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO

from .agents import Agent, AgentContext, RewardEstimate
from .dataset import DatasetSplit, Task
from .errors import AgentError
from .predicate import MAX_RULE_PREDICATES, Predicate, Rule, RuleSource

logger = logging.getLogger(__name__)


@dataclass
class SearchNode:
    """One tree node: a predicate set plus UCT statistics."""

    state: frozenset[Predicate]
    parent: SearchNode | None = None
    action: Predicate | None = None
    visits: int = 0
    total_value: float = 0.0
    children: dict[Predicate, "SearchNode"] = field(default_factory=dict)
    untried: list[Predicate] = field(default_factory=list)
    fetched: bool = False
    evaluation: RewardEstimate | None = None
    # Exhausted subtrees are skipped during selection; a node is exhausted
    # once nothing new can ever be evaluated at or below it.
    exhausted: bool = False


@dataclass(frozen=True)
class SearchConfig:
    max_iterations: int = 200
    exploration: float = math.sqrt(2)
    proposals_per_expansion: int = 5
    max_predicates: int = MAX_RULE_PREDICATES
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.exploration <= 0:
            raise ValueError("exploration constant must be > 0")
        if self.proposals_per_expansion < 1:
            raise ValueError("proposals_per_expansion must be >= 1")
        if not 1 <= self.max_predicates <= MAX_RULE_PREDICATES:
            raise ValueError(
                f"max_predicates must be in 1..{MAX_RULE_PREDICATES}"
            )


@dataclass
class SearchResult:
    rules: list[tuple[Rule, RewardEstimate]]
    root: SearchNode
    iterations: int
    evaluations: int
    error: str | None = None


def uct_score(child: SearchNode, parent_visits: int, c: float) -> float:
    """Standard UCT: exploitation Q/N plus c * sqrt(ln(parent)/N).

    Unvisited children score +inf so they are always picked first.
    """

    if parent_visits < 1:
        raise ValueError("parent_visits must be >= 1")
    if child.visits == 0:
        return math.inf
    exploit = child.total_value / child.visits
    explore = c * math.sqrt(math.log(parent_visits) / child.visits)
    return exploit + explore


def _select_child(node: SearchNode, c: float) -> SearchNode:
    # Ties break toward the first-created child: max() keeps the first
    # maximal element and dicts preserve insertion order.
    candidates = [ch for ch in node.children.values() if not ch.exhausted]
    return max(candidates, key=lambda ch: uct_score(ch, node.visits, c))


def _refresh_exhaustion(node: SearchNode | None, max_predicates: int) -> None:
    while node is not None:
        if len(node.state) >= max_predicates:
            node.exhausted = True
        elif node.fetched and not node.untried:
            # all() over no children means a dead end: nothing was proposable.
            node.exhausted = all(ch.exhausted for ch in node.children.values())
        node = node.parent


def run_search(
    label: str,
    task: Task,
    split: DatasetSplit,
    agent: Agent,
    cfg: SearchConfig,
    *,
    trace_path: str | Path | None = None,
) -> SearchResult:
    """Search for rules predicting ``label``; deterministic with a mock agent.

    Aborts on agent failure, returning whatever was harvested so far with
    the error recorded on the result.
    """

    exemplars = tuple(
        s for s in split.train if s.task is task and s.gold_label == label
    )
    if not exemplars:
        raise ValueError(f"no training sample carries label {label!r} for task {task.value}")
    validation = tuple(s for s in split.validation if s.task is task)
    if not validation:
        raise ValueError(f"no validation samples for task {task.value}")

    root = SearchNode(state=frozenset())
    harvested: list[tuple[Rule, RewardEstimate]] = []
    evaluations = 0
    iterations = 0
    best_reward = 0.0
    error: str | None = None
    trace: IO[str] | None = None
    if trace_path is not None:
        trace = Path(trace_path).open("w", encoding="utf-8")

    def make_context(node: SearchNode, siblings: frozenset[Predicate]) -> AgentContext:
        return AgentContext(
            task=task,
            label=label,
            exemplars=exemplars,
            validation=validation,
            current=node.state,
            siblings=siblings,
        )

    try:
        for iteration in range(cfg.max_iterations):
            if root.exhausted:
                break
            iterations += 1

            # Selection: walk down fully expanded, non-terminal nodes.
            node = root
            while (
                node.fetched
                and not node.untried
                and len(node.state) < cfg.max_predicates
                and any(not ch.exhausted for ch in node.children.values())
            ):
                node = _select_child(node, cfg.exploration)

            # Expansion: fetch candidate actions once per node, lazily.
            if not node.fetched:
                already = frozenset(node.children) | frozenset(node.untried)
                try:
                    proposals = agent.propose_predicates(
                        make_context(node, already), cfg.proposals_per_expansion
                    )
                except AgentError as exc:
                    error = str(exc)
                    break
                node.fetched = True
                seen = set(node.state) | set(already)
                for p in proposals:
                    if p in seen:
                        continue
                    seen.add(p)
                    node.untried.append(p)
                if not node.untried and not node.children:
                    # Dead end: nothing to grow here, ever.
                    node.exhausted = True
                    _refresh_exhaustion(node.parent, cfg.max_predicates)
                    if node is root:
                        break
                    continue

            if not node.untried:
                # All of this node's children were exhausted this iteration.
                _refresh_exhaustion(node, cfg.max_predicates)
                continue

            action = node.untried.pop(0)
            child = SearchNode(
                state=node.state | {action}, parent=node, action=action
            )
            node.children[action] = child

            # Evaluation replaces rollout: the agent self-assesses the rule.
            rule = Rule(
                id=f"mcts:{task.value}:{label}:{evaluations + 1:04d}",
                task=task,
                label=label,
                predicates=child.state,
                reward=0.0,
                confidence=0.0,
                source=RuleSource.MCTS,
            )
            try:
                estimate = agent.evaluate_rule(make_context(child, frozenset()), rule)
            except AgentError as exc:
                error = str(exc)
                break
            child.evaluation = estimate
            evaluations += 1
            harvested.append(
                (
                    replace(rule, reward=estimate.reward, confidence=estimate.confidence),
                    estimate,
                )
            )
            best_reward = max(best_reward, estimate.reward)

            # Backpropagation: reward weighted by the agent's own confidence.
            value = estimate.reward * estimate.confidence
            walker: SearchNode | None = child
            while walker is not None:
                walker.visits += 1
                walker.total_value += value
                walker = walker.parent

            _refresh_exhaustion(child, cfg.max_predicates)

            logger.debug(
                "search %s/%s iter=%d eval=%d reward=%.3f best=%.3f",
                task.value,
                label,
                iteration,
                evaluations,
                estimate.reward,
                best_reward,
            )
            if trace is not None:
                trace.write(
                    json.dumps(
                        {
                            "label": label,
                            "iteration": iteration,
                            "evaluations": evaluations,
                            "depth": len(child.state),
                            "reward": estimate.reward,
                            "confidence": estimate.confidence,
                            "best_reward": best_reward,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    finally:
        if trace is not None:
            trace.close()

    logger.info(
        "search %s/%s finished: %d iterations, %d rules, best reward %.3f%s",
        task.value,
        label,
        iterations,
        len(harvested),
        best_reward,
        f" (aborted: {error})" if error else "",
    )
    return SearchResult(
        rules=harvested,
        root=root,
        iterations=iterations,
        evaluations=evaluations,
        error=error,
    )
