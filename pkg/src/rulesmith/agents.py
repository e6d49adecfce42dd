"""Pluggable agents: propose predicates, self-assess rules, rephrase text.

Two implementations share one interface. ``MockAgent`` is fully
deterministic: it mines candidate tokens from a reference corpus and scores
rules against the validation examples it is handed, so induction runs are
reproducible bit for bit. ``RemoteAgent`` talks to a chat-completions style
endpoint and expects each reply to carry exactly one fenced JSON block.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import re
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Protocol, Sequence

import requests

from .dataset import DialogueSample, Task
from .errors import AgentProtocolError, AgentUnavailableError
from .predicate import (
    Predicate,
    PredicateField,
    PredicateOp,
    Rule,
    extract_field_text,
    measure_rule,
    normalize_text,
    parse_predicate,
    render_predicate,
)

logger = logging.getLogger(__name__)

AGENT_KEY_ENV = "RULESMITH_AGENT_KEY"
DEFAULT_TIMEOUT = 30.0
DEFAULT_MAX_IN_FLIGHT = 4
DEFAULT_RETRIES = 3


@dataclass(frozen=True)
class RewardEstimate:
    """An agent's self-assessment of a rule: reward, confidence, rationale."""

    reward: float
    confidence: float
    rationale: str = ""

    def __post_init__(self) -> None:
        if not 0.0 <= self.reward <= 1.0:
            raise ValueError(f"reward {self.reward} outside [0, 1]")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class AgentContext:
    """Everything an agent sees when proposing or judging a rule."""

    task: Task
    label: str
    exemplars: tuple[DialogueSample, ...]
    validation: tuple[DialogueSample, ...]
    current: frozenset[Predicate] = field(default_factory=frozenset)
    siblings: frozenset[Predicate] = field(default_factory=frozenset)


class Agent(Protocol):
    def propose_predicates(self, ctx: AgentContext, k: int) -> list[Predicate]: ...

    def evaluate_rule(self, ctx: AgentContext, rule: Rule) -> RewardEstimate: ...

    def rephrase(self, text: str) -> str: ...


# --- tokenization shared by the mock agent and test oracles -----------------

_WORD_RE = re.compile(r"\w+", re.UNICODE)
_CJK_RE = re.compile(r"[㐀-鿿豈-﫿]")

# Tokens above this length never make useful keyword predicates.
MAX_TOKEN_LENGTH = 64


def tokenize(text: str) -> set[str]:
    """Candidate keyword tokens of a text: word runs, plus 2/3-grams of CJK runs."""

    tokens: set[str] = set()
    for run in _WORD_RE.findall(normalize_text(text)):
        if _CJK_RE.search(run):
            if len(run) <= 2:
                tokens.add(run)
            for n in (2, 3):
                for i in range(len(run) - n + 1):
                    tokens.add(run[i : i + n])
        else:
            tokens.add(run)
    return tokens


@lru_cache(maxsize=None)
def sample_tokens(sample: DialogueSample) -> frozenset[str]:
    return frozenset(tokenize(extract_field_text(sample, PredicateField.ANY_TEXT)))


def _stable_rng(*parts: object) -> random.Random:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def rule_key(rule: Rule) -> str:
    preds = ",".join(render_predicate(p) for p in rule.sorted_predicates())
    return f"{rule.task.value}|{rule.label}|{preds}"


class MockAgent:
    """Deterministic stand-in for a remote model.

    Proposals come from per-label token mining over the reference corpus:
    tokens are ranked by how much more often they appear in same-label
    samples than in the rest (a smoothed frequency ratio). Rule rewards are
    the measured precision on the context's validation examples, optionally
    perturbed by seeded noise; confidence grows with coverage, saturating
    at coverage 10.
    """

    def __init__(
        self,
        corpus: Sequence[DialogueSample],
        seed: int = 0,
        *,
        noise: float = 0.05,
    ) -> None:
        if not 0.0 <= noise <= 1.0:
            raise ValueError("noise must be in [0, 1]")
        self.corpus = tuple(corpus)
        self.seed = seed
        self.noise = noise
        self._ranked: dict[tuple[Task, str], list[str]] = {}

    def _ranked_tokens(self, task: Task, label: str) -> list[str]:
        key = (task, label)
        if key in self._ranked:
            return self._ranked[key]
        positives = [s for s in self.corpus if s.task is task and s.gold_label == label]
        negatives = [s for s in self.corpus if s.task is task and s.gold_label != label]
        scored: list[tuple[float, float, str]] = []
        if positives:
            vocabulary = set().union(*(sample_tokens(s) for s in positives))
            smoothing = 1.0 / (2 * max(1, len(negatives)))
            for token in vocabulary:
                if len(token) > MAX_TOKEN_LENGTH:
                    continue
                p_pos = sum(token in sample_tokens(s) for s in positives) / len(positives)
                p_neg = (
                    sum(token in sample_tokens(s) for s in negatives) / len(negatives)
                    if negatives
                    else 0.0
                )
                scored.append((p_pos / (p_neg + smoothing), p_pos, token))
        scored.sort(key=lambda item: (-item[0], -item[1], item[2]))
        ranked = [token for _, _, token in scored]
        self._ranked[key] = ranked
        return ranked

    def propose_predicates(self, ctx: AgentContext, k: int) -> list[Predicate]:
        if k < 1:
            raise ValueError("k must be >= 1")
        taken = set(ctx.current) | set(ctx.siblings)
        proposals: list[Predicate] = []
        for token in self._ranked_tokens(ctx.task, ctx.label):
            candidate = Predicate(
                field=PredicateField.ANY_TEXT, op=PredicateOp.CONTAINS, value=token
            )
            if candidate in taken:
                continue
            proposals.append(candidate)
            taken.add(candidate)
            if len(proposals) == k:
                break
        return proposals

    def evaluate_rule(self, ctx: AgentContext, rule: Rule) -> RewardEstimate:
        quality = measure_rule(rule, ctx.validation)
        base = quality.precision if quality.precision is not None else 0.0
        reward = base
        if self.noise > 0.0:
            rng = _stable_rng(self.seed, rule_key(rule))
            reward = min(1.0, max(0.0, base + rng.uniform(-self.noise, self.noise)))
        confidence = min(1.0, quality.coverage / 10)
        return RewardEstimate(
            reward=reward,
            confidence=confidence,
            rationale=f"oracle precision {quality.correct}/{quality.coverage}",
        )

    def rephrase(self, text: str) -> str:
        return text


# --- remote agent ------------------------------------------------------------

Transport = Callable[[list[dict[str, str]]], str]

_FENCE_RE = re.compile(r"```(?:[A-Za-z0-9_-]*)\n(.*?)```", re.DOTALL)


def extract_fenced_json(content: str) -> dict:
    """Pull the single fenced JSON object out of a chat reply."""

    blocks = _FENCE_RE.findall(content)
    if len(blocks) != 1:
        raise AgentProtocolError(
            f"reply must contain exactly one fenced block, found {len(blocks)}"
        )
    try:
        payload = json.loads(blocks[0])
    except json.JSONDecodeError as exc:
        raise AgentProtocolError(f"fenced block is not valid JSON: {exc.msg}") from None
    if not isinstance(payload, dict):
        raise AgentProtocolError("fenced block must contain a JSON object")
    return payload


def _checked_ratio(payload: dict, field_name: str) -> float:
    value = payload.get(field_name)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise AgentProtocolError(f"field {field_name!r} must be a number, got {value!r}")
    if not 0.0 <= float(value) <= 1.0:
        raise AgentProtocolError(f"field {field_name!r} out of range [0, 1]: {value!r}")
    return float(value)


def http_chat_transport(
    endpoint: str,
    *,
    model: str = "default",
    timeout: float = DEFAULT_TIMEOUT,
    api_key_env: str = AGENT_KEY_ENV,
    session: requests.Session | None = None,
) -> Transport:
    """POST messages to a chat-completions endpoint, return the reply text."""

    import os

    http = session or requests.Session()

    def send(messages: list[dict[str, str]]) -> str:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        response = http.post(
            endpoint,
            json={"model": model, "messages": messages},
            headers=headers,
            timeout=timeout,
        )
        response.raise_for_status()
        body = response.json()
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise AgentProtocolError("endpoint reply missing choices[0].message.content") from None
        if not isinstance(content, str):
            raise AgentProtocolError("endpoint reply content must be a string")
        return content

    return send


def _format_samples(samples: Sequence[DialogueSample], limit: int) -> str:
    lines = []
    for sample in samples[:limit]:
        dialogue = " / ".join(f"{t.speaker.value}: {t.text}" for t in sample.turns)
        lines.append(f"- [{sample.gold_label}] {dialogue} | ocr: {sample.ocr_text}")
    return "\n".join(lines)


class RemoteAgent:
    """Agent backed by a remote chat endpoint.

    Every structured call demands exactly one fenced JSON block in the
    reply; malformed replies are retried with the parse error echoed back,
    and transport failures are retried as-is. After the retry budget the
    call fails loudly rather than degrading silently.
    """

    def __init__(
        self,
        endpoint: str,
        *,
        model: str = "default",
        timeout: float = DEFAULT_TIMEOUT,
        retries: int = DEFAULT_RETRIES,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        context_exemplars: int = 8,
        context_validation: int = 8,
        transport: Transport | None = None,
    ) -> None:
        self.endpoint = endpoint
        self.retries = retries
        self.context_exemplars = context_exemplars
        self.context_validation = context_validation
        self.dropped_proposals = 0
        self._transport = transport or http_chat_transport(
            endpoint, model=model, timeout=timeout
        )
        self._gate = threading.Semaphore(max_in_flight)

    def _send(self, messages: list[dict[str, str]]) -> str:
        with self._gate:
            return self._transport(messages)

    def _structured_call(
        self, messages: list[dict[str, str]], parse: Callable[[str], object]
    ) -> object:
        last_error: Exception | None = None
        conversation = list(messages)
        for attempt in range(self.retries):
            try:
                content = self._send(conversation)
            except requests.RequestException as exc:
                last_error = AgentUnavailableError(f"transport failure: {exc}")
                logger.warning("agent transport failure (attempt %d): %s", attempt + 1, exc)
                continue
            try:
                return parse(content)
            except AgentProtocolError as exc:
                last_error = exc
                logger.warning("agent payload invalid (attempt %d): %s", attempt + 1, exc)
                conversation = conversation + [
                    {"role": "assistant", "content": content},
                    {
                        "role": "user",
                        "content": (
                            f"Your reply was invalid: {exc}. Answer again with "
                            "exactly one fenced JSON block in the required schema."
                        ),
                    },
                ]
        assert last_error is not None
        raise last_error

    def propose_predicates(self, ctx: AgentContext, k: int) -> list[Predicate]:
        if k < 1:
            raise ValueError("k must be >= 1")
        current = ", ".join(sorted(render_predicate(p) for p in ctx.current)) or "(none)"
        siblings = ", ".join(sorted(render_predicate(p) for p in ctx.siblings)) or "(none)"
        messages = [
            {
                "role": "system",
                "content": (
                    "You grow keyword rules for labeling e-commerce dialogues. "
                    "A predicate has the form: <field> <op> \"<value>\" where field is "
                    "one of user_text, service_text, ocr_text, any_text and op is one "
                    "of contains, not_contains, starts_with, ends_with. Reply with "
                    'exactly one fenced JSON block: {"predicates": ["...", ...]}'
                ),
            },
            {
                "role": "user",
                "content": (
                    f"Target label: {ctx.label} (task: {ctx.task.value})\n"
                    f"Current rule predicates: {current}\n"
                    f"Already tried alternatives: {siblings}\n"
                    f"Labeled examples:\n{_format_samples(ctx.exemplars, self.context_exemplars)}\n"
                    f"Validation examples:\n{_format_samples(ctx.validation, self.context_validation)}\n"
                    f"Propose up to {k} new predicates that separate this label."
                ),
            },
        ]

        def parse(content: str) -> list[str]:
            payload = extract_fenced_json(content)
            raw = payload.get("predicates")
            if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
                raise AgentProtocolError('field "predicates" must be an array of strings')
            return raw

        raw_predicates = self._structured_call(messages, parse)
        taken = set(ctx.current) | set(ctx.siblings)
        proposals: list[Predicate] = []
        for text in raw_predicates:  # type: ignore[union-attr]
            try:
                candidate = parse_predicate(text)
            except Exception as exc:  # unparseable proposals are dropped, not fatal
                self.dropped_proposals += 1
                logger.info("dropping unparseable proposal %r: %s", text, exc)
                continue
            if candidate in taken:
                continue
            proposals.append(candidate)
            taken.add(candidate)
            if len(proposals) == k:
                break
        return proposals

    def evaluate_rule(self, ctx: AgentContext, rule: Rule) -> RewardEstimate:
        predicates = " AND ".join(render_predicate(p) for p in rule.sorted_predicates())
        messages = [
            {
                "role": "system",
                "content": (
                    "You judge keyword rules for labeling e-commerce dialogues. "
                    "Estimate how accurate the rule is on the validation examples. "
                    "Reply with exactly one fenced JSON block: "
                    '{"reward": number, "confidence": number, "rationale": string} '
                    "with reward and confidence in [0, 1]."
                ),
            },
            {
                "role": "user",
                "content": (
                    f"Rule: IF {predicates} THEN label = {rule.label} "
                    f"(task: {rule.task.value})\n"
                    f"Validation examples:\n{_format_samples(ctx.validation, self.context_validation)}"
                ),
            },
        ]

        def parse(content: str) -> RewardEstimate:
            payload = extract_fenced_json(content)
            reward = _checked_ratio(payload, "reward")
            confidence = _checked_ratio(payload, "confidence")
            rationale = payload.get("rationale", "")
            if not isinstance(rationale, str):
                raise AgentProtocolError('field "rationale" must be a string')
            return RewardEstimate(reward=reward, confidence=confidence, rationale=rationale)

        return self._structured_call(messages, parse)  # type: ignore[return-value]

    def rephrase(self, text: str) -> str:
        messages = [
            {
                "role": "system",
                "content": (
                    "Reword the user's message, preserving its meaning, language, "
                    "and intent. Reply with the reworded text only."
                ),
            },
            {"role": "user", "content": text},
        ]

        def parse(content: str) -> str:
            reply = content.strip()
            if not reply:
                raise AgentProtocolError("rephrase reply is empty")
            return reply

        return self._structured_call(messages, parse)  # type: ignore[return-value]
