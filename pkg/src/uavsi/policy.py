"""Imperative, declarative and intent policies.

Intent text uses a small fixed grammar (keywords are case-insensitive and
tokens are separated by exactly one space)::

    intent  := "guarantee" SUBJECT METRIC CMP NUMBER UNIT
             | "prioritize" SUBJECT
    SUBJECT := "flow" IDENT
    METRIC  := "throughput" | "latency"
    CMP     := "at-least" | "at-most"
    UNIT    := "mbps" | "kbps" | "ms"

``prioritize flow X`` becomes a throughput floor at X's declared demand.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Any, Mapping, Sequence, Union

from .actions import Action


class Metric(str, Enum):
    THROUGHPUT = "throughput"
    LATENCY = "latency"


class Comparator(str, Enum):
    AT_LEAST = "at_least"
    AT_MOST = "at_most"


# unit -> (metric it measures, decimal exponent to the canonical unit)
UNITS = {"mbps": (Metric.THROUGHPUT, 6), "kbps": (Metric.THROUGHPUT, 3), "ms": (Metric.LATENCY, 0)}
CANONICAL_COMPARATOR = {Metric.THROUGHPUT: Comparator.AT_LEAST, Metric.LATENCY: Comparator.AT_MOST}
TELEMETRY_METRIC = {Metric.THROUGHPUT: "throughput_bps", Metric.LATENCY: "latency_ms"}

_IDENT = re.compile(r"[A-Za-z0-9][A-Za-z0-9_.:-]*\Z")
_NUMBER = re.compile(r"[0-9]+(\.[0-9]+)?\Z")


class PolicyError(ValueError):
    policy_index: int | None = None


class ParseError(PolicyError):
    def __init__(self, offset: int, expected: frozenset[str] | set[str], found: str | None = None) -> None:
        self.offset = offset
        self.expected = frozenset(expected)
        self.found = found
        got = "end of input" if found is None else repr(found)
        super().__init__(f"at byte {offset}: expected one of {sorted(self.expected)}, got {got}")


class SemanticError(PolicyError):
    def __init__(self, message: str, offset: int = 0) -> None:
        self.offset = offset
        super().__init__(message)


class DuplicateGoal(PolicyError):
    pass


@dataclass(frozen=True)
class Goal:
    """``value`` is always canonical: bps for throughput, ms for latency.
    ``unit`` remembers how the goal was written."""

    id: str
    subject: str
    metric: Metric
    comparator: Comparator
    value: float
    unit: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "metric", Metric(self.metric))
        object.__setattr__(self, "comparator", Comparator(self.comparator))
        problem = _semantic_problem(self.metric, self.comparator, self.unit, self.value)
        if problem:
            raise SemanticError(f"goal {self.id}: {problem}")

    @property
    def telemetry_metric(self) -> str:
        return TELEMETRY_METRIC[self.metric]

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], default_id: str = "goal") -> "Goal":
        unit = str(doc["unit"]).lower()
        if unit not in UNITS:
            raise SemanticError(f"unknown unit {unit!r}")
        value = _to_canonical(Decimal(str(doc["value"])), unit)
        return cls(str(doc.get("id", default_id)), str(doc["subject"]), doc["metric"],
                   doc["comparator"], value, unit)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id, "subject": self.subject, "metric": self.metric.value,
            "comparator": self.comparator.value, "value": float(_from_canonical(self.value, self.unit)),
            "unit": self.unit,
        }


def _semantic_problem(metric: Metric, comparator: Comparator, unit: str, value: float) -> str | None:
    if unit not in UNITS:
        return f"unknown unit {unit!r}"
    if UNITS[unit][0] is not metric:
        return f"unit {unit} does not measure {metric.value}"
    if CANONICAL_COMPARATOR[metric] is not comparator:
        return f"{metric.value} goals must use {CANONICAL_COMPARATOR[metric].value.replace('_', '-')}"
    if not value > 0:
        return "goal value must be > 0"
    return None


def _to_canonical(amount: Decimal, unit: str) -> float:
    return float(amount.scaleb(UNITS[unit][1]))


def _from_canonical(value: float, unit: str) -> Decimal:
    # exact: a binary float has a finite decimal expansion
    return Decimal(value).scaleb(-UNITS[unit][1])


class _Tokens:
    """Single-space separated tokens with UTF-8 byte offsets."""

    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0
        self.started = False

    def byte_offset(self, pos: int) -> int:
        return len(self.text[:pos].encode("utf-8", "surrogatepass"))

    def take(self, expected: set[str]) -> tuple[str, int]:
        if self.started:
            if self.pos >= len(self.text):
                raise ParseError(self.byte_offset(self.pos), expected)
            self.pos += 1  # the single separating space
        self.started = True
        start = self.pos
        end = self.text.find(" ", start)
        if end < 0:
            end = len(self.text)
        tok = self.text[start:end]
        if not tok:
            found = self.text[start] if start < len(self.text) else None
            raise ParseError(self.byte_offset(start), expected, found)
        self.pos = end
        return tok, start

    def keyword(self, options: Sequence[str]) -> str:
        tok, start = self.take(set(options))
        low = tok.lower() if tok.isascii() else tok
        if low not in options:
            raise ParseError(self.byte_offset(start), set(options), tok)
        return low

    def end(self) -> None:
        if self.pos < len(self.text):
            raise ParseError(self.byte_offset(self.pos), {"<end>"}, self.text[self.pos:])


def parse_intent(text: str, demands: Mapping[str, float] | None = None, goal_id: str = "intent") -> Goal:
    toks = _Tokens(text)
    verb = toks.keyword(("guarantee", "prioritize"))
    toks.keyword(("flow",))
    ident, ident_at = toks.take({"IDENT"})
    if not _IDENT.match(ident):
        raise ParseError(toks.byte_offset(ident_at), {"IDENT"}, ident)
    if verb == "prioritize":
        toks.end()
        if demands is None or ident not in demands:
            raise SemanticError(f"prioritize: flow {ident} has no declared demand", toks.byte_offset(ident_at))
        return Goal(goal_id, ident, Metric.THROUGHPUT, Comparator.AT_LEAST, float(demands[ident]), "mbps")
    metric = Metric(toks.keyword(("throughput", "latency")))
    comparator = Comparator(toks.keyword(("at-least", "at-most")).replace("-", "_"))
    number, number_at = toks.take({"NUMBER"})
    if not _NUMBER.match(number):
        raise ParseError(toks.byte_offset(number_at), {"NUMBER"}, number)
    unit_at = toks.pos + 1
    unit = toks.keyword(("mbps", "kbps", "ms"))
    toks.end()
    amount = Decimal(number)
    value = _to_canonical(amount, unit)
    problem = _semantic_problem(metric, comparator, unit, value)
    if problem:
        raise SemanticError(problem, toks.byte_offset(unit_at))
    return Goal(goal_id, ident, metric, comparator, value, unit)


def render_intent(goal: Goal) -> str:
    """Canonical intent text; ``parse_intent`` maps it back to ``goal``."""
    amount = _from_canonical(goal.value, goal.unit)
    number = format(amount, "f")
    if "." in number:
        number = number.rstrip("0").rstrip(".")
    cmp_ = goal.comparator.value.replace("_", "-")
    return f"guarantee flow {goal.subject} {goal.metric.value} {cmp_} {number} {goal.unit}"


@dataclass(frozen=True)
class ImperativePolicy:
    action: Action


@dataclass(frozen=True)
class DeclarativePolicy:
    goal: Goal


@dataclass(frozen=True)
class IntentPolicy:
    text: str
    id: str | None = None


Policy = Union[ImperativePolicy, DeclarativePolicy, IntentPolicy]


def policy_from_dict(doc: Mapping[str, Any], index: int = 0) -> Policy:
    kind = str(doc.get("type", "")).lower()
    if kind == "imperative":
        return ImperativePolicy(Action.from_dict(doc["action"]))
    if kind == "declarative":
        return DeclarativePolicy(Goal.from_dict(doc["goal"], default_id=f"p{index}"))
    if kind == "intent":
        return IntentPolicy(str(doc["text"]), doc.get("id"))
    raise PolicyError(f"policy {index}: unknown type {doc.get('type')!r}")


def compile_policies(
    policies: Sequence[Policy], demands: Mapping[str, float] | None = None
) -> tuple[list[Goal], list[Action]]:
    """Split policies into persistent goals and one-shot actions."""
    goals: list[Goal] = []
    immediate: list[Action] = []
    seen: set[str] = set()
    for i, policy in enumerate(policies):
        if isinstance(policy, ImperativePolicy):
            immediate.append(policy.action)
            continue
        if isinstance(policy, DeclarativePolicy):
            goal = policy.goal
        else:
            try:
                goal = parse_intent(policy.text, demands, policy.id or f"p{i}")
            except PolicyError as exc:
                exc.policy_index = i
                exc.args = (f"policy {i}: {exc.args[0]}",)
                raise
        if goal.id in seen:
            err = DuplicateGoal(f"policy {i}: duplicate goal id {goal.id}")
            err.policy_index = i
            raise err
        seen.add(goal.id)
        goals.append(goal)
    return goals, immediate


@dataclass(frozen=True)
class CheckResult:
    satisfied: bool
    margin: float


def check(goal: Goal, windowed_mean: float) -> CheckResult:
    """Margin is the signed relative distance to the target, positive when
    the goal holds. The boundary itself counts as satisfied."""
    if goal.comparator is Comparator.AT_LEAST:
        margin = (windowed_mean - goal.value) / goal.value
    else:
        margin = (goal.value - windowed_mean) / goal.value
    return CheckResult(margin >= 0, margin)
