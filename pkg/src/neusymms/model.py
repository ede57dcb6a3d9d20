"""Domain types shared by every other module.

A fact is a scoped subject-relation-value triple. CandidateFact is the
not-yet-persisted form produced by extraction; MemoryFact is the stored
row; EngineDecision is what the rules engine tells the store to do.
All three share one canonical JSON form (snake_case keys, RFC 3339 "Z"
timestamps, lowercase enum strings) used by the journal, the REST API,
and the CLI alike.
"""

from __future__ import annotations

import json
import re
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Optional, Union

__all__ = [
    "Scope", "Category", "MemoryType", "DecisionAction", "Actor",
    "MemoryFact", "CandidateFact", "EngineDecision", "PromptContext",
    "RelationPolicy", "ValidationIssue", "validate_fact", "utc_now",
    "format_timestamp", "parse_timestamp", "new_fact_id", "canonical_json",
]


class Scope(str, Enum):
    USER = "user"
    AGENT = "agent"
    FLOW = "flow"


class Category(str, Enum):
    PERSONAL = "personal"
    PREFERENCE = "preference"
    TASK = "task"
    RELATIONSHIP = "relationship"
    SKILL = "skill"
    CONTEXT = "context"
    INSTRUCTION = "instruction"
    TEMPORAL = "temporal"
    OTHER = "other"


class MemoryType(str, Enum):
    SHORT_TERM = "short_term"
    LONG_TERM = "long_term"


class DecisionAction(str, Enum):
    STORE_SHORT_TERM = "store_short_term"
    STORE_LONG_TERM = "store_long_term"
    RETRACT = "retract"
    UPDATE_VALUE = "update_value"
    PROMOTE = "promote"
    DISCARD = "discard"


class Actor(str, Enum):
    ENGINE = "engine"
    API = "api"
    LIFECYCLE = "lifecycle"
    CLI = "cli"


_SUBJECT_RE = re.compile(r"^[a-z0-9_.]+$")
_RELATION_RE = re.compile(r"^[a-z0-9_]+$")

_TIMESTAMP_FMT = "%Y-%m-%dT%H:%M:%S.%fZ"


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    """RFC 3339 with a Z suffix and fixed microsecond width."""
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return dt.strftime(_TIMESTAMP_FMT)


def parse_timestamp(text: str) -> datetime:
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def new_fact_id() -> str:
    return str(uuid.uuid4())


def canonical_json(obj: Any) -> str:
    """Stable JSON rendering: compact separators, keys kept in insertion order."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


@dataclass
class MemoryFact:
    """A persisted, scoped triple with lifecycle metadata."""

    user_id: str
    subject: str
    relation: str
    value: str
    category: Category = Category.OTHER
    memory_type: MemoryType = MemoryType.SHORT_TERM
    confidence: float = 1.0
    scope: Scope = Scope.USER
    agent_id: Optional[str] = None
    flow_id: Optional[str] = None
    access_count: int = 0
    source_text: str = ""
    id: str = field(default_factory=new_fact_id)
    created_at: datetime = field(default_factory=utc_now)
    last_accessed_at: Optional[datetime] = None
    is_active: bool = True

    def __post_init__(self) -> None:
        if self.last_accessed_at is None:
            self.last_accessed_at = self.created_at
        if self.agent_id is not None:
            self.agent_id = str(self.agent_id)
        if self.flow_id is not None:
            self.flow_id = str(self.flow_id)

    def copy(self) -> "MemoryFact":
        return replace(self)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "user_id": self.user_id,
            "scope": self.scope.value,
            "agent_id": self.agent_id,
            "flow_id": self.flow_id,
            "subject": self.subject,
            "relation": self.relation,
            "value": self.value,
            "category": self.category.value,
            "memory_type": self.memory_type.value,
            "confidence": self.confidence,
            "access_count": self.access_count,
            "source_text": self.source_text,
            "created_at": format_timestamp(self.created_at),
            "last_accessed_at": format_timestamp(self.last_accessed_at),
            "is_active": self.is_active,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MemoryFact":
        return cls(
            id=data["id"],
            user_id=data["user_id"],
            scope=Scope(data["scope"]),
            agent_id=data.get("agent_id"),
            flow_id=data.get("flow_id"),
            subject=data["subject"],
            relation=data["relation"],
            value=data["value"],
            category=Category(data["category"]),
            memory_type=MemoryType(data["memory_type"]),
            confidence=data["confidence"],
            access_count=data["access_count"],
            source_text=data.get("source_text", ""),
            created_at=parse_timestamp(data["created_at"]),
            last_accessed_at=parse_timestamp(data["last_accessed_at"]),
            is_active=data["is_active"],
        )


@dataclass
class CandidateFact:
    """An extracted triple that has not been through the rules engine yet."""

    subject: str
    relation: str
    value: str
    confidence: float
    scope: Scope = Scope.USER
    source_text: str = ""
    agent_id: Optional[str] = None
    flow_id: Optional[str] = None

    def __post_init__(self) -> None:
        if self.agent_id is not None:
            self.agent_id = str(self.agent_id)
        if self.flow_id is not None:
            self.flow_id = str(self.flow_id)

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "relation": self.relation,
            "value": self.value,
            "confidence": self.confidence,
            "scope": self.scope.value,
            "source_text": self.source_text,
            "agent_id": self.agent_id,
            "flow_id": self.flow_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CandidateFact":
        return cls(
            subject=data["subject"],
            relation=data["relation"],
            value=data["value"],
            confidence=data["confidence"],
            scope=Scope(data.get("scope", "user")),
            source_text=data.get("source_text", ""),
            agent_id=data.get("agent_id"),
            flow_id=data.get("flow_id"),
        )


@dataclass
class EngineDecision:
    """One instruction from the rules engine to the store, with its reason."""

    action: DecisionAction
    reason: str
    target_fact_id: Optional[str] = None
    candidate: Optional[CandidateFact] = None
    category: Optional[Category] = None

    def to_dict(self) -> dict:
        return {
            "action": self.action.value,
            "target_fact_id": self.target_fact_id,
            "candidate": self.candidate.to_dict() if self.candidate else None,
            "category": self.category.value if self.category else None,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EngineDecision":
        cand = data.get("candidate")
        cat = data.get("category")
        return cls(
            action=DecisionAction(data["action"]),
            reason=data["reason"],
            target_fact_id=data.get("target_fact_id"),
            candidate=CandidateFact.from_dict(cand) if cand else None,
            category=Category(cat) if cat else None,
        )


@dataclass
class PromptContext:
    """Request metadata available to relevance-aware rules."""

    keywords: list[str] = field(default_factory=list)
    intent: str = ""
    turn_number: int = 0

    def to_dict(self) -> dict:
        return {
            "keywords": list(self.keywords),
            "intent": self.intent,
            "turn_number": self.turn_number,
        }


@dataclass
class RelationPolicy:
    """Relation-level policy tables consumed by the engine.

    category_map is an ordered first-match table; patterns are exact
    tokens or a token with one trailing ``*`` wildcard, and the final
    entry must be the ``*`` -> other catch-all.
    """

    category_map: list[tuple[str, Category]] = field(default_factory=list)
    multi_valued: list[str] = field(default_factory=list)
    negation_relations: list[str] = field(default_factory=list)
    auto_long_term_categories: list[Category] = field(default_factory=list)
    # optional per-negation-relation allow-list of retractable relations
    negation_retractables: dict[str, list[str]] = field(default_factory=dict)
    similarity_threshold: float = 0.85

    @staticmethod
    def pattern_matches(pattern: str, relation: str) -> bool:
        if pattern == "*":
            return True
        if pattern.endswith("*"):
            return relation.startswith(pattern[:-1])
        return relation == pattern

    def _in_set(self, relations: list[str], relation: str) -> bool:
        return any(self.pattern_matches(p, relation) for p in relations)

    def category_for(self, relation: str) -> Category:
        for pattern, category in self.category_map:
            if self.pattern_matches(pattern, relation):
                return category
        return Category.OTHER

    def is_multi_valued(self, relation: str) -> bool:
        return self._in_set(self.multi_valued, relation)

    def is_negation(self, relation: str) -> bool:
        return self._in_set(self.negation_relations, relation)

    def retractable_by(self, negation_relation: str, relation: str) -> bool:
        """Whether `relation` facts may be retracted by `negation_relation`.

        An empty allow-list for the negation relation means any
        non-negation relation is fair game.
        """
        for pattern, allowed in self.negation_retractables.items():
            if self.pattern_matches(pattern, negation_relation):
                return self._in_set(allowed, relation)
        return not self.is_negation(relation)


@dataclass
class ValidationIssue:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


def _check_token(issues: list[ValidationIssue], name: str, value: Any, pattern: re.Pattern) -> None:
    if not isinstance(value, str) or not value:
        issues.append(ValidationIssue(name, "must be a non-empty string"))
    elif not pattern.match(value):
        issues.append(ValidationIssue(name, f"not a valid token: {value!r}"))


def _check_scope_ids(issues: list[ValidationIssue], scope: Scope,
                     agent_id: Optional[str], flow_id: Optional[str]) -> None:
    if scope == Scope.AGENT:
        if not agent_id:
            issues.append(ValidationIssue("agent_id", "required when scope=agent"))
        if flow_id:
            issues.append(ValidationIssue("flow_id", "must be absent unless scope=flow"))
    elif scope == Scope.FLOW:
        if not flow_id:
            issues.append(ValidationIssue("flow_id", "required when scope=flow"))
        if agent_id:
            issues.append(ValidationIssue("agent_id", "must be absent unless scope=agent"))
    else:
        if agent_id:
            issues.append(ValidationIssue("agent_id", "must be absent when scope=user"))
        if flow_id:
            issues.append(ValidationIssue("flow_id", "must be absent when scope=user"))


def validate_fact(fact: Union[MemoryFact, CandidateFact]) -> list[ValidationIssue]:
    """Check every type invariant; an empty list means the fact is valid."""
    issues: list[ValidationIssue] = []
    _check_token(issues, "subject", fact.subject, _SUBJECT_RE)
    _check_token(issues, "relation", fact.relation, _RELATION_RE)
    if not isinstance(fact.value, str) or not fact.value:
        issues.append(ValidationIssue("value", "must be non-empty text"))
    if not isinstance(fact.confidence, (int, float)) or isinstance(fact.confidence, bool) \
            or not 0.0 <= fact.confidence <= 1.0:
        issues.append(ValidationIssue("confidence", f"must be in [0, 1], got {fact.confidence!r}"))
    if not isinstance(fact.scope, Scope):
        issues.append(ValidationIssue("scope", f"unknown scope {fact.scope!r}"))
    else:
        _check_scope_ids(issues, fact.scope, fact.agent_id, fact.flow_id)

    if isinstance(fact, MemoryFact):
        if not fact.user_id:
            issues.append(ValidationIssue("user_id", "must be non-empty"))
        if not isinstance(fact.category, Category):
            issues.append(ValidationIssue("category", f"unknown category {fact.category!r}"))
        if not isinstance(fact.memory_type, MemoryType):
            issues.append(ValidationIssue("memory_type", f"unknown memory_type {fact.memory_type!r}"))
        if not isinstance(fact.access_count, int) or isinstance(fact.access_count, bool) \
                or fact.access_count < 0:
            issues.append(ValidationIssue("access_count", "must be a non-negative integer"))
        try:
            parsed = uuid.UUID(fact.id)
            if parsed.version != 4:
                issues.append(ValidationIssue("id", "must be a UUIDv4"))
        except (ValueError, AttributeError, TypeError):
            issues.append(ValidationIssue("id", f"not a UUID: {fact.id!r}"))
        if fact.last_accessed_at < fact.created_at:
            issues.append(ValidationIssue("last_accessed_at", "must be >= created_at"))
    return issues


def validate_decision(decision: EngineDecision) -> list[ValidationIssue]:
    """Action-specific field requirements for an EngineDecision."""
    issues: list[ValidationIssue] = []
    if not decision.reason or not decision.reason.strip():
        issues.append(ValidationIssue("reason", "must be non-empty"))
    needs_target = {DecisionAction.RETRACT, DecisionAction.UPDATE_VALUE, DecisionAction.PROMOTE}
    needs_candidate = {DecisionAction.STORE_SHORT_TERM, DecisionAction.STORE_LONG_TERM,
                       DecisionAction.UPDATE_VALUE}
    stores = {DecisionAction.STORE_SHORT_TERM, DecisionAction.STORE_LONG_TERM}
    if decision.action in needs_target and not decision.target_fact_id:
        issues.append(ValidationIssue("target_fact_id", f"required for {decision.action.value}"))
    if decision.action in needs_candidate and decision.candidate is None:
        issues.append(ValidationIssue("candidate", f"required for {decision.action.value}"))
    if decision.action in stores and decision.category is None:
        issues.append(ValidationIssue("category", f"required for {decision.action.value}"))
    if decision.candidate is not None:
        issues.extend(validate_fact(decision.candidate))
    return issues
