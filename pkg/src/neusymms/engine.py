"""Forward-chaining session engine.

One session per write request: existing facts and extracted candidates
are loaded into a fresh working memory, the pack's rules run through the
classify -> reconcile -> lifecycle phases, and the session emits an
ordered list of EngineDecisions plus a full firing trace.

Determinism is a hard contract here: rules fire in descending salience,
then pack definition order, then candidate input order, with refraction
(a rule never refires on the same instance combination). Identical
inputs therefore produce byte-identical decision lists.
"""

from __future__ import annotations

import hashlib
import logging
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Union

from .matching import same_entity
from .model import (
    CandidateFact,
    Category,
    DecisionAction,
    EngineDecision,
    MemoryFact,
    PromptContext,
    RelationPolicy,
    canonical_json,
    validate_fact,
)
from .ruledsl import (
    AssertDecision,
    BindRetraction,
    ComparisonTest,
    FuzzyTest,
    LiteralTest,
    MarkDuplicate,
    MembershipTest,
    Pattern,
    Phase,
    RetractableByTest,
    RuleDef,
    RulePack,
    SetCategory,
    VariableTest,
    _REASON_VAR_RE,
)

logger = logging.getLogger(__name__)

DEFAULT_FIRING_LIMIT = 10_000

ENGINE_FALLBACK_REASON = "engine-fallback"


class ConflictKind(str, Enum):
    DUPLICATE = "duplicate"
    CONTRADICTION = "contradiction"
    MULTI_VALUE_NEW = "multi_value_new"
    NEGATION_MATCH = "negation_match"
    NONE = "none"


@dataclass
class ConflictReport:
    kind: ConflictKind
    matched_ids: list[str] = field(default_factory=list)


class EngineError(RuntimeError):
    """Internal engine failure; run_session converts it to the degraded result."""


class FiringLimitExceeded(EngineError):
    pass


# --- working-memory instances -------------------------------------------

@dataclass
class _WMFact:
    fact: MemoryFact
    ordinal: int
    active: bool = True

    key = property(lambda self: ("f", self.ordinal))

    def slot(self, name: str) -> Any:
        if name == "active":
            return self.active
        if name == "category":
            return self.fact.category.value
        if name == "memory-type":
            return self.fact.memory_type.value
        if name == "scope":
            return self.fact.scope.value
        return getattr(self.fact, name)


@dataclass
class _WMCandidate:
    cand: CandidateFact
    index: int
    category: Optional[Category] = None
    terminal: Optional[EngineDecision] = None
    duplicate_of: Optional[str] = None

    key = property(lambda self: ("c", self.index))

    def slot(self, name: str) -> Any:
        if name == "category":
            return self.category.value if self.category else ""
        if name == "scope":
            return self.cand.scope.value
        return getattr(self.cand, name)


@dataclass
class _WMContext:
    ctx: PromptContext

    key = property(lambda self: ("p", 0))

    def slot(self, name: str) -> Any:
        if name == "turn-number":
            return self.ctx.turn_number
        return getattr(self.ctx, name)


_Instance = Union[_WMFact, _WMCandidate, _WMContext]


@dataclass
class Session:
    """Per-request working memory plus the session's outputs."""

    pack: RulePack
    facts: list[_WMFact]
    candidates: list[_WMCandidate]
    context: Optional[_WMContext]
    decisions: list[EngineDecision] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)
    firing_limit: int = DEFAULT_FIRING_LIMIT
    firings: int = 0
    fingerprint: str = ""
    # retractions attributed to the candidate that triggered them
    retractions: dict[Optional[int], list[EngineDecision]] = field(default_factory=dict)

    def instances_of(self, template: str) -> list[_Instance]:
        if template == "memory-fact":
            return list(self.facts)
        if template == "candidate-fact":
            return [c for c in self.candidates if c.terminal is None]
        if template == "prompt-context":
            return [self.context] if self.context else []
        return []


# --- pattern matching -----------------------------------------------------

def _eval_test(test, value: Any, bindings: dict[str, Any], policy: RelationPolicy) -> Optional[dict]:
    """Return updated bindings when the test passes, else None."""
    if isinstance(test, LiteralTest):
        if isinstance(test.value, bool) or isinstance(value, bool):
            return bindings if value == test.value else None
        if isinstance(test.value, (int, float)) and isinstance(value, (int, float)):
            return bindings if float(value) == float(test.value) else None
        return bindings if value == test.value else None
    if isinstance(test, VariableTest):
        if test.name in bindings:
            return bindings if bindings[test.name] == value else None
        new = dict(bindings)
        new[test.name] = value
        return new
    if isinstance(test, FuzzyTest):
        other = bindings.get(test.name)
        if not isinstance(value, str) or not isinstance(other, str):
            matched = value == other
        else:
            matched = same_entity(value, other, policy.similarity_threshold)
        return bindings if matched != test.negate else None
    if isinstance(test, MembershipTest):
        if test.policy_set == "multi-valued":
            member = policy.is_multi_valued(str(value))
        elif test.policy_set == "negation-relations":
            member = policy.is_negation(str(value))
        else:  # auto-long-term: value is a category token
            member = any(c.value == str(value) for c in policy.auto_long_term_categories)
        return bindings if member != test.negate else None
    if isinstance(test, RetractableByTest):
        negation = bindings.get(test.name)
        ok = negation is not None and policy.retractable_by(str(negation), str(value))
        return bindings if ok else None
    if isinstance(test, ComparisonTest):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            return None
        v = float(value)
        ok = {"<": v < test.value, "<=": v <= test.value,
              ">": v > test.value, ">=": v >= test.value}[test.op]
        return bindings if ok else None
    raise EngineError(f"unknown slot test {test!r}")


def _match_pattern(pattern: Pattern, instance: _Instance, bindings: dict[str, Any],
                   policy: RelationPolicy) -> Optional[dict]:
    # memory facts are active unless the pattern asks otherwise
    if isinstance(instance, _WMFact) and not any(s == "active" for s, _ in pattern.tests):
        if not instance.active:
            return None
    env = bindings
    for slot, tests in pattern.tests:
        try:
            value = instance.slot(slot)
        except AttributeError:
            return None
        for test in tests:
            env = _eval_test(test, value, env, policy)
            if env is None:
                return None
    if pattern.binding:
        if pattern.binding in env and env[pattern.binding] is not instance:
            return None
        env = dict(env)
        env[pattern.binding] = instance
    return env


def _enumerate_matches(session: Session, rule: RuleDef) -> list[tuple[tuple, dict]]:
    """All complete matches of the rule, as (instance-key tuple, bindings)."""
    policy = session.pack.policy
    results: list[tuple[tuple, dict]] = []

    def recurse(idx: int, used: list[_Instance], bindings: dict[str, Any]) -> None:
        if idx == len(rule.conditions):
            results.append((tuple(i.key for i in used), bindings))
            return
        cond = rule.conditions[idx]
        candidates = session.instances_of(cond.template)
        if cond.negated:
            for instance in candidates:
                if _match_pattern(cond, instance, bindings, policy) is not None:
                    return  # negated pattern matched: whole branch fails
            recurse(idx + 1, used, bindings)
            return
        for instance in candidates:
            if any(instance is u for u in used):
                continue
            env = _match_pattern(cond, instance, bindings, policy)
            if env is not None:
                recurse(idx + 1, used + [instance], env)

    recurse(0, [], {})
    return results


def _substitute(reason: str, bindings: dict[str, Any]) -> str:
    def repl(match) -> str:
        name = match.group()[1:]
        if name in bindings:
            value = bindings[name]
            if isinstance(value, (_WMFact, _WMCandidate)):
                return value.slot("value")
            if isinstance(value, float):
                return f"{value:g}"
            return str(value)
        return match.group()
    return _REASON_VAR_RE.sub(repl, reason)


# --- firing ---------------------------------------------------------------

def _first_candidate(bindings: dict[str, Any], keys: tuple) -> Optional[int]:
    for kind, ordinal in keys:
        if kind == "c":
            return ordinal
    return None


def _trace_bindings(bindings: dict[str, Any]) -> dict:
    out = {}
    for name, value in bindings.items():
        if isinstance(value, _WMFact):
            out[name] = {"fact_id": value.fact.id}
        elif isinstance(value, _WMCandidate):
            out[name] = {"candidate": value.index}
        else:
            out[name] = value
    return out


def _fire(session: Session, rule: RuleDef, keys: tuple, bindings: dict[str, Any]) -> None:
    cand_index = _first_candidate(bindings, keys)
    candidate = session.candidates[cand_index] if cand_index is not None else None
    record: dict = {"rule": rule.name, "bindings": _trace_bindings(bindings)}
    for action in rule.actions:
        if isinstance(action, SetCategory):
            if candidate is None:
                raise EngineError(f"rule {rule.name}: set-category without a candidate")
            if candidate.category is None:
                candidate.category = action.category
                record["category"] = action.category.value
        elif isinstance(action, MarkDuplicate):
            target = bindings.get(action.name)
            if not isinstance(target, _WMFact):
                raise EngineError(f"rule {rule.name}: mark-duplicate target is not a memory fact")
            if candidate is not None:
                candidate.duplicate_of = target.fact.id
        elif isinstance(action, BindRetraction):
            target = bindings.get(action.name)
            if not isinstance(target, _WMFact):
                raise EngineError(f"rule {rule.name}: bind-retraction target is not a memory fact")
            if target.active:
                target.active = False
                decision = EngineDecision(
                    action=DecisionAction.RETRACT,
                    reason=_substitute(action.reason, bindings),
                    target_fact_id=target.fact.id,
                )
                session.retractions.setdefault(cand_index, []).append(decision)
                record["decision"] = decision.to_dict()
        elif isinstance(action, AssertDecision):
            if action.action == DecisionAction.RETRACT:
                raise EngineError(f"rule {rule.name}: use bind-retraction for retract")
            if candidate is None:
                raise EngineError(f"rule {rule.name}: {action.action.value} without a candidate")
            if candidate.terminal is not None:
                continue
            target_id = None
            if action.action == DecisionAction.DISCARD:
                target_id = candidate.duplicate_of
            elif action.action in (DecisionAction.UPDATE_VALUE, DecisionAction.PROMOTE):
                fact_inst = next((bindings[k] for k in bindings
                                  if isinstance(bindings[k], _WMFact)), None)
                if fact_inst is None:
                    raise EngineError(f"rule {rule.name}: {action.action.value} needs a bound fact")
                target_id = fact_inst.fact.id
            decision = EngineDecision(
                action=action.action,
                reason=_substitute(action.reason, bindings),
                target_fact_id=target_id,
                candidate=candidate.cand,
                category=candidate.category or Category.OTHER,
            )
            candidate.terminal = decision
            record["decision"] = decision.to_dict()
        else:
            raise EngineError(f"unknown action {action!r}")
    session.trace.append(record)


def _run_phase(session: Session, phase: Phase) -> None:
    rules = session.pack.rules[phase]
    if not rules:
        return
    order = {r.name: i for i, r in enumerate(rules)}
    fired: set[tuple] = set()
    while True:
        agenda = []
        for rule in rules:
            for keys, bindings in _enumerate_matches(session, rule):
                token = (rule.name, keys)
                if token in fired:
                    continue
                cand = _first_candidate(bindings, keys)
                sort_key = (-rule.salience, order[rule.name],
                            cand if cand is not None else 1 << 30, keys)
                agenda.append((sort_key, token, rule, keys, bindings))
        if not agenda:
            return
        agenda.sort(key=lambda item: item[0])
        _sort_key, token, rule, keys, bindings = agenda[0]
        fired.add(token)
        session.firings += 1
        if session.firings > session.firing_limit:
            raise FiringLimitExceeded(
                f"firing limit {session.firing_limit} exceeded in phase {phase.value}")
        _fire(session, rule, keys, bindings)


# --- classification -------------------------------------------------------

def classify_candidate(candidate: CandidateFact, pack: RulePack) -> Category:
    """First matching category_map entry; the catch-all guarantees a value."""
    return pack.policy.category_for(candidate.relation)


def _classify_pass(session: Session) -> None:
    _run_phase(session, Phase.CLASSIFY)  # user rules may pre-assign categories
    for cand in session.candidates:
        if cand.category is None:
            cand.category = classify_candidate(cand.cand, session.pack)
            session.trace.append({
                "rule": "classify-category-map",
                "bindings": {"candidate": cand.index, "relation": cand.cand.relation},
                "category": cand.category.value,
            })


# --- conflict detection (direct ops mirroring the default pack) ------------

def detect_conflict(candidate: CandidateFact, existing: list[MemoryFact],
                    policy: RelationPolicy) -> ConflictReport:
    """Classify the candidate against the active facts of one user."""
    active = [f for f in existing if f.is_active]
    threshold = policy.similarity_threshold

    duplicates = [f.id for f in active
                  if f.subject == candidate.subject and f.relation == candidate.relation
                  and same_entity(f.value, candidate.value, threshold)]
    if duplicates:
        return ConflictReport(ConflictKind.DUPLICATE, duplicates)

    if policy.is_negation(candidate.relation):
        matches = [f.id for f in active
                   if not policy.is_negation(f.relation)
                   and policy.retractable_by(candidate.relation, f.relation)
                   and same_entity(f.value, candidate.value, threshold)]
        if matches:
            return ConflictReport(ConflictKind.NEGATION_MATCH, matches)
        return ConflictReport(ConflictKind.NONE)

    if policy.is_multi_valued(candidate.relation):
        return ConflictReport(ConflictKind.MULTI_VALUE_NEW)

    conflicts = [f.id for f in active
                 if f.subject == candidate.subject and f.relation == candidate.relation
                 and not same_entity(f.value, candidate.value, threshold)]
    if conflicts:
        return ConflictReport(ConflictKind.CONTRADICTION, conflicts)
    return ConflictReport(ConflictKind.NONE)


def decide_storage(candidate: CandidateFact, category: Category,
                   conflict: ConflictReport, policy: RelationPolicy) -> list[EngineDecision]:
    """Direct (rule-free) composition of the storage decision(s)."""
    if conflict.kind == ConflictKind.DUPLICATE:
        return [EngineDecision(
            action=DecisionAction.DISCARD,
            reason="duplicate of an existing active fact; confidence merged",
            target_fact_id=conflict.matched_ids[0],
            candidate=candidate, category=category)]
    if conflict.kind == ConflictKind.NEGATION_MATCH:
        decisions = [EngineDecision(
            action=DecisionAction.RETRACT,
            reason=f"retracted: user reported {candidate.relation} for {candidate.value}",
            target_fact_id=fact_id) for fact_id in conflict.matched_ids]
        decisions.append(EngineDecision(
            action=DecisionAction.DISCARD,
            reason=f"negation {candidate.relation} applied; negated form is not stored",
            candidate=candidate, category=category))
        return decisions
    if conflict.kind == ConflictKind.CONTRADICTION:
        decisions = [EngineDecision(
            action=DecisionAction.RETRACT,
            reason=f"superseded: {candidate.relation} is now {candidate.value}",
            target_fact_id=fact_id) for fact_id in conflict.matched_ids]
        decisions.append(EngineDecision(
            action=DecisionAction.STORE_LONG_TERM,
            reason="latest value wins; corrected fact stored long-term",
            candidate=candidate, category=category))
        return decisions
    if category in policy.auto_long_term_categories:
        return [EngineDecision(
            action=DecisionAction.STORE_LONG_TERM,
            reason="durable category is auto-stored as long-term",
            candidate=candidate, category=category)]
    return [EngineDecision(
        action=DecisionAction.STORE_SHORT_TERM,
        reason="default short-term storage",
        candidate=candidate, category=category)]


# --- intra-session reconciliation ------------------------------------------

def _pending_id(session: Session, index: int) -> str:
    """Deterministic UUIDv4 for the fact a store decision will create."""
    digest = hashlib.sha256(f"{session.fingerprint}:pending:{index}".encode()).digest()
    raw = bytearray(digest[:16])
    raw[6] = (raw[6] & 0x0F) | 0x40
    raw[8] = (raw[8] & 0x3F) | 0x80
    return str(uuid.UUID(bytes=bytes(raw)))


def _reconcile_within_session(session: Session) -> None:
    """Resolve stores that collide inside one session.

    Fuzzy-equal values for one (subject, relation) merge into the first
    store; for single-valued relations a later different value wins, so
    the earlier candidate is stored then retracted in the same decision
    list and the journal keeps the full audit trail.
    """
    policy = session.pack.policy
    stores = DecisionAction.STORE_SHORT_TERM, DecisionAction.STORE_LONG_TERM
    groups: dict[tuple[str, str], list[_WMCandidate]] = {}
    for cand in session.candidates:
        terminal = cand.terminal
        if terminal is None or terminal.action not in stores:
            continue
        groups.setdefault((cand.cand.subject, cand.cand.relation), []).append(cand)

    def settled_id(cand: _WMCandidate) -> str:
        if cand.terminal.target_fact_id is None:
            cand.terminal.target_fact_id = _pending_id(session, cand.index)
        return cand.terminal.target_fact_id

    for (subject, relation), members in groups.items():
        if len(members) < 2:
            continue
        single_valued = (not policy.is_multi_valued(relation)
                         and not policy.is_negation(relation))
        kept: list[_WMCandidate] = []
        for cand in members:
            duplicate_of = next(
                (k for k in kept if same_entity(k.cand.value, cand.cand.value,
                                                policy.similarity_threshold)), None)
            if duplicate_of is not None:
                cand.terminal = EngineDecision(
                    action=DecisionAction.DISCARD,
                    reason="duplicate of a fact stored earlier in this session",
                    target_fact_id=settled_id(duplicate_of),
                    candidate=cand.cand,
                    category=cand.category or Category.OTHER)
                session.trace.append({
                    "rule": "intra-session-duplicate",
                    "bindings": {"kept": duplicate_of.index, "discarded": cand.index},
                    "decision": cand.terminal.to_dict()})
                continue
            if single_valued and kept:
                superseded = kept[-1]
                retract = EngineDecision(
                    action=DecisionAction.RETRACT,
                    reason=(f"superseded within the same session: "
                            f"{relation} is now {cand.cand.value}"),
                    target_fact_id=settled_id(superseded))
                session.retractions.setdefault(cand.index, []).append(retract)
                session.trace.append({
                    "rule": "intra-session-latest-wins",
                    "bindings": {"superseded": superseded.index, "winner": cand.index,
                                 "subject": subject, "relation": relation},
                    "decision": retract.to_dict()})
                kept = []
            kept.append(cand)


# --- public entry point -----------------------------------------------------

def _session_fingerprint(existing: list[MemoryFact], candidates: list[CandidateFact],
                         ctx: Optional[PromptContext], pack: RulePack) -> str:
    payload = canonical_json({
        "existing": [f.to_dict() for f in existing],
        "candidates": [c.to_dict() for c in candidates],
        "ctx": ctx.to_dict() if ctx else None,
        "pack": pack.fingerprint(),
    })
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _degraded_decisions(candidates: list[CandidateFact], pack: RulePack,
                        error: Exception) -> list[EngineDecision]:
    decisions = []
    for cand in candidates:
        try:
            category = classify_candidate(cand, pack)
        except Exception:  # even classification may be broken in a bad pack
            category = Category.OTHER
        decisions.append(EngineDecision(
            action=DecisionAction.STORE_SHORT_TERM,
            reason=ENGINE_FALLBACK_REASON,
            candidate=cand, category=category))
    logger.warning("rules engine degraded to short-term fallback: %s", error)
    return decisions


def run_session(existing: list[MemoryFact], candidates: list[CandidateFact],
                ctx: Optional[PromptContext], pack: RulePack,
                firing_limit: int = DEFAULT_FIRING_LIMIT,
                ) -> tuple[list[EngineDecision], list[dict]]:
    """Run one isolated session; returns (decisions, trace).

    Inputs must be valid: every fact passes validate_fact, existing
    facts are active and belong to one user. Engine-internal failures
    degrade to storing every candidate short-term with the
    "engine-fallback" reason rather than raising.
    """
    for fact in existing:
        issues = validate_fact(fact)
        if issues:
            raise ValueError(f"invalid existing fact {fact.id}: {issues[0]}")
        if not fact.is_active:
            raise ValueError(f"existing fact {fact.id} is not active")
    users = {f.user_id for f in existing}
    if len(users) > 1:
        raise ValueError(f"existing facts span multiple users: {sorted(users)}")
    for cand in candidates:
        issues = validate_fact(cand)
        if issues:
            raise ValueError(f"invalid candidate {cand.subject} {cand.relation}: {issues[0]}")

    session = Session(
        pack=pack,
        facts=[_WMFact(f, i) for i, f in enumerate(existing)],
        candidates=[_WMCandidate(c, i) for i, c in enumerate(candidates)],
        context=_WMContext(ctx) if ctx else None,
        firing_limit=firing_limit,
        fingerprint=_session_fingerprint(existing, candidates, ctx, pack),
    )

    try:
        _classify_pass(session)
        _run_phase(session, Phase.RECONCILE)
        _run_phase(session, Phase.LIFECYCLE)
        for cand in session.candidates:
            if cand.terminal is None:
                cand.terminal = EngineDecision(
                    action=DecisionAction.STORE_SHORT_TERM,
                    reason="no storage rule produced a decision; stored short-term",
                    candidate=cand.cand,
                    category=cand.category or Category.OTHER)
                session.trace.append({"rule": "engine-default-store",
                                      "bindings": {"candidate": cand.index},
                                      "decision": cand.terminal.to_dict()})
        _reconcile_within_session(session)
    except EngineError as exc:
        return _degraded_decisions(candidates, pack, exc), session.trace
    except Exception as exc:  # malformed pack surfacing at runtime
        return _degraded_decisions(candidates, pack, exc), session.trace

    decisions: list[EngineDecision] = []
    for cand in session.candidates:
        decisions.extend(session.retractions.get(cand.index, []))
        if cand.terminal is not None:
            decisions.append(cand.terminal)
    decisions.extend(session.retractions.get(None, []))
    session.decisions = decisions
    return decisions, session.trace
