"""Durable fact store: indexed in-memory state + append-only JSON Lines journal.

The journal is the source of truth; the in-memory maps are a replayable
materialization, so ``restore(journal)`` always reproduces the live
state byte-for-byte. Soft deletion only: nothing is ever removed except
through the explicit ``compact`` rewrite.

Writes are serialized per user; readers never block on another user's
writer. All timestamps come from an injectable clock so lifecycle tests
can simulate the passage of time.
"""

from __future__ import annotations

import json
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Optional, Union

from .matching import normalize_entity
from .model import (
    Actor,
    CandidateFact,
    Category,
    DecisionAction,
    EngineDecision,
    MemoryFact,
    MemoryType,
    Scope,
    ValidationIssue,
    canonical_json,
    format_timestamp,
    new_fact_id,
    utc_now,
    validate_decision,
    validate_fact,
)

JOURNAL_HEADER = {"format": "neusymms-journal", "version": 1}
SNAPSHOT_HEADER = {"format": "neusymms-snapshot", "version": 1}


class StoreError(Exception):
    pass


class UnknownFactError(StoreError):
    def __init__(self, fact_id: str):
        self.fact_id = fact_id
        super().__init__(f"unknown fact id: {fact_id}")


class DuplicateIdError(StoreError):
    pass


class ValidationFailedError(StoreError):
    def __init__(self, issues: list[ValidationIssue]):
        self.issues = issues
        super().__init__("; ".join(str(i) for i in issues))


class BatchRejectedError(StoreError):
    pass


class JournalError(StoreError):
    pass


class EventKind(str, Enum):
    FACT_CREATED = "fact_created"
    FACT_UPDATED = "fact_updated"
    FACT_DEACTIVATED = "fact_deactivated"
    FACT_REACTIVATED = "fact_reactivated"
    DECISION_APPLIED = "decision_applied"
    CLEARED = "cleared"


class QueryOrder(str, Enum):
    INJECTION = "injection_order"
    RECENCY = "recency"
    ACCESS = "access"


@dataclass
class JournalEvent:
    seq: int
    timestamp: datetime
    kind: EventKind
    actor: Actor
    fact: Optional[MemoryFact] = None
    decision: Optional[EngineDecision] = None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        data = {
            "seq": self.seq,
            "ts": format_timestamp(self.timestamp),
            "kind": self.kind.value,
            "actor": self.actor.value,
        }
        if self.fact is not None:
            data["fact"] = self.fact.to_dict()
        if self.decision is not None:
            data["decision"] = self.decision.to_dict()
        if self.detail:
            data["detail"] = self.detail
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "JournalEvent":
        from .model import parse_timestamp
        return cls(
            seq=data["seq"],
            timestamp=parse_timestamp(data["ts"]),
            kind=EventKind(data["kind"]),
            actor=Actor(data["actor"]),
            fact=MemoryFact.from_dict(data["fact"]) if data.get("fact") else None,
            decision=EngineDecision.from_dict(data["decision"]) if data.get("decision") else None,
            detail=data.get("detail", {}),
        )


@dataclass
class FactQuery:
    user_id: str
    scope: Optional[Scope] = None
    agent_id: Optional[str] = None
    flow_id: Optional[str] = None
    category: Optional[Category] = None
    memory_type: Optional[MemoryType] = None
    is_active: Optional[bool] = True
    search: Optional[str] = None
    order: QueryOrder = QueryOrder.INJECTION
    limit: Optional[int] = None
    offset: int = 0
    # pagination snapshot: exclude facts created after this journal seq
    snapshot_seq: Optional[int] = None

    def __post_init__(self) -> None:
        if self.limit is not None and self.limit < 1:
            raise ValueError("limit must be >= 1 when present")
        if self.offset < 0:
            raise ValueError("offset must be >= 0")


@dataclass
class ApplyReport:
    stored_ids: list[str] = field(default_factory=list)
    retracted_ids: list[str] = field(default_factory=list)
    discarded: int = 0
    updated_ids: list[str] = field(default_factory=list)
    promoted_ids: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "stored_ids": self.stored_ids,
            "retracted_ids": self.retracted_ids,
            "discarded": self.discarded,
            "updated_ids": self.updated_ids,
            "promoted_ids": self.promoted_ids,
        }


PATCHABLE_FIELDS = ("subject", "relation", "value", "category", "memory_type",
                    "confidence", "is_active")


def _injection_key(fact: MemoryFact):
    return (
        0 if fact.memory_type == MemoryType.LONG_TERM else 1,
        -fact.access_count,
        -fact.last_accessed_at.timestamp(),
        fact.id,
    )


_SORT_KEYS: dict[QueryOrder, Callable[[MemoryFact], tuple]] = {
    QueryOrder.INJECTION: _injection_key,
    QueryOrder.RECENCY: lambda f: (-f.last_accessed_at.timestamp(), f.id),
    QueryOrder.ACCESS: lambda f: (-f.access_count, f.id),
}


class FactStore:
    """Single-node fact store with §-style secondary indexes.

    journal_path, when given, makes every event durable as one JSON line;
    opening the same path later replays it. Without a path the journal
    is kept in memory only (tests, replay harness).
    """

    def __init__(self, journal_path: Optional[Union[str, Path]] = None,
                 clock: Callable[[], datetime] = utc_now):
        self.clock = clock
        self._facts: dict[str, MemoryFact] = {}
        self._seq = 0
        self._created_seq: dict[str, int] = {}
        self._events: list[JournalEvent] = []
        self._journal_path = Path(journal_path) if journal_path else None
        self._journal_file = None
        self._lock = threading.RLock()
        self._user_locks: dict[str, threading.RLock] = {}
        # secondary indexes (sets of fact ids)
        self._ix_user: dict[str, set[str]] = defaultdict(set)
        self._ix_user_active_scope: dict[tuple, set[str]] = defaultdict(set)
        self._ix_user_agent: dict[tuple, set[str]] = defaultdict(set)
        self._ix_user_flow: dict[tuple, set[str]] = defaultdict(set)
        self._ix_user_category: dict[tuple, set[str]] = defaultdict(set)
        self._ix_subject_relation: dict[tuple, set[str]] = defaultdict(set)
        if self._journal_path is not None:
            if self._journal_path.exists():
                self._load_journal_file(self._journal_path)
            self._journal_file = open(self._journal_path, "a", encoding="utf-8")
            if self._seq == 0 and self._journal_path.stat().st_size == 0:
                self._journal_file.write(canonical_json(JOURNAL_HEADER) + "\n")
                self._journal_file.flush()

    def _user_lock(self, user_id: str) -> threading.RLock:
        with self._lock:
            lock = self._user_locks.get(user_id)
            if lock is None:
                lock = self._user_locks[user_id] = threading.RLock()
            return lock

    # -- index bookkeeping --------------------------------------------------

    def _index_add(self, f: MemoryFact) -> None:
        self._ix_user[f.user_id].add(f.id)
        self._ix_user_active_scope[(f.user_id, f.is_active, f.scope)].add(f.id)
        if f.agent_id is not None:
            self._ix_user_agent[(f.user_id, f.agent_id, f.is_active)].add(f.id)
        if f.flow_id is not None:
            self._ix_user_flow[(f.user_id, f.flow_id, f.is_active)].add(f.id)
        self._ix_user_category[(f.user_id, f.category, f.is_active)].add(f.id)
        self._ix_subject_relation[(f.subject, f.relation)].add(f.id)

    def _index_remove(self, f: MemoryFact) -> None:
        self._ix_user[f.user_id].discard(f.id)
        self._ix_user_active_scope[(f.user_id, f.is_active, f.scope)].discard(f.id)
        if f.agent_id is not None:
            self._ix_user_agent[(f.user_id, f.agent_id, f.is_active)].discard(f.id)
        if f.flow_id is not None:
            self._ix_user_flow[(f.user_id, f.flow_id, f.is_active)].discard(f.id)
        self._ix_user_category[(f.user_id, f.category, f.is_active)].discard(f.id)
        self._ix_subject_relation[(f.subject, f.relation)].discard(f.id)

    # -- journal ------------------------------------------------------------

    def _append_event(self, kind: EventKind, actor: Actor,
                      fact: Optional[MemoryFact] = None,
                      decision: Optional[EngineDecision] = None,
                      detail: Optional[dict] = None) -> JournalEvent:
        with self._lock:
            self._seq += 1
            event = JournalEvent(self._seq, self.clock(), kind, actor,
                                 fact=fact.copy() if fact else None,
                                 decision=decision, detail=detail or {})
            self._events.append(event)
            if self._journal_file is not None:
                self._journal_file.write(canonical_json(event.to_dict()) + "\n")
                self._journal_file.flush()
            return event

    def journal_events(self) -> list[JournalEvent]:
        with self._lock:
            return list(self._events)

    def journal_lines(self) -> list[str]:
        with self._lock:
            lines = [canonical_json(JOURNAL_HEADER)]
            lines.extend(canonical_json(e.to_dict()) for e in self._events)
            return lines

    def last_seq(self) -> int:
        return self._seq

    def _materialize(self, event: JournalEvent) -> None:
        """Apply one journal event to the in-memory state (replay path)."""
        fact = event.fact
        if event.kind == EventKind.FACT_CREATED:
            if fact.id in self._facts:
                raise JournalError(f"event {event.seq}: fact {fact.id} created twice")
            self._facts[fact.id] = fact
            self._created_seq[fact.id] = event.seq
            self._index_add(fact)
        elif event.kind in (EventKind.FACT_UPDATED, EventKind.FACT_DEACTIVATED,
                            EventKind.FACT_REACTIVATED):
            old = self._facts.get(fact.id)
            if old is None:
                raise JournalError(f"event {event.seq}: update of unknown fact {fact.id}")
            self._index_remove(old)
            self._facts[fact.id] = fact
            self._index_add(fact)
        # decision_applied and cleared are audit markers with no state change

    def _load_journal_file(self, path: Path) -> None:
        with open(path, encoding="utf-8") as fh:
            lines = [line for line in (l.strip() for l in fh) if line]
        self.restore_into(self, lines)

    @staticmethod
    def restore_into(store: "FactStore", lines: Iterable[str]) -> None:
        lines = list(lines)
        if not lines:
            return
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise JournalError(f"journal header is not JSON: {exc}") from None
        if header.get("format") != JOURNAL_HEADER["format"]:
            raise JournalError(f"not a journal file: format={header.get('format')!r}")
        if header.get("version") != JOURNAL_HEADER["version"]:
            raise JournalError(f"unsupported journal version {header.get('version')!r}")
        expected = 1
        for line in lines[1:]:
            try:
                event = JournalEvent.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise JournalError(f"bad journal event at seq {expected}: {exc}") from None
            if event.seq != expected:
                raise JournalError(
                    f"journal sequence gap: expected {expected}, found {event.seq}")
            store._materialize(event)
            store._events.append(event)
            store._seq = event.seq
            expected += 1

    @classmethod
    def restore(cls, journal: Union[str, Path, Iterable[str]],
                clock: Callable[[], datetime] = utc_now) -> "FactStore":
        """Rebuild a store from a journal (path or iterable of lines)."""
        store = cls(clock=clock)
        if isinstance(journal, (str, Path)) and Path(str(journal)).exists():
            with open(journal, encoding="utf-8") as fh:
                lines = [line for line in (l.strip() for l in fh) if line]
        elif isinstance(journal, (str, Path)):
            raise JournalError(f"journal not found: {journal}")
        else:
            lines = [l for l in journal if l.strip()]
        cls.restore_into(store, lines)
        return store

    # -- snapshots ------------------------------------------------------------

    def snapshot(self) -> dict:
        with self._lock:
            return {
                **SNAPSHOT_HEADER,
                "last_seq": self._seq,
                "facts": [self._facts[fid].to_dict() for fid in sorted(self._facts)],
            }

    def write_snapshot(self, path: Union[str, Path]) -> None:
        data = self.snapshot()
        header = canonical_json({"format": data["format"], "version": data["version"]})
        body = canonical_json({"last_seq": data["last_seq"], "facts": data["facts"]})
        Path(path).write_text(header + "\n" + body + "\n", encoding="utf-8")

    def compact(self) -> int:
        """Rewrite the journal as one fact_created event per surviving fact."""
        with self._lock:
            facts = [self._facts[fid] for fid in sorted(self._created_seq,
                                                        key=self._created_seq.get)]
            self._events = []
            self._seq = 0
            self._created_seq = {}
            if self._journal_file is not None:
                self._journal_file.close()
                self._journal_file = open(self._journal_path, "w", encoding="utf-8")
                self._journal_file.write(canonical_json(JOURNAL_HEADER) + "\n")
            for i, fact in enumerate(facts, start=1):
                self._created_seq[fact.id] = i
            for fact in facts:
                self._append_event(EventKind.FACT_CREATED, Actor.CLI, fact=fact,
                                   detail={"compacted": True})
            if self._journal_file is not None:
                self._journal_file.flush()
            return len(facts)

    def close(self) -> None:
        if self._journal_file is not None:
            self._journal_file.close()
            self._journal_file = None

    # -- core operations --------------------------------------------------------

    def user_ids(self) -> list[str]:
        with self._lock:
            return sorted(u for u, ids in self._ix_user.items() if ids)

    def get(self, fact_id: str) -> MemoryFact:
        with self._lock:
            fact = self._facts.get(fact_id)
        if fact is None:
            raise UnknownFactError(fact_id)
        return fact.copy()

    def insert(self, fact: MemoryFact, actor: Actor = Actor.ENGINE) -> MemoryFact:
        """Store a new fact; lifecycle fields are forced to their initial state."""
        now = self.clock()
        stored = fact.copy()
        stored.access_count = 0
        stored.is_active = True
        stored.created_at = now
        stored.last_accessed_at = now
        issues = validate_fact(stored)
        if issues:
            raise ValidationFailedError(issues)
        with self._user_lock(stored.user_id):
            with self._lock:
                if stored.id in self._facts:
                    raise DuplicateIdError(f"fact id already exists: {stored.id}")
                self._facts[stored.id] = stored
                self._index_add(stored)
            event = self._append_event(EventKind.FACT_CREATED, actor, fact=stored)
            with self._lock:
                self._created_seq[stored.id] = event.seq
        return stored.copy()

    def _candidate_ids(self, q: FactQuery) -> set[str]:
        if q.agent_id is not None:
            if q.is_active is None:
                return (self._ix_user_agent.get((q.user_id, q.agent_id, True), set())
                        | self._ix_user_agent.get((q.user_id, q.agent_id, False), set()))
            return set(self._ix_user_agent.get((q.user_id, q.agent_id, q.is_active), set()))
        if q.flow_id is not None:
            if q.is_active is None:
                return (self._ix_user_flow.get((q.user_id, q.flow_id, True), set())
                        | self._ix_user_flow.get((q.user_id, q.flow_id, False), set()))
            return set(self._ix_user_flow.get((q.user_id, q.flow_id, q.is_active), set()))
        if q.category is not None:
            if q.is_active is None:
                return (self._ix_user_category.get((q.user_id, q.category, True), set())
                        | self._ix_user_category.get((q.user_id, q.category, False), set()))
            return set(self._ix_user_category.get((q.user_id, q.category, q.is_active), set()))
        if q.scope is not None and q.is_active is not None:
            return set(self._ix_user_active_scope.get((q.user_id, q.is_active, q.scope), set()))
        return set(self._ix_user.get(q.user_id, set()))

    def _matching(self, q: FactQuery) -> list[MemoryFact]:
        with self._lock:
            ids = self._candidate_ids(q)
            facts = [self._facts[fid] for fid in ids]
            if q.snapshot_seq is not None:
                facts = [f for f in facts
                         if self._created_seq.get(f.id, 0) <= q.snapshot_seq]
        needle = q.search.lower() if q.search else None
        out = []
        for f in facts:
            if q.is_active is not None and f.is_active != q.is_active:
                continue
            if q.scope is not None and f.scope != q.scope:
                continue
            if q.category is not None and f.category != q.category:
                continue
            if q.memory_type is not None and f.memory_type != q.memory_type:
                continue
            if needle is not None and not (
                    needle in f.subject.lower() or needle in f.relation.lower()
                    or needle in f.value.lower() or needle in f.source_text.lower()):
                continue
            out.append(f)
        out.sort(key=_SORT_KEYS[q.order])
        return out

    def query(self, q: FactQuery) -> list[MemoryFact]:
        rows = self._matching(q)
        if q.offset:
            rows = rows[q.offset:]
        if q.limit is not None:
            rows = rows[:q.limit]
        return [f.copy() for f in rows]

    def count(self, q: FactQuery) -> int:
        return len(self._matching(q))

    def facts_by_subject_relation(self, subject: str, relation: str) -> list[MemoryFact]:
        with self._lock:
            ids = sorted(self._ix_subject_relation.get((subject, relation), set()))
            return [self._facts[fid].copy() for fid in ids]

    # -- mutations -----------------------------------------------------------

    def _replace(self, updated: MemoryFact, kind: EventKind, actor: Actor,
                 detail: Optional[dict] = None) -> None:
        with self._lock:
            old = self._facts[updated.id]
            self._index_remove(old)
            self._facts[updated.id] = updated
            self._index_add(updated)
        self._append_event(kind, actor, fact=updated, detail=detail)

    def touch(self, fact_ids: list[str], actor: Actor = Actor.ENGINE,
              ) -> tuple[list[MemoryFact], list[str]]:
        """Record a read on each fact: bump access_count, refresh last access.

        Unknown or inactive ids are skipped and reported; the rest are
        still applied.
        """
        updated: list[MemoryFact] = []
        skipped: list[str] = []
        now = self.clock()
        for fact_id in fact_ids:
            with self._lock:
                fact = self._facts.get(fact_id)
            if fact is None or not fact.is_active:
                skipped.append(fact_id)
                continue
            with self._user_lock(fact.user_id):
                fresh = self._facts[fact_id].copy()
                if not fresh.is_active:  # raced with a concurrent deactivation
                    skipped.append(fact_id)
                    continue
                fresh.access_count += 1
                fresh.last_accessed_at = now
                self._replace(fresh, EventKind.FACT_UPDATED, actor,
                              detail={"touch": True})
                updated.append(fresh.copy())
        return updated, skipped

    def deactivate(self, fact_id: str, reason: str, actor: Actor) -> MemoryFact:
        with self._lock:
            fact = self._facts.get(fact_id)
        if fact is None:
            raise UnknownFactError(fact_id)
        with self._user_lock(fact.user_id):
            fresh = self._facts[fact_id].copy()
            if not fresh.is_active:
                return fresh
            fresh.is_active = False
            self._replace(fresh, EventKind.FACT_DEACTIVATED, actor,
                          detail={"reason": reason})
            return fresh.copy()

    def clear(self, user_id: str, scope: Optional[Scope] = None,
              agent_id: Optional[str] = None, flow_id: Optional[str] = None,
              actor: Actor = Actor.API) -> int:
        """Soft-deactivate a user's active facts, optionally scope-filtered."""
        with self._user_lock(user_id):
            q = FactQuery(user_id=user_id, scope=scope, agent_id=agent_id,
                          flow_id=flow_id, is_active=True)
            targets = self._matching(q)
            for fact in targets:
                fresh = fact.copy()
                fresh.is_active = False
                self._replace(fresh, EventKind.FACT_DEACTIVATED, actor,
                              detail={"reason": "cleared"})
            self._append_event(EventKind.CLEARED, actor, detail={
                "user_id": user_id,
                "scope": scope.value if scope else None,
                "agent_id": agent_id,
                "flow_id": flow_id,
                "count": len(targets),
            })
            return len(targets)

    def update_fields(self, fact_id: str, fields: dict, actor: Actor) -> MemoryFact:
        """Field-level edit (API PATCH). Only PATCHABLE_FIELDS are accepted."""
        unknown = set(fields) - set(PATCHABLE_FIELDS)
        if unknown:
            raise ValidationFailedError(
                [ValidationIssue(f, "field is not editable") for f in sorted(unknown)])
        with self._lock:
            fact = self._facts.get(fact_id)
        if fact is None:
            raise UnknownFactError(fact_id)
        with self._user_lock(fact.user_id):
            fresh = self._facts[fact_id].copy()
            was_active = fresh.is_active
            for name, value in fields.items():
                if name == "category":
                    value = Category(value) if not isinstance(value, Category) else value
                elif name == "memory_type":
                    value = MemoryType(value) if not isinstance(value, MemoryType) else value
                setattr(fresh, name, value)
            issues = validate_fact(fresh)
            if issues:
                raise ValidationFailedError(issues)
            if was_active and not fresh.is_active:
                kind = EventKind.FACT_DEACTIVATED
            elif not was_active and fresh.is_active:
                kind = EventKind.FACT_REACTIVATED
            else:
                kind = EventKind.FACT_UPDATED
            self._replace(fresh, kind, actor, detail={"edited": sorted(fields)})
            return fresh.copy()

    # -- decision application ---------------------------------------------------

    def _fact_from_candidate(self, user_id: str, decision: EngineDecision,
                             fact_id: str, memory_type: MemoryType) -> MemoryFact:
        cand = decision.candidate
        now = self.clock()
        return MemoryFact(
            id=fact_id,
            user_id=user_id,
            scope=cand.scope,
            agent_id=cand.agent_id,
            flow_id=cand.flow_id,
            subject=cand.subject,
            relation=cand.relation,
            value=cand.value,
            category=decision.category or Category.OTHER,
            memory_type=memory_type,
            confidence=cand.confidence,
            access_count=0,
            source_text=cand.source_text,
            created_at=now,
            last_accessed_at=now,
            is_active=True,
        )

    def apply_decisions(self, user_id: str, decisions: list[EngineDecision],
                        actor: Actor = Actor.ENGINE) -> ApplyReport:
        """Apply a session's decision list atomically, in order.

        Any reference to an unknown fact id rejects the whole batch;
        the rejection itself is journaled so engine/store disagreements
        stay visible.
        """
        stores = (DecisionAction.STORE_SHORT_TERM, DecisionAction.STORE_LONG_TERM)
        with self._user_lock(user_id):
            # validation pass: every decision well-formed, every target resolvable
            known: set[str] = set()
            with self._lock:
                for fid in self._ix_user.get(user_id, set()):
                    known.add(fid)
            pending: set[str] = set()
            for decision in decisions:
                problems = validate_decision(decision)
                if problems:
                    self._append_event(EventKind.DECISION_APPLIED, actor,
                                       decision=decision,
                                       detail={"status": "rejected",
                                               "error": str(problems[0])})
                    raise BatchRejectedError(f"invalid decision: {problems[0]}")
                target = decision.target_fact_id
                if decision.action in stores:
                    if target is not None:
                        pending.add(target)
                elif target is not None and target not in known and target not in pending:
                    self._append_event(EventKind.DECISION_APPLIED, actor,
                                       decision=decision,
                                       detail={"status": "rejected",
                                               "error": f"unknown target fact {target}"})
                    raise BatchRejectedError(f"unknown target fact id: {target}")

            report = ApplyReport()
            remap: dict[str, str] = {}
            for decision in decisions:
                self._append_event(EventKind.DECISION_APPLIED, actor, decision=decision,
                                   detail={"status": "applied"})
                target = decision.target_fact_id
                if target is not None:
                    target = remap.get(target, target)

                if decision.action in stores:
                    memory_type = (MemoryType.LONG_TERM
                                   if decision.action == DecisionAction.STORE_LONG_TERM
                                   else MemoryType.SHORT_TERM)
                    fact_id = target or new_fact_id()
                    with self._lock:
                        collision = fact_id in self._facts
                    if collision:
                        fact_id = new_fact_id()
                        if target is not None:
                            remap[decision.target_fact_id] = fact_id
                    fact = self._fact_from_candidate(user_id, decision, fact_id, memory_type)
                    issues = validate_fact(fact)
                    if issues:
                        raise BatchRejectedError(f"stored fact invalid: {issues[0]}")
                    with self._lock:
                        self._facts[fact.id] = fact
                        self._index_add(fact)
                    event = self._append_event(EventKind.FACT_CREATED, actor, fact=fact)
                    with self._lock:
                        self._created_seq[fact.id] = event.seq
                    report.stored_ids.append(fact.id)

                elif decision.action == DecisionAction.RETRACT:
                    fresh = self._facts[target].copy()
                    if fresh.is_active:
                        fresh.is_active = False
                        self._replace(fresh, EventKind.FACT_DEACTIVATED, actor,
                                      detail={"reason": decision.reason})
                    report.retracted_ids.append(target)

                elif decision.action == DecisionAction.UPDATE_VALUE:
                    fresh = self._facts[target].copy()
                    fresh.value = decision.candidate.value
                    fresh.confidence = decision.candidate.confidence
                    fresh.source_text = decision.candidate.source_text
                    fresh.last_accessed_at = self.clock()
                    self._replace(fresh, EventKind.FACT_UPDATED, actor,
                                  detail={"reason": decision.reason})
                    report.updated_ids.append(target)

                elif decision.action == DecisionAction.PROMOTE:
                    fresh = self._facts[target].copy()
                    if fresh.memory_type != MemoryType.LONG_TERM:
                        fresh.memory_type = MemoryType.LONG_TERM
                        self._replace(fresh, EventKind.FACT_UPDATED, actor,
                                      detail={"reason": decision.reason})
                    report.promoted_ids.append(target)

                elif decision.action == DecisionAction.DISCARD:
                    if target is not None and target in self._facts:
                        # duplicate merge: surviving fact keeps the higher
                        # confidence; access_count is a read signal and is
                        # deliberately left alone
                        fresh = self._facts[target].copy()
                        merged = max(fresh.confidence, decision.candidate.confidence
                                     if decision.candidate else fresh.confidence)
                        if merged != fresh.confidence:
                            fresh.confidence = merged
                            self._replace(fresh, EventKind.FACT_UPDATED, actor,
                                          detail={"reason": decision.reason})
                    report.discarded += 1
            return report

    # -- integrity helpers (used by tests and the replay harness) -----------------

    def all_facts(self) -> list[MemoryFact]:
        with self._lock:
            return [f.copy() for f in self._facts.values()]

    def active_contradictions(self, multi_valued_check=None,
                              threshold: float = 0.85) -> list[tuple[str, str, str]]:
        """Brute-force scan: active single-valued facts sharing (user, subject,
        relation) with non-matching entity values. Empty means consistent."""
        from .matching import same_entity as _same
        groups: dict[tuple, list[MemoryFact]] = defaultdict(list)
        for fact in self.all_facts():
            if not fact.is_active:
                continue
            if multi_valued_check is not None and multi_valued_check(fact.relation):
                continue
            groups[(fact.user_id, fact.scope, fact.agent_id, fact.flow_id,
                    fact.subject, fact.relation)].append(fact)
        bad = []
        for key, facts in groups.items():
            for i, a in enumerate(facts):
                for b in facts[i + 1:]:
                    if not _same(a.value, b.value, threshold):
                        bad.append((a.id, b.id, f"{key[4]} {key[5]}"))
        return bad

    def duplicate_active_values(self) -> list[tuple[str, str]]:
        """Active facts sharing (user, subject, relation, normalized value)."""
        seen: dict[tuple, str] = {}
        dups = []
        for fact in self.all_facts():
            if not fact.is_active:
                continue
            key = (fact.user_id, fact.scope, fact.agent_id, fact.flow_id,
                   fact.subject, fact.relation, normalize_entity(fact.value))
            if key in seen:
                dups.append((seen[key], fact.id))
            else:
                seen[key] = fact.id
        return dups
