"""Background memory maintenance: access-based promotion, time-based pruning.

Short-term facts earn long-term status by being read (access_count >=
threshold); stale short-term facts nobody read get deactivated after
their TTL. Long-term facts are never pruned. access_count is the only
importance signal by design.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Optional

from .model import Actor, DecisionAction, EngineDecision, MemoryType
from .store import FactQuery, FactStore

logger = logging.getLogger(__name__)

PROMOTION_REASON = "access-promotion"
PRUNE_REASON = "ttl-prune"


@dataclass
class LifecyclePolicy:
    promotion_threshold: int = 3
    short_term_ttl_hours: float = 24.0
    prune_access_ceiling: int = 0  # prune only facts at or below this count
    job_interval_minutes: float = 60.0

    def __post_init__(self) -> None:
        if self.promotion_threshold < 1:
            raise ValueError("promotion_threshold must be >= 1")
        if self.short_term_ttl_hours <= 0:
            raise ValueError("short_term_ttl_hours must be > 0")

    @property
    def ttl(self) -> timedelta:
        return timedelta(hours=self.short_term_ttl_hours)


@dataclass
class JobReport:
    promoted: int = 0
    pruned: int = 0
    users: int = 0
    errors: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"promoted": self.promoted, "pruned": self.pruned,
                "users": self.users, "errors": dict(self.errors)}


def promote_eligible(store: FactStore, policy: LifecyclePolicy,
                     user_id: Optional[str] = None) -> list[tuple[str, list[EngineDecision]]]:
    """Promote decisions for every active short-term fact read often enough.

    Returns (user_id, decisions) pairs; callers apply them through the
    store so the promotion is journaled with its reason.
    """
    users = [user_id] if user_id else store.user_ids()
    out: list[tuple[str, list[EngineDecision]]] = []
    for user in users:
        rows = store.query(FactQuery(user_id=user, memory_type=MemoryType.SHORT_TERM,
                                     is_active=True))
        decisions = [
            EngineDecision(action=DecisionAction.PROMOTE, reason=PROMOTION_REASON,
                           target_fact_id=fact.id)
            for fact in sorted(rows, key=lambda f: f.id)
            if fact.access_count >= policy.promotion_threshold
        ]
        if decisions:
            out.append((user, decisions))
    return out


def prune(store: FactStore, policy: LifecyclePolicy,
          user_id: Optional[str] = None, now: Optional[datetime] = None) -> list[str]:
    """Deactivate stale, unread short-term facts; long-term is never touched."""
    now = now or store.clock()
    cutoff = now - policy.ttl
    users = [user_id] if user_id else store.user_ids()
    pruned: list[str] = []
    for user in users:
        rows = store.query(FactQuery(user_id=user, memory_type=MemoryType.SHORT_TERM,
                                     is_active=True))
        for fact in sorted(rows, key=lambda f: f.id):
            if fact.created_at <= cutoff and fact.access_count <= policy.prune_access_ceiling:
                store.deactivate(fact.id, PRUNE_REASON, Actor.LIFECYCLE)
                pruned.append(fact.id)
    return pruned


def run_job(store: FactStore, policy: LifecyclePolicy,
            now: Optional[datetime] = None) -> JobReport:
    """One maintenance pass over every user: promotions first, then pruning.

    Idempotent for a fixed `now`; a failure on one user is recorded and
    does not abort the others.
    """
    now = now or store.clock()
    report = JobReport()
    for user in store.user_ids():
        report.users += 1
        try:
            for _user, decisions in promote_eligible(store, policy, user_id=user):
                applied = store.apply_decisions(user, decisions, actor=Actor.LIFECYCLE)
                report.promoted += len(applied.promoted_ids)
            report.pruned += len(prune(store, policy, user_id=user, now=now))
        except Exception as exc:
            logger.exception("lifecycle job failed for user %s", user)
            report.errors[user] = str(exc)
    return report
