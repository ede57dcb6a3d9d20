"""Read path: select, format, and account for the facts an agent sees.

Only user-scoped facts are ever injected; agent- and flow-scoped facts
exist for inspection and analytics, never for prompts. Reading a fact
is what makes it important, so inclusion in a context block bumps its
access count (unless the caller asks for a preview).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

from .lifecycle import LifecyclePolicy, promote_eligible
from .model import Actor, MemoryFact, MemoryType, Scope
from .store import FactQuery, FactStore, QueryOrder

logger = logging.getLogger(__name__)

CONTEXT_HEADER = "[Memory -- Known facts about this user]"
DEFAULT_FACT_CAP = 30


@dataclass
class ContextBlock:
    text: str
    fact_ids: list[str] = field(default_factory=list)
    truncated: bool = False
    error: Optional[str] = None

    @property
    def empty(self) -> bool:
        return not self.fact_ids


def format_fact_line(fact: MemoryFact) -> str:
    """One fact, one line: "[LT/skill] user speaks_language Python"."""
    flag = "LT" if fact.memory_type == MemoryType.LONG_TERM else "ST"
    value = " ".join(fact.value.splitlines()) if "\n" in fact.value else fact.value
    return f"[{flag}/{fact.category.value}] {fact.subject} {fact.relation} {value}".rstrip()


def build_context(store: FactStore, user_id: str, cap: int = DEFAULT_FACT_CAP,
                  touch: bool = True,
                  policy: Optional[LifecyclePolicy] = None) -> ContextBlock:
    """Render the injection block for a user.

    Facts come back in injection order (long-term first, then most-read,
    then most recent), capped. With touch=True every included fact's
    access count is bumped after rendering, and facts that just crossed
    the promotion threshold are promoted immediately so the next read
    already sees them as long-term. Store failures yield an empty block
    with the error flag set; the agent continues without memory.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    try:
        rows = store.query(FactQuery(user_id=user_id, scope=Scope.USER, is_active=True,
                                     order=QueryOrder.INJECTION, limit=cap + 1))
    except Exception as exc:
        logger.warning("context read failed for user %s: %s", user_id, exc)
        return ContextBlock(text="", truncated=False, error=str(exc))
    truncated = len(rows) > cap
    rows = rows[:cap]
    lines = [CONTEXT_HEADER] + [format_fact_line(f) for f in rows]
    block = ContextBlock(text="\n".join(lines), fact_ids=[f.id for f in rows],
                         truncated=truncated)
    if touch and block.fact_ids:
        try:
            store.touch(block.fact_ids, actor=Actor.ENGINE)
            if policy is not None:
                for user, decisions in promote_eligible(store, policy, user_id=user_id):
                    store.apply_decisions(user, decisions, actor=Actor.LIFECYCLE)
        except Exception as exc:
            logger.warning("context touch failed for user %s: %s", user_id, exc)
    return block


def enrich_instructions(system_prompt: str, block: ContextBlock) -> str:
    """Append the memory block to a system prompt (blank line between).

    An empty block (no facts) leaves the prompt untouched; an empty
    prompt yields the block text alone.
    """
    if block.empty:
        return system_prompt
    if not system_prompt:
        return block.text
    return f"{system_prompt}\n\n{block.text}"
