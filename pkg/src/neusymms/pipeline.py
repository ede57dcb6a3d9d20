"""Write/read path wiring: one facade the API, CLI, and replay harness share.

The write path is extract -> run_session -> apply_decisions, with one
session per (scope, agent, flow) partition so a candidate about one
entity can never retract a fact about another. The read path is
build_context with touch-and-promote accounting.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional

from .context import ContextBlock, build_context
from .engine import run_session
from .extraction import ConversationTurn, ExtractorConfig, extract
from .lifecycle import JobReport, LifecyclePolicy, run_job
from .model import Actor, CandidateFact, PromptContext, canonical_json
from .ruledsl import RulePack, default_rule_pack
from .store import ApplyReport, FactQuery, FactStore

logger = logging.getLogger(__name__)


@dataclass
class ProcessReport:
    candidates: int = 0
    stored_ids: list[str] = field(default_factory=list)
    retracted_ids: list[str] = field(default_factory=list)
    discarded: int = 0
    decisions: list[dict] = field(default_factory=list)

    def merge(self, applied: ApplyReport) -> None:
        self.stored_ids.extend(applied.stored_ids)
        self.retracted_ids.extend(applied.retracted_ids)
        self.discarded += applied.discarded

    def to_dict(self) -> dict:
        return {
            "candidates": self.candidates,
            "stored_ids": self.stored_ids,
            "retracted_ids": self.retracted_ids,
            "discarded": self.discarded,
            "decisions": self.decisions,
        }


class MemoryEngine:
    """Store + rule pack + extractor + lifecycle policy, wired together."""

    def __init__(self, store: FactStore, pack: Optional[RulePack] = None,
                 extractor: Optional[ExtractorConfig] = None,
                 lifecycle_policy: Optional[LifecyclePolicy] = None,
                 trace_path: Optional[str] = None):
        self.store = store
        self.pack = pack or default_rule_pack()
        self.extractor = extractor or ExtractorConfig()
        self.lifecycle_policy = lifecycle_policy or LifecyclePolicy()
        self.trace_path = trace_path
        self._trace_lock = threading.Lock()

    # -- write path ----------------------------------------------------------

    def process_memory(self, user_id: str, turns: list[ConversationTurn],
                       agent_id: Optional[str] = None, flow_id: Optional[str] = None,
                       ctx: Optional[PromptContext] = None,
                       candidates: Optional[list[CandidateFact]] = None) -> ProcessReport:
        """Run the full write path for one interaction.

        `candidates` bypasses extraction (replay harness); otherwise the
        configured extractor runs. Zero candidates is a successful no-op:
        memory simply does not update.
        """
        if candidates is None:
            candidates = extract(turns, self.extractor, agent_id=agent_id, flow_id=flow_id)
        report = ProcessReport(candidates=len(candidates))
        if not candidates:
            return report

        for scope_key, group in self._partition(candidates):
            existing = self.store.query(self._existing_query(user_id, scope_key))
            decisions, trace = run_session(existing, group, ctx, self.pack)
            report.decisions.extend(d.to_dict() for d in decisions)
            self._write_trace(trace)
            applied = self.store.apply_decisions(user_id, decisions, actor=Actor.ENGINE)
            report.merge(applied)
        return report

    @staticmethod
    def _partition(candidates: list[CandidateFact]):
        order: list[tuple] = []
        groups: dict[tuple, list[CandidateFact]] = {}
        for cand in candidates:
            key = (cand.scope, cand.agent_id, cand.flow_id)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(cand)
        return [(key, groups[key]) for key in order]

    @staticmethod
    def _existing_query(user_id: str, scope_key: tuple) -> FactQuery:
        scope, agent_id, flow_id = scope_key
        return FactQuery(user_id=user_id, scope=scope, agent_id=agent_id,
                         flow_id=flow_id, is_active=True)

    def _write_trace(self, trace: list[dict]) -> None:
        if not self.trace_path or not trace:
            return
        with self._trace_lock:
            with open(self.trace_path, "a", encoding="utf-8") as fh:
                for record in trace:
                    fh.write(canonical_json(record) + "\n")

    # -- read path -------------------------------------------------------------

    def build_context(self, user_id: str, cap: int = 30, touch: bool = True) -> ContextBlock:
        return build_context(self.store, user_id, cap=cap, touch=touch,
                             policy=self.lifecycle_policy)

    # -- maintenance -------------------------------------------------------------

    def run_lifecycle(self, now: Optional[datetime] = None) -> JobReport:
        return run_job(self.store, self.lifecycle_policy, now=now)
