"""Scenario replay: golden end-to-end tests as data files.

A scenario is JSON with a versioned header and a steps array. Steps
drive the full pipeline against an isolated store with an injected
clock, then assert either the active/inactive fact state or the exact
context-block text. Replays are deterministic: same scenario, same
store seed, same report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Optional, Union

from .context import build_context
from .extraction import ConversationTurn, ExtractorConfig
from .matching import normalize_entity
from .model import (
    Actor,
    CandidateFact,
    Category,
    MemoryFact,
    MemoryType,
    Scope,
    parse_timestamp,
)
from .pipeline import MemoryEngine
from .lifecycle import LifecyclePolicy
from .ruledsl import RulePack, default_rule_pack
from .store import FactQuery, FactStore

SCENARIO_FORMAT = "neusymms-scenario"


class ScenarioError(ValueError):
    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        where = f"step {step}: " if step is not None else ""
        super().__init__(f"{where}{message}")


class MutableClock:
    """Injectable clock the advance_clock step moves forward."""

    def __init__(self, start: datetime):
        self._now = start

    def __call__(self) -> datetime:
        return self._now

    def advance(self, delta: timedelta) -> None:
        self._now += delta


@dataclass
class StepResult:
    index: int
    op: str
    ok: bool
    detail: str = ""


@dataclass
class ScenarioReport:
    name: str
    results: list[StepResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.results)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "steps": [{"index": r.index, "op": r.op, "ok": r.ok, "detail": r.detail}
                      for r in self.results],
        }


def load_scenario(path: Union[str, Path]) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from None
    if data.get("format") != SCENARIO_FORMAT:
        raise ScenarioError(f"not a scenario file: format={data.get('format')!r}")
    if data.get("version") != 1:
        raise ScenarioError(f"unsupported scenario version {data.get('version')!r}")
    if not isinstance(data.get("steps"), list):
        raise ScenarioError("scenario has no steps array")
    return data


def _seed_fact(entry: dict, user: str) -> MemoryFact:
    return MemoryFact(
        user_id=entry.get("user_id", user),
        subject=entry["subject"],
        relation=entry["relation"],
        value=entry["value"],
        category=Category(entry.get("category", "other")),
        memory_type=MemoryType(entry.get("memory_type", "short_term")),
        confidence=entry.get("confidence", 0.9),
        scope=Scope(entry.get("scope", "user")),
        agent_id=entry.get("agent_id"),
        flow_id=entry.get("flow_id"),
        source_text=entry.get("source_text", ""),
        **({"id": entry["id"]} if "id" in entry else {}),
    )


def _state_tuples(store: FactStore, user: str, active: bool) -> set[tuple]:
    rows = store.query(FactQuery(user_id=user, is_active=active))
    return {(f.subject, f.relation, normalize_entity(f.value), f.memory_type.value)
            for f in rows}


def _expected_tuples(entries: list, step: int) -> set[tuple]:
    out = set()
    for entry in entries:
        if not isinstance(entry, list) or len(entry) not in (3, 4):
            raise ScenarioError(
                "state entries are [subject, relation, value, memory_type?]", step)
        subject, relation, value = entry[0], entry[1], entry[2]
        memory_type = entry[3] if len(entry) == 4 else None
        out.add((subject, relation, normalize_entity(value), memory_type))
    return out


def _match_state(actual: set[tuple], expected: set[tuple]) -> tuple[bool, str]:
    # expected entries without a memory_type match either horizon
    remaining = set(actual)
    for exp in expected:
        subject, relation, value, memory_type = exp
        hit = next((a for a in remaining
                    if a[0] == subject and a[1] == relation and a[2] == value
                    and (memory_type is None or a[3] == memory_type)), None)
        if hit is None:
            return False, f"missing {exp}"
        remaining.discard(hit)
    if remaining:
        return False, f"unexpected facts: {sorted(remaining)}"
    return True, ""


def run_scenario(path: Union[str, Path],
                 pack: Optional[RulePack] = None,
                 extractor: Optional[ExtractorConfig] = None,
                 journal_path: Optional[str] = None) -> ScenarioReport:
    """Execute a scenario file against a fresh store; never raises on
    assertion failure (failures land in the report), only on malformed
    scenarios."""
    data = load_scenario(path)
    name = data.get("name", Path(path).stem)
    clock = MutableClock(parse_timestamp(data.get("start_time", "2026-01-01T00:00:00Z")))
    store = FactStore(journal_path=journal_path, clock=clock)
    policy_cfg = data.get("lifecycle", {})
    engine = MemoryEngine(
        store,
        pack=pack or default_rule_pack(),
        extractor=extractor or ExtractorConfig(),
        lifecycle_policy=LifecyclePolicy(**policy_cfg) if policy_cfg else LifecyclePolicy(),
    )
    user = data.get("user", "user-1")
    for entry in data.get("seed_facts", []):
        store.insert(_seed_fact(entry, user), actor=Actor.CLI)

    report = ScenarioReport(name=name)
    for index, step in enumerate(data["steps"]):
        if not isinstance(step, dict) or "op" not in step:
            raise ScenarioError("each step needs an op field", index)
        op = step["op"]
        step_user = step.get("user", user)
        try:
            if op == "process":
                turns = [ConversationTurn(t["role"], t["text"], t.get("turn_number", 0))
                         for t in step.get("turns", [])]
                candidates = ([CandidateFact.from_dict(c) for c in step["candidates"]]
                              if "candidates" in step else None)
                result = engine.process_memory(
                    step_user, turns,
                    agent_id=step.get("agent_id"), flow_id=step.get("flow_id"),
                    candidates=candidates)
                report.results.append(StepResult(
                    index, op, True,
                    f"stored={len(result.stored_ids)} retracted={len(result.retracted_ids)} "
                    f"discarded={result.discarded}"))
            elif op == "advance_clock":
                delta = timedelta(hours=step.get("hours", 0),
                                  minutes=step.get("minutes", 0),
                                  seconds=step.get("seconds", 0))
                clock.advance(delta)
                report.results.append(StepResult(index, op, True, f"advanced {delta}"))
            elif op == "run_lifecycle":
                job = engine.run_lifecycle(now=clock())
                report.results.append(StepResult(
                    index, op, True, f"promoted={job.promoted} pruned={job.pruned}"))
            elif op == "build_context":
                block = engine.build_context(step_user, cap=step.get("cap", 30),
                                             touch=step.get("touch", True))
                report.results.append(StepResult(
                    index, op, True, f"facts={len(block.fact_ids)} truncated={block.truncated}"))
            elif op == "expect_state":
                ok, detail = True, ""
                if "active" in step:
                    ok, detail = _match_state(
                        _state_tuples(store, step_user, True),
                        _expected_tuples(step["active"], index))
                if ok and "inactive" in step:
                    ok, detail = _match_state(
                        _state_tuples(store, step_user, False),
                        _expected_tuples(step["inactive"], index))
                    detail = detail and f"inactive: {detail}"
                report.results.append(StepResult(index, op, ok, detail or "state matches"))
            elif op == "expect_block":
                block = build_context(store, step_user, cap=step.get("cap", 30), touch=False)
                expected = step["text"]
                if block.text == expected:
                    report.results.append(StepResult(index, op, True, "block matches"))
                else:
                    report.results.append(StepResult(
                        index, op, False,
                        f"block mismatch:\n--- expected ---\n{expected}\n--- actual ---\n{block.text}"))
            else:
                raise ScenarioError(f"unknown op {op!r}", index)
        except ScenarioError:
            raise
        except Exception as exc:
            report.results.append(StepResult(index, op, False, f"error: {exc}"))
    return report
