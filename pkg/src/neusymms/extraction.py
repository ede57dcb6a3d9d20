"""Candidate-fact extraction from conversation snippets.

Two extractors sit behind one seam: a deterministic offline pattern
matcher (default; used by tests, the replay harness, and air-gapped
deployments) and a remote chat-completion client. Both honor the same
contract: at most max_facts validated candidates, negations emitted as
negation relations, and an empty list on any failure so callers degrade
gracefully instead of erroring a user request.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Optional

import httpx

from .model import CandidateFact, Scope, validate_fact

logger = logging.getLogger(__name__)

PATTERNS_FORMAT = "neusymms-patterns"
EXTRACTION_PROMPT_VERSION = 1

_CONJUNCTION_SPLIT = re.compile(r",\s*|,?\s+and\s+")


class TurnRole(str, Enum):
    USER = "user"
    AGENT = "agent"


@dataclass
class ConversationTurn:
    role: TurnRole
    text: str
    turn_number: int = 0

    def __post_init__(self) -> None:
        if isinstance(self.role, str) and not isinstance(self.role, TurnRole):
            self.role = TurnRole(self.role)
        if not self.text:
            raise ValueError("turn text must be non-empty")


@dataclass
class ExtractorConfig:
    mode: str = "offline"  # offline | remote
    endpoint: Optional[str] = None
    model: Optional[str] = None
    temperature: float = 0.1
    max_facts: int = 10
    timeout_seconds: float = 15.0
    auth_token: Optional[str] = None
    include_agent_turns: bool = False
    max_inflight: int = 8
    pattern_path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.max_facts < 1:
            raise ValueError("max_facts must be >= 1")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.mode not in ("offline", "remote"):
            raise ValueError(f"unknown extractor mode {self.mode!r}")


class ExtractorOutputError(ValueError):
    """Remote output could not be parsed into a candidate array."""


@dataclass
class PatternRule:
    name: str
    pattern: re.Pattern
    subject: str
    relation: str
    confidence: float
    value_capture: str
    split_conjunctions: bool = False


_patterns_cache: dict[str, list[PatternRule]] = {}
_patterns_lock = threading.Lock()


def load_patterns(path: Optional[str] = None) -> list[PatternRule]:
    """Ordered pattern rules from the shipped (or overridden) data file."""
    key = path or "<builtin>"
    with _patterns_lock:
        if key in _patterns_cache:
            return _patterns_cache[key]
        if path:
            raw = json.loads(open(path, encoding="utf-8").read())
        else:
            raw = json.loads(resources.files("neusymms.data")
                             .joinpath("patterns.json").read_text("utf-8"))
        if raw.get("format") != PATTERNS_FORMAT:
            raise ValueError(f"not a pattern file: format={raw.get('format')!r}")
        rules = [
            PatternRule(
                name=entry["name"],
                pattern=re.compile(entry["pattern"]),
                subject=entry.get("subject", "user"),
                relation=entry["relation"],
                confidence=entry["confidence"],
                value_capture=entry["value_capture"],
                split_conjunctions=entry.get("split_conjunctions", False),
            )
            for entry in raw["patterns"]
        ]
        _patterns_cache[key] = rules
        return rules


def extraction_prompt(max_facts: int = 10) -> str:
    text = resources.files("neusymms.data").joinpath("extraction_prompt.txt").read_text("utf-8")
    return text.replace("{max_facts}", str(max_facts))


def offline_extract(turns: list[ConversationTurn],
                    patterns: Optional[list[PatternRule]] = None,
                    max_facts: int = 10) -> list[CandidateFact]:
    """Deterministic lexical extraction: same input, same output, always.

    Emission order is turn-major then pattern-file order; duplicate
    (subject, relation, value) emissions keep the first occurrence.
    """
    rules = patterns if patterns is not None else load_patterns()
    out: list[CandidateFact] = []
    seen: set[tuple[str, str, str]] = set()
    for turn in turns:
        for rule in rules:
            for match in rule.pattern.finditer(turn.text):
                captured = match.group(rule.value_capture)
                if not captured:
                    continue
                values = (_CONJUNCTION_SPLIT.split(captured)
                          if rule.split_conjunctions else [captured])
                for value in values:
                    value = value.strip()
                    if not value:
                        continue
                    key = (rule.subject, rule.relation, value.lower())
                    if key in seen:
                        continue
                    seen.add(key)
                    out.append(CandidateFact(
                        subject=rule.subject,
                        relation=rule.relation,
                        value=value,
                        confidence=rule.confidence,
                        scope=Scope.USER,
                        source_text=turn.text,
                    ))
                    if len(out) >= max_facts:
                        return out
    return out


def _isolate_json_array(raw: str) -> list:
    """Find the first well-formed JSON array in possibly chatty output."""
    text = raw.strip()
    try:
        parsed = json.loads(text)
        if isinstance(parsed, list):
            return parsed
    except json.JSONDecodeError:
        pass
    decoder = json.JSONDecoder()
    for start in (m.start() for m in re.finditer(r"\[", text)):
        try:
            parsed, _end = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            continue
        if isinstance(parsed, list):
            return parsed
    raise ExtractorOutputError("no JSON array found in extractor output")


def parse_extractor_output(raw: str, cfg: ExtractorConfig,
                           source_text: str = "") -> list[CandidateFact]:
    """Strict parse of the remote model's message content.

    Unknown keys are ignored; objects failing validation are dropped
    individually; the list is truncated to cfg.max_facts in order.
    Raises ExtractorOutputError when no array can be isolated.
    """
    items = _isolate_json_array(raw)
    out: list[CandidateFact] = []
    for item in items:
        if not isinstance(item, dict):
            continue
        subject = item.get("subject")
        relation = item.get("relation")
        value = item.get("value")
        confidence = item.get("confidence")
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = str(value)
        if not isinstance(subject, str) or not isinstance(relation, str) \
                or not isinstance(value, str) \
                or not isinstance(confidence, (int, float)) or isinstance(confidence, bool):
            continue
        scope_raw = item.get("scope", "user")
        try:
            scope = Scope(scope_raw) if isinstance(scope_raw, str) else Scope.USER
        except ValueError:
            scope = Scope.USER
        candidate = CandidateFact(
            subject=subject.strip(),
            relation=relation.strip(),
            value=value.strip(),
            confidence=float(confidence),
            scope=scope,
            source_text=source_text,
            # scope consistency is settled later by assign_scope
            agent_id="pending" if scope == Scope.AGENT else None,
            flow_id="pending" if scope == Scope.FLOW else None,
        )
        if validate_fact(candidate):
            continue
        candidate.agent_id = None
        candidate.flow_id = None
        out.append(candidate)
        if len(out) >= cfg.max_facts:
            break
    return out


_inflight_semaphores: dict[tuple[str, int], threading.BoundedSemaphore] = {}
_inflight_lock = threading.Lock()


def _inflight(cfg: ExtractorConfig) -> threading.BoundedSemaphore:
    key = (cfg.endpoint or "", cfg.max_inflight)
    with _inflight_lock:
        sem = _inflight_semaphores.get(key)
        if sem is None:
            sem = _inflight_semaphores[key] = threading.BoundedSemaphore(cfg.max_inflight)
        return sem


def transcript(turns: list[ConversationTurn]) -> str:
    return "\n".join(f"{t.role.value}: {t.text}" for t in turns)


def remote_extract(turns: list[ConversationTurn], cfg: ExtractorConfig) -> str:
    """POST the chat-completion request; returns the raw message content.

    Raises on any transport or shape problem; extract() owns degradation.
    """
    if not cfg.endpoint:
        raise ValueError("remote extractor requires an endpoint")
    payload = {
        "model": cfg.model or "fact-extractor",
        "temperature": cfg.temperature,
        "messages": [
            {"role": "system", "content": extraction_prompt(cfg.max_facts)},
            {"role": "user", "content": transcript(turns)},
        ],
    }
    headers = {"Content-Type": "application/json"}
    if cfg.auth_token:
        headers["Authorization"] = f"Bearer {cfg.auth_token}"
    with _inflight(cfg):
        response = httpx.post(cfg.endpoint, json=payload, headers=headers,
                              timeout=cfg.timeout_seconds)
    response.raise_for_status()
    body = response.json()
    return body["choices"][0]["message"]["content"]


def assign_scope(candidate: CandidateFact, agent_id: Optional[str] = None,
                 flow_id: Optional[str] = None) -> CandidateFact:
    """Settle the candidate's scope against the ids actually available.

    The extractor's scope wins when consistent (agent scope needs an
    agent_id, flow scope a flow_id); anything else falls back to user
    scope with a logged warning.
    """
    if candidate.scope == Scope.AGENT and agent_id:
        candidate.agent_id, candidate.flow_id = str(agent_id), None
        return candidate
    if candidate.scope == Scope.FLOW and flow_id:
        candidate.flow_id, candidate.agent_id = str(flow_id), None
        return candidate
    if candidate.scope != Scope.USER:
        logger.warning("candidate scope %s without matching id; demoted to user scope",
                       candidate.scope.value)
    candidate.scope = Scope.USER
    candidate.agent_id = None
    candidate.flow_id = None
    return candidate


def extract(turns: list[ConversationTurn], cfg: ExtractorConfig,
            agent_id: Optional[str] = None, flow_id: Optional[str] = None,
            ) -> list[CandidateFact]:
    """Extraction entry point: validated candidates or an empty list.

    Never raises toward the caller; remote failures (network, timeout,
    unparseable output) are logged and produce [], so memory simply does
    not update for that turn.
    """
    selected = [t for t in turns
                if t.role == TurnRole.USER or cfg.include_agent_turns]
    if not any(t.role == TurnRole.USER for t in turns):
        logger.warning("extraction called without a user turn; nothing to extract")
        return []

    if cfg.mode == "offline":
        patterns = load_patterns(cfg.pattern_path) if cfg.pattern_path else None
        candidates = offline_extract(selected, patterns=patterns, max_facts=cfg.max_facts)
    else:
        try:
            raw = remote_extract(selected, cfg)
            candidates = parse_extractor_output(raw, cfg, source_text=transcript(selected))
        except Exception as exc:
            logger.warning("remote extraction failed (%s); returning no candidates", exc)
            return []

    out = []
    for candidate in candidates:
        candidate = assign_scope(candidate, agent_id, flow_id)
        if validate_fact(candidate):
            continue
        out.append(candidate)
    return out[:cfg.max_facts]
