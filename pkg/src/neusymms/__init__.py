"""NeuSymMS: neuro-symbolic agent memory.

Facts are scoped subject-relation-value triples. An extraction seam
turns conversation into candidate facts; a forward-chaining rule engine
classifies them, resolves contradictions, and decides their lifecycle;
a journaled store keeps every decision auditable; a capped, ordered
context block feeds the result back into agent prompts.
"""

from .context import ContextBlock, build_context, enrich_instructions, format_fact_line
from .engine import (
    ConflictKind,
    ConflictReport,
    classify_candidate,
    decide_storage,
    detect_conflict,
    run_session,
)
from .extraction import (
    ConversationTurn,
    ExtractorConfig,
    TurnRole,
    extract,
    offline_extract,
    parse_extractor_output,
)
from .lifecycle import LifecyclePolicy, promote_eligible, prune, run_job
from .matching import levenshtein_similarity, normalize_entity, same_entity
from .model import (
    Actor,
    CandidateFact,
    Category,
    DecisionAction,
    EngineDecision,
    MemoryFact,
    MemoryType,
    PromptContext,
    RelationPolicy,
    Scope,
    validate_fact,
)
from .pipeline import MemoryEngine, ProcessReport
from .ruledsl import RulePack, default_rule_pack, parse_rule_pack, print_rule_pack
from .store import ApplyReport, FactQuery, FactStore, JournalEvent, QueryOrder

__version__ = "0.1.0"

__all__ = [
    "ApplyReport", "Actor", "CandidateFact", "Category", "ConflictKind",
    "ConflictReport", "ContextBlock", "ConversationTurn", "DecisionAction",
    "EngineDecision", "ExtractorConfig", "FactQuery", "FactStore",
    "JournalEvent", "LifecyclePolicy", "MemoryEngine", "MemoryFact",
    "MemoryType", "ProcessReport", "PromptContext", "QueryOrder",
    "RelationPolicy", "RulePack", "Scope", "TurnRole", "build_context",
    "classify_candidate", "decide_storage", "default_rule_pack",
    "detect_conflict", "enrich_instructions", "extract", "format_fact_line",
    "levenshtein_similarity", "normalize_entity", "offline_extract",
    "parse_extractor_output", "parse_rule_pack", "print_rule_pack",
    "promote_eligible", "prune", "run_job", "run_session", "same_entity",
    "validate_fact",
]
