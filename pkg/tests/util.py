"""Shared test helpers: fixture facts, stores with fixed clocks, oracles."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone
from functools import lru_cache

from neusymms.model import CandidateFact, Category, MemoryFact, MemoryType, Scope

START = datetime(2026, 1, 1, tzinfo=timezone.utc)

SCENARIOS_DIR = "scenarios"


def fixture_id(n: int) -> str:
    return f"00000000-0000-4000-8000-{n:012d}"


def make_fact(n: int = 1, **overrides) -> MemoryFact:
    defaults = dict(
        id=fixture_id(n),
        user_id="u1",
        subject="user",
        relation="works_at",
        value="Google",
        category=Category.PERSONAL,
        memory_type=MemoryType.LONG_TERM,
        confidence=0.9,
        scope=Scope.USER,
        created_at=START,
        last_accessed_at=START,
    )
    defaults.update(overrides)
    return MemoryFact(**defaults)


def make_candidate(**overrides) -> CandidateFact:
    defaults = dict(subject="user", relation="works_at", value="Google",
                    confidence=0.9, scope=Scope.USER)
    defaults.update(overrides)
    return CandidateFact(**defaults)


def read_path_fixture(user_id: str = "u1") -> list[MemoryFact]:
    """The five-fact long-term state of the read-path worked example."""
    rows = [
        ("works_at", "Google", Category.PERSONAL, 0.95),
        ("lives_in", "Mountain View", Category.PERSONAL, 0.85),
        ("speaks_language", "Python", Category.SKILL, 0.9),
        ("speaks_language", "Go", Category.SKILL, 0.9),
        ("prefers", "dark mode", Category.PREFERENCE, 0.9),
    ]
    return [
        make_fact(i + 1, user_id=user_id, relation=rel, value=val, category=cat,
                  confidence=conf, memory_type=MemoryType.LONG_TERM)
        for i, (rel, val, cat, conf) in enumerate(rows)
    ]


READ_PATH_BLOCK = (
    "[Memory -- Known facts about this user]\n"
    "[LT/personal] user works_at Google\n"
    "[LT/personal] user lives_in Mountain View\n"
    "[LT/skill] user speaks_language Python\n"
    "[LT/skill] user speaks_language Go\n"
    "[LT/preference] user prefers dark mode"
)


def oracle_levenshtein(a: str, b: str) -> int:
    """Independent edit-distance oracle: memoized recursion, not the
    iterative DP the implementation uses."""

    @lru_cache(maxsize=None)
    def dist(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            dist(i - 1, j) + 1,
            dist(i, j - 1) + 1,
            dist(i - 1, j - 1) + (a[i - 1] != b[j - 1]),
        )

    return dist(len(a), len(b))


def oracle_similarity(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - oracle_levenshtein(a, b) / longest


def hours(n: float) -> timedelta:
    return timedelta(hours=n)
