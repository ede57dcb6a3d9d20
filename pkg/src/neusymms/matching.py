"""Entity normalization and edit-distance similarity.

These primitives back every "is this the same thing?" decision in the
engine: duplicate detection, contradiction detection, and negation
matching all compare values through :func:`same_entity`.
"""

from __future__ import annotations

import re
import unicodedata
from functools import lru_cache

DEFAULT_SIMILARITY_THRESHOLD = 0.85

_WHITESPACE_RUN = re.compile(r"\s+")


def _is_punctuation(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


@lru_cache(maxsize=4096)
def normalize_entity(text: str) -> str:
    """Canonical comparison form of an entity value.

    NFKC-fold (so width/compatibility variants collapse), lowercase,
    strip leading/trailing whitespace and punctuation, and collapse
    internal whitespace runs to single spaces. Interior punctuation is
    kept: "o'brien" and "obrien" are different values. Idempotent.
    """
    s = text
    # NFKC and lower() can feed each other on exotic codepoints
    # (math capitals, dotted I); iterate to a fixpoint.
    for _ in range(4):
        folded = unicodedata.normalize("NFKC", s).lower()
        if folded == s:
            break
        s = folded
    s = _WHITESPACE_RUN.sub(" ", s).strip()
    start, end = 0, len(s)
    while start < end and (_is_punctuation(s[start]) or s[start] == " "):
        start += 1
    while end > start and (_is_punctuation(s[end - 1]) or s[end - 1] == " "):
        end -= 1
    return s[start:end]


def levenshtein_distance(a: str, b: str) -> int:
    """Classic edit distance with unit insert/delete/substitute costs."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    # two-row DP over the shorter string
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (ca != cb),
            ))
        prev = cur
    return prev[-1]


def levenshtein_similarity(a: str, b: str) -> float:
    """Similarity in [0, 1]: 1 - distance / max(len). Empty pair -> 1.0.

    Inputs are expected to be already normalized; this function does not
    normalize so it can double as a plain string metric.
    """
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein_distance(a, b) / longest


def same_entity(a: str, b: str, threshold: float = DEFAULT_SIMILARITY_THRESHOLD) -> bool:
    """Whether two raw values refer to the same underlying entity.

    Normalizes both sides, then applies the similarity threshold.
    threshold must be in (0, 1]; at 1.0 this degenerates to normalized
    string equality.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"similarity threshold must be in (0, 1], got {threshold}")
    return levenshtein_similarity(normalize_entity(a), normalize_entity(b)) >= threshold
