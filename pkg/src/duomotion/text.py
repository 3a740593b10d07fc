"""Prompt decomposition into per-person descriptions.

An overall two-person prompt is split by a rule engine covering three
sentence shapes: (1) a plural description of both people, copied to each
person after a plural-to-singular rewrite; (2) paired markers such as
"one person ... the other ..." split into the two clauses; (3) only the
first person described, with a templated reciprocal line for the second.
A read-only cache of previously collected decompositions (exact-match on
the overall prompt) takes precedence over the rules.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

# (lead, follow) marker pairs, matched lowercase
MARKER_PAIRS = (
    ("one person", "the other"),
    ("the first", "the second"),
    ("person one", "person two"),
)

# phrases that may introduce the second clause in marker sentences
_CLAUSE_LINKS = ("and", "while", "as", "then")

RECIPROCAL_TEMPLATE = "the second person responds, facing the other person"

_PLURAL_SUBJECTS = (
    "these two people",
    "those two people",
    "the two people",
    "these two",
    "those two",
    "the two",
    "two people",
    "both people",
    "both of them",
    "they both",
    "the pair",
    "they",
)

_PRONOUN_MAP = {
    "their": "his",
    "theirs": "his",
    "them": "him",
    "themselves": "himself",
    "they": "he",
}

_IRREGULAR_VERBS = {
    "are": "is",
    "were": "was",
    "have": "has",
    "do": "does",
    "don't": "doesn't",
    "go": "goes",
}


@dataclass(frozen=True)
class PromptRecord:
    overall: str
    person1: str
    person2: str
    source: str  # "rule" or "cache"


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens; punctuation is dropped, apostrophes kept in-word."""
    return re.findall(r"[a-z0-9]+(?:'[a-z]+)?", text.lower())


def _singular_verb(verb: str) -> str:
    if verb in _IRREGULAR_VERBS:
        return _IRREGULAR_VERBS[verb]
    if re.search(r"(s|sh|ch|x|z|o)$", verb):
        return verb + "es"
    if re.search(r"[^aeiou]y$", verb):
        return verb[:-1] + "ies"
    return verb + "s"


def _strip_tail(text: str) -> str:
    return text.strip().rstrip(".,;").rstrip()


def _rewrite_plural(text: str) -> str:
    """Turn a both-people sentence into a single-person one, when possible."""
    lowered = _strip_tail(text.lower())
    subject = next((s for s in _PLURAL_SUBJECTS if lowered.startswith(s + " ")), None)
    if subject is None:
        return _strip_tail(text)
    rest = lowered[len(subject) :].strip()
    words = rest.split()
    if words:
        words[0] = _singular_verb(words[0])
    words = [_PRONOUN_MAP.get(w, w) for w in words]
    return _strip_tail("he " + " ".join(words))


def _find_clause_split(lowered: str, lead: str, follow: str) -> int | None:
    """Offset of a ``follow`` marker that starts the second person's clause."""
    lead_pos = lowered.find(lead)
    if lead_pos < 0:
        return None
    start = lead_pos + len(lead)
    while True:
        pos = lowered.find(follow, start)
        if pos < 0:
            return None
        after = lowered[pos + len(follow) :].strip()
        before = lowered[:pos].rstrip()
        boundary = before.endswith((",", ";")) or any(
            before.endswith(" " + w) for w in _CLAUSE_LINKS
        )
        # the clause must actually describe an action, not be a bare object
        if boundary and len(tokenize(after)) >= 1 and pos > 0:
            return pos
        start = pos + len(follow)


def decompose_prompt(
    overall: str, cache: dict[str, tuple[str, str]] | None = None
) -> PromptRecord:
    """Split an overall prompt into per-person prompts."""
    if not overall.strip():
        raise ValueError("overall prompt must be non-empty")
    if cache is not None:
        hit = cache.get(overall)
        if hit is not None and hit[0].strip() and hit[1].strip():
            return PromptRecord(overall, hit[0], hit[1], source="cache")

    lowered = overall.lower()
    for lead, follow in MARKER_PAIRS:
        split = _find_clause_split(lowered, lead, follow)
        if split is not None:
            person1 = _strip_tail(overall[:split])
            person2 = _strip_tail(overall[split:])
            if person1 and person2:
                # drop a dangling clause link left at the end of person1
                for link in _CLAUSE_LINKS:
                    if person1.lower().endswith(" " + link):
                        person1 = person1[: -len(link) - 1].rstrip()
                return PromptRecord(overall, person1, person2, source="rule")
    if any(lowered.find(lead) >= 0 for lead, _ in MARKER_PAIRS):
        # a person marker is present but no usable second clause: only
        # person 1 is described, person 2 gets the templated reciprocal
        return PromptRecord(
            overall, _strip_tail(overall), RECIPROCAL_TEMPLATE, source="rule"
        )
    both = _rewrite_plural(overall)
    return PromptRecord(overall, both, both, source="rule")


def load_cache(path: str | Path) -> dict[str, tuple[str, str]]:
    """Read a decomposition cache: ``overall TAB person1 TAB person2`` lines."""
    cache: dict[str, tuple[str, str]] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"cache line must have 3 tab-separated fields: {line!r}")
        cache[parts[0]] = (parts[1], parts[2])
    return cache


def save_cache(path: str | Path, cache: dict[str, tuple[str, str]]) -> None:
    lines = []
    for key, (p1, p2) in cache.items():
        for field in (key, p1, p2):
            if "\t" in field or "\n" in field:
                raise ValueError("cache fields must not contain tabs or newlines")
        lines.append(f"{key}\t{p1}\t{p2}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")
