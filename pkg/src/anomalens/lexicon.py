"""Fixed anomaly cue keywords and negation patterns used by the evidence score."""

import re
from functools import cached_property

from pydantic import BaseModel, ConfigDict

CUE_KEYWORDS: tuple[str, ...] = (
    "fight",
    "fighting",
    "assault",
    "attack",
    "hit",
    "punch",
    "kick",
    "stab",
    "shoot",
    "gun",
    "weapon",
    "rob",
    "robbery",
    "steal",
    "stealing",
    "theft",
    "burglary",
    "break in",
    "breaking",
    "vandal",
    "vandalism",
    "arson",
    "fire",
    "explosion",
    "explode",
    "crash",
    "collision",
    "accident",
    "chase",
    "chasing",
    "running",
    "panic",
    "scream",
    "blood",
    "knife",
    "climbing over a fence",
    "climb over a fence",
    "trespass",
    "trespassing",
)

NEGATION_PATTERNS: tuple[str, ...] = (
    r"\bno anomaly\b",
    r"\bthere is no anomaly\b",
    r"\bno unusual\b",
    r"\bno (visible )?damage\b",
    r"\bno (unusual|abnormal) (movement|events)\b",
)


class LexiconError(Exception):
    """A lexicon pattern failed to compile."""

    pass


def phrase_pattern(phrase: str) -> str:
    """Whole-phrase regex: the words in sequence with word boundaries at both ends."""
    words = phrase.split()
    if not words:
        raise LexiconError("empty cue phrase")
    return r"\b" + r"\s+".join(re.escape(w) for w in words) + r"\b"


class Lexicon(BaseModel):
    """Cue keywords and negation regexes; matching is case-insensitive."""

    model_config = ConfigDict(frozen=True, ignored_types=(cached_property,))

    cue_keywords: tuple[str, ...] = CUE_KEYWORDS
    negation_patterns: tuple[str, ...] = NEGATION_PATTERNS

    @cached_property
    def cue_regexes(self) -> tuple[re.Pattern[str], ...]:
        return tuple(_compile(phrase_pattern(p)) for p in self.cue_keywords)

    @cached_property
    def negation_regexes(self) -> tuple[re.Pattern[str], ...]:
        return tuple(_compile(p) for p in self.negation_patterns)

    def compile(self) -> "Lexicon":
        """Compile every pattern now, surfacing LexiconError at load time."""
        _ = self.cue_regexes, self.negation_regexes
        return self


def _compile(pattern: str) -> re.Pattern[str]:
    try:
        return re.compile(pattern, re.IGNORECASE)
    except re.error as e:
        raise LexiconError(f"invalid lexicon pattern {pattern!r}: {e}") from e


def count_cues(explanation: str, lexicon: Lexicon) -> int:
    """Number of distinct cue phrases present in the text."""
    return sum(1 for regex in lexicon.cue_regexes if regex.search(explanation))


def count_negations(explanation: str, lexicon: Lexicon) -> int:
    """Number of distinct negation patterns that fire at least once."""
    return sum(1 for regex in lexicon.negation_regexes if regex.search(explanation))


DEFAULT_LEXICON = Lexicon().compile()
