"""Closed-set category judging of explanations and gold-label inference from file names."""

import re
from collections import defaultdict
from collections.abc import Sequence
from typing import TYPE_CHECKING

import numpy as np
import structlog

from anomalens.config import CANONICAL_LABELS
from anomalens.gateway.models import SegmentVerdict
from anomalens.models.evaluation import ExplanationVariant, JudgeResult
from anomalens.models.events import EventExplanation
from anomalens.models.intervals import EvidenceField

if TYPE_CHECKING:
    from anomalens.gateway.client import ModelGateway

logger = structlog.get_logger(__name__)

UNKNOWN_LABEL = "unknown"

ALIASES: dict[str, str] = {
    "accident": "roadaccidents",
    "accidents": "roadaccidents",
    "roadaccident": "roadaccidents",
    "caraccident": "roadaccidents",
    "trafficaccident": "roadaccidents",
    "fight": "fighting",
    "fights": "fighting",
    "shoot": "shooting",
    "shootings": "shooting",
    "gunshot": "shooting",
    "steal": "stealing",
    "theft": "stealing",
    "shoplift": "shoplifting",
    "explode": "explosion",
    "explosions": "explosion",
    "rob": "robbery",
    "burglar": "burglary",
    "vandal": "vandalism",
    "arrested": "arrest",
    "arrests": "arrest",
    "assaults": "assault",
    "abused": "abuse",
}

LEADING_NAME = re.compile(r"^[A-Za-z_\- ]+")
NON_LETTERS = re.compile(r"[^a-z]")


def normalize_alias(raw: str) -> str:
    """Map a free-form label to its canonical class, or "unknown"."""
    key = NON_LETTERS.sub("", raw.strip().lower())
    if key in CANONICAL_LABELS:
        return key
    return ALIASES.get(key, UNKNOWN_LABEL)


def infer_gold_category(video_name: str) -> str | None:
    """
    Gold class from the leading alphabetic part of a video name.

    Returns None for normal videos and for names that do not map to a class.
    """
    match = LEADING_NAME.match(video_name.strip())
    if match is None:
        logger.warning("No alphabetic prefix in video name", video=video_name)
        return None
    prefix = NON_LETTERS.sub("", match.group(0).lower())
    if prefix.startswith("normal"):
        return None
    label = normalize_alias(prefix)
    if label == UNKNOWN_LABEL:
        logger.warning("Video name does not map to a category", video=video_name)
        return None
    return label


def variant_texts(
    event: EventExplanation,
    verdicts: Sequence[SegmentVerdict],
    field: EvidenceField,
    rng: np.random.Generator,
) -> dict[ExplanationVariant, str]:
    """The four explanation variants of one event."""
    l, r = event.interval.l, event.interval.r  # noqa: E741
    scores = np.asarray(field.scores[l : r + 1])
    peak = l + int(np.argmax(scores))
    pick = int(rng.integers(l, r + 1))
    return {
        ExplanationVariant.EVENT_LEVEL: event.narrative,
        ExplanationVariant.PEAK_SEGMENT: verdicts[peak].explanation,
        ExplanationVariant.RANDOM_SEGMENT: verdicts[pick].explanation,
        ExplanationVariant.CONCATENATED: " ".join(v.explanation for v in verdicts[l : r + 1]),
    }


async def judge_variants(
    events: Sequence[EventExplanation],
    verdicts: Sequence[SegmentVerdict],
    field: EvidenceField,
    gateway: "ModelGateway",
    video_id: str,
    gold: str,
    labels: Sequence[str] = CANONICAL_LABELS,
    rng_seed: int = 0,
) -> list[JudgeResult]:
    """
    Judge every explanation variant of every event independently.

    Judge failures are recorded as "unknown" by the gateway and never abort.
    """
    if not events:
        raise ValueError("at least one detected event is required")
    rng = np.random.default_rng(rng_seed)
    results: list[JudgeResult] = []
    for n, event in enumerate(events):
        for variant, text in variant_texts(event, verdicts, field, rng).items():
            predicted = await gateway.judge_category(text, list(labels))
            results.append(
                JudgeResult(
                    video_id=video_id,
                    event_index=n,
                    explanation_variant=variant,
                    explanation=text,
                    predicted=predicted,
                    gold=gold,
                    correct=predicted == gold,
                )
            )
    logger.debug("Judged explanations", video_id=video_id, events=len(events))
    return results


def accuracy_by_variant(results: Sequence[JudgeResult]) -> dict[str, float]:
    """Category recovery accuracy per explanation variant."""
    totals: dict[str, list[int]] = defaultdict(list)
    for result in results:
        totals[result.explanation_variant.value].append(int(result.correct))
    return {variant: float(np.mean(hits)) for variant, hits in sorted(totals.items())}


def token_length_by_variant(results: Sequence[JudgeResult]) -> dict[str, float]:
    """Mean whitespace token count of the judged texts per variant."""
    lengths: dict[str, list[int]] = defaultdict(list)
    for result in results:
        lengths[result.explanation_variant.value].append(len(result.explanation.split()))
    return {variant: float(np.mean(n)) for variant, n in sorted(lengths.items())}
