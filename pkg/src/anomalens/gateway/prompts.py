"""Prompt templates for every model role."""

from enum import Enum

from pydantic import BaseModel, ConfigDict

PLACEHOLDERS: tuple[str, ...] = ("{summary}", "{labels}", "{explanation}", "{evidence}")


class PromptId(str, Enum):
    """Identifiers of the fixed prompt templates."""

    SUMMARY = "P_summary"
    SCORE = "P_score"
    SCORE_CTX = "P_score_ctx"
    CAPTION = "P_caption"
    JUDGE = "P_judge"


class PromptTemplate(BaseModel):
    """A prompt body with named placeholders."""

    model_config = ConfigDict(frozen=True)

    id: PromptId
    body: str

    def placeholders(self) -> list[str]:
        """Placeholders present in the body, in canonical order."""
        return [p for p in PLACEHOLDERS if p in self.body]

    def render(self, **values: str) -> str:
        """
        Substitute named placeholders.

        Only the known placeholder tokens are replaced, so literal braces in the
        body (the judge's JSON example) survive untouched.

        Raises:
            ValueError: if a placeholder is left unbound or an unknown name is given
        """
        text = self.body
        for name, value in values.items():
            token = "{" + name + "}"
            if token not in PLACEHOLDERS:
                raise ValueError(f"unknown placeholder {token} for {self.id.value}")
            text = text.replace(token, value)
        residual = [p for p in PLACEHOLDERS if p in text and p[1:-1] not in values]
        if residual:
            raise ValueError(f"unbound placeholders in {self.id.value}: {residual}")
        return text


SUMMARY_PROMPT = PromptTemplate(
    id=PromptId.SUMMARY,
    body=(
        "You are given key frames sampled from earlier parts of a surveillance video, "
        "in temporal order.\n"
        "Summarize what happened in these frames under the following rules:\n"
        "1. Describe only clearly observable visual content (people, objects, actions, "
        "scene layout).\n"
        "2. Do not speculate about intent, normality, or future events.\n"
        "3. If the evidence is insufficient to tell what is happening, state the "
        "uncertainty explicitly.\n"
        "4. Answer with 2-4 short bullet points.\n"
        "Never label any event as normal or anomalous."
    ),
)

SCORE_PROMPT = PromptTemplate(
    id=PromptId.SCORE,
    body=(
        "You are a video anomaly detector. The images are frames uniformly sampled from "
        "one short segment of a surveillance video.\n"
        "Decide whether the segment contains an anomalous event such as violence, crime, "
        "an accident or other dangerous behaviour.\n"
        "Reply in exactly this format:\n"
        "anomaly: <0 or 1>\n"
        "<one or two sentences explaining what you see and why>"
    ),
)

SCORE_CTX_PROMPT = PromptTemplate(
    id=PromptId.SCORE_CTX,
    body=(
        "You are a video anomaly detector. The images are frames uniformly sampled from "
        "one short segment of a surveillance video.\n"
        "Historical context (a description of earlier segments of the same video):\n"
        "{summary}\n"
        "Using the context only as background, decide whether the current segment "
        "contains an anomalous event such as violence, crime, an accident or other "
        "dangerous behaviour, paying attention to deviations from the context.\n"
        "Reply in exactly this format:\n"
        "anomaly: <0 or 1>\n"
        "<one or two sentences explaining what you see and why>"
    ),
)

CAPTION_PROMPT = PromptTemplate(
    id=PromptId.CAPTION,
    body=(
        "The images are frames sampled uniformly across one detected anomalous event in a "
        "surveillance video. Observations recorded for representative segments of the "
        "event, in temporal order:\n"
        "{evidence}\n"
        "Write a concise narrative of the event in at most 4 sentences. Use only what is "
        "visible in the frames or stated in the observations; do not add details that are "
        "not supported by them."
    ),
)

# Verbatim closed-set category judge prompt.
JUDGE_PROMPT = PromptTemplate(
    id=PromptId.JUDGE,
    body=(
        "You are a strict evaluator.\n"
        "\n"
        "Task: Given ONLY the text explanation of an event in a video, predict the video "
        "anomaly category.\n"
        "\n"
        "Closed-set labels (choose exactly ONE):\n"
        "{labels}\n"
        "\n"
        "Rules:\n"
        "- Use ONLY the information explicitly stated in the explanation.\n"
        '- Output must be a single JSON object with one key: "label".\n'
        "\n"
        "Explanation:\n"
        "{explanation}\n"
        "\n"
        "Return ONLY:\n"
        '{"label": "<one of the labels above>"}'
    ),
)

STRICT_FORMAT_REMINDER = (
    "\nIMPORTANT: your previous reply could not be parsed. The first line MUST be exactly "
    "'anomaly: 0' or 'anomaly: 1', followed by your explanation on the next line."
)

TEMPLATES: dict[PromptId, PromptTemplate] = {
    t.id: t for t in (SUMMARY_PROMPT, SCORE_PROMPT, SCORE_CTX_PROMPT, CAPTION_PROMPT, JUDGE_PROMPT)
}


def get_template(prompt_id: PromptId) -> PromptTemplate:
    """Get a prompt template by id."""
    return TEMPLATES[prompt_id]
