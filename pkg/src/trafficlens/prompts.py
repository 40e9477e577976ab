"""Prompt text and output-token budget for every (clip, camera-rank) call.

The two prompt strings are part of the acceptance contract and must stay
byte-exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

from trafficlens.types import TokenBudgetSchedule

PromptRole = Literal["base", "followup", "baseline"]
IngestMode = Literal["baseline", "trafficlens"]

BASE_PROMPT_TEXT = "Compose a descriptive narrative."
FOLLOWUP_PREFIX = "The image describes ["
FOLLOWUP_SUFFIX = "]. Describe the undetected objects."


class EmptyPriorTextError(ValueError):
    """A follow-up prompt needs non-empty prior text to embed."""


@dataclass(frozen=True)
class PromptText:
    text: str
    role: PromptRole

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("prompt text must be non-empty")


@dataclass(frozen=True)
class AccumulationPolicy:
    """How much earlier-camera text a follow-up prompt carries.

    base_only embeds just the base narrative; accumulate also appends every
    earlier non-skipped follow-up, so each camera sees all prior detail.
    """

    mode: Literal["base_only", "accumulate"] = "accumulate"
    max_context_chars: int = 2000

    def __post_init__(self) -> None:
        if self.max_context_chars < 200:
            raise ValueError("max_context_chars must be at least 200")


def base_prompt() -> PromptText:
    """The full-narrative prompt used for the base camera and the baseline mode."""
    return PromptText(text=BASE_PROMPT_TEXT, role="base")


def truncate_at_word(text: str, limit: int) -> str:
    """Cut text to at most limit chars, dropping the suffix at a word boundary."""
    if len(text) <= limit:
        return text
    cut = text.rfind(" ", 0, limit + 1)
    if cut <= 0:
        return text[:limit]
    return text[:cut].rstrip()


def followup_prompt(prior_text: str, policy: AccumulationPolicy | None = None) -> PromptText:
    """Prompt a later camera to add only objects missing from prior text."""
    if not prior_text:
        raise EmptyPriorTextError("prior text must be non-empty for a follow-up prompt")
    policy = policy or AccumulationPolicy()
    context = truncate_at_word(prior_text, policy.max_context_chars)
    return PromptText(text=f"{FOLLOWUP_PREFIX}{context}{FOLLOWUP_SUFFIX}", role="followup")


def budget_for(rank: int, schedule: TokenBudgetSchedule, mode: IngestMode) -> int:
    """Maximum output tokens for the call at the given camera rank."""
    if rank < 0:
        raise ValueError(f"camera rank must be >= 0: {rank}")
    if mode == "baseline":
        return schedule.baseline_limit
    return schedule.base_limit if rank == 0 else schedule.followup_limit
