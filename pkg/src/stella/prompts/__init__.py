"""Versioned prompt templates and their data files.

Templates are plain text with named ``<placeholder>`` slots; rendering only
substitutes the placeholders given, so literal angle-bracket text inside the
templates (JSON skeletons, entity markers) passes through untouched.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

KEEP_TERMS_RULE = (
    "CRITICAL RULE FOR THIS REQUEST:\n"
    "You MUST NOT translate the following specific technical terms found in this input.\n"
    "Keep them in their original English form: {terms}."
)
NO_KEEP_TERMS_RULE = "No specific terms to keep for this request."

UNDEFINABLE_SENTINEL = "Difficult to define within context"


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return resources.files(__name__).joinpath(f"templates/{name}.txt").read_text("utf-8")


def render(name: str, **placeholders: str) -> str:
    text = load_template(name)
    for key, value in placeholders.items():
        text = text.replace(f"<{key}>", value)
    return text


@lru_cache(maxsize=1)
def abbreviations() -> frozenset[str]:
    raw = resources.files(__name__).joinpath("data/abbreviations.txt").read_text("utf-8")
    return frozenset(
        ln.strip().lower() for ln in raw.splitlines() if ln.strip() and not ln.startswith("#")
    )


@lru_cache(maxsize=1)
def translation_fewshot() -> dict[str, dict[str, str]]:
    raw = resources.files(__name__).joinpath("data/translation_fewshot.json").read_text("utf-8")
    return json.loads(raw)


def keep_terms_instruction(kept_terms: list[str]) -> str:
    if not kept_terms:
        return NO_KEEP_TERMS_RULE
    rendered = ", ".join(json.dumps(t, ensure_ascii=False) for t in kept_terms)
    return KEEP_TERMS_RULE.format(terms=f"[{rendered}]")
