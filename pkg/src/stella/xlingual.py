"""Cross-lingual extension: hybrid translation plus the two fidelity audits.

TAQ queries are translated whole.  TCQ queries keep their dictionary terms in
English: the terms found in the query are injected into the prompt's critical
rule and their verbatim presence in the output is checked mechanically, with
a repair re-prompt when the translator dropped one.  The audits are pure
reductions: back-translation cosine per language (warning gate at the mean
threshold) and a 100% re-check of term preservation, which gates export.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from .gateway import ChatRequest, Gateway
from .errors import TransportError
from .prompts import keep_terms_instruction, render, translation_fewshot
from .querygen import TCQ, QueryRecord, contains_verbatim
from .terminology import TerminologyDictionary, find_terms_in

log = logging.getLogger(__name__)

TARGET_LANGUAGES = ("ko", "id", "th", "fr", "zh", "ja")

LANGUAGE_NAMES = {
    "ko": "Korean",
    "id": "Indonesian",
    "th": "Thai",
    "fr": "French",
    "zh": "Chinese",
    "ja": "Japanese",
    "en": "English",
}


@dataclass
class TranslationRecord:
    query_id: str
    language: str
    translated_query: str
    kept_terms: list[str]
    back_translation: str | None = None
    bt_cosine: float | None = None
    term_check_passed: bool = True
    repair_rounds: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "query_id": self.query_id,
            "language": self.language,
            "translated_query": self.translated_query,
            "kept_terms": self.kept_terms,
            "back_translation": self.back_translation,
            "bt_cosine": self.bt_cosine,
            "term_check_passed": self.term_check_passed,
            "repair_rounds": self.repair_rounds,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TranslationRecord":
        return cls(
            query_id=d["query_id"],
            language=d["language"],
            translated_query=d["translated_query"],
            kept_terms=list(d.get("kept_terms", [])),
            back_translation=d.get("back_translation"),
            bt_cosine=d.get("bt_cosine"),
            term_check_passed=bool(d.get("term_check_passed", True)),
            repair_rounds=int(d.get("repair_rounds", 0)),
        )


def missing_terms(translated: str, kept_terms: Iterable[str]) -> list[str]:
    """Kept terms that do not occur verbatim (case-sensitive) in the output."""
    return [t for t in kept_terms if not contains_verbatim(translated, t)]


def _fewshot_block(lang: str) -> str:
    example = translation_fewshot()[lang]
    return f"Input: {example['input']}\nOutput: {example['output']}"


def _translation_request(text: str, lang: str, kept: list[str]) -> ChatRequest:
    prompt = render(
        "translation",
        target_language_name=LANGUAGE_NAMES[lang],
        few_shot_examples=_fewshot_block(lang),
        keep_terms_instruction=keep_terms_instruction(kept),
        input_query=text,
    )
    return ChatRequest(
        system_prompt="Translate precisely; output only the translation.",
        user_prompt=prompt,
        temperature=0.0,
        max_output_tokens=512,
    )


def _clean(response: str) -> str:
    text = response.strip()
    if text.startswith('"') and text.endswith('"') and len(text) > 1:
        text = text[1:-1].strip()
    return text


def translate_query(
    record: QueryRecord,
    lang: str,
    dictionary: TerminologyDictionary,
    gateway: Gateway,
    max_repairs: int = 3,
) -> TranslationRecord:
    """Hybrid translation of one query into one target language."""
    if record.language != "en":
        raise ValueError("only English source queries are translated")
    if lang not in TARGET_LANGUAGES:
        raise ValueError(f"unsupported target language {lang!r}")
    if record.qtype == TCQ:
        kept: list[str] = []
        for surface, _ in find_terms_in(record.final_query, dictionary):
            if surface not in kept:
                kept.append(surface)
    else:
        kept = []

    translated = _clean(gateway.chat(_translation_request(record.final_query, lang, kept)))
    repair_rounds = 0
    missing = missing_terms(translated, kept)
    while missing and repair_rounds < max_repairs:
        repair_rounds += 1
        retry_text = (
            f"{record.final_query}\n\nYour previous translation dropped these required "
            f"English terms: {missing}. Translate again and keep every listed term "
            "verbatim in English."
        )
        translated = _clean(gateway.chat(_translation_request(retry_text, lang, kept)))
        missing = missing_terms(translated, kept)

    passed = not missing
    if not passed:
        log.warning("term preservation failed for %s into %s: missing %s",
                    record.query_id, lang, missing)
    return TranslationRecord(
        query_id=record.query_id,
        language=lang,
        translated_query=translated,
        kept_terms=kept,
        term_check_passed=passed,
        repair_rounds=repair_rounds,
    )


def translate_all(
    records: Sequence[QueryRecord],
    langs: Sequence[str],
    dictionary: TerminologyDictionary,
    gateway: Gateway,
    max_repairs: int = 3,
    max_workers: int = 8,
) -> list[TranslationRecord]:
    """Parallel map over (query, language); output ordered by (language, query)."""
    jobs = [(record, lang) for lang in langs for record in records]

    def work(job):
        record, lang = job
        return translate_query(record, lang, dictionary, gateway, max_repairs)

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(pool.map(work, jobs))
    return sorted(results, key=lambda r: (r.language, r.query_id))


# --- audits -------------------------------------------------------------------

def back_translate(translated_query: str, gateway: Gateway) -> str:
    return _clean(gateway.chat(_translation_request(translated_query, "en", [])))


def _cosine(a: Sequence[float], b: Sequence[float]) -> float:
    va, vb = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(va @ vb / (np.linalg.norm(va) * np.linalg.norm(vb)))


def audit_back_translation(
    records: Sequence[TranslationRecord],
    originals: dict[str, str],
    gateway: Gateway,
    threshold: float = 0.93,
) -> dict[str, Any]:
    """Round-trip each record to English and score embedding cosine.

    Mutates the records (back_translation, bt_cosine) and returns a
    per-language report.  A language mean below the threshold logs a warning
    but never fails the pipeline.
    """
    per_language: dict[str, list[float]] = {}
    missing_count: dict[str, int] = {}
    for record in records:
        original = originals.get(record.query_id)
        if original is None:
            missing_count[record.language] = missing_count.get(record.language, 0) + 1
            continue
        try:
            record.back_translation = back_translate(record.translated_query, gateway)
            pair = gateway.embed([original, record.back_translation])
            record.bt_cosine = _cosine(pair[0].values, pair[1].values)
        except TransportError as exc:
            log.warning("back-translation audit skipped %s: %s", record.query_id, exc)
            missing_count[record.language] = missing_count.get(record.language, 0) + 1
            continue
        per_language.setdefault(record.language, []).append(record.bt_cosine)

    report: dict[str, Any] = {"threshold": threshold, "languages": {}}
    for lang in sorted(set(r.language for r in records)):
        scores = per_language.get(lang, [])
        mean = float(np.mean(scores)) if scores else None
        below = sum(1 for s in scores if s < threshold)
        warn = mean is not None and mean < threshold
        if warn:
            log.warning("back-translation mean %.3f below %.2f for %s", mean, threshold, lang)
        report["languages"][lang] = {
            "count": len(scores),
            "mean_cosine": mean,
            "fraction_below_threshold": (below / len(scores)) if scores else None,
            "missing": missing_count.get(lang, 0),
            "below_threshold_warning": warn,
        }
    return report


def audit_term_preservation(records: Sequence[TranslationRecord]) -> dict[str, Any]:
    """Recompute the verbatim check for every TCQ record; export needs 100%."""
    failures = []
    checked = 0
    for record in records:
        if not record.kept_terms:
            continue
        checked += 1
        missing = missing_terms(record.translated_query, record.kept_terms)
        if missing:
            failures.append({
                "query_id": record.query_id,
                "language": record.language,
                "missing_terms": missing,
            })
    return {
        "checked": checked,
        "failures": failures,
        "failure_count": len(failures),
        "pass": not failures,
    }
