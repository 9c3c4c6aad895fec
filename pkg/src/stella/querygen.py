"""Dual-type synthetic query generation with hard-constraint validation.

Each candidate passage yields one term-concordant query (TCQ) and, when at
least two of its terms could be described from context, one term-agnostic
query (TAQ).  Generation is a single chat call producing a three-step
densification trace; the machine-checkable constraints are then enforced
programmatically, and violations trigger a repair re-prompt (the violation
list is appended to the original prompt) up to ``max_repairs`` times.
Records that still violate are flagged invalid and excluded from export
rather than raised, so one bad passage cannot abort a batch.

Checked mechanically, per step: forbidden forms (yes/no openers, list/quote
requests, bare deictics), single sentence, 15-25 token length, entity count
and granularity, step-1 term reservation, TCQ verbatim term inclusion with a
fresh term in step 3, TAQ term ban under case/hyphen/plural folding, and
trace schema completeness.  Answerability, intent preservation and external
knowledge are judged, not validated.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Any, Sequence

from .errors import InvalidScore, TransportError
from .gateway import ChatRequest, Gateway
from .prompts import UNDEFINABLE_SENTINEL, abbreviations, render
from .selection import CandidatePassage, IntentLabel
from .chunking import Passage
from .terminology import TerminologyDictionary, find_banned_terms
from .tokenization import count_tokens

log = logging.getLogger(__name__)

TCQ = "TCQ"
TAQ = "TAQ"

MIN_QUERY_TOKENS = 15
MAX_QUERY_TOKENS = 25
MAX_ENTITIES = 2
MAX_ENTITY_WORDS = 3

GENERATION_TEMPERATURE = 0.7

_YES_NO_OPENERS = frozenset(
    "is are was were am do does did can could will would shall should may might must has have had".split()
)
_AUX_VERBS = _YES_NO_OPENERS | frozenset("be been being".split())
_DEICTICS = frozenset(("this", "that", "these", "those"))
_LIST_OPENERS = frozenset(("list", "enumerate", "quote", "name", "cite"))
_LIST_PHRASES = ("list all", "list of all", "enumerate", "quote the", "word for word")
_WORD_RE = re.compile(r"[A-Za-z][A-Za-z'-]*")
_TERMINAL_RE = re.compile(r"[.?!](?=\s|$)")


@dataclass(frozen=True)
class TermDescription:
    term: str
    description: str
    context_span: tuple[int, int]
    undefinable: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "term": self.term,
            "description": self.description,
            "context_span": list(self.context_span),
            "undefinable": self.undefinable,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TermDescription":
        return cls(
            term=d["term"],
            description=d["description"],
            context_span=tuple(d["context_span"]),
            undefinable=bool(d.get("undefinable", False)),
        )


@dataclass
class CoDStep:
    query: str
    recognized_entities: list[str]
    entities_added: list[str]
    self_feedback: str
    descriptions_referenced: list[str] | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "query": self.query,
            "recognized_entities": self.recognized_entities,
            "entities_added": self.entities_added,
            "self_feedback": self.self_feedback,
        }
        if self.descriptions_referenced is not None:
            d["descriptions_referenced"] = self.descriptions_referenced
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CoDStep":
        return cls(
            query=str(d.get("query", "")),
            recognized_entities=list(d.get("recognized_entities", [])),
            entities_added=list(d.get("entities_added", [])),
            self_feedback=str(d.get("self_feedback", "")),
            descriptions_referenced=(
                list(d["descriptions_referenced"]) if "descriptions_referenced" in d else None
            ),
        )


@dataclass
class QueryRecord:
    query_id: str
    passage_id: str
    qtype: str
    intent: IntentLabel
    language: str
    final_query: str
    trace: list[CoDStep]
    identified_terms: list[TermDescription]
    repair_rounds: int = 0
    valid: bool = True
    violation_codes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "query_id": self.query_id,
            "passage_id": self.passage_id,
            "qtype": self.qtype,
            "intent": self.intent.value,
            "language": self.language,
            "final_query": self.final_query,
            "trace": [s.to_dict() for s in self.trace],
            "identified_terms": [t.to_dict() for t in self.identified_terms],
            "repair_rounds": self.repair_rounds,
            "valid": self.valid,
            "violation_codes": self.violation_codes,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "QueryRecord":
        return cls(
            query_id=d["query_id"],
            passage_id=d["passage_id"],
            qtype=d["qtype"],
            intent=IntentLabel(d["intent"]),
            language=d.get("language", "en"),
            final_query=d["final_query"],
            trace=[CoDStep.from_dict(s) for s in d.get("trace", [])],
            identified_terms=[TermDescription.from_dict(t) for t in d.get("identified_terms", [])],
            repair_rounds=int(d.get("repair_rounds", 0)),
            valid=bool(d.get("valid", True)),
            violation_codes=list(d.get("violation_codes", [])),
        )


@dataclass(frozen=True)
class Violation:
    code: str
    step: int  # 0 = record level, 1..3 = trace step
    message: str

    def __str__(self) -> str:
        where = f"step {self.step}" if self.step else "record"
        return f"[{self.code}] {where}: {self.message}"


@dataclass(frozen=True)
class QualityScore:
    answerability: float
    no_external_knowledge: float
    intent_adherence: float
    format_compliance: float
    style_length: float

    @property
    def mean(self) -> float:
        return (
            self.answerability + self.no_external_knowledge + self.intent_adherence
            + self.format_compliance + self.style_length
        ) / 5.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "answerability": self.answerability,
            "no_external_knowledge": self.no_external_knowledge,
            "intent_adherence": self.intent_adherence,
            "format_compliance": self.format_compliance,
            "style_length": self.style_length,
            "mean": self.mean,
        }


# --- constraint validation -----------------------------------------------------

def sentence_terminal_positions(text: str) -> list[int]:
    """End offsets of sentence-terminal marks, skipping known abbreviations."""
    abbrevs = abbreviations()
    positions = []
    for m in _TERMINAL_RE.finditer(text):
        head = text[: m.end()].split()
        word = head[-1].lower() if head else ""
        if word in abbrevs:
            continue
        positions.append(m.end())
    return positions


def is_single_sentence(text: str) -> bool:
    positions = sentence_terminal_positions(text)
    return len(positions) == 1 and positions[0] == len(text.rstrip())


def contains_verbatim(text: str, surface: str) -> bool:
    """Exact-surface, token-boundary, case-sensitive occurrence."""
    pattern = re.compile(rf"(?<![A-Za-z0-9]){re.escape(surface)}(?![A-Za-z0-9])")
    return bool(pattern.search(text))


def _forbidden_form_violations(query: str, step: int) -> list[Violation]:
    out = []
    words = _WORD_RE.findall(query)
    lowered = [w.lower() for w in words]
    if lowered and lowered[0] in _YES_NO_OPENERS:
        out.append(Violation("yes_no_opener", step, f"query opens with {words[0]!r}"))
    if lowered and lowered[0] in _LIST_OPENERS:
        out.append(Violation("list_request", step, f"query opens with {words[0]!r}"))
    else:
        low_text = query.lower()
        for phrase in _LIST_PHRASES:
            if phrase in low_text:
                out.append(Violation("list_request", step, f"contains {phrase!r}"))
                break
    for i, w in enumerate(lowered):
        if w in _DEICTICS:
            nxt = lowered[i + 1] if i + 1 < len(lowered) else None
            if nxt is None or nxt in _AUX_VERBS:
                out.append(Violation("bare_deictic", step, f"bare {w!r} without a following noun"))
                break
    return out


def _entity_violations(step_obj: CoDStep, step: int) -> list[Violation]:
    out = []
    if len(step_obj.recognized_entities) > MAX_ENTITIES:
        out.append(Violation(
            "entity_count", step,
            f"{len(step_obj.recognized_entities)} recognized_entities (max {MAX_ENTITIES})",
        ))
    for name, items in (("recognized_entities", step_obj.recognized_entities),
                        ("entities_added", step_obj.entities_added)):
        for item in items:
            n_words = len(str(item).split())
            if not 1 <= n_words <= MAX_ENTITY_WORDS:
                out.append(Violation(
                    "entity_granularity", step, f"{name} item {item!r} is not 1-3 words"
                ))
    added = {str(e) for e in step_obj.entities_added}
    recognized = {str(e) for e in step_obj.recognized_entities}
    if not added <= recognized:
        out.append(Violation(
            "entities_not_subset", step,
            "entities_added must be a subset of recognized_entities",
        ))
    return out


def validate_constraints(
    record: QueryRecord,
    dictionary: TerminologyDictionary | None = None,
) -> list[Violation]:
    """Machine-checkable hard-constraint violations; empty means exportable."""
    violations: list[Violation] = []
    surfaces = [t.term for t in record.identified_terms]

    if len(record.trace) != 3:
        violations.append(Violation("schema", 0, f"expected 3 steps, got {len(record.trace)}"))
        return violations
    if record.final_query != record.trace[2].query:
        violations.append(Violation("schema", 0, "final_query must equal the step 3 query"))
    if dictionary is not None:
        for s in surfaces:
            if s not in dictionary:
                violations.append(Violation("unknown_term", 0, f"{s!r} is not a dictionary entry"))

    for idx, step_obj in enumerate(record.trace, start=1):
        q = step_obj.query
        if not q.strip():
            violations.append(Violation("schema", idx, "missing query"))
            continue
        n_tokens = count_tokens(q)
        if not MIN_QUERY_TOKENS <= n_tokens <= MAX_QUERY_TOKENS:
            violations.append(Violation(
                "length", idx,
                f"{n_tokens} tokens outside [{MIN_QUERY_TOKENS}, {MAX_QUERY_TOKENS}]",
            ))
        if not is_single_sentence(q):
            violations.append(Violation("one_sentence", idx, "not exactly one sentence"))
        violations.extend(_forbidden_form_violations(q, idx))
        violations.extend(_entity_violations(step_obj, idx))
        if not step_obj.self_feedback.strip():
            violations.append(Violation("schema", idx, "missing self_feedback"))

    step1, step2, step3 = record.trace

    # step-1 reservation: no identified term in query or entity fields
    reserved_texts = [step1.query] + step1.recognized_entities + step1.entities_added
    for text in reserved_texts:
        if find_banned_terms(str(text), surfaces):
            violations.append(Violation(
                "step1_reservation", 1, f"identified term used in step 1: {text!r}"
            ))
            break

    if record.qtype == TCQ:
        terms2 = {s for s in surfaces if contains_verbatim(step2.query, s)}
        terms3 = {s for s in surfaces if contains_verbatim(step3.query, s)}
        if not terms2:
            violations.append(Violation("tcq_term_missing", 2, "no identified term verbatim"))
        if not terms3:
            violations.append(Violation("tcq_term_missing", 3, "no identified term verbatim"))
        elif terms2 and not (terms3 - terms2):
            violations.append(Violation(
                "tcq_term_not_new", 3, "step 3 must introduce a different identified term"
            ))
    elif record.qtype == TAQ:
        for idx, step_obj in enumerate(record.trace, start=1):
            hits = find_banned_terms(step_obj.query, surfaces)
            if hits:
                violations.append(Violation(
                    "taq_term_banned", idx,
                    f"banned term {hits[0][0]!r} appears in the query",
                ))
        for idx, step_obj in ((2, step2), (3, step3)):
            if not step_obj.descriptions_referenced:
                violations.append(Violation(
                    "descriptions_missing", idx, "descriptions_referenced is required"
                ))
    else:
        violations.append(Violation("schema", 0, f"unknown qtype {record.qtype!r}"))

    return violations


# --- term descriptions -----------------------------------------------------------

def context_window(
    doc_passages: Sequence[Passage], center_ordinal: int, w: int = 2
) -> tuple[str, tuple[int, int]]:
    """Text and (start, end) ordinals of the clipped +-w passage window."""
    by_ordinal = {p.ordinal: p for p in doc_passages}
    max_ordinal = max(by_ordinal) if by_ordinal else 0
    lo = max(0, center_ordinal - w)
    hi = min(max_ordinal, center_ordinal + w)
    parts = [by_ordinal[o].text for o in range(lo, hi + 1) if o in by_ordinal]
    return " ".join(parts), (lo, hi)


def _normalize_sentinel(text: str) -> str:
    return text.strip().strip('"\'' ).rstrip(".").casefold()


def describe_one_term(
    term: str,
    context_text: str,
    context_span: tuple[int, int],
    gateway: Gateway,
) -> TermDescription:
    prompt = render("term_description", term=term, context_text=context_text)
    req = ChatRequest(
        system_prompt="Answer concisely.",
        user_prompt=prompt,
        temperature=0.0,
        max_output_tokens=128,
    )
    response = gateway.chat(req).strip()
    undefinable = _normalize_sentinel(response) == _normalize_sentinel(UNDEFINABLE_SENTINEL)
    return TermDescription(
        term=term, description=response, context_span=context_span, undefinable=undefinable,
    )


def describe_terms(
    candidate: CandidatePassage,
    doc_passages: Sequence[Passage],
    dictionary: TerminologyDictionary,
    gateway: Gateway,
    w: int = 2,
) -> list[TermDescription]:
    """Context-grounded descriptions for the candidate's terms; defined only."""
    if not candidate.distinct_terms:
        raise ValueError(f"candidate {candidate.passage.passage_id} has no terms")
    context_text, span = context_window(doc_passages, candidate.passage.ordinal, w)
    described = []
    for term in candidate.distinct_terms:
        try:
            desc = describe_one_term(term, context_text, span, gateway)
        except TransportError as exc:
            log.warning("description for %r dropped: %s", term, exc)
            continue
        if desc.undefinable:
            log.info("term %r undefinable in context of %s", term, candidate.passage.passage_id)
            continue
        described.append(desc)
    return described


# --- generation --------------------------------------------------------------------

def _input_json(passage_text: str, terms: Sequence[TermDescription], intent: IntentLabel) -> str:
    return json.dumps(
        {
            "passage_text": passage_text,
            "identified_terms": [{"term": t.term, "description": t.description} for t in terms],
            "sampled_intention": intent.display,
        },
        ensure_ascii=False,
    )


def _parse_trace(payload: dict[str, Any]) -> tuple[list[CoDStep], list[Violation]]:
    steps: list[CoDStep] = []
    violations: list[Violation] = []
    for i in (1, 2, 3):
        raw = payload.get(f"step_{i}")
        if not isinstance(raw, dict):
            violations.append(Violation("schema", i, f"missing step_{i} object"))
            raw = {}
        steps.append(CoDStep.from_dict(raw))
    return steps, violations


def _generate(
    qtype: str,
    template: str,
    candidate: CandidatePassage,
    terms: Sequence[TermDescription],
    intent: IntentLabel,
    gateway: Gateway,
    max_repairs: int,
    dictionary: TerminologyDictionary | None,
) -> QueryRecord:
    if len([t for t in terms if not t.undefinable]) < 2:
        raise ValueError(f"{qtype} generation requires at least 2 defined terms")
    base_prompt = render(template, input_json=_input_json(candidate.passage.text, terms, intent))
    prompt = base_prompt
    record = None
    violations: list[Violation] = []
    for round_no in range(max_repairs + 1):
        req = ChatRequest(
            system_prompt="Follow the instructions exactly and output only JSON.",
            user_prompt=prompt,
            temperature=GENERATION_TEMPERATURE,
            max_output_tokens=2048,
            response_format="json_object",
        )
        payload = json.loads(gateway.chat(req))
        trace, schema_violations = _parse_trace(payload)
        record = QueryRecord(
            query_id=f"{candidate.passage.passage_id}:{qtype}",
            passage_id=candidate.passage.passage_id,
            qtype=qtype,
            intent=intent,
            language="en",
            final_query=trace[2].query if len(trace) == 3 else "",
            trace=trace,
            identified_terms=list(terms),
            repair_rounds=round_no,
        )
        violations = schema_violations + validate_constraints(record, dictionary)
        if str(payload.get("intention", "")).strip() != intent.display:
            violations.append(Violation("intention_mismatch", 0, "intention field was not copied"))
        if not violations:
            return record
        bullet_list = "\n".join(f"- {v}" for v in violations)
        prompt = (
            f"{base_prompt}\n\n# Constraint Violations In Your Previous Output\n"
            f"{bullet_list}\nReturn the corrected JSON object only."
        )
    assert record is not None
    record.valid = False
    record.violation_codes = sorted({v.code for v in violations})
    log.warning("%s for %s still invalid after %d repairs: %s",
                qtype, candidate.passage.passage_id, max_repairs, record.violation_codes)
    return record


def generate_tcq(
    candidate: CandidatePassage,
    terms: Sequence[TermDescription],
    intent: IntentLabel,
    gateway: Gateway,
    max_repairs: int = 3,
    dictionary: TerminologyDictionary | None = None,
) -> QueryRecord:
    return _generate(TCQ, "tcq_generation", candidate, terms, intent, gateway,
                     max_repairs, dictionary)


def generate_taq(
    candidate: CandidatePassage,
    terms: Sequence[TermDescription],
    intent: IntentLabel,
    gateway: Gateway,
    max_repairs: int = 3,
    dictionary: TerminologyDictionary | None = None,
) -> QueryRecord:
    return _generate(TAQ, "taq_generation", candidate, terms, intent, gateway,
                     max_repairs, dictionary)


# --- quality judging -----------------------------------------------------------------

_SCORE_FIELDS = (
    "answerability", "no_external_knowledge", "intent_adherence",
    "format_compliance", "style_length",
)


def judge_quality(record: QueryRecord, passage: Passage, gateway: Gateway) -> QualityScore:
    """G-Eval-style 1-5 scoring on the five core metrics; audit only."""
    prompt = render(
        "quality_judge",
        passage_text=passage.text,
        intent=record.intent.display,
        query=record.final_query,
    )
    req = ChatRequest(
        system_prompt="Score strictly; output only JSON.",
        user_prompt=prompt,
        temperature=0.0,
        max_output_tokens=256,
        response_format="json_object",
    )
    payload = json.loads(gateway.chat(req))
    values = {}
    for name in _SCORE_FIELDS:
        raw = payload.get(name)
        if not isinstance(raw, (int, float)) or not 1.0 <= float(raw) <= 5.0:
            raise InvalidScore(f"{name}={raw!r} outside [1, 5]")
        values[name] = float(raw)
    return QualityScore(**values)
