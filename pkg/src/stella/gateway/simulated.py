"""Rule-based offline chat model for --mock pipeline runs.

Dispatches on markers in the prompt (intent classification, term
description, TCQ/TAQ generation, translation, quality judging) and
synthesizes responses that are deterministic functions of the prompt
content.  Generated traces are valid by construction against the hard
constraints; translations reversibly transform every non-kept token, so
back-translation recovers the original text exactly.
"""

from __future__ import annotations

import hashlib
import json
import re

from ..errors import TransportError
from .types import ChatRequest

INTENT_DISPLAYS = (
    "Definition / Principle",
    "Numerical / Specification",
    "Procedure / Operation",
    "Comparison / Trade-off",
    "Anomaly / Risk",
)

_SAFE_PAD = (
    "documented", "reported", "measured", "observed", "nominal", "overall",
    "relative", "combined", "expected", "baseline", "operating", "primary",
)
_DESCRIPTION_TEMPLATES = (
    "a specialized hardware element referenced repeatedly in the surrounding technical discussion",
    "a domain quantity used to characterize the documented operating conditions",
    "a technical designation for equipment described in the surrounding context",
    "a measured parameter tied to the configuration covered by the context",
)

_BANNED_WORDS = frozenset(
    "this that these those is are was were do does did can could will would "
    "shall should may might must has have had list enumerate quote name cite".split()
)

_LANG_BY_NAME = {
    "Korean": "ko", "Indonesian": "id", "Thai": "th", "French": "fr",
    "Chinese": "zh", "Japanese": "ja", "English": "en",
}

_WRAPPED = re.compile(r"^⟦([a-z]{2}):(.*)⟧$", re.DOTALL)


def _digest(*parts: str) -> int:
    h = hashlib.sha256("␟".join(parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big")


class SimulatedModelClient:
    """Offline stand-in for every chat-model role the pipeline uses."""

    def __init__(self, seed: int = 0, undefinable_rate: int = 16):
        self.seed = str(seed)
        self.undefinable_rate = undefinable_rate

    # -- dispatch -------------------------------------------------------------

    def complete(self, req: ChatRequest) -> str:
        prompt = req.user_prompt
        if "Most Suitable Intent:" in prompt:
            return self._intent(prompt)
        if "Short Description:" in prompt:
            return self._description(prompt)
        if "ABSOLUTE TERM-BAN POLICY" in prompt:
            return self._trace(prompt, taq=True)
        if "Chain-of-Density (CoD) process" in prompt:
            return self._trace(prompt, taq=False)
        if "expert translator" in prompt:
            return self._translation(prompt)
        if "quality judge" in prompt:
            return self._judge(prompt)
        raise TransportError("simulated model: unrecognized prompt shape")

    # -- intent classification --------------------------------------------------

    def _intent(self, prompt: str) -> str:
        m = re.search(r"Passage:\n(.*?)\n\nMost Suitable Intent:", prompt, re.DOTALL)
        passage = m.group(1) if m else prompt
        return INTENT_DISPLAYS[_digest(self.seed, "intent", passage) % len(INTENT_DISPLAYS)]

    # -- term descriptions --------------------------------------------------------

    def _description(self, prompt: str) -> str:
        m = re.search(r"Term:\n(.*?)\n\nShort Description:", prompt, re.DOTALL)
        term = m.group(1).strip() if m else ""
        roll = _digest(self.seed, "describe", term)
        if roll % self.undefinable_rate == 0:
            return "Difficult to define within context"
        return _DESCRIPTION_TEMPLATES[roll % len(_DESCRIPTION_TEMPLATES)]

    # -- CoD trace generation -------------------------------------------------------

    def _trace(self, prompt: str, taq: bool) -> str:
        payload = self._input_json(prompt)
        passage = payload.get("passage_text", "")
        terms = [t["term"] for t in payload.get("identified_terms", [])]
        intention = payload.get("sampled_intention", INTENT_DISPLAYS[0])
        if len(terms) < 2:
            raise TransportError("simulated model: need two identified terms")
        roll = _digest(self.seed, "trace", passage, str(taq))
        term_a = terms[roll % len(terms)]
        term_b = terms[(roll // 7 + 1 + roll % len(terms)) % len(terms)]
        if term_b == term_a:
            term_b = terms[(terms.index(term_a) + 1) % len(terms)]

        safe = self._safe_words(passage, terms)
        topic = safe[roll % len(safe)]
        topic2 = safe[(roll // 3) % len(safe)]

        def build(step: int, inject: list[str]) -> str:
            target = 16 + (_digest(self.seed, "len", passage, str(step)) % 8)  # 16..23
            words = ["How", "does", "the", topic, "behavior"]
            words += inject
            words += ["compare", "with", "the", topic2, "profile", "under"]
            pad_i = 0
            while len(words) + 2 < target:  # +2: final pad word + "?"
                words.append(_SAFE_PAD[(roll + pad_i) % len(_SAFE_PAD)])
                pad_i += 1
            words.append("conditions")
            return " ".join(words) + "?"

        if taq:
            q1 = build(1, [])
            q2 = build(2, [])
            q3 = build(3, [])
        else:
            q1 = build(1, [])
            q2 = build(2, [term_a])
            q3 = build(3, [term_a, term_b])

        def step(query: str, recognized: list[str], added: list[str],
                 refs: list[str] | None) -> dict:
            obj = {
                "query": query,
                "recognized_entities": recognized[:2],
                "entities_added": added,
                "self_feedback": "Hold intent; verify passage-only scope and token window; densify next step.",
            }
            if refs is not None:
                obj["descriptions_referenced"] = refs
            return obj

        if taq:
            trace = {
                "intention": intention,
                "step_1": step(q1, [topic], [], None),
                "step_2": step(q2, [term_a, topic], [term_a], [term_a, "indirect paraphrase"]),
                "step_3": step(q3, [term_b, term_a], [term_b], [term_b, "indirect paraphrase"]),
            }
        else:
            trace = {
                "intention": intention,
                "step_1": step(q1, [topic], [], None),
                "step_2": step(q2, [term_a, topic], [term_a], None),
                "step_3": step(q3, [term_b, term_a], [term_b], None),
            }
        return json.dumps(trace, ensure_ascii=False)

    def _input_json(self, prompt: str) -> dict:
        for line in prompt.splitlines():
            line = line.strip()
            if line.startswith("{"):
                try:
                    return json.loads(line)
                except json.JSONDecodeError:
                    continue
        raise TransportError("simulated model: no input JSON found")

    def _safe_words(self, passage: str, terms: list[str]) -> list[str]:
        from ..terminology import find_banned_terms

        words = []
        for raw in passage.split():
            word = raw.strip(".,;:()[]!?\"'").lower()
            if len(word) < 4 or not word.isalpha():
                continue
            if word in _BANNED_WORDS or word in words:
                continue
            if find_banned_terms(word, terms):
                continue
            words.append(word)
            if len(words) >= 8:
                break
        return words or ["system", "margin"]

    # -- translation -------------------------------------------------------------------

    def _translation(self, prompt: str) -> str:
        m = re.search(r"translate the given English text into (\w+)\.", prompt)
        lang = _LANG_BY_NAME.get(m.group(1) if m else "", "xx")
        kept: list[str] = []
        km = re.search(r"original English form: \[(.*?)\]\.", prompt, re.DOTALL)
        if km:
            kept = json.loads(f"[{km.group(1)}]")
        tm = re.search(r"English Text:\n(.*)\Z", prompt, re.DOTALL)
        text = (tm.group(1) if tm else "").strip()
        # repair prompts append directives after a blank line; translate only
        # the original query
        text = text.split("\n\n")[0].strip()
        if lang == "en":
            return self._untranslate(text)
        return self._pseudo_translate(text, lang, set(kept))

    def _pseudo_translate(self, text: str, lang: str, kept: set[str]) -> str:
        out = []
        for token in text.split():
            core = token.strip(".,;:()[]!?\"'")
            if core in kept:
                out.append(token)
            else:
                out.append(f"⟦{lang}:{token[::-1]}⟧")
        return " ".join(out)

    def _untranslate(self, text: str) -> str:
        out = []
        for token in text.split():
            m = _WRAPPED.match(token)
            out.append(m.group(2)[::-1] if m else token)
        return " ".join(out)

    # -- judging ----------------------------------------------------------------------------

    def _judge(self, prompt: str) -> str:
        roll = _digest(self.seed, "judge", prompt)
        fields = ("answerability", "no_external_knowledge", "intent_adherence",
                  "format_compliance", "style_length")
        scores = {f: 4 + ((roll >> i) & 1) for i, f in enumerate(fields)}
        return json.dumps(scores)
