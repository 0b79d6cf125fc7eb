"""Language-neutral text utilities: tokenization, sentence and clause splitting.

All span indices are character offsets into the original string, so callers
can always map results back to the source text.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass

_WORD_RE = re.compile(r"\w+(?:'\w+)?", re.UNICODE)
_TERMINALS = ".!?…"
_QUOTE_CHARS = "\"“”«»"

# Words that end with a period without terminating a sentence.
ABBREVIATIONS = frozenset(
    "dr mr mrs ms prof sr jr st vs etc fig vol no dept approx".split()
)


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


def tokenize(text: str) -> list[Token]:
    """Unicode word tokens with character offsets."""
    return [Token(m.group(0), m.start(), m.end()) for m in _WORD_RE.finditer(text)]


def normalize_space(text: str) -> str:
    return " ".join(text.split())


def normalize_token(token: str) -> str:
    """Lowercase and strip punctuation/diacritic-neutral comparison form."""
    token = token.lower()
    return "".join(c for c in token if not unicodedata.category(c).startswith("P"))


def _is_sentence_break(text: str, punct_end: int) -> bool:
    # A break requires whitespace and then an uppercase letter, a digit, or an
    # opening quote followed by either; end of text always breaks.
    i = punct_end
    n = len(text)
    if i >= n:
        return True
    if not text[i].isspace():
        return False
    while i < n and text[i].isspace():
        i += 1
    while i < n and text[i] in _QUOTE_CHARS + "([¿¡":
        i += 1
    if i >= n:
        return True
    return text[i].isupper() or text[i].isdigit()


def _preceded_by_abbreviation(text: str, dot_pos: int) -> bool:
    j = dot_pos
    while j > 0 and (text[j - 1].isalpha()):
        j -= 1
    word = text[j:dot_pos]
    if not word:
        return False
    return word.lower() in ABBREVIATIONS or len(word) == 1


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Sentence spans (start, end) split on terminal punctuation.

    Splits after runs of {. ! ? ...} when followed by whitespace plus an
    uppercase/digit start (or end of text); a '.' preceded by a known
    abbreviation or a single letter never splits.
    """
    spans: list[tuple[int, int]] = []
    n = len(text)
    start = 0
    i = 0
    while i < n:
        c = text[i]
        if c in _TERMINALS:
            run_end = i + 1
            while run_end < n and text[run_end] in _TERMINALS + "\"'”»)":
                run_end += 1
            if c == "." and text[i : i + 1] == "." and run_end == i + 1 and _preceded_by_abbreviation(text, i):
                i += 1
                continue
            if _is_sentence_break(text, run_end):
                spans.append((start, run_end))
                start = run_end
                i = run_end
                continue
        i += 1
    if start < n and text[start:].strip():
        spans.append((start, n))
    # trim whitespace off each span
    trimmed = []
    for s, e in spans:
        while s < e and text[s].isspace():
            s += 1
        while e > s and text[e - 1].isspace():
            e -= 1
        if s < e:
            trimmed.append((s, e))
    return trimmed


def sentence_texts(text: str) -> list[str]:
    return [text[s:e] for s, e in split_sentences(text)]


# Coordinating conjunctions per language, used for clause boundaries and for
# the comma+conjunction clause-initial rule.
COORDINATING_CONJUNCTIONS: dict[str, frozenset[str]] = {
    "en": frozenset("and but or nor so yet".split()),
    "fr": frozenset("et mais ou donc car ni or".split()),
    "es": frozenset("y e o u pero sino ni".split()),
    "de": frozenset("und aber oder denn sondern".split()),
    "it": frozenset("e ed o ma però".split()),
    "ar": frozenset(),
}


def clause_spans(text: str, language: str = "en") -> list[tuple[int, int]]:
    """Clause spans split on commas, semicolons, dashes, and coordinating
    conjunctions."""
    conj = COORDINATING_CONJUNCTIONS.get(language, frozenset())
    tokens = tokenize(text)
    cuts = set()
    for m in re.finditer(r"[,;:–—]|--", text):
        cuts.add(m.end())
    for tok in tokens:
        if tok.text.lower() in conj and tok.start > 0:
            cuts.add(tok.start)
    bounds = sorted(c for c in cuts if 0 < c < len(text))
    spans = []
    prev = 0
    for cut in bounds + [len(text)]:
        s, e = prev, cut
        while s < e and (text[s].isspace() or text[s] in ",;:"):
            s += 1
        while e > s and (text[e - 1].isspace() or text[e - 1] in ",;:–—-"):
            e -= 1
        if s < e and _WORD_RE.search(text[s:e]):
            spans.append((s, e))
        prev = cut
    return spans


def quoted_spans(text: str) -> list[tuple[int, int]]:
    """Character ranges lying between paired double quotes."""
    positions = [m.start() for m in re.finditer(r'["“”«»]', text)]
    spans = []
    for k in range(0, len(positions) - 1, 2):
        spans.append((positions[k], positions[k + 1] + 1))
    return spans


def strip_terminal_punct(text: str, span: tuple[int, int]) -> tuple[int, int]:
    s, e = span
    while e > s and text[e - 1] in _TERMINALS + ",;: " + _QUOTE_CHARS:
        e -= 1
    return s, e
