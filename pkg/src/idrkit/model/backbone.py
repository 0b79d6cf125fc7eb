"""Backbone port: tokenized text with span markers in, token states out.

The shipped implementation is a deterministic stub: each (token, position)
pair is hashed into a seeded Gaussian embedding, so every downstream number
is reproducible without any pretrained model. A real audio-language backbone
plugs in behind the same interface.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol

import numpy as np

S1_OPEN, S1_CLOSE = "<S1>", "</S1>"
S2_OPEN, S2_CLOSE = "<S2>", "</S2>"
_MARKERS = (S1_OPEN, S1_CLOSE, S2_OPEN, S2_CLOSE)


class MarkerError(ValueError):
    pass


@dataclass
class TokenStates:
    H: np.ndarray  # (T, d) float64
    marker_spans: tuple[int, int, int, int]  # s1_start, s1_end, s2_start, s2_end

    def __post_init__(self):
        t = self.H.shape[0]
        s1s, s1e, s2s, s2e = self.marker_spans
        if not (0 <= s1s < s1e <= t and 0 <= s2s < s2e <= t):
            raise ValueError(f"marker spans {self.marker_spans} out of range for T={t}")
        if s1e > s2s:
            raise ValueError("span 1 must precede span 2")

    @property
    def span1(self) -> np.ndarray:
        return self.H[self.marker_spans[0] : self.marker_spans[1]]

    @property
    def span2(self) -> np.ndarray:
        return self.H[self.marker_spans[2] : self.marker_spans[3]]


def mark_pair(arg1_text: str, arg2_text: str) -> str:
    return f"{S1_OPEN} {arg1_text} {S1_CLOSE} {S2_OPEN} {arg2_text} {S2_CLOSE}"


def tokenize_with_markers(text: str) -> tuple[list[str], tuple[int, int, int, int]]:
    """Whitespace tokenization; returns tokens plus the content spans (half
    open, marker tokens excluded) of the two marked regions."""
    tokens = text.split()
    positions = {}
    for marker in _MARKERS:
        occurrences = [i for i, t in enumerate(tokens) if t == marker]
        if len(occurrences) != 1:
            raise MarkerError(f"marker {marker} must occur exactly once "
                              f"(found {len(occurrences)})")
        positions[marker] = occurrences[0]
    s1s, s1e = positions[S1_OPEN] + 1, positions[S1_CLOSE]
    s2s, s2e = positions[S2_OPEN] + 1, positions[S2_CLOSE]
    if not (s1s < s1e and s2s < s2e):
        raise MarkerError("marked spans must be non-empty")
    if s1e >= s2s:
        raise MarkerError("span 1 must close before span 2 opens")
    return tokens, (s1s, s1e, s2s, s2e)


class BackbonePort(Protocol):
    def encode(self, tokens: list[str],
               marker_spans: tuple[int, int, int, int],
               logmel_pair=None) -> TokenStates: ...


class StubBackbone:
    """Deterministic hash-embedding backbone for tests and desk-scale runs."""

    def __init__(self, d: int = 64, seed: int = 0):
        self.d = d
        self.seed = seed

    def _row(self, token: str, position: int) -> np.ndarray:
        key = f"{self.seed}|{position}|{token}".encode("utf-8")
        digest = hashlib.blake2b(key, digest_size=8).digest()
        rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest, "little")))
        return rng.standard_normal(self.d)

    def encode(self, tokens: list[str],
               marker_spans: tuple[int, int, int, int],
               logmel_pair=None) -> TokenStates:
        # the stub ignores the audio; a real backbone consumes it
        h = np.stack([self._row(tok, i) for i, tok in enumerate(tokens)])
        return TokenStates(H=h, marker_spans=marker_spans)

    def encode_text(self, marked_text: str, logmel_pair=None) -> TokenStates:
        tokens, spans = tokenize_with_markers(marked_text)
        return self.encode(tokens, spans, logmel_pair)
