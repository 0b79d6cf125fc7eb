"""Mapping text spans to time spans via word timestamps, and sample-accurate
audio cutting.

Audio I/O is WAV PCM 16-bit only; everything is resampled to 16 kHz mono at
ingest so cuts never resample.
"""

from __future__ import annotations

import json
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .text import normalize_token

CANONICAL_RATE = 16_000

# Maximum normalized token edit distance for a span to count as aligned.
ALIGN_THRESHOLD = 0.3


class UnalignableSpanError(ValueError):
    pass


class AudioRangeError(ValueError):
    pass


@dataclass(frozen=True)
class WordTimestamp:
    word: str
    start: float
    end: float

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"word {self.word!r}: end {self.end} < start {self.start}")


@dataclass(frozen=True)
class TimeSpan:
    start: float
    end: float

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError(f"end {self.end} <= start {self.start}")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass
class AudioClip:
    samples: np.ndarray  # float64 mono in [-1, 1]
    sample_rate: int
    origin: tuple[str, TimeSpan] | None = None

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def load_word_timestamps(path: str | Path) -> list[WordTimestamp]:
    """Word-timestamp JSONL: one {word, start, end} object per line."""
    words = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        row = json.loads(line)
        try:
            words.append(WordTimestamp(str(row["word"]), float(row["start"]),
                                       float(row["end"])))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"{path}, line {lineno}: {exc}") from None
    for a, b in zip(words, words[1:]):
        if b.start < a.start:
            raise ValueError(f"word starts not non-decreasing at {b.word!r}")
    return words


def save_word_timestamps(words: list[WordTimestamp], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for w in words:
            fh.write(json.dumps({"word": w.word, "start": w.start, "end": w.end},
                                ensure_ascii=False) + "\n")


def _token_distance(a: str, b: str) -> float:
    """Normalized character edit distance between two tokens, in [0, 1]."""
    if a == b:
        return 0.0
    la, lb = len(a), len(b)
    if la == 0 or lb == 0:
        return 1.0
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        cur = [i] + [0] * lb
        for j in range(1, lb + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[lb] / max(la, lb)


def _sequence_cost(span_toks: list[str], window_toks: list[str]) -> float:
    """Edit distance between token sequences where substitution costs the
    normalized character distance of the two tokens."""
    n, m = len(span_toks), len(window_toks)
    prev = [float(j) for j in range(m + 1)]
    for i in range(1, n + 1):
        cur = [float(i)] + [0.0] * m
        for j in range(1, m + 1):
            sub = prev[j - 1] + _token_distance(span_toks[i - 1], window_toks[j - 1])
            cur[j] = min(prev[j] + 1.0, cur[j - 1] + 1.0, sub)
        prev = cur
    return prev[m]


def align_span_to_time(span_text: str, words: list[WordTimestamp],
                       threshold: float = ALIGN_THRESHOLD) -> TimeSpan:
    """Find the contiguous word subsequence minimizing normalized token edit
    distance to the span; the time span runs from the first matched word's
    start to the last matched word's end."""
    if not words:
        raise UnalignableSpanError("no word timestamps")
    span_toks = [normalize_token(t) for t in span_text.split()]
    span_toks = [t for t in span_toks if t]
    if not span_toks:
        raise UnalignableSpanError("span has no alignable tokens")
    word_toks = [normalize_token(w.word) for w in words]

    n = len(span_toks)
    slack = max(2, n // 2)
    best = (float("inf"), 0, 0)
    for i in range(len(words)):
        for length in range(max(1, n - slack), min(len(words) - i, n + slack) + 1):
            window = word_toks[i : i + length]
            cost = _sequence_cost(span_toks, window)
            key = (cost, i, i + length)
            if key < best:
                best = key
    cost, i, j = best
    if cost / n > threshold:
        raise UnalignableSpanError(
            f"best alignment cost {cost / n:.3f} exceeds threshold {threshold}")
    return TimeSpan(words[i].start, words[j - 1].end)


def read_wav(path: str | Path) -> AudioClip:
    """Read a PCM 16-bit WAV; downmix to mono and resample to 16 kHz."""
    with wave.open(str(path), "rb") as wf:
        if wf.getsampwidth() != 2:
            raise ValueError(f"{path}: only 16-bit PCM supported, "
                             f"got sample width {wf.getsampwidth()}")
        rate = wf.getframerate()
        n_channels = wf.getnchannels()
        frames = wf.readframes(wf.getnframes())
    data = np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32768.0
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    if rate != CANONICAL_RATE:
        data = resample_poly(data, CANONICAL_RATE, rate)
        rate = CANONICAL_RATE
    return AudioClip(samples=data, sample_rate=rate)


def write_wav(clip: AudioClip, path: str | Path) -> None:
    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate)
        wf.writeframes(pcm.tobytes())


def cut_audio(clip: AudioClip, span: TimeSpan, talk_id: str = "") -> AudioClip:
    """Sample-accurate slice of the clip; no resampling."""
    sr = clip.sample_rate
    start_idx = int(round(span.start * sr))
    end_idx = int(round(span.end * sr))
    if span.start < 0 or end_idx > len(clip.samples):
        raise AudioRangeError(
            f"span [{span.start}, {span.end}]s outside clip of "
            f"{len(clip.samples) / sr:.3f}s")
    return AudioClip(samples=clip.samples[start_idx:end_idx].copy(),
                     sample_rate=sr, origin=(talk_id, span))


def energy_anomaly_flag(clip: AudioClip) -> bool:
    """QC flag for clips that are near-silent or clipped."""
    if len(clip.samples) == 0:
        return True
    rms = float(np.sqrt(np.mean(clip.samples ** 2)))
    clipped_frac = float(np.mean(np.abs(clip.samples) >= 0.999))
    return rms < 1e-4 or clipped_frac > 0.01
