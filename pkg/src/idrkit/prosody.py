"""Per-word prosodic descriptors and log-mel features.

Each word gets a 9-dimensional descriptor covering pitch, energy, and timing:

  0. f0_mean     mean fundamental frequency over voiced frames (Hz)
  1. f0_std      standard deviation of f0 over voiced frames (Hz)
  2. f0_slope    linear-fit slope of f0 against time (Hz/s)
  3. energy_mean mean frame RMS
  4. energy_std  standard deviation of frame RMS
  5. duration    word duration (s)
  6. pause_before gap to the previous word (s, 0 at the start)
  7. pause_after  gap to the next word (s, 0 at the end)
  8. voiced_ratio voiced frames / analysis frames

Pitch uses the cumulative mean normalized difference function with a voicing
threshold of 0.45 and parabolic interpolation of the period; the f0 track is
median-3 filtered. Unvoiced words have all f0 features equal to 0; the
voiced_ratio dimension separates them from genuinely low-pitch words.

Raw descriptors are z-normalized per talk (speaker baselines dominate raw
prosody), via ProsodyNormalizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio import AudioClip, WordTimestamp

D_P = 9
FEATURE_NAMES = ("f0_mean", "f0_std", "f0_slope", "energy_mean", "energy_std",
                 "duration", "pause_before", "pause_after", "voiced_ratio")

# Framing: energy frames 25 ms / 10 ms hop; pitch frames 40 ms / 10 ms hop
# (the pitch frame must hold the integration window plus the longest lag).
ENERGY_WIN_S = 0.025
PITCH_WIN_S = 0.040
HOP_S = 0.010

F0_MIN = 80.0
F0_MAX = 400.0
VOICING_THRESHOLD = 0.45

# Log-mel frontend: 25 ms window, 10 ms hop, 128 mel bins, natural log of the
# mel power floored at 1e-10.
N_MELS = 128
MEL_FMAX = 8000.0
LOGMEL_FLOOR = 1e-10


@dataclass
class ProsodyMatrix:
    rows: np.ndarray  # (W, 9) float64
    word_refs: list[WordTimestamp]

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2 or self.rows.shape[1] != D_P:
            raise ValueError(f"expected (W, {D_P}) matrix, got {self.rows.shape}")
        if self.rows.shape[0] != len(self.word_refs):
            raise ValueError("row count must equal word count")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("prosody rows contain NaN/Inf")


@dataclass
class LogMel:
    frames: np.ndarray  # (F, T) float64
    mask: np.ndarray    # (T,) bool, True = real frame

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape[0] != self.frames.shape[1]:
            raise ValueError("mask length must equal frame count")
        if not np.all(np.isfinite(self.frames[:, self.mask])):
            raise ValueError("unmasked log-mel frames must be finite")


def _yin_f0(frame: np.ndarray, sr: int) -> tuple[float, bool]:
    """f0 of one analysis frame via the cumulative mean normalized difference
    function; returns (f0_hz, voiced)."""
    tau_min = max(2, int(sr / F0_MAX))
    tau_max = int(sr / F0_MIN)
    w = int(round(sr * 0.020))
    if len(frame) < w + tau_max:
        w = max(2, len(frame) - tau_max)
    if w < 2:
        return 0.0, False

    base = frame[:w]
    windows = np.lib.stride_tricks.sliding_window_view(frame, w)[: tau_max + 1]
    diffs = ((windows - base[None, :]) ** 2).sum(axis=1)
    cumsum = np.cumsum(diffs[1:])
    cmndf = np.ones(tau_max + 1)
    nonzero = cumsum > 0
    taus = np.arange(1, tau_max + 1)
    cmndf[1:][nonzero] = diffs[1:][nonzero] * taus[nonzero] / cumsum[nonzero]

    tau_star = None
    for tau in range(tau_min, tau_max + 1):
        if cmndf[tau] < VOICING_THRESHOLD:
            while tau + 1 <= tau_max and cmndf[tau + 1] < cmndf[tau]:
                tau += 1
            tau_star = tau
            break
    if tau_star is None:
        k = int(np.argmin(cmndf[tau_min : tau_max + 1])) + tau_min
        return float(sr / k), False

    # parabolic interpolation of the difference-function minimum
    t = tau_star
    if 1 <= t < tau_max:
        a, b, c = diffs[t - 1], diffs[t], diffs[t + 1]
        denom = a - 2 * b + c
        if denom > 0:
            t = t + 0.5 * (a - c) / denom
    return float(sr / t), True


def _median3(x: np.ndarray) -> np.ndarray:
    if len(x) < 3:
        return x.copy()
    out = x.copy()
    out[1:-1] = np.median(np.stack([x[:-2], x[1:-1], x[2:]]), axis=0)
    return out


def _word_frames(clip: AudioClip, word: WordTimestamp, win_s: float):
    """Frame starts (sample indices) fully inside the word; a word shorter
    than one frame yields the single nearest frame, clamped to the clip."""
    sr = clip.sample_rate
    win = int(round(win_s * sr))
    hop = int(round(HOP_S * sr))
    s = int(round(word.start * sr))
    e = int(round(word.end * sr))
    s = max(0, min(s, len(clip.samples)))
    e = max(0, min(e, len(clip.samples)))
    if e - s >= win:
        return [s + k * hop for k in range((e - s - win) // hop + 1)], win
    center = (s + e) // 2
    start = max(0, min(center - win // 2, len(clip.samples) - win))
    if len(clip.samples) < win:
        return [0], len(clip.samples)
    return [start], win


def extract_prosody_raw(clip: AudioClip, words: list[WordTimestamp]) -> ProsodyMatrix:
    """Pre-normalization per-word descriptors (word times are clip-relative)."""
    sr = clip.sample_rate
    rows = np.zeros((len(words), D_P))
    for i, word in enumerate(words):
        starts, e_win = _word_frames(clip, word, ENERGY_WIN_S)
        rms = np.array([
            float(np.sqrt(np.mean(clip.samples[s : s + e_win] ** 2)))
            if e_win > 0 else 0.0
            for s in starts])

        p_starts, p_win = _word_frames(clip, word, PITCH_WIN_S)
        f0s, voiced = [], []
        for s in p_starts:
            frame = clip.samples[s : s + p_win]
            f0, v = _yin_f0(frame, sr)
            f0s.append(f0 if v else 0.0)
            voiced.append(v)
        f0s = _median3(np.array(f0s))
        voiced = np.array(voiced, dtype=bool)

        if voiced.any():
            vf = f0s[voiced]
            f0_mean = float(vf.mean())
            f0_std = float(vf.std())
            if voiced.sum() >= 2:
                times = (np.array(p_starts)[voiced] + p_win / 2) / sr
                f0_slope = float(np.polyfit(times, vf, 1)[0])
            else:
                f0_slope = 0.0
        else:
            f0_mean = f0_std = f0_slope = 0.0

        pause_before = max(0.0, word.start - words[i - 1].end) if i > 0 else 0.0
        pause_after = max(0.0, words[i + 1].start - word.end) if i + 1 < len(words) else 0.0
        rows[i] = [f0_mean, f0_std, f0_slope,
                   float(rms.mean()) if len(rms) else 0.0,
                   float(rms.std()) if len(rms) else 0.0,
                   word.end - word.start, pause_before, pause_after,
                   float(voiced.mean()) if len(voiced) else 0.0]
    return ProsodyMatrix(rows, list(words))


@dataclass
class ProsodyNormalizer:
    """Per-talk z-normalization of raw prosody rows."""

    mean: np.ndarray = field(default_factory=lambda: np.zeros(D_P))
    std: np.ndarray = field(default_factory=lambda: np.ones(D_P))

    @classmethod
    def fit(cls, matrices: list[ProsodyMatrix]) -> "ProsodyNormalizer":
        stacked = np.concatenate([m.rows for m in matrices if len(m.rows)], axis=0) \
            if any(len(m.rows) for m in matrices) else np.zeros((1, D_P))
        return cls(mean=stacked.mean(axis=0), std=stacked.std(axis=0))

    def transform(self, matrix: ProsodyMatrix) -> ProsodyMatrix:
        safe = np.where(self.std > 1e-8, self.std, 1.0)
        rows = (matrix.rows - self.mean) / safe
        rows[:, self.std <= 1e-8] = 0.0
        return ProsodyMatrix(rows, matrix.word_refs)


def extract_prosody(clip: AudioClip, words: list[WordTimestamp],
                    normalizer: ProsodyNormalizer | None = None) -> ProsodyMatrix:
    raw = extract_prosody_raw(clip, words)
    return normalizer.transform(raw) if normalizer is not None else raw


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, n_fft: int, sr: int, fmax: float) -> np.ndarray:
    """Triangular filters integrated over each FFT bin's frequency cell.

    Integrating the triangle over the cell (rather than point-sampling at the
    bin center) keeps every row non-zero even when triangles are narrower
    than the bin spacing; rows are normalized to sum to 1.
    """
    n_bins = n_fft // 2 + 1
    df = sr / n_fft
    edges_hz = _mel_to_hz(np.linspace(_hz_to_mel(0.0), _hz_to_mel(fmax), n_mels + 2))
    bank = np.zeros((n_mels, n_bins))

    def tri_integral(lo, c_lo, c_hi, hi, a, b):
        """Integral of the unit triangle (rising on [lo,c], falling on [c,hi])
        over [a, b]."""
        total = 0.0
        aa, bb = max(a, lo), min(b, c_lo)
        if bb > aa and c_lo > lo:
            # rising edge: (f - lo) / (c - lo)
            total += ((bb - lo) ** 2 - (aa - lo) ** 2) / (2 * (c_lo - lo))
        aa, bb = max(a, c_hi), min(b, hi)
        if bb > aa and hi > c_hi:
            total += ((hi - aa) ** 2 - (hi - bb) ** 2) / (2 * (hi - c_hi))
        return total

    for m in range(n_mels):
        lo, c, hi = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        for b in range(n_bins):
            cell_lo = max(0.0, b * df - df / 2)
            cell_hi = min(sr / 2, b * df + df / 2)
            if cell_hi <= lo or cell_lo >= hi:
                continue
            bank[m, b] = tri_integral(lo, c, c, hi, cell_lo, cell_hi)
        total = bank[m].sum()
        if total > 0:
            bank[m] /= total
    return bank


_BANK_CACHE: dict[tuple, np.ndarray] = {}


def _cached_bank(n_mels, n_fft, sr, fmax) -> np.ndarray:
    key = (n_mels, n_fft, sr, fmax)
    if key not in _BANK_CACHE:
        _BANK_CACHE[key] = mel_filterbank(n_mels, n_fft, sr, fmax)
    return _BANK_CACHE[key]


def compute_logmel(clip: AudioClip, n_mels: int = N_MELS) -> LogMel:
    """Log-mel frames: 25 ms Hann window, 10 ms hop, natural log of mel power
    floored at 1e-10. A clip shorter than one window yields a single
    zero-padded frame. The mask is all-true; padding happens at batching."""
    if clip.sample_rate != 16_000:
        raise ValueError(f"expected 16 kHz audio, got {clip.sample_rate}")
    sr = clip.sample_rate
    win = int(round(ENERGY_WIN_S * sr))
    hop = int(round(HOP_S * sr))
    x = np.asarray(clip.samples, dtype=np.float64)
    if len(x) < win:
        x = np.pad(x, (0, win - len(x)))
    n_frames = (len(x) - win) // hop + 1
    window = np.hanning(win + 1)[:win]
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx] * window
    spec = np.abs(np.fft.rfft(frames, n=win, axis=1)) ** 2  # (T, bins)
    bank = _cached_bank(n_mels, win, sr, MEL_FMAX)
    mel_power = spec @ bank.T  # (T, F)
    logmel = np.log(np.maximum(mel_power, LOGMEL_FLOOR)).T  # (F, T)
    return LogMel(frames=logmel, mask=np.ones(n_frames, dtype=bool))
