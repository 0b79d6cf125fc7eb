"""Independent oracles used across the test suite.

Everything here is deliberately brute-force or closed-form and shares no code
path with the implementations under test.
"""

from __future__ import annotations

import itertools

import numpy as np


def fd_gradients(loss_fn, params: dict, eps: float = 1e-4) -> dict:
    """Central finite differences of a scalar loss over every coordinate of
    every named parameter tensor (tensors are modified in place and
    restored)."""
    grads = {}
    for name, tensor in params.items():
        flat = tensor.data.reshape(-1)
        g = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = loss_fn()
            flat[i] = orig - eps
            lm = loss_fn()
            flat[i] = orig
            g[i] = (lp - lm) / (2 * eps)
        grads[name] = g.reshape(tensor.data.shape)
    return grads


def max_relative_error(analytic: dict, numeric: dict,
                       floor: float = 1e-6) -> float:
    worst = 0.0
    for name in analytic:
        a = analytic[name].reshape(-1)
        n = numeric[name].reshape(-1)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def brute_force_assignment(overlap: np.ndarray) -> set[tuple[int, int]]:
    """Max-total-overlap one-to-one assignment by enumerating permutations."""
    n, m = overlap.shape
    best, best_pairs = -1.0, set()
    smaller, larger = (n, m) if n <= m else (m, n)
    for combo in itertools.permutations(range(larger), smaller):
        pairs = [(i, combo[i]) if n <= m else (combo[i], i)
                 for i in range(smaller)]
        total = sum(overlap[i, j] for i, j in pairs)
        if total > best:
            best = total
            best_pairs = {(i, j) for i, j in pairs if overlap[i, j] > 0}
    return best_pairs


def char_edit_distance(a: str, b: str) -> int:
    dp = list(range(len(b) + 1))
    for i in range(1, len(a) + 1):
        prev = dp[0]
        dp[0] = i
        for j in range(1, len(b) + 1):
            cur = dp[j]
            dp[j] = min(dp[j] + 1, dp[j - 1] + 1,
                        prev + (a[i - 1] != b[j - 1]))
            prev = cur
    return dp[len(b)]


def token_seq_cost(span: list[str], window: list[str]) -> float:
    """Reference token-sequence alignment cost: substitutions cost the
    normalized character distance, insertions/deletions cost 1."""
    n, m = len(span), len(window)
    dp = [[0.0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dp[i][0] = float(i)
    for j in range(1, m + 1):
        dp[0][j] = float(j)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            a, b = span[i - 1], window[j - 1]
            sub = 0.0 if a == b else (
                char_edit_distance(a, b) / max(len(a), len(b))
                if a and b else 1.0)
            dp[i][j] = min(dp[i - 1][j] + 1, dp[i][j - 1] + 1,
                           dp[i - 1][j - 1] + sub)
    return dp[n][m]


def best_window_by_enumeration(span_toks: list[str],
                               word_toks: list[str]) -> tuple[float, int, int]:
    """Exhaustive search over every contiguous window of the word sequence."""
    best = (float("inf"), 0, 0)
    for i in range(len(word_toks)):
        for j in range(i + 1, len(word_toks) + 1):
            cost = token_seq_cost(span_toks, word_toks[i:j])
            if (cost, i, j) < best:
                best = (cost, i, j)
    return best


def exhaustive_split_optimum(talk_class: np.ndarray, ratios) -> float:
    """Minimum over all talk->split assignments of the max per-(split, class)
    deviation from the ideal counts; ratio-0 splits must stay empty and
    ratio>0 splits non-empty."""
    n_talks = talk_class.shape[0]
    ideal = np.outer(np.asarray(ratios), talk_class.sum(axis=0))
    n = 3 ** n_talks
    digits = np.empty((n, n_talks), dtype=np.int8)
    v = np.arange(n)
    for t in range(n_talks):
        digits[:, t] = v % 3
        v = v // 3
    valid = np.ones(n, dtype=bool)
    for s in range(3):
        used = (digits == s).any(axis=1)
        valid &= used if ratios[s] > 0 else ~used
    devs = np.zeros(n)
    for s in range(3):
        counts = (digits == s).astype(np.float64) @ talk_class
        devs = np.maximum(devs, np.abs(counts - ideal[s]).max(axis=1))
    devs[~valid] = np.inf
    return float(devs.min())


def dominant_frequency(samples: np.ndarray, sr: int) -> float:
    spec = np.abs(np.fft.rfft(samples))
    spec[0] = 0.0
    return float(np.argmax(spec) * sr / len(samples))
