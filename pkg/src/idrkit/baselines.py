"""Non-pretrained baselines: TF-IDF + multinomial logistic regression over
argument texts, aggregated prosodic features + logistic regression, and their
concatenation.

The tokenizer is deliberately language-neutral (lowercase, Unicode word
boundaries, no stemming) so the same code serves EN/FR/ES/AR.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .prosody import D_P, ProsodyMatrix

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def baseline_tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class TfidfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray

    def transform(self, docs: list[str]) -> np.ndarray:
        x = np.zeros((len(docs), len(self.vocabulary)))
        for i, doc in enumerate(docs):
            for tok in baseline_tokenize(doc):
                j = self.vocabulary.get(tok)
                if j is not None:
                    x[i, j] += 1.0
        x *= self.idf
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        np.divide(x, norms, out=x, where=norms > 0)
        return x


def tfidf_fit(docs: list[str]) -> TfidfModel:
    """tf = raw count; idf = ln((1+N)/(1+df)) + 1; rows L2-normalized."""
    if not docs:
        raise ValueError("no documents")
    vocab: dict[str, int] = {}
    df_counts: dict[str, int] = {}
    for doc in docs:
        seen = set(baseline_tokenize(doc))
        for tok in seen:
            if tok not in vocab:
                vocab[tok] = len(vocab)
            df_counts[tok] = df_counts.get(tok, 0) + 1
    if not vocab:
        raise ValueError("empty vocabulary")
    n = len(docs)
    idf = np.empty(len(vocab))
    for tok, j in vocab.items():
        idf[j] = np.log((1.0 + n) / (1.0 + df_counts[tok])) + 1.0
    return TfidfModel(vocabulary=vocab, idf=idf)


def tfidf_fit_transform(docs: list[str]) -> tuple[TfidfModel, np.ndarray]:
    model = tfidf_fit(docs)
    return model, model.transform(docs)


def tfidf_pair_features(model: TfidfModel, arg1_texts: list[str],
                        arg2_texts: list[str]) -> np.ndarray:
    """Arg1 and Arg2 vectorized separately and concatenated."""
    return np.concatenate([model.transform(arg1_texts),
                           model.transform(arg2_texts)], axis=1)


@dataclass
class LogRegModel:
    weights: np.ndarray  # (classes, features)
    bias: np.ndarray     # (classes,)
    reg_lambda: float

    def decision(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights.T + self.bias

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision(x), axis=1)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        z = self.decision(x)
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)


def _logreg_objective(w, b, x, y, sample_w, lam):
    z = x @ w.T + b
    z -= z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    nll = (sample_w * (lse - z[np.arange(len(y)), y])).mean()
    return nll + 0.5 * lam * float((w ** 2).sum())


def logreg_fit(x: np.ndarray, y: np.ndarray, class_weights=None,
               reg_lambda: float = 1e-3, num_classes: int = 4,
               tol: float = 1e-6, max_iter: int = 20_000,
               init: tuple[np.ndarray, np.ndarray] | None = None) -> LogRegModel:
    """Multinomial cross-entropy + L2, minimized by full-batch gradient
    descent with backtracking line search until the gradient norm drops
    below `tol`. The objective is convex, so the optimum is init-independent.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    n = len(y)
    if class_weights is None:
        sample_w = np.ones(n)
    else:
        sample_w = np.asarray(class_weights, dtype=np.float64)[y]
    if init is None:
        w = np.zeros((num_classes, x.shape[1]))
        b = np.zeros(num_classes)
    else:
        w, b = init[0].copy(), init[1].copy()

    step = 1.0
    obj = _logreg_objective(w, b, x, y, sample_w, reg_lambda)
    for _ in range(max_iter):
        z = x @ w.T + b
        z -= z.max(axis=1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=1, keepdims=True)
        delta = p.copy()
        delta[np.arange(n), y] -= 1.0
        delta *= sample_w[:, None] / n
        gw = delta.T @ x + reg_lambda * w
        gb = delta.sum(axis=0)
        gnorm2 = float((gw ** 2).sum() + (gb ** 2).sum())
        if np.sqrt(gnorm2) < tol:
            break
        step = min(step * 2.0, 1e6)
        while True:
            w_new = w - step * gw
            b_new = b - step * gb
            obj_new = _logreg_objective(w_new, b_new, x, y, sample_w, reg_lambda)
            if obj_new <= obj - 1e-4 * step * gnorm2:
                break
            step *= 0.5
            if step < 1e-16:
                w_new, b_new, obj_new = w, b, obj
                break
        if obj_new >= obj and np.sqrt(gnorm2) >= tol and step < 1e-16:
            break
        w, b, obj = w_new, b_new, obj_new
    return LogRegModel(weights=w, bias=b, reg_lambda=reg_lambda)


def prosodic_features(arg1: ProsodyMatrix, arg2: ProsodyMatrix) -> np.ndarray:
    """Per-argument mean and std over words of the 9 descriptor dims, plus the
    arg2/arg1 duration ratio: 2*18 + 1 = 37 dims."""
    parts = []
    for m in (arg1, arg2):
        if len(m.rows) == 0:
            raise ValueError("missing prosody for an argument")
        parts.append(m.rows.mean(axis=0))
        parts.append(m.rows.std(axis=0))

    def dur(m: ProsodyMatrix) -> float:
        return m.word_refs[-1].end - m.word_refs[0].start

    d1, d2 = dur(arg1), dur(arg2)
    ratio = d2 / d1 if d1 > 0 else 0.0
    vec = np.concatenate(parts + [[ratio]])
    assert vec.shape == (4 * D_P + 1,)
    return vec
