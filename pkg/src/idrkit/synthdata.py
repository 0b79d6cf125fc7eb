"""Synthetic, linearly separable 4-class sets for trainer sanity checks.

Each class gets a disjoint vocabulary, so both the stub-backbone fusion model
and the TF-IDF baseline can reach perfect training accuracy.
"""

from __future__ import annotations

import numpy as np

from .model.backbone import StubBackbone, mark_pair, tokenize_with_markers
from .model.fusion import FusionConfig, Sample
from .prosody import LogMel

CLASS_VOCAB = [
    ["amber", "basalt", "cedar", "dune"],
    ["ember", "fjord", "garnet", "heath"],
    ["indigo", "jasper", "kelp", "larch"],
    ["maple", "nickel", "onyx", "pearl"],
]


def make_texts(n: int, seed: int = 0) -> tuple[list[tuple[str, str]], list[int]]:
    rng = np.random.Generator(np.random.PCG64(seed))
    pairs, labels = [], []
    for i in range(n):
        label = i % 4
        vocab = CLASS_VOCAB[label]
        def phrase():
            k = int(rng.integers(2, 5))
            return " ".join(vocab[int(rng.integers(len(vocab)))]
                            for _ in range(k))
        pairs.append((phrase(), phrase()))
        labels.append(label)
    return pairs, labels


def make_samples(n: int, config: FusionConfig, seed: int = 0,
                 backbone_seed: int = 7) -> tuple[list, list[int]]:
    pairs, labels = make_texts(n, seed)
    rng = np.random.Generator(np.random.PCG64(seed + 1))
    backbone = StubBackbone(d=config.d, seed=backbone_seed)
    samples = []
    for (a1, a2), label in zip(pairs, labels):
        tokens, spans = tokenize_with_markers(mark_pair(a1, a2))
        ts = backbone.encode(tokens, spans)
        w1, w2 = len(a1.split()), len(a2.split())
        t1, t2 = int(rng.integers(4, 9)), int(rng.integers(4, 9))
        samples.append(Sample(
            token_states=ts,
            prosody1=rng.standard_normal((w1, config.d_p)) * 0.1,
            prosody2=rng.standard_normal((w2, config.d_p)) * 0.1,
            logmel1=LogMel(rng.standard_normal((config.n_mels, t1)),
                           np.ones(t1, dtype=bool)),
            logmel2=LogMel(rng.standard_normal((config.n_mels, t2)),
                           np.ones(t2, dtype=bool)),
            label=label))
    return samples, labels
