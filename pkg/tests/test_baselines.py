import math

import numpy as np
import pytest

from idrkit.audio import WordTimestamp
from idrkit.baselines import (baseline_tokenize, logreg_fit,
                              prosodic_features, tfidf_fit,
                              tfidf_fit_transform, tfidf_pair_features)
from idrkit.prosody import D_P, ProsodyMatrix

RNG = np.random.Generator(np.random.PCG64(17))


class TestTfidf:
    def test_term_in_every_doc_idf_one(self):
        model = tfidf_fit(["cat dog", "cat bird", "cat fish"])
        assert model.idf[model.vocabulary["cat"]] == pytest.approx(1.0)

    def test_raw_counts_before_normalization(self):
        model = tfidf_fit(["a a b"])
        x = np.zeros(len(model.vocabulary))
        for tok in baseline_tokenize("a a b"):
            x[model.vocabulary[tok]] += 1
        assert x[model.vocabulary["a"]] == 2.0
        assert x[model.vocabulary["b"]] == 1.0

    def test_three_doc_hand_computation(self):
        docs = ["sun moon", "sun star", "rain"]
        model, vectors = tfidf_fit_transform(docs)
        n = 3
        idf = {"sun": math.log((1 + n) / (1 + 2)) + 1,
               "moon": math.log((1 + n) / (1 + 1)) + 1,
               "star": math.log((1 + n) / (1 + 1)) + 1,
               "rain": math.log((1 + n) / (1 + 1)) + 1}
        raw0 = {"sun": idf["sun"], "moon": idf["moon"]}
        norm0 = math.sqrt(sum(v * v for v in raw0.values()))
        for term, value in raw0.items():
            j = model.vocabulary[term]
            assert vectors[0, j] == pytest.approx(value / norm0)
        assert vectors[2, model.vocabulary["rain"]] == pytest.approx(1.0)

    def test_unit_norm_or_zero(self):
        model, vectors = tfidf_fit_transform(
            ["alpha beta", "gamma delta", "epsilon"])
        norms = np.linalg.norm(vectors, axis=1)
        assert np.allclose(norms, 1.0)
        empty = model.transform(["zzz unseen"])
        assert np.linalg.norm(empty) == 0.0

    def test_empty_vocabulary_rejected(self):
        with pytest.raises(ValueError):
            tfidf_fit(["...", "!!!"])

    def test_pair_features_concatenated(self):
        model = tfidf_fit(["one two", "three four"])
        x = tfidf_pair_features(model, ["one"], ["three"])
        assert x.shape == (1, 2 * len(model.vocabulary))


def separable_data(n=60, seed=2):
    rng = np.random.Generator(np.random.PCG64(seed))
    centers = np.array([[4.0, 0.0], [0.0, 4.0], [-4.0, 0.0], [0.0, -4.0]])
    x = np.vstack([centers[i % 4] + 0.2 * rng.standard_normal(2)
                   for i in range(n)])
    y = np.array([i % 4 for i in range(n)])
    return x, y


class TestLogReg:
    def test_separable_training_accuracy(self):
        x, y = separable_data()
        model = logreg_fit(x, y, reg_lambda=1e-4)
        assert (model.predict(x) == y).mean() == 1.0

    def test_large_lambda_prior_argmax(self):
        x, y = separable_data()
        y = y.copy()
        y[: len(y) // 2] = 1  # make class 1 the majority
        model = logreg_fit(x, y, reg_lambda=1e6)
        assert np.abs(model.weights).max() < 1e-3
        assert (model.predict(x) == 1).all()

    def test_convexity_init_independent(self):
        from idrkit.baselines import _logreg_objective
        x, y = separable_data(40)
        finals = []
        for seed in range(3):
            rng = np.random.Generator(np.random.PCG64(seed))
            init = (rng.standard_normal((4, 2)), rng.standard_normal(4))
            model = logreg_fit(x, y, reg_lambda=0.1, init=init)
            finals.append(_logreg_objective(model.weights, model.bias, x, y,
                                            np.ones(len(y)), 0.1))
        assert max(finals) - min(finals) < 1e-6

    def test_objective_decreases(self):
        from idrkit.baselines import _logreg_objective
        x, y = separable_data(40)
        w = np.zeros((4, 2))
        b = np.zeros(4)
        obj0 = _logreg_objective(w, b, x, y, np.ones(len(y)), 1e-3)
        model = logreg_fit(x, y, reg_lambda=1e-3)
        obj1 = _logreg_objective(model.weights, model.bias, x, y,
                                 np.ones(len(y)), 1e-3)
        assert obj1 < obj0

    def test_class_weights_shift_decision(self):
        x, y = separable_data(40)
        heavy = np.array([10.0, 1.0, 1.0, 1.0])
        model = logreg_fit(x, y, class_weights=heavy, reg_lambda=1e-3)
        assert (model.predict(x) == y).mean() == 1.0

    def test_deterministic(self):
        x, y = separable_data(40)
        m1 = logreg_fit(x, y)
        m2 = logreg_fit(x, y)
        assert np.array_equal(m1.weights, m2.weights)
        assert np.array_equal(m1.bias, m2.bias)


def mat_for(durations, values):
    words = []
    t = 0.0
    for d in durations:
        words.append(WordTimestamp("w", t, t + d))
        t += d
    rows = np.tile(np.asarray(values, dtype=float).reshape(-1, 1), (1, D_P))
    return ProsodyMatrix(rows, words)


class TestProsodicFeatures:
    def test_dimension(self):
        m = mat_for([0.5, 0.5], [1.0, 2.0])
        assert prosodic_features(m, m).shape == (37,)

    def test_identical_args_duration_ratio_one(self):
        m = mat_for([0.5, 0.5], [1.0, 2.0])
        assert prosodic_features(m, m)[-1] == pytest.approx(1.0)

    def test_single_word_std_zero(self):
        m1 = mat_for([0.6], [3.0])
        m2 = mat_for([0.4, 0.4], [1.0, 5.0])
        vec = prosodic_features(m1, m2)
        assert np.allclose(vec[D_P : 2 * D_P], 0.0)

    def test_two_word_hand_aggregation(self):
        m1 = mat_for([0.5, 0.3], [1.0, 3.0])
        m2 = mat_for([0.2, 0.2], [2.0, 6.0])
        vec = prosodic_features(m1, m2)
        assert np.allclose(vec[:D_P], 2.0)            # mean of 1, 3
        assert np.allclose(vec[D_P:2 * D_P], 1.0)      # population std of 1, 3
        assert np.allclose(vec[2 * D_P:3 * D_P], 4.0)  # mean of 2, 6
        assert np.allclose(vec[3 * D_P:4 * D_P], 2.0)  # std of 2, 6
        assert vec[-1] == pytest.approx(0.4 / 0.8)

    def test_missing_prosody_rejected(self):
        m = mat_for([0.5], [1.0])
        empty = ProsodyMatrix(np.zeros((0, D_P)), [])
        with pytest.raises(ValueError):
            prosodic_features(m, empty)
