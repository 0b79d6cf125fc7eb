import numpy as np
import pytest

from idrkit.dataset import evaluate
from idrkit.ingest import RelationLabel
from idrkit.model.fusion import FusionConfig, init_params
from idrkit.model.training import (AdamW, DivergenceError, TrainConfig,
                                   _accumulate_window, class_weights,
                                   clip_global_norm, fit, lr_at_step, predict)
from idrkit.synthdata import make_samples

LABELS = [lab.value for lab in RelationLabel]


def toy_config(**kw):
    base = dict(d=16, proj_dim=16, attn_heads=2, n_mels=6, conv_channels=6)
    base.update(kw)
    return FusionConfig(**base)


class TestSchedule:
    def test_peak_at_end_of_warmup(self):
        total, warmup_ratio, peak = 200, 0.1, 3e-4
        warmup = int(round(warmup_ratio * total))
        assert lr_at_step(warmup, total, warmup_ratio, peak) == pytest.approx(peak)

    def test_zero_at_final_step(self):
        assert lr_at_step(200, 200, 0.1, 3e-4) == pytest.approx(
            3e-4 * 0.5 * (1 + np.cos(np.pi)), abs=1e-18)

    def test_linear_warmup(self):
        total, peak = 100, 1.0
        warmup = 10
        for step in range(1, warmup + 1):
            assert lr_at_step(step, total, 0.1, peak) == pytest.approx(
                peak * step / warmup)

    def test_monotone_decay_after_warmup(self):
        lrs = [lr_at_step(s, 100, 0.1, 1.0) for s in range(10, 101)]
        assert all(a >= b for a, b in zip(lrs, lrs[1:]))


class TestClassWeights:
    def test_balanced_labels_equal_weights(self):
        w = class_weights([0, 1, 2, 3] * 5, 4)
        assert np.allclose(w, 1.0)

    def test_inverse_frequency_formula(self):
        labels = [0] * 6 + [1] * 2 + [2] * 1 + [3] * 1
        w = class_weights(labels, 4)
        n = len(labels)
        assert w[0] == pytest.approx(n / (4 * 6))
        assert w[2] == pytest.approx(n / (4 * 1))

    def test_absent_class_weight_zero(self):
        w = class_weights([0, 0, 1], 4)
        assert w[2] == 0.0 and w[3] == 0.0


def test_clip_global_norm():
    grads = {"a": np.array([3.0, 4.0]), "b": np.array([0.0])}
    total = clip_global_norm(grads, 1.0)
    assert total == pytest.approx(5.0)
    norm_after = np.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
    assert norm_after == pytest.approx(1.0)


class TestFit:
    def make_data(self, n=40, cfg=None):
        cfg = cfg or toy_config()
        samples, labels = make_samples(n, cfg, seed=0)
        return cfg, samples[: int(0.8 * n)], samples[int(0.8 * n):]

    def test_seeded_rerun_bit_identical(self):
        cfg, train, val = self.make_data(24)
        tc = TrainConfig(seed=5, epochs=2, grad_accum=8, lr_heads=1e-3)
        r1 = fit(train, val, cfg, tc)
        r2 = fit(train, val, cfg, tc)
        for name, t in r1.params.named().items():
            assert np.array_equal(t.data, r2.params.named()[name].data), name
        assert r1.history == r2.history

    def test_separable_set_reaches_high_train_f1(self):
        cfg = toy_config()
        samples, labels = make_samples(200, cfg, seed=1)
        tc = TrainConfig(seed=0, epochs=7, grad_accum=8, lr_heads=1e-2,
                         patience=7)
        result = fit(samples, samples[:40], cfg, tc)
        preds = predict(result.params, cfg, samples)
        metrics = evaluate([LABELS[p] for p in preds],
                           [LABELS[s.label] for s in samples])
        assert metrics["macro_f1"] >= 0.95

    def test_divergence_aborts_with_last_finite(self):
        cfg, train, val = self.make_data(16)
        train[3].prosody1 = train[3].prosody1.copy()
        train[3].prosody1[0, 0] = np.nan
        tc = TrainConfig(seed=0, epochs=3, grad_accum=4)
        with pytest.raises(DivergenceError) as err:
            fit(train, val, cfg, tc)
        arrays = err.value.arrays
        assert all(np.all(np.isfinite(a)) for a in arrays.values())

    def test_empty_split_rejected(self):
        cfg, train, _val = self.make_data(8)
        with pytest.raises(ValueError):
            fit(train, [], cfg, TrainConfig())

    def test_checkpoints_written_and_best_restored(self, tmp_path):
        cfg, train, val = self.make_data(16)
        tc = TrainConfig(seed=2, epochs=2, grad_accum=8, lr_heads=1e-3)
        result = fit(train, val, cfg, tc, checkpoint_dir=tmp_path)
        assert (tmp_path / "epoch000.idrc").exists()
        assert (tmp_path / "best.idrc").exists()
        from idrkit.containers import read_checkpoint
        _cfg, tensors = read_checkpoint(tmp_path / "best.idrc")
        best = result.params.arrays()
        for name in best:
            assert np.array_equal(tensors[name], best[name])

    def test_lambda_lm_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(lambda_lm=0.5)


class TestAccumulation:
    def test_batch_order_invariance(self):
        cfg = toy_config(d=8, proj_dim=8, n_mels=4, conv_channels=4)
        samples, _ = make_samples(8, cfg, seed=3)
        params = init_params(cfg, np.random.Generator(np.random.PCG64(0)))
        tc = TrainConfig(grad_accum=8)
        w = np.ones(4)
        _loss1, g1 = _accumulate_window(params, cfg, samples, w, tc)
        perm = [samples[i] for i in [5, 2, 7, 0, 3, 6, 1, 4]]
        _loss2, g2 = _accumulate_window(params, cfg, perm, w, tc)
        for name in g1:
            assert np.max(np.abs(g1[name] - g2[name])) < 1e-10, name

    def test_contrastive_term_flows(self):
        cfg = toy_config(d=8, proj_dim=8, n_mels=4, conv_channels=4)
        samples, _ = make_samples(6, cfg, seed=4)
        params = init_params(cfg, np.random.Generator(np.random.PCG64(0)))
        tc = TrainConfig(grad_accum=6, lambda_contr=0.5)
        loss_with, g_with = _accumulate_window(params, cfg, samples,
                                               np.ones(4), tc)
        tc0 = TrainConfig(grad_accum=6, lambda_contr=0.0)
        loss_without, _g = _accumulate_window(params, cfg, samples, np.ones(4), tc0)
        assert np.isfinite(loss_with)
        assert loss_with != pytest.approx(loss_without)


class TestAdamWGroups:
    def test_stats_head_gets_higher_lr(self):
        cfg = toy_config(d=8, proj_dim=8, n_mels=4, conv_channels=4)
        params = init_params(cfg, np.random.Generator(np.random.PCG64(0)))
        tc = TrainConfig(lr_heads=5e-5, lr_stats_head=5e-4)
        opt = AdamW(params, tc)
        assert opt.group_lr_scale("stats_proj") == pytest.approx(10.0)
        assert opt.group_lr_scale("mlp_w1") == pytest.approx(1.0)

    def test_weight_decay_skips_norm_and_bias(self):
        cfg = toy_config(d=8, proj_dim=8, n_mels=4, conv_channels=4)
        params = init_params(cfg, np.random.Generator(np.random.PCG64(0)))
        assert params.no_decay("ln1_gain")
        assert params.no_decay("mlp_b1")
        assert params.no_decay("gamma")
        assert not params.no_decay("mlp_w1")
        assert not params.no_decay("stats_proj")
