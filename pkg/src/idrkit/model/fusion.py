"""Multimodal fusion architecture as explicit numerics.

Per argument span: token states are enriched with per-word prosody via
cross-attention, residual-scaled by a learnable gamma, layer-normalized, and
mean-pooled; a conv + masked-statistics summary of the log-mel frames is
added with a small fixed alpha. The two argument vectors are fused by
bidirectional cross-attention, passed through an MLP, l2-normalized, and
classified. The training objective is class-weighted cross-entropy.

All math runs in float64 through the reverse-mode engine in `autodiff`, so
gradients are analytic and finite-difference checkable.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..prosody import LogMel
from . import autodiff as ad
from .autodiff import Tensor
from .backbone import TokenStates


class EmptySegmentError(ValueError):
    pass


@dataclass
class FusionConfig:
    d: int = 64                 # backbone hidden size
    proj_dim: int = 512
    attn_heads: int = 4
    tau: float = 0.07           # stored for the optional contrastive term
    gamma_init: float = 0.1
    alpha: float = 0.1          # audio-stats residual scale, fixed
    d_p: int = 9
    num_classes: int = 4
    n_mels: int = 128
    conv_channels: int = 256
    conv_kernel: int = 3
    use_prosody: bool = True
    use_audio_stats: bool = True
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.proj_dim % self.attn_heads:
            raise ValueError("proj_dim must be divisible by attn_heads")
        if self.d % self.attn_heads:
            raise ValueError("d must be divisible by attn_heads")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "FusionConfig":
        return cls(**d)


@dataclass
class Sample:
    token_states: TokenStates
    prosody1: np.ndarray        # (W1, d_p)
    prosody2: np.ndarray
    logmel1: LogMel
    logmel2: LogMel
    label: int


# parameters updated with the audio-stats head learning rate
STATS_HEAD_PARAMS = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "stats_proj")

# parameters exempt from weight decay (norm gains/biases, biases, gamma)
_NO_DECAY_SUFFIXES = ("_b", "_bias", "_gain", "gamma", "_b1", "_b2")


@dataclass
class ModelParams:
    prosody_proj: Tensor
    prosody_wq: Tensor
    prosody_wk: Tensor
    prosody_wv: Tensor
    gamma: Tensor
    ln1_gain: Tensor
    ln1_bias: Tensor
    conv1_w: Tensor
    conv1_b: Tensor
    conv2_w: Tensor
    conv2_b: Tensor
    stats_proj: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor
    pair_wq: Tensor
    pair_wk: Tensor
    pair_wv: Tensor
    mlp_w1: Tensor
    mlp_b1: Tensor
    mlp_w2: Tensor
    mlp_b2: Tensor
    cls_w1: Tensor
    cls_b1: Tensor
    cls_w2: Tensor
    cls_b2: Tensor

    def named(self) -> dict[str, Tensor]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named().items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, t in self.named().items():
            if t.data.shape != arrays[name].shape:
                raise ValueError(f"{name}: shape {arrays[name].shape} does not "
                                 f"match {t.data.shape}")
            if not np.all(np.isfinite(arrays[name])):
                raise ValueError(f"{name}: non-finite values")
            t.data = arrays[name].astype(np.float64).copy()

    def zero_grads(self) -> None:
        for t in self.named().values():
            t.grad = None

    def no_decay(self, name: str) -> bool:
        return any(name.endswith(s) for s in _NO_DECAY_SUFFIXES) or "ln" in name


def init_params(config: FusionConfig, rng: np.random.Generator) -> ModelParams:
    d, p, c, k = config.d, config.proj_dim, config.conv_channels, config.conv_kernel

    def mat(rows, cols):
        return Tensor(rng.standard_normal((rows, cols)) / np.sqrt(rows),
                      requires_grad=True)

    def vec(n, value=0.0):
        return Tensor(np.full(n, value), requires_grad=True)

    return ModelParams(
        prosody_proj=mat(config.d_p, d),
        prosody_wq=mat(d, d), prosody_wk=mat(d, d), prosody_wv=mat(d, d),
        gamma=Tensor(np.array(config.gamma_init), requires_grad=True),
        ln1_gain=vec(d, 1.0), ln1_bias=vec(d),
        conv1_w=Tensor(rng.standard_normal((c, config.n_mels, k))
                       / np.sqrt(config.n_mels * k), requires_grad=True),
        conv1_b=vec(c),
        conv2_w=Tensor(rng.standard_normal((c, c, k)) / np.sqrt(c * k),
                       requires_grad=True),
        conv2_b=vec(c),
        stats_proj=mat(2 * c, d),
        ln2_gain=vec(d, 1.0), ln2_bias=vec(d),
        pair_wq=mat(d, p), pair_wk=mat(d, p), pair_wv=mat(d, p),
        mlp_w1=mat(2 * p, p), mlp_b1=vec(p),
        mlp_w2=mat(p, p), mlp_b2=vec(p),
        cls_w1=mat(p, p), cls_b1=vec(p),
        cls_w2=mat(p, config.num_classes), cls_b2=vec(config.num_classes),
    )


def multihead_cross_attention(queries, keys_values, wq, wk, wv, heads: int):
    """Scaled dot-product cross-attention; queries (Tq, d_q) attend over
    keys_values (Tk, d_kv); output (Tq, d_out) with d_out = wq.shape[1]."""
    queries = ad.as_tensor(queries)
    keys_values = ad.as_tensor(keys_values)
    if queries.data.shape[0] == 1 and keys_values.data.shape[0] == 1:
        # softmax over a single key is exactly 1 for every head, so the
        # output is the value projection; Q/K receive zero gradient either way
        out = ad.matmul(keys_values, wv)
        weights = Tensor(np.ones((heads, 1, 1)))
        return out, weights
    q = ad.matmul(queries, wq)
    k = ad.matmul(keys_values, wk)
    v = ad.matmul(keys_values, wv)
    tq, d_out = q.data.shape
    tk = k.data.shape[0]
    dh = d_out // heads
    qh = ad.transpose(ad.reshape(q, (tq, heads, dh)), (1, 0, 2))
    kh = ad.transpose(ad.reshape(k, (tk, heads, dh)), (1, 0, 2))
    vh = ad.transpose(ad.reshape(v, (tk, heads, dh)), (1, 0, 2))
    scores = ad.mul(ad.matmul(qh, ad.transpose(kh, (0, 2, 1))), 1.0 / np.sqrt(dh))
    weights = ad.softmax(scores, axis=-1)
    out = ad.matmul(weights, vh)  # (heads, Tq, dh)
    out = ad.reshape(ad.transpose(out, (1, 0, 2)), (tq, d_out))
    return out, weights


def prosody_attend_pool(h_span, prosody, params: ModelParams,
                        config: FusionConfig) -> Tensor:
    """Prosody cross-attention with learnable-gamma residual, layer norm, and
    mean pooling over the span tokens.

    With no prosody rows (or prosody ablated) the attention term is absent
    and the result is exactly pool(LN(h_span)).
    """
    h = ad.as_tensor(h_span)
    if h.data.ndim != 2 or h.data.shape[0] == 0:
        raise ValueError("h_span must be a non-empty (T, d) matrix")
    w = np.asarray(prosody).shape[0] if prosody is not None else 0
    if config.use_prosody and w > 0:
        p_hat = ad.matmul(ad.as_tensor(np.asarray(prosody, dtype=np.float64)),
                          params.prosody_proj)
        attended, _ = multihead_cross_attention(
            h, p_hat, params.prosody_wq, params.prosody_wk, params.prosody_wv,
            config.attn_heads)
        mixed = ad.add(h, ad.mul(params.gamma, attended))
    else:
        mixed = h
    normed = ad.layer_norm(mixed, params.ln1_gain, params.ln1_bias, config.ln_eps)
    return ad.tmean(normed, axis=0)


def stats_pool(logmel: LogMel, params: ModelParams,
               config: FusionConfig) -> Tensor:
    """Two 1-D convolutions over time, masked mean and masked (population)
    standard deviation over real frames, projected to the hidden size."""
    mask = np.asarray(logmel.mask, dtype=bool)
    n_real = int(mask.sum())
    if n_real == 0:
        raise EmptySegmentError("empty segment: no unmasked frames")
    m = mask.astype(np.float64)[None, :]
    x = ad.mul(ad.as_tensor(logmel.frames), m)
    h1 = ad.mul(ad.gelu(ad.conv1d_same(x, params.conv1_w, params.conv1_b)), m)
    h2 = ad.mul(ad.conv1d_same(h1, params.conv2_w, params.conv2_b), m)
    mean = ad.mul(ad.tsum(h2, axis=1), 1.0 / n_real)
    centered = ad.mul(ad.add(h2, ad.mul(ad.reshape(mean, (-1, 1)), -1.0)), m)
    var = ad.mul(ad.tsum(ad.mul(centered, centered), axis=1), 1.0 / n_real)
    std = ad.sqrt(var)
    stats = ad.concat([mean, std], axis=0)  # (2C,)
    return ad.linear(stats, params.stats_proj)


def fuse_audio(h: Tensor, a: Tensor | None, params: ModelParams,
               config: FusionConfig) -> Tensor:
    """h-tilde = LN(h + alpha * a); a missing or ablated leaves LN(h)."""
    if a is not None and config.use_audio_stats:
        mixed = ad.add(h, ad.mul(a, config.alpha))
    else:
        mixed = h
    return ad.layer_norm(mixed, params.ln2_gain, params.ln2_bias, config.ln_eps)


def pair_fuse_classify(h1: Tensor, h2: Tensor, params: ModelParams,
                       config: FusionConfig) -> tuple[Tensor, Tensor]:
    """Bidirectional cross-attention over the argument vectors, MLP, l2
    normalization, and the two-layer classifier. Returns (z, logits)."""
    q1 = ad.reshape(h1, (1, -1))
    q2 = ad.reshape(h2, (1, -1))
    u, _ = multihead_cross_attention(q1, q2, params.pair_wq, params.pair_wk,
                                     params.pair_wv, config.attn_heads)
    v, _ = multihead_cross_attention(q2, q1, params.pair_wq, params.pair_wk,
                                     params.pair_wv, config.attn_heads)
    uv = ad.concat([ad.reshape(u, (-1,)), ad.reshape(v, (-1,))], axis=0)
    hidden = ad.gelu(ad.linear(uv, params.mlp_w1, params.mlp_b1))
    y = ad.linear(hidden, params.mlp_w2, params.mlp_b2)
    z = ad.l2_normalize(y)
    c = ad.gelu(ad.linear(z, params.cls_w1, params.cls_b1))
    logits = ad.linear(c, params.cls_w2, params.cls_b2)
    return z, logits


def weighted_ce_loss(logits: Tensor, label: int,
                     class_weights: np.ndarray) -> Tensor:
    w = float(np.asarray(class_weights)[label])
    if w < 0:
        raise ValueError("class weights must be non-negative")
    return ad.weighted_cross_entropy(logits, label, w)


def forward(params: ModelParams, config: FusionConfig,
            sample: Sample) -> tuple[Tensor, Tensor]:
    """Full forward pass for one instance; returns (z, logits)."""
    ts = sample.token_states
    h1 = prosody_attend_pool(ts.span1, sample.prosody1, params, config)
    h2 = prosody_attend_pool(ts.span2, sample.prosody2, params, config)
    a1 = stats_pool(sample.logmel1, params, config) if config.use_audio_stats else None
    a2 = stats_pool(sample.logmel2, params, config) if config.use_audio_stats else None
    ht1 = fuse_audio(h1, a1, params, config)
    ht2 = fuse_audio(h2, a2, params, config)
    return pair_fuse_classify(ht1, ht2, params, config)


def loss_and_gradients(params: ModelParams, config: FusionConfig, sample: Sample,
                       class_weights: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Class-weighted cross-entropy and analytic gradients for every model
    parameter, by reverse-mode accumulation through the whole forward pass."""
    params.zero_grads()
    _z, logits = forward(params, config, sample)
    loss = weighted_ce_loss(logits, sample.label, class_weights)
    loss.backward()
    grads = {name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
             for name, t in params.named().items()}
    return float(loss.data), grads


def predict_logits(params: ModelParams, config: FusionConfig,
                   sample: Sample) -> np.ndarray:
    _z, logits = forward(params, config, sample)
    return logits.data.copy()


def supervised_contrastive_loss(zs: list[Tensor], labels: list[int],
                                tau: float) -> Tensor | None:
    """Optional batch-level contrastive term on the normalized pair vectors;
    inert unless lambda_contr > 0. Anchors without positives are skipped."""
    terms = []
    n = len(zs)
    for i in range(n):
        others = [j for j in range(n) if j != i]
        pos_rows = [r for r, j in enumerate(others) if labels[j] == labels[i]]
        if not pos_rows:
            continue
        sims = [ad.mul(ad.tsum(ad.mul(zs[i], zs[j])), 1.0 / tau) for j in others]
        stacked = ad.concat([ad.reshape(s, (1,)) for s in sims], axis=0)
        log_probs = ad.log_softmax(stacked)
        picked = ad.take(log_probs, pos_rows)
        terms.append(ad.mul(ad.tmean(picked), -1.0))
    if not terms:
        return None
    return ad.tmean(ad.concat([ad.reshape(t, (1,)) for t in terms], axis=0))
