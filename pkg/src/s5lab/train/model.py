"""Sequence classifier: linear encoder, stacked S5 layers, mean pool, linear decoder."""

from dataclasses import dataclass, field

import numpy as np

from s5lab.errors import RejectedInputError
from s5lab.hippo import HippoSpec
from s5lab.layer import LayerConfig, init_layer, layer_forward
from s5lab.rng import STREAM_DENSE, make_rng
from s5lab.train.grad import layer_backward_from_cache


@dataclass
class ModelConfig:
    input_size: int = 1
    classes: int = 10
    depth: int = 2
    H: int = 32
    P: int = 32
    J: int = 1
    conj_sym: bool = True
    bidirectional: bool = False
    discretization: str = "zoh"
    prenorm: bool = True
    delta_min: float = 0.001
    delta_max: float = 0.1
    seed: int = 0

    def layer_config(self):
        return LayerConfig(bidirectional=self.bidirectional, discretization=self.discretization,
                           prenorm=self.prenorm, conj_sym=self.conj_sym)


@dataclass
class ModelParams:
    enc_W: np.ndarray
    enc_b: np.ndarray
    layers: list = field(default_factory=list)
    dec_W: np.ndarray = None
    dec_b: np.ndarray = None

    def copy(self):
        return ModelParams(self.enc_W.copy(), self.enc_b.copy(),
                           [lp.copy() for lp in self.layers],
                           self.dec_W.copy(), self.dec_b.copy())


def init_model(cfg: ModelConfig):
    H = cfg.H
    enc = make_rng(cfg.seed, STREAM_DENSE, 1000)
    dec = make_rng(cfg.seed, STREAM_DENSE, 1001)
    layers = []
    for i in range(cfg.depth):
        spec = HippoSpec(state_size=cfg.P, feature_size=H, blocks=cfg.J, conj_sym=cfg.conj_sym,
                         delta_min=cfg.delta_min, delta_max=cfg.delta_max,
                         seed=cfg.seed * 1009 + i, bidirectional=cfg.bidirectional)
        layers.append(init_layer(spec, seed_key=i))
    return ModelParams(
        enc_W=enc.normal(0.0, 1.0 / np.sqrt(cfg.input_size), size=(H, cfg.input_size)),
        enc_b=np.zeros(H),
        layers=layers,
        dec_W=dec.normal(0.0, 1.0 / np.sqrt(H), size=(cfg.classes, H)),
        dec_b=np.zeros(cfg.classes),
    )


def classifier_forward(model, cfg, inputs, intervals=None, workers=1, return_cache=False):
    """Logits ``(B, classes)`` for inputs ``(B, L, U)``."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 3 or x.shape[-1] != model.enc_W.shape[1]:
        raise RejectedInputError(
            f"inputs must be (B, L, {model.enc_W.shape[1]}), got {x.shape}"
        )
    lcfg = cfg.layer_config()
    h = x @ model.enc_W.T + model.enc_b
    caches = []
    for lp in model.layers:
        if return_cache:
            h, c = layer_forward(lp, lcfg, h, intervals=intervals, workers=workers, return_cache=True)
            caches.append(c)
        else:
            h = layer_forward(lp, lcfg, h, intervals=intervals, workers=workers)
    pooled = h.mean(axis=1)
    logits = pooled @ model.dec_W.T + model.dec_b
    if not return_cache:
        return logits
    return logits, dict(x=x, caches=caches, pooled=pooled, L=x.shape[1])


def classifier_backward(model, cfg, cache, dlogits, workers=1):
    """Gradients (as a :class:`ModelParams`) of ``sum(dlogits * logits)``."""
    lcfg = cfg.layer_config()
    dlogits = np.asarray(dlogits, dtype=np.float64)
    d_dec_W = dlogits.T @ cache["pooled"]
    d_dec_b = dlogits.sum(axis=0)
    dpooled = dlogits @ model.dec_W
    L = cache["L"]
    dh = np.broadcast_to(dpooled[:, None, :] / L, (dpooled.shape[0], L, dpooled.shape[1]))
    layer_grads = [None] * len(model.layers)
    for i in range(len(model.layers) - 1, -1, -1):
        layer_grads[i], dh = layer_backward_from_cache(model.layers[i], lcfg, cache["caches"][i], dh,
                                                       workers=workers)
    x = cache["x"]
    d_enc_W = np.einsum("blh,blu->hu", dh, x)
    d_enc_b = dh.sum(axis=(0, 1))
    return ModelParams(d_enc_W, d_enc_b, layer_grads, d_dec_W, d_dec_b)


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy and its gradient w.r.t. the logits.

    The gradient is ``(softmax - onehot) / B``, matching the mean reduction.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    B, K = logits.shape
    if labels.shape != (B,) or np.any(labels < 0) or np.any(labels >= K):
        raise RejectedInputError(f"labels must be integers in [0, {K})")
    m = logits.max(axis=1, keepdims=True)
    shifted = logits - m
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - lse
    loss = -logp[np.arange(B), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(B), labels] -= 1.0
    return float(loss), grad / B


def iter_params(model):
    """Yield ``(name, array, is_ssm_core)`` for every parameter, in a fixed order.

    ``is_ssm_core`` marks Lambda, B_tilde and log_delta, which form the
    low-learning-rate, no-weight-decay group.
    """
    yield "enc_W", model.enc_W, False
    yield "enc_b", model.enc_b, False
    for i, lp in enumerate(model.layers):
        s = lp.ssm
        pre = f"layers.{i}."
        yield pre + "Lambda", s.Lambda, True
        yield pre + "B_tilde", s.B_tilde, True
        yield pre + "C_tilde", s.C_tilde, False
        yield pre + "D", s.D, False
        yield pre + "log_delta", s.log_delta, True
        yield pre + "W_gate", lp.W_gate, False
        yield pre + "norm_scale", lp.norm_scale, False
        yield pre + "norm_bias", lp.norm_bias, False
    yield "dec_W", model.dec_W, False
    yield "dec_b", model.dec_b, False
