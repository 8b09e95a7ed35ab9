"""The nonlinear S5 layer: norm, discretize, scan, gated activation, residual.

All functions accept a single sequence ``(L, H)`` or a batch ``(B, L, H)``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from s5lab import discretize as disc
from s5lab.errors import RejectedInputError
from s5lab.hippo import ContinuousDiagSSM, HippoSpec, init_continuous_ssm
from s5lab.rng import STREAM_DENSE, make_rng
from s5lab.scan import scan_batched

LN_EPS = 1e-6
DISCRETIZATIONS = ("zoh", "bilinear", "direct-discrete")


@dataclass
class LayerConfig:
    bidirectional: bool = False
    discretization: str = "zoh"
    prenorm: bool = True
    conj_sym: bool = False

    def __post_init__(self):
        if self.discretization not in DISCRETIZATIONS:
            raise RejectedInputError(
                f"discretization must be one of {DISCRETIZATIONS}, got {self.discretization!r}"
            )


@dataclass
class S5LayerParams:
    ssm: ContinuousDiagSSM
    W_gate: np.ndarray
    norm_scale: np.ndarray
    norm_bias: np.ndarray

    def copy(self):
        return S5LayerParams(self.ssm.copy(), self.W_gate.copy(),
                             self.norm_scale.copy(), self.norm_bias.copy())


def init_layer(spec: HippoSpec, seed_key=0):
    """HiPPO-N initialized layer; the gate matrix is LeCun-normal."""
    ssm = init_continuous_ssm(spec)
    H = spec.feature_size
    W = make_rng(spec.seed, STREAM_DENSE, seed_key).normal(0.0, 1.0 / np.sqrt(H), size=(H, H))
    return S5LayerParams(ssm, W, np.ones(H), np.zeros(H))


def gelu(x):
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def gelu_grad(x):
    cdf = 0.5 * (1.0 + erf(x / np.sqrt(2.0)))
    pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    return cdf + x * pdf


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def gated_activation(y, W_gate):
    """``GELU(y) * sigmoid(GELU(y) W^T)`` applied per timestep."""
    y = np.asarray(y, dtype=np.float64)
    W_gate = np.asarray(W_gate, dtype=np.float64)
    if W_gate.shape != (y.shape[-1], y.shape[-1]):
        raise RejectedInputError(f"W_gate shape {W_gate.shape} does not match features {y.shape[-1]}")
    g = gelu(y)
    return g * sigmoid(g @ W_gate.T)


def sequence_layernorm(u, scale, bias):
    """Normalize each timestep over the feature axis, then scale and shift."""
    u = np.asarray(u, dtype=np.float64)
    mu = u.mean(axis=-1, keepdims=True)
    xc = u - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    return xc / np.sqrt(var + LN_EPS) * scale + bias


def discretize_ssm(ssm, method, intervals=None):
    """Discretize for a layer forward pass.

    Returns:
        ``(lam_bar, f, delta)`` where ``B_bar = f[..., None] * B_tilde``; arrays
        are ``(P,)``, or ``(L, P)`` / ``(B, L, P)`` when ``intervals`` is given.
        ``delta`` is ``None`` in direct-discrete mode.
    """
    if method == "direct-discrete":
        if intervals is not None:
            raise RejectedInputError("direct-discrete mode has no timescale to rescale by intervals")
        return ssm.Lambda, np.ones(ssm.state_size), None
    if intervals is None:
        delta = np.exp(ssm.log_delta)
    else:
        delta = disc.per_step_delta(ssm.log_delta, intervals)
    if method == "zoh":
        lam_bar, f = disc.zoh_terms(ssm.Lambda, delta)
    else:
        lam_bar, f = disc.bilinear_terms(ssm.Lambda, delta)
    return lam_bar, f, delta


def _as_batch(u):
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 2:
        return u[None], True
    if u.ndim != 3:
        raise RejectedInputError(f"input must be (L, H) or (B, L, H), got {u.shape}")
    return u, False


def apply_ssm(discrete, C_tilde, D, u, conj_sym=False, workers=1):
    """SSM outputs ``y_k = c Re(C_tilde x_k) + D * u_k`` (``c = 2`` with conj_sym).

    Args:
        discrete: a :class:`~s5lab.discretize.DiscreteDiagSSM`.
        C_tilde: ``(H, P)``.
        D: ``(H,)``.
        u: ``(L, H)`` or ``(B, L, H)``.
    """
    u, single = _as_batch(u)
    Bn, L, H = u.shape
    lam_bar = discrete.Lambda_bar
    B_bar = discrete.B_bar
    P = discrete.state_size
    C_tilde = np.asarray(C_tilde)
    if C_tilde.shape != (H, P) or np.shape(D) != (H,) or B_bar.shape[-1] != H:
        raise RejectedInputError("shape mismatch between SSM parameters and input")
    if discrete.time_varying:
        if lam_bar.shape[0] != L:
            raise RejectedInputError(f"time-varying system has {lam_bar.shape[0]} steps, input has {L}")
        bu = np.einsum("lph,blh->blp", B_bar, u)
    else:
        bu = u @ B_bar.T
    xs = scan_batched(lam_bar, bu, workers=workers)
    y = (xs @ C_tilde.T).real
    if conj_sym:
        y = 2.0 * y
    y = y + D * u
    return y[0] if single else y


def ssm_states(lam_bar, f, B_tilde, z, bidirectional, workers=1):
    """Forward (and reversed) state sequences for normalized inputs ``z``."""
    bz = z @ B_tilde.T
    bu = f * bz
    xf = scan_batched(lam_bar, bu, workers=workers)
    xb = scan_batched(lam_bar, bu, workers=workers, reverse=True) if bidirectional else None
    return bz, xf, xb


def project(ssm, xf, xb, z, conj_sym):
    P = ssm.state_size
    if xb is None:
        if ssm.C_tilde.shape[1] != P:
            raise RejectedInputError(f"C_tilde has {ssm.C_tilde.shape[1]} columns, expected {P}")
        y = (xf @ ssm.C_tilde.T).real
    else:
        if ssm.C_tilde.shape[1] != 2 * P:
            raise RejectedInputError(
                f"bidirectional C_tilde needs {2 * P} columns, got {ssm.C_tilde.shape[1]}"
            )
        y = (xf @ ssm.C_tilde[:, :P].T + xb @ ssm.C_tilde[:, P:].T).real
    if conj_sym:
        y = 2.0 * y
    return y + ssm.D * z


def bidirectional_forward(params, cfg, u, workers=1):
    """SSM output of a bidirectional layer.

    The forward-scan states and the states of the scan run over the reversed
    input (re-reversed into forward time) are stacked on the state axis and
    projected by the double-width ``C_tilde``.
    """
    if not cfg.bidirectional:
        raise RejectedInputError("bidirectional_forward needs cfg.bidirectional")
    z, single = _as_batch(u)
    lam_bar, f, _ = discretize_ssm(params.ssm, cfg.discretization)
    _, xf, xb = ssm_states(lam_bar, f, params.ssm.B_tilde, z, True, workers)
    y = project(params.ssm, xf, xb, z, cfg.conj_sym)
    return y[0] if single else y


def layer_forward(params, cfg, u, intervals=None, workers=1, return_cache=False):
    """One S5 layer, ``(L, H)`` or ``(B, L, H)`` in and out.

    Pre-norm: ``u + act(ssm(LN(u)))``. Post-norm: ``LN(u + act(ssm(u)))``.
    ``intervals`` (``(L,)`` shared by the batch, or ``(B, L)``) switches on
    per-step timescales.
    """
    u, single = _as_batch(u)
    H = params.ssm.feature_size
    if u.shape[-1] != H:
        raise RejectedInputError(f"input has {u.shape[-1]} features, layer expects {H}")
    if intervals is not None:
        intervals = np.asarray(intervals, dtype=np.float64)
        if intervals.shape not in ((u.shape[1],), u.shape[:2]):
            raise RejectedInputError("intervals must have one entry per timestep (and batch item)")
    ssm = params.ssm

    if cfg.prenorm:
        mu = u.mean(axis=-1, keepdims=True)
        xc = u - mu
        rstd = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + LN_EPS)
        xhat = xc * rstd
        z = xhat * params.norm_scale + params.norm_bias
    else:
        z = u

    lam_bar, f, delta = discretize_ssm(ssm, cfg.discretization, intervals)
    bz, xf, xb = ssm_states(lam_bar, f, ssm.B_tilde, z, cfg.bidirectional, workers)
    y = project(ssm, xf, xb, z, cfg.conj_sym)
    g = gelu(y)
    s = sigmoid(g @ params.W_gate.T)
    v = u + g * s

    if cfg.prenorm:
        out = v
    else:
        mu = v.mean(axis=-1, keepdims=True)
        xc = v - mu
        rstd = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + LN_EPS)
        xhat = xc * rstd
        out = xhat * params.norm_scale + params.norm_bias

    out_r = out[0] if single else out
    if not return_cache:
        return out_r
    cache = dict(u=u, z=z, xhat=xhat, rstd=rstd, lam_bar=lam_bar, f=f, delta=delta,
                 bz=bz, xf=xf, xb=xb, y=y, g=g, s=s, intervals=intervals, single=single)
    return out_r, cache
