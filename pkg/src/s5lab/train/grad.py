"""Reverse-mode gradients of the S5 layer.

Complex parameters get complex gradient buffers ``dL/dRe + i dL/dIm``. With
that convention a holomorphic map ``w = h(theta)`` pulls a gradient back as
``g_theta = conj(h'(theta)) g_w``, and the adjoint of ``x_k = a_k x_{k-1} + bu_k``
is the reverse-time recurrence ``lam_k = g_k + conj(a_{k+1}) lam_{k+1}``, which
is itself evaluated with :func:`~s5lab.scan.scan_batched`.
"""

import numpy as np

from s5lab import discretize as disc
from s5lab.errors import RejectedInputError
from s5lab.hippo import ContinuousDiagSSM
from s5lab.layer import S5LayerParams, gelu_grad, layer_forward
from s5lab.scan import scan_batched


def _sum_to(x, ndim):
    """Sum leading axes until ``x`` has ``ndim`` dimensions."""
    while x.ndim > ndim:
        x = x.sum(axis=0)
    return x


def _layernorm_backward(dout, xhat, rstd, scale):
    dscale = (dout * xhat).reshape(-1, xhat.shape[-1]).sum(axis=0)
    dbias = dout.reshape(-1, xhat.shape[-1]).sum(axis=0)
    dxhat = dout * scale
    dx = rstd * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                 - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dscale, dbias


def _adjoint_transitions(lam_bar, forward):
    """Transitions of the adjoint scan.

    Forward scans get ``conj(a_{k+1})`` run in reverse, reversed scans get
    ``conj(a_{k-1})`` run forward; the entry that would fall off the end only
    ever multiplies a zero carry.
    """
    a = np.conj(lam_bar)
    if np.ndim(a) == 1:
        return a
    pad = np.ones_like(a[..., :1, :])
    if forward:
        return np.concatenate([a[..., 1:, :], pad], axis=-2)
    return np.concatenate([pad, a[..., :-1, :]], axis=-2)


def _shift(x, forward):
    """States entering each step: ``x_{k-1}`` (forward) or ``x_{k+1}`` (reversed)."""
    z = np.zeros_like(x[:, :1])
    if forward:
        return np.concatenate([z, x[:, :-1]], axis=1)
    return np.concatenate([x[:, 1:], z], axis=1)


def zero_layer_grads(params):
    s = params.ssm
    return S5LayerParams(
        ContinuousDiagSSM(np.zeros_like(s.Lambda), np.zeros_like(s.B_tilde),
                          np.zeros_like(s.C_tilde), np.zeros_like(s.D),
                          np.zeros_like(s.log_delta), s.conj_sym),
        np.zeros_like(params.W_gate), np.zeros_like(params.norm_scale),
        np.zeros_like(params.norm_bias),
    )


def layer_backward_from_cache(params, cfg, cache, upstream, workers=1):
    """Gradients given the cache of :func:`~s5lab.layer.layer_forward`.

    Returns:
        (grads, du): an :class:`S5LayerParams` of gradients and the input
        gradient, shaped like the forward input.
    """
    ssm = params.ssm
    dout = np.asarray(upstream, dtype=np.float64)
    if cache["single"]:
        dout = dout[None]
    u = cache["u"]
    if dout.shape != u.shape:
        raise RejectedInputError(f"upstream gradient {dout.shape} does not match output {u.shape}")
    P = ssm.state_size
    c = 2.0 if cfg.conj_sym else 1.0

    if cfg.prenorm:
        dv = dout
    else:
        dv, dscale, dbias = _layernorm_backward(dout, cache["xhat"], cache["rstd"], params.norm_scale)
    du = dv.copy()

    # gated activation
    g, s, y = cache["g"], cache["s"], cache["y"]
    dpre = dv * g * s * (1.0 - s)
    dW = np.einsum("bli,blj->ij", dpre, g)
    dg = dv * s + dpre @ params.W_gate
    dy = dg * gelu_grad(y)

    z = cache["z"]
    dD = np.einsum("blh,blh->h", dy, z)
    dz = dy * ssm.D

    # output projection
    xf, xb = cache["xf"], cache["xb"]
    C = ssm.C_tilde
    Cf = C[:, :P]
    gxf = c * (dy @ np.conj(Cf))
    dC = np.zeros_like(C)
    dC[:, :P] = c * np.einsum("blh,blp->hp", dy, np.conj(xf))
    lam_bar, f = cache["lam_bar"], cache["f"]
    lam_f = scan_batched(_adjoint_transitions(lam_bar, True), gxf, workers=workers, reverse=True)
    g_bu = lam_f
    g_a = np.conj(_shift(xf, True)) * lam_f
    if xb is not None:
        Cb = C[:, P:]
        gxb = c * (dy @ np.conj(Cb))
        dC[:, P:] = c * np.einsum("blh,blp->hp", dy, np.conj(xb))
        lam_b = scan_batched(_adjoint_transitions(lam_bar, False), gxb, workers=workers)
        g_bu = g_bu + lam_b
        g_a = g_a + np.conj(_shift(xb, False)) * lam_b

    bz = cache["bz"]
    nd = np.ndim(lam_bar)
    g_lam_bar = _sum_to(g_a, nd)
    g_f = _sum_to(np.conj(bz) * g_bu, nd)
    g_bz = np.conj(f) * g_bu
    dB = np.einsum("blp,blh->ph", g_bz, z)
    dz = dz + (g_bz @ np.conj(ssm.B_tilde)).real

    # discretization
    delta = cache["delta"]
    if delta is None:
        dLam = g_lam_bar.astype(np.complex128)
        dlogd = np.zeros_like(ssm.log_delta)
    else:
        partials = disc.zoh_partials if cfg.discretization == "zoh" else disc.bilinear_partials
        dlb_dlam, dlb_dd, df_dlam, df_dd = partials(ssm.Lambda, delta)
        dLam = _sum_to(np.conj(dlb_dlam) * g_lam_bar + np.conj(df_dlam) * g_f, 1)
        g_delta = (np.conj(dlb_dd) * g_lam_bar + np.conj(df_dd) * g_f).real
        dlogd = _sum_to(g_delta * delta, 1)

    if cfg.prenorm:
        dx, dscale, dbias = _layernorm_backward(dz, cache["xhat"], cache["rstd"], params.norm_scale)
        du = du + dx
    else:
        du = du + dz

    grads = S5LayerParams(
        ContinuousDiagSSM(dLam, dB, dC, dD, dlogd, ssm.conj_sym),
        dW, dscale, dbias,
    )
    return grads, (du[0] if cache["single"] else du)


def layer_backward(params, cfg, u, upstream, intervals=None, workers=1):
    """Gradient of ``sum(upstream * layer_forward(u))`` w.r.t. parameters and input."""
    _, cache = layer_forward(params, cfg, u, intervals=intervals, workers=workers, return_cache=True)
    return layer_backward_from_cache(params, cfg, cache, upstream, workers=workers)
