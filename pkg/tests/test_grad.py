import numpy as np
import pytest

from s5lab.checks import GRAD_CONFIGS, finite_difference_error
from s5lab.hippo import HippoSpec
from s5lab.layer import LayerConfig, gelu, gelu_grad, init_layer, layer_forward, sigmoid
from s5lab.scan import scan_batched
from s5lab.train.grad import _adjoint_transitions, layer_backward


@pytest.mark.parametrize("name,cfg,tv", GRAD_CONFIGS, ids=[c[0] for c in GRAD_CONFIGS])
def test_matches_central_differences(name, cfg, tv):
    assert finite_difference_error(cfg, tv, seed=1) <= 1e-4


def test_zero_upstream_gives_zero_grads(rng):
    p = init_layer(HippoSpec(4, 3))
    u = rng.standard_normal((2, 8, 3))
    g, du = layer_backward(p, LayerConfig(), u, np.zeros_like(u))
    for arr in (g.ssm.Lambda, g.ssm.B_tilde, g.ssm.C_tilde, g.ssm.D, g.ssm.log_delta, g.W_gate,
                g.norm_scale, g.norm_bias, du):
        assert not np.any(arr)


def test_scalar_output_weight_by_hand():
    """P = H = L = 1 with loss out^2 / 2, derivative w.r.t. Re(c) written out by hand."""
    p = init_layer(HippoSpec(1, 1, seed=3))
    p.norm_bias = np.array([0.7])  # with H = 1 the normalized input is exactly the bias
    s = p.ssm
    u = np.array([[0.4]])
    delta = np.exp(s.log_delta[0])
    b_bar = (np.exp(s.Lambda[0] * delta) - 1) / s.Lambda[0] * s.B_tilde[0, 0]
    z = 0.7
    y = (s.C_tilde[0, 0] * b_bar * z).real + s.D[0] * z
    g = gelu(y)
    w = p.W_gate[0, 0]
    sig = sigmoid(g * w)
    out = u[0, 0] + g * sig
    dact = gelu_grad(y) * (sig + g * sig * (1 - sig) * w)
    expected = out * dact * (b_bar * z).real
    np.testing.assert_allclose(layer_forward(p, LayerConfig(), u)[0, 0], out, rtol=1e-14)
    grads, _ = layer_backward(p, LayerConfig(), u, np.array([[out]]))
    np.testing.assert_allclose(grads.ssm.C_tilde[0, 0].real, expected, rtol=1e-12)


@pytest.mark.parametrize("forward", [True, False])
@pytest.mark.parametrize("per_step", [False, True])
def test_adjoint_scan_matches_naive_backward(rng, forward, per_step):
    B, L, P = 2, 50, 3
    shape = (B, L, P) if per_step else (P,)
    a = rng.uniform(0.5, 1.0, shape) * np.exp(1j * rng.uniform(-3, 3, shape))
    g = rng.standard_normal((B, L, P)) + 1j * rng.standard_normal((B, L, P))
    adj = scan_batched(_adjoint_transitions(a, forward), g, workers=3, reverse=forward)
    full = np.broadcast_to(a, (B, L, P))
    naive = np.zeros_like(g)
    for b in range(B):
        lam = np.zeros(P, dtype=complex)
        steps = range(L - 1, -1, -1) if forward else range(L)
        prev = None
        for k in steps:
            if prev is None:
                lam = g[b, k]
            else:
                lam = g[b, k] + np.conj(full[b, prev]) * lam
            naive[b, k] = lam
            prev = k
    assert np.max(np.abs(adj - naive)) <= 1e-12 * np.max(np.abs(naive))
