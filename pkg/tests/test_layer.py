import math

import numpy as np
import pytest
import scipy.stats

from s5lab.discretize import zoh
from s5lab.errors import RejectedInputError
from s5lab.hippo import HippoSpec
from s5lab.layer import (LayerConfig, apply_ssm, bidirectional_forward, gated_activation, gelu,
                         init_layer, layer_forward, sequence_layernorm)
from s5lab.scan import sequential_scan


def test_gelu_matches_normal_cdf(rng):
    x = rng.standard_normal(50) * 3
    np.testing.assert_allclose(gelu(x), x * scipy.stats.norm.cdf(x), rtol=1e-13, atol=1e-15)


def test_gated_activation_examples(rng):
    assert np.all(gated_activation(np.zeros((3, 2)), rng.standard_normal((2, 2))) == 0)
    y = rng.standard_normal((5, 3))
    np.testing.assert_allclose(gated_activation(y, np.zeros((3, 3))), 0.5 * gelu(y), rtol=1e-15)
    g1 = 0.5 * (1 + math.erf(1 / math.sqrt(2)))
    np.testing.assert_allclose(g1, 0.8413447, atol=1e-7)
    # the product with the logistic of GELU(1), evaluated with the standard library
    expected = g1 / (1 + math.exp(-g1))
    np.testing.assert_allclose(gated_activation(np.array([[1.0]]), np.array([[1.0]])), [[expected]],
                               rtol=1e-15)
    with pytest.raises(RejectedInputError):
        gated_activation(y, np.zeros((2, 2)))


def test_layernorm_examples(rng):
    np.testing.assert_allclose(sequence_layernorm(np.full((2, 4), 3.0), np.ones(4), np.zeros(4)), 0.0)
    np.testing.assert_allclose(sequence_layernorm(np.array([[1.0, 3.0]]), np.ones(2), np.zeros(2)),
                               [[-1.0, 1.0]], atol=1e-3)
    out = sequence_layernorm(rng.standard_normal((10, 6)) * 5 + 2, np.ones(6), np.zeros(6))
    assert np.max(np.abs(out.mean(axis=-1))) <= 1e-9 * 10


def test_apply_ssm_examples(rng):
    d = zoh([-0.5 + 1j, -0.5 - 1j], rng.standard_normal((2, 3)), [0.1, 0.1])
    D = rng.standard_normal(3)
    u = rng.standard_normal((7, 3))
    np.testing.assert_array_equal(apply_ssm(d, np.zeros((3, 2)), D, u), D * u)
    from s5lab.discretize import DiscreteDiagSSM

    scalar = DiscreteDiagSSM(np.array([0.5 + 0j]), np.array([[1.0 + 0j]]))
    y = apply_ssm(scalar, np.array([[1.0]]), np.zeros(1), np.ones((3, 1)))
    np.testing.assert_allclose(y[:, 0], [1, 1.5, 1.75])
    with pytest.raises(RejectedInputError):
        apply_ssm(scalar, np.ones((2, 1)), np.zeros(1), np.ones((3, 1)))


def test_half_spectrum_matches_full(rng):
    full = init_layer(HippoSpec(8, 3, seed=5)).ssm
    half = init_layer(HippoSpec(8, 3, conj_sym=True, seed=5)).ssm
    u = rng.standard_normal((30, 3))
    df = zoh(full.Lambda, full.B_tilde, np.full(8, 0.05))
    dh = zoh(half.Lambda, half.B_tilde, np.full(4, 0.05))
    yf = apply_ssm(df, full.C_tilde, full.D, u)
    yh = apply_ssm(dh, half.C_tilde, half.D, u, conj_sym=True)
    assert np.max(np.abs(yf - yh)) <= 1e-12


def test_layer_zero_ssm_is_identity(rng):
    p = init_layer(HippoSpec(4, 3))
    p.ssm.C_tilde[:] = 0
    p.ssm.D[:] = 0
    u = rng.standard_normal((12, 3))
    np.testing.assert_array_equal(layer_forward(p, LayerConfig(), u), u)


@pytest.mark.parametrize("cfg", [LayerConfig(), LayerConfig(prenorm=False),
                                 LayerConfig(conj_sym=True, bidirectional=True),
                                 LayerConfig(discretization="bilinear")])
def test_layer_shapes_and_batch_consistency(rng, cfg):
    p = init_layer(HippoSpec(4, 3, conj_sym=cfg.conj_sym, bidirectional=cfg.bidirectional))
    u = rng.standard_normal((2, 9, 3))
    out = layer_forward(p, cfg, u)
    assert out.shape == u.shape
    np.testing.assert_allclose(layer_forward(p, cfg, u[1]), out[1], rtol=1e-13, atol=1e-14)


def test_unit_intervals_equal_fixed_path(rng):
    p = init_layer(HippoSpec(6, 3, seed=2))
    u = rng.standard_normal((2, 20, 3))
    a = layer_forward(p, LayerConfig(), u)
    b = layer_forward(p, LayerConfig(), u, intervals=np.ones(20))
    assert np.max(np.abs(a - b)) <= 1e-12
    with pytest.raises(RejectedInputError):
        layer_forward(p, LayerConfig(discretization="direct-discrete"), u, intervals=np.ones(20))
    with pytest.raises(RejectedInputError):
        layer_forward(p, LayerConfig(), u, intervals=np.ones(19))


def test_bidirectional_against_two_pass_oracle(rng):
    cfg = LayerConfig(bidirectional=True)
    p = init_layer(HippoSpec(6, 3, bidirectional=True, seed=1))
    s = p.ssm
    u = rng.standard_normal((25, 3))
    d = zoh(s.Lambda, s.B_tilde, np.exp(s.log_delta))
    bu = u @ d.B_bar.T
    xf = sequential_scan(d.Lambda_bar, bu)
    xb = sequential_scan(d.Lambda_bar, bu[::-1])[::-1]
    ref = (np.concatenate([xf, xb], axis=1) @ s.C_tilde.T).real + s.D * u
    assert np.max(np.abs(bidirectional_forward(p, cfg, u) - ref)) <= 1e-12


def test_bidirectional_single_step_and_zero_input(rng):
    cfg = LayerConfig(bidirectional=True, conj_sym=True)
    p = init_layer(HippoSpec(4, 2, conj_sym=True, bidirectional=True))
    s = p.ssm
    u = rng.standard_normal((1, 2))
    x = (np.exp(s.Lambda * np.exp(s.log_delta)) - 1) / s.Lambda
    x = (x[:, None] * s.B_tilde) @ u[0]
    ref = 2 * (s.C_tilde @ np.concatenate([x, x])).real + s.D * u[0]
    np.testing.assert_allclose(bidirectional_forward(p, cfg, u)[0], ref, atol=1e-13)
    np.testing.assert_array_equal(bidirectional_forward(p, cfg, np.zeros((5, 2))), 0.0)
    with pytest.raises(RejectedInputError):
        bidirectional_forward(p, LayerConfig(), u)
