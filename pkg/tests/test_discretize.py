import cmath

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from s5lab.discretize import (bilinear, bilinear_partials, bilinear_terms, zoh, zoh_partials,
                              zoh_per_step, zoh_terms)
from s5lab.errors import NumericalError, RejectedInputError


def test_zoh_scalar():
    d = zoh([-1.0], [[2.0]], [0.1])
    np.testing.assert_allclose(d.Lambda_bar, [0.9048374], atol=1e-7)
    np.testing.assert_allclose(d.B_bar, [[0.1903252]], atol=1e-7)
    d = zoh([-0.5 + 3j], [[1.0]], [0.01])
    assert abs(d.Lambda_bar[0] - cmath.exp((-0.5 + 3j) * 0.01)) < 1e-15
    # the published 7-digit value is itself off by ~7e-7 in the imaginary part
    np.testing.assert_allclose(d.Lambda_bar, [0.9945650 + 0.0298466j], atol=1e-6)


def test_zoh_matches_block_matrix_exponential(rng):
    """Van Loan: expm([[A, B], [0, 0]] dt) holds both discrete matrices."""
    P, H = 5, 3
    lam = -rng.uniform(0.1, 2, P) + 1j * rng.standard_normal(P)
    Bt = rng.standard_normal((P, H)) + 1j * rng.standard_normal((P, H))
    delta = rng.uniform(0.01, 0.5, P)
    d = zoh(lam, Bt, delta)
    for p in range(P):
        M = np.zeros((1 + H, 1 + H), dtype=complex)
        M[0, 0] = lam[p]
        M[0, 1:] = Bt[p]
        E = scipy.linalg.expm(M * delta[p])
        np.testing.assert_allclose(d.Lambda_bar[p], E[0, 0], rtol=1e-13)
        np.testing.assert_allclose(d.B_bar[p], E[0, 1:], rtol=1e-12)


def test_zoh_small_argument_limit():
    lam = np.array([-1e-12, 1e-10j, 0.0])
    d = zoh(lam, np.ones((3, 1)), np.full(3, 0.2))
    np.testing.assert_allclose(d.B_bar[:, 0], 0.2, rtol=1e-9)


@given(st.floats(1e-9, 1e-7), st.floats(-3, 3))
def test_zoh_taylor_branch_is_continuous(mag, angle):
    lam = mag * np.exp(1j * angle)
    f_small = zoh_terms(lam, 0.99)[1]
    f_big = zoh_terms(lam, 1.01)[1]
    # across the threshold the factor is smooth in delta: f ~ delta
    assert abs(f_big / 1.01 - f_small / 0.99) < 1e-7


def test_zoh_rejects_bad_inputs():
    with pytest.raises(RejectedInputError):
        zoh([-1.0], [[1.0]], [0.0])
    with pytest.raises(RejectedInputError):
        zoh([np.nan], [[1.0]], [0.1])
    with pytest.raises(RejectedInputError):
        zoh([-1.0, -2.0], [[1.0]], [0.1, 0.1])


def test_bilinear_examples():
    d = bilinear([0.0], [[1.0]], [0.3])
    assert d.Lambda_bar[0] == 1.0
    d = bilinear([-1.0], [[1.0]], [0.1])
    np.testing.assert_allclose(d.Lambda_bar, [0.95 / 1.05], rtol=1e-15)
    np.testing.assert_allclose(d.Lambda_bar, [0.9047619], atol=1e-7)
    z = zoh([-1.0], [[1.0]], [0.001]).Lambda_bar
    b = bilinear([-1.0], [[1.0]], [0.001]).Lambda_bar
    assert abs(z - b)[0] <= 1e-9


def test_bilinear_singular_names_index():
    with pytest.raises(NumericalError, match="index 1"):
        bilinear_terms(np.array([-1.0, 2.0]), np.array([0.1, 1.0]))


def test_per_step_examples():
    d = zoh_per_step([-1.0], [[1.0]], [0.0], [0.5, 2.0])
    np.testing.assert_allclose(d.Lambda_bar[:, 0], [0.6065307, 0.1353353], atol=1e-7)
    d = zoh_per_step([-1.0 + 1j], [[3.0]], [0.2], [0.0, 1.0])
    assert d.Lambda_bar[0, 0] == 1.0 and d.B_bar[0, 0, 0] == 0.0
    fixed = zoh([-1.0 + 1j, -0.5], np.ones((2, 2)), np.exp([0.2, -1.0]))
    ones = zoh_per_step([-1.0 + 1j, -0.5], np.ones((2, 2)), [0.2, -1.0], np.ones(4))
    np.testing.assert_array_equal(ones.Lambda_bar, np.broadcast_to(fixed.Lambda_bar, (4, 2)))
    np.testing.assert_array_equal(ones.B_bar, np.broadcast_to(fixed.B_bar, (4, 2, 2)))
    with pytest.raises(RejectedInputError):
        zoh_per_step([-1.0], [[1.0]], [0.0], [1.0, -0.1])


@pytest.mark.parametrize("terms,partials", [(zoh_terms, zoh_partials),
                                            (bilinear_terms, bilinear_partials)])
def test_partials_match_finite_differences(rng, terms, partials):
    lam = np.array([-0.5 + 2j, -0.5 - 7j])
    delta = np.array([0.05, 0.3])
    analytic = partials(lam, delta)
    h = 1e-6
    fd_lam = [(a - b) / (2 * h) for a, b in zip(terms(lam + h, delta), terms(lam - h, delta))]
    fd_delta = [(a - b) / (2 * h) for a, b in zip(terms(lam, delta + h), terms(lam, delta - h))]
    np.testing.assert_allclose(analytic[0], fd_lam[0], rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(analytic[1], fd_delta[0], rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(analytic[2], fd_lam[1], rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(analytic[3], fd_delta[1], rtol=1e-6, atol=1e-9)


def test_zoh_partials_taylor_branch():
    """Below the threshold the partials equal the series of the exact ones."""
    lam = np.array([-1e-9 + 1e-10j])
    delta = np.array([0.7])
    z = lam * delta
    dlb_dlam, dlb_dd, df_dlam, df_dd = zoh_partials(lam, delta)
    np.testing.assert_allclose(df_dlam, delta ** 2 * (0.5 + z / 3), rtol=1e-15)
    np.testing.assert_allclose(df_dd, np.exp(z), rtol=1e-15)
    np.testing.assert_allclose(dlb_dlam, delta * np.exp(z), rtol=1e-15)
    np.testing.assert_allclose(dlb_dd, lam * np.exp(z), rtol=1e-15)
