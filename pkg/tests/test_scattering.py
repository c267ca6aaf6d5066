import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats
from scipy.integrate import quad

from thermochain.scattering import (R_pair, R_pair_expanded, R_total, ScatteringKernel, r_kernel,
                                    theta_hat)


def test_r_kernel_examples():
    assert np.all(r_kernel(0.0, np.linspace(-0.5, 0.5, 11)) == 0)
    assert r_kernel(0.5, 0.25) == pytest.approx(2.0)
    assert r_kernel(0.25, 0.5) == pytest.approx(0.0, abs=1e-15)


def test_pair_kernel_examples():
    # direct evaluation of the two r terms
    want = 0.5 * (r_kernel(0.25, 0.0) ** 2 + r_kernel(0.25, 0.5) ** 2)
    assert want == pytest.approx(2.0)
    assert R_pair(0.25, 0.25) == pytest.approx(want)
    assert np.all(R_pair(0.0, np.linspace(-0.5, 0.5, 7)) == 0)


def test_pair_kernel_expanded_form():
    k = np.linspace(-0.5, 0.5, 41)
    assert np.allclose(R_pair(k[:, None], k[None, :]), R_pair_expanded(k[:, None], k[None, :]), atol=1e-12)


def test_total_rate_examples():
    assert R_total(0.25) == pytest.approx(2.0)
    assert R_total(0.5) == pytest.approx(2.0)
    assert R_total(1e-3) / 1e-6 == pytest.approx(6 * np.pi**2, rel=0.01)
    k = np.linspace(-0.5, 0.5, 101)
    assert np.allclose(R_total(k), theta_hat(k) / 4)


def test_total_rate_is_row_integral():
    for k in (0.1, 0.25, 0.4):
        val, _ = quad(lambda kp: R_pair(k, kp), -0.5, 0.5, epsabs=1e-13)
        assert val == pytest.approx(R_total(k), abs=1e-10)


@pytest.mark.parametrize("n_k", [8, 64, 256])
def test_midpoint_rule_exact(n_k):
    S = ScatteringKernel(1.0, n_k)
    assert np.max(np.abs(S.row_sum - R_total(S.k))) < 1e-10


def test_L_annihilates_constants_and_conserves(rng):
    S = ScatteringKernel(1.0, 128)
    assert np.max(np.abs(S.apply_L(np.full(128, 3.7)))) < 1e-12
    F = rng.normal(size=128)
    assert abs(S.apply_L(F).sum() * S.dk) < 1e-10


def test_gain_of_one_is_total_rate():
    S = ScatteringKernel(1.0, 256)
    assert np.allclose(S.apply_Rcal(np.ones(256)), R_total(S.k), atol=1e-10)
    assert 2 * S.gain_at(np.ones(256), 0.25)[0] == pytest.approx(4.0, abs=1e-10)


def test_gain_commutes_with_reflection(rng):
    S = ScatteringKernel(1.0, 64)
    F = rng.normal(size=64)
    assert np.allclose(S.apply_Rcal(F[::-1]), S.apply_Rcal(F)[::-1], atol=1e-12)


def test_gain_of_concentrated_column():
    for n in (64, 256):
        S = ScatteringKernel(1.0, n)
        j = np.argmin(np.abs(S.k - (0.25 + 0.5 / n)))
        F = np.zeros(n)
        F[j] = n
        assert np.allclose(S.apply_Rcal(F), R_pair(S.k, S.k[j]), atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_pair_kernel_symmetric(k, kp):
    assert R_pair(k, kp) == pytest.approx(R_pair(kp, k), abs=1e-12)
    assert R_pair(k, kp) == pytest.approx(R_pair(-k, kp), abs=1e-12)


_vec = arrays(np.float64, 32, elements=st.floats(-10, 10))


@settings(max_examples=50, deadline=None)
@given(_vec, _vec)
def test_L_self_adjoint_and_negative(F, G):
    S = ScatteringKernel(1.0, 32)
    scale = 1 + np.abs(F).max() * np.abs(G).max()
    assert abs(S.apply_L(F) @ G - F @ S.apply_L(G)) <= 1e-10 * scale
    assert S.apply_L(F) @ F <= 1e-12 * (1 + F @ F)


def test_sample_outgoing_moment(rng):
    S = ScatteringKernel(1.0, 256)
    kp = S.sample_outgoing(np.full(10**6, 0.25), rng)
    x = np.sin(np.pi * kp) ** 2
    num, _ = quad(lambda q: np.sin(np.pi * q) ** 2 * R_pair(0.25, q), -0.5, 0.5)
    want = num / R_total(0.25)
    assert abs(x.mean() - want) < 3 * x.std() / np.sqrt(x.size)


def test_sample_outgoing_index_chi2(rng):
    S = ScatteringKernel(1.0, 32)
    j = np.full(200000, 20)
    idx = S.sample_outgoing_index(j, rng)
    obs = np.bincount(idx, minlength=32)
    p = S.pair[20] / S.pair[20].sum()
    keep = p > 0
    _, pval = stats.chisquare(obs[keep], p[keep] * idx.size)
    assert pval > 0.01


def test_sample_outgoing_rejects_zero(rng):
    with pytest.raises(ValueError):
        ScatteringKernel(1.0, 32).sample_outgoing(np.array([0.0]), rng)
