import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grandai.analysis import (
    ar2_determinant_closed_form,
    ar2_entropy_rate,
    ar2_log_det_ratio,
    ar2_validity,
    bits,
    block_entropy_rate,
    gm1_entropy_rate,
)
from grandai.channel import ar2_covariance, gm1_covariance
from grandai.errors import ParameterError

valid_ar2 = st.tuples(st.floats(-0.95, 0.95), st.floats(-0.95, 0.95)).filter(lambda p: ar2_validity(*p))


def test_gm1_white():
    rep = gm1_entropy_rate(0.0, 2.0, 10)
    assert rep.rate == pytest.approx(math.log(2 * math.e * math.pi * 2.0))
    assert rep.correlation_term == 0.0


def test_gm1_logdet_oracle():
    n = 64
    rep = gm1_entropy_rate(0.5, 1.0, n)
    _, logdet = np.linalg.slogdet(gm1_covariance(0.5, 1.0, n))
    assert rep.rate == pytest.approx(math.log(2 * math.e * math.pi) + logdet / n, abs=1e-9)


def test_gm1_bad_rho():
    with pytest.raises(ParameterError):
        gm1_entropy_rate(1.0, 1.0, 4)


def test_block_rates():
    assert block_entropy_rate(0.7, 1.0, 1).correlation_term == 0.0
    assert block_entropy_rate(0.5, 1.0, 2).correlation_term == pytest.approx(0.5 * math.log(0.75))
    gaps = [1 / b - 1 / (b + 1) for b in range(1, 20)]
    diffs = [
        block_entropy_rate(0.6, 1.0, b + 1).correlation_term - block_entropy_rate(0.6, 1.0, b + 2).correlation_term
        for b in range(19)
    ]
    assert all(x > y for x, y in zip(gaps, gaps[1:]))
    # each extra symbol of block length buys less entropy reduction
    assert all(abs(x) > abs(y) for x, y in zip(diffs, diffs[1:]))


@given(st.integers(2, 500))
def test_b2_captures_half(n):
    assert 1 - 1 / 2 >= 0.5 * (1 - 1 / n)


@given(st.floats(0, 0.99), st.floats(0.01, 10), st.integers(1, 64))
def test_report_decomposition(rho, sigma2, n):
    rep = gm1_entropy_rate(rho, sigma2, n)
    assert rep.rate == pytest.approx(rep.white_baseline + rep.correlation_term)
    assert rep.correlation_term <= 0
    blk = block_entropy_rate(rho, sigma2, n)
    assert blk == rep


@given(st.floats(0, 0.98), st.floats(0.001, 0.01), st.integers(2, 64))
def test_gm1_correlation_decreasing_in_rho(rho, step, n):
    assert gm1_entropy_rate(rho + step, 1.0, n).correlation_term < gm1_entropy_rate(rho, 1.0, n).correlation_term


def test_ar2_closed_form_examples():
    assert ar2_determinant_closed_form(0.0, 0.0, 2.0, 7) == pytest.approx(2.0**7)
    num = np.linalg.det(ar2_covariance(0.6, 0.3, 1.0, 6))
    assert ar2_determinant_closed_form(0.6, 0.3, 1.0, 6) == pytest.approx(num, rel=1e-9)
    assert ar2_entropy_rate(0.0, 0.0, 1.5, 8).rate == pytest.approx(0.5 * math.log(2 * math.pi * math.e * 1.5))


def test_ar2_determinant_vanishes_at_boundary():
    rho2 = 0.2
    edge = math.sqrt((rho2 + 1) / 2)
    dets = [ar2_determinant_closed_form(edge - eps, rho2, 1.0, 6) for eps in (1e-2, 1e-4, 1e-6)]
    assert all(d > 0 for d in dets)
    assert dets[0] > dets[1] > dets[2] and dets[2] < 1e-4


def test_ar2_validity_examples():
    assert ar2_validity(0.0, 0.0)
    assert not ar2_validity(0.99, 0.0)
    with pytest.raises(ParameterError):
        ar2_determinant_closed_form(0.99, 0.0, 1.0, 6)
    with pytest.raises(ParameterError):
        ar2_entropy_rate(0.5, 0.2, 1.0, 3)


def _positive_definite(c):
    # Sylvester: every leading principal minor is positive
    return all(np.linalg.det(c[:k, :k]) > 0 for k in range(1, len(c) + 1))


def test_validity_matches_determinant_positivity():
    grid = np.linspace(-0.97, 0.97, 41)
    for r1 in grid:
        for r2 in grid:
            lag = np.array([1.0, r1, r2, 0.0])
            if abs(1 - r1**2) > 1e-12:
                b1 = r1 * (1 - r2) / (1 - r1**2)
                b2 = (r2 - r1**2) / (1 - r1**2)
                lag[3] = b1 * r2 + b2 * r1
            c = lag[np.abs(np.subtract.outer(np.arange(4), np.arange(4)))]
            assert ar2_validity(r1, r2) == _positive_definite(c), (r1, r2)


@given(valid_ar2, st.floats(0.1, 5), st.integers(4, 64))
def test_ar2_closed_form_vs_numeric(params, sigma2, n):
    r1, r2 = params
    sign, logdet = np.linalg.slogdet(ar2_covariance(r1, r2, sigma2, n))
    assert sign > 0
    closed = ar2_log_det_ratio(r1, r2, n) + n * math.log(sigma2)
    assert closed == pytest.approx(logdet, rel=1e-9, abs=1e-9)
    rep = ar2_entropy_rate(r1, r2, sigma2, n)
    real_form = 0.5 * math.log(2 * math.pi * math.e * sigma2) + (logdet - n * math.log(sigma2)) / (2 * n)
    assert rep.rate == pytest.approx(real_form, abs=1e-9)
    assert rep.complex_rate == pytest.approx(2 * rep.rate, abs=1e-9)


@given(valid_ar2, st.integers(4, 40))
def test_ar2_below_white(params, n):
    if params == (0.0, 0.0):
        return
    rep = ar2_entropy_rate(*params, 1.0, n)
    assert rep.rate < rep.white_baseline + 1e-15


def test_bits():
    assert bits(math.log(2)) == pytest.approx(1.0)
