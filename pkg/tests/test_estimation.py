import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grandai.channel import TapChannel, complex_normal, make_ar2_soundings, taps_from_soundings
from grandai.errors import NumericalError, ParameterError
from grandai.estimation import (
    ar2_extrapolate,
    ar2_fit_channel,
    ar2_fit_soundings,
    ar2_fit_taps,
    mismatch_rho,
    perturb_taps_nmse,
    quantize_taps,
)

coef = st.complex_numbers(max_magnitude=1.2, allow_nan=False, allow_infinity=False)


def ar2_sequence(z0, z1, phi1, phi2, J=6):
    z = [z0, z1]
    for _ in range(J - 2):
        z.append(phi1 * z[-1] + phi2 * z[-2])
    return np.array(z, dtype=complex)


def random_channel(r, n_s=6, J=3):
    return TapChannel(r.standard_normal((n_s, J)) + 1j * r.standard_normal((n_s, J)))


def test_nmse_zero_is_identity(rng):
    ch = random_channel(rng)
    out = perturb_taps_nmse(ch, 0.0, rng)
    assert np.array_equal(out.taps, ch.taps) and out.taps is not ch.taps
    with pytest.raises(ParameterError):
        perturb_taps_nmse(ch, -0.1, rng)


@pytest.mark.parametrize("per_symbol", [False, True])
def test_nmse_moments(rng, per_symbol):
    ch = TapChannel(np.array([[1.0 + 0.5j, -0.3j]]))
    draws = np.array([perturb_taps_nmse(ch, 0.1, rng, per_symbol).taps[0] for _ in range(100_000)])
    ratio = draws / ch.taps[0] - 1
    assert np.allclose(np.mean(np.abs(ratio) ** 2, axis=0), 0.1, rtol=0.02)
    assert np.allclose(draws.mean(axis=0), ch.taps[0], atol=5 * np.sqrt(0.1 / 100_000) * np.abs(ch.taps[0]).max())


def test_nmse_shared_per_tap(rng):
    ch = TapChannel(np.ones((5, 2)))
    shared = perturb_taps_nmse(ch, 0.1, rng).taps
    assert np.allclose(shared, shared[0])
    indep = perturb_taps_nmse(ch, 0.1, rng, per_symbol=True).taps
    assert not np.allclose(indep, indep[0])


def test_mismatch_rho():
    assert mismatch_rho(0.5, 0.0) == 0.5
    assert mismatch_rho(0.5, 0.2) == pytest.approx(0.7)
    assert mismatch_rho(0.5, -0.5) == 0.0
    with pytest.raises(ParameterError):
        mismatch_rho(0.5, 0.5)
    with pytest.raises(ParameterError):
        mismatch_rho(0.1, -0.2)


@given(coef, coef, coef.filter(lambda c: abs(c) > 0.05), coef)
def test_ar2_fit_recovers(phi1, phi2, z0, z1):
    z = ar2_sequence(z0, z1, phi1, phi2)
    design = np.stack([z[1:5], z[0:4]], axis=1)
    if np.linalg.cond(design) > 1e4:
        return
    f1, f2 = ar2_fit_taps(z)
    assert abs(f1 - phi1) < 1e-9 and abs(f2 - phi2) < 1e-9
    assert np.allclose(ar2_extrapolate(z, f1, f2), z, atol=1e-9)


def test_ar2_fit_geometric():
    # phi2 = 0 with a free second tap: z_j = 0.8 z_{j-1} from j = 2 on
    z = ar2_sequence(1.0 + 0.5j, 0.3, 0.8, 0.0)
    f1, f2 = ar2_fit_taps(z)
    assert abs(f2) < 1e-9 and abs(f1 - 0.8) < 1e-9
    # a pure geometric sequence has collinear lags and no unique fit
    with pytest.raises(NumericalError):
        ar2_fit_taps(0.8 ** np.arange(6))


def test_ar2_fit_singular():
    with pytest.raises(NumericalError):
        ar2_fit_taps([1.0, 0, 0, 0, 0, 0])
    with pytest.raises(ParameterError):
        ar2_fit_taps([1.0, 2.0, 3.0])


def test_extrapolate_examples(rng):
    z = complex_normal(rng, 6)
    out = ar2_extrapolate(z, 0, 0)
    assert np.array_equal(out[:2], z[:2]) and np.allclose(out[2:], 0)


def test_extrapolation_error_is_propagated_residual(rng):
    z = complex_normal(rng, 6)
    f1, f2 = ar2_fit_taps(z)
    e = z - ar2_extrapolate(z, f1, f2)
    residual = z[2:] - (f1 * z[1:5] + f2 * z[0:4])
    # e_j = r_j + phi1 e_{j-1} + phi2 e_{j-2} with e_0 = e_1 = 0
    expect = np.zeros(6, dtype=complex)
    for j in range(2, 6):
        expect[j] = residual[j - 2] + f1 * expect[j - 1] + f2 * expect[j - 2]
    assert np.allclose(e, expect)


def test_ar2_fit_channel_exact():
    z = make_ar2_soundings(3, 12, 0.9 + 0.3j, -0.5)
    assert np.allclose(ar2_fit_soundings(z), z)
    assert np.allclose(ar2_fit_channel(z, 10).taps, taps_from_soundings(z, 10).taps)


def test_quantize_examples(rng):
    ch = random_channel(rng)
    q = quantize_taps(ch, 25)
    vals = ch.taps[ch.defined]
    got = q.taps[ch.defined]
    assert got.real.min() == pytest.approx(vals.real.min())
    i = np.argmin(vals.real)
    assert got[i].real == vals.real.min()
    for part in ("real", "imag"):
        v, g = getattr(vals, part), getattr(got, part)
        assert np.max(np.abs(v - g)) <= (v.max() - v.min()) / (2 * 24) + 1e-12
    with pytest.raises(ParameterError):
        quantize_taps(ch, 1)


def test_quantize_ties_go_low():
    ch = TapChannel(np.array([[0.0], [0.25], [1.0]], dtype=complex))
    assert np.allclose(quantize_taps(ch, 3).taps[:, 0].real, [0.0, 0.0, 1.0])
    ch = TapChannel(np.array([[0.0], [0.75], [1.0]], dtype=complex))
    assert np.allclose(quantize_taps(ch, 3).taps[:, 0].real, [0.0, 0.5, 1.0])


@given(st.integers(0, 10_000), st.integers(2, 120))
def test_quantize_idempotent(seed, q):
    ch = random_channel(np.random.default_rng(seed), n_s=8, J=4)
    once = quantize_taps(ch, q)
    twice = quantize_taps(once, q)
    assert np.allclose(once.taps, twice.taps, atol=1e-12)
    vals = once.taps[once.defined]
    assert len(np.unique(np.round(vals.real, 9))) <= q
