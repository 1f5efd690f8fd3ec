"""Imperfect channel knowledge: estimation error, mismatch, AR(2) fits, quantisation."""

from __future__ import annotations

import numpy as np

from .channel import TapChannel, complex_normal, taps_from_soundings
from .errors import NumericalError, ParameterError


def perturb_taps_nmse(
    channel: TapChannel, nmse: float, rng: np.random.Generator, per_symbol: bool = False
) -> TapChannel:
    """``h (1 + eps)`` with ``eps ~ CN(0, nmse)``.

    By default one ``eps`` is drawn per delay tap ``j`` and shared by every
    symbol time, i.e. one channel estimate per frame. ``per_symbol=True``
    draws an independent error for every coefficient ``h[k, j]``.
    """
    if nmse < 0:
        raise ParameterError("nmse must be non-negative")
    if nmse == 0:
        return TapChannel(channel.taps.copy())
    shape = channel.taps.shape if per_symbol else (1, channel.memory)
    eps = complex_normal(rng, shape, nmse)
    return TapChannel(channel.taps * (1 + eps))


def mismatch_rho(rho_real: float, delta: float) -> float:
    """Correlation the decoder assumes when its estimate is off by ``delta``."""
    rho = rho_real + delta
    if not (0.0 <= rho < 1.0):
        raise ParameterError(f"mismatched rho {rho} outside [0, 1)")
    return rho


def ar2_fit_taps(taps) -> tuple[complex, complex]:
    """Least-squares ``(phi1, phi2)`` for ``z_j = phi1 z_{j-1} + phi2 z_{j-2}`` over six taps."""
    z = np.asarray(taps, dtype=complex)
    if z.shape != (6,):
        raise ParameterError(f"expected 6 taps, got shape {z.shape}")
    design = np.stack([z[1:5], z[0:4]], axis=1)
    target = z[2:6]
    gram = design.conj().T @ design
    if np.linalg.cond(gram) > 1e12:
        raise NumericalError("AR(2) normal equations are singular")
    phi = np.linalg.solve(gram, design.conj().T @ target)
    return complex(phi[0]), complex(phi[1])


def ar2_extrapolate(taps, phi1, phi2) -> np.ndarray:
    """Keep the first two taps and regenerate the rest from the recursion."""
    z = np.asarray(taps, dtype=complex)
    out = np.empty_like(z)
    out[:2] = z[:2]
    for j in range(2, len(z)):
        out[j] = phi1 * out[j - 1] + phi2 * out[j - 2]
    return out


def ar2_fit_soundings(z) -> np.ndarray:
    """Apply the AR(2) fit and extrapolation to every sounding column."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    for k in range(z.shape[1]):
        out[:, k] = ar2_extrapolate(z[:, k], *ar2_fit_taps(z[:, k]))
    return out


def ar2_fit_channel(z, n_s: int) -> TapChannel:
    return taps_from_soundings(ar2_fit_soundings(z), n_s)


def _quantize(values: np.ndarray, q: int) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi == lo:
        return values.copy()
    step = (hi - lo) / (q - 1)
    pos = (values - lo) / step
    # exact halves go to the lower level
    level = np.ceil(pos - 0.5)
    return lo + np.clip(level, 0, q - 1) * step


def quantize_taps(channel: TapChannel, q: int) -> TapChannel:
    """Map real and imaginary parts to ``q`` evenly spaced levels.

    The grid spans the minimum and maximum of each component over all taps
    of the channel that act on a symbol.
    """
    if q < 2:
        raise ParameterError(f"need at least 2 quantisation levels, got {q}")
    mask = channel.defined
    taps = channel.taps.copy()
    vals = taps[mask]
    taps[mask] = _quantize(vals.real, q) + 1j * _quantize(vals.imag, q)
    return TapChannel(taps)
